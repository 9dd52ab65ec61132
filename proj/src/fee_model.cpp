#include "fee/fee_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace fee {

namespace {

constexpr double kPi = 3.141592653589793;
constexpr double kHalfPi = 1.5707963267948966;
constexpr double kEdge = 1e-3;       // keep-off from wedge interval ends [rad]
constexpr double kPoleMargin = 0.05; // keep beta+phi+rho+delta below pi - margin [rad]
constexpr double kGoldenTol = 1e-6;  // golden-section interval tolerance [rad]

double cot(double x) { return std::cos(x) / std::sin(x); }

// Objective for the wedge-angle search. Callers keep beta inside the
// admissible interval, where the denominator is positive and bounded away
// from zero, so no singularity handling is needed here.
double n_gamma_objective(double alpha, double beta, double phi, double rho, double delta) {
    const double t = cot(beta + phi);
    const double den = 2.0 * (std::cos(rho + delta) + std::sin(rho + delta) * t);
    return (cot(beta) - std::tan(alpha)) * (std::cos(alpha) + std::sin(alpha) * t) / den;
}

} // namespace

double bekker_pressure(double k_c, double k_phi, double n, double b, double d) {
    if (!(b > 0)) throw InvalidInput("bekker_pressure: contact dimension b must be > 0");
    if (d < 0) throw InvalidInput("bekker_pressure: negative depth");
    if (!(n > 0) || n > 3) throw InvalidInput("bekker_pressure: exponent n outside (0, 3]");
    if (d == 0) return 0.0;
    return (k_c / b + k_phi) * std::pow(d, n);
}

BearingFactors bearing_factors(double alpha, double beta, double phi,
                               double rho, double delta) {
    const double sb = std::sin(beta);
    if (std::abs(sb) < 1e-12)
        throw SingularGeometry("bearing_factors: cot(beta) singular at beta = " + std::to_string(beta));
    const double sbp = std::sin(beta + phi);
    if (std::abs(sbp) < 1e-12)
        throw SingularGeometry("bearing_factors: cot(beta+phi) singular at beta+phi = " +
                               std::to_string(beta + phi));
    const double sr = std::sin(rho);
    if (std::abs(sr) < 1e-12)
        throw SingularGeometry("bearing_factors: cot(rho) singular at rho = " + std::to_string(rho));

    const double cot_bp = std::cos(beta + phi) / sbp;
    const double D = std::cos(rho + delta) + std::sin(rho + delta) * cot_bp;
    if (std::abs(D) < 1e-9)
        throw SingularGeometry(
            "bearing_factors: denominator vanished (beta+phi+rho+delta near pi); angle sum = " +
            std::to_string(beta + phi + rho + delta));

    const double cot_b = std::cos(beta) / sb;
    BearingFactors f;
    f.N_gamma = (cot_b - std::tan(alpha)) * (std::cos(alpha) + std::sin(alpha) * cot_bp) / (2.0 * D);
    f.N_c = (1.0 + cot_b * cot_bp) / D;
    f.N_a = (1.0 - (std::cos(rho) / sr) * cot_bp) / D;
    f.N_q = (std::cos(alpha) + std::sin(alpha) * cot_bp) / D;
    return f;
}

BetaInterval beta_search_interval(double phi, double rho, double delta) {
    const double lo = kEdge;
    const double hi = std::min(kHalfPi - phi, kPi - (rho + delta) - phi - kPoleMargin) - kEdge;
    if (!(hi > lo)) {
        std::ostringstream os;
        os << "beta_search_interval: empty admissible wedge interval (phi=" << phi
           << ", rho=" << rho << ", delta=" << delta << ")";
        throw SingularGeometry(os.str());
    }
    return {lo, hi};
}

double n_gamma_beta_derivative(double alpha, double beta, double phi,
                               double rho, double delta) {
    const double u = cot(beta);
    const double up = -(1.0 + u * u);
    const double t = cot(beta + phi);
    const double tp = -(1.0 + t * t);
    const double ca = std::cos(alpha);
    const double sa = std::sin(alpha);
    const double num = (u - std::tan(alpha)) * (ca + sa * t);
    const double nump = up * (ca + sa * t) + (u - std::tan(alpha)) * sa * tp;
    const double den = 2.0 * (std::cos(rho + delta) + std::sin(rho + delta) * t);
    const double denp = 2.0 * std::sin(rho + delta) * tp;
    return (nump * den - num * denp) / (den * den);
}

double optimal_failure_angle(double alpha, double phi, double rho, double delta) {
    const auto [lo, hi] = beta_search_interval(phi, rho, delta);
    auto obj = [&](double b) { return n_gamma_objective(alpha, b, phi, rho, delta); };

    // Bracketing scan. 257 points is dense enough that the global bracket of
    // a smooth objective on a <= pi/2 interval cannot be missed.
    constexpr int kScan = 256;
    double best_v = std::numeric_limits<double>::infinity();
    double worst_v = -std::numeric_limits<double>::infinity();
    int best_i = 0;
    int finite_count = 0;
    for (int i = 0; i <= kScan; ++i) {
        const double b = lo + (hi - lo) * i / kScan;
        const double v = obj(b);
        if (!std::isfinite(v)) continue;
        ++finite_count;
        worst_v = std::max(worst_v, v);
        if (v < best_v) {
            best_v = v;
            best_i = i;
        }
    }
    if (finite_count == 0)
        throw SingularGeometry("optimal_failure_angle: objective not finite on the wedge interval");
    if (worst_v - best_v <= 1e-12 * (1.0 + std::abs(best_v)))
        throw SingularGeometry("optimal_failure_angle: flat objective, no minimum to bracket");

    double bl = (best_i == 0) ? lo : lo + (hi - lo) * (best_i - 1) / kScan;
    double bh = (best_i == kScan) ? hi : lo + (hi - lo) * (best_i + 1) / kScan;

    // Golden-section to kGoldenTol on the bracket.
    const double gr = 0.6180339887498949;
    double a = bl, b = bh;
    double x1 = b - gr * (b - a);
    double x2 = a + gr * (b - a);
    double f1 = obj(x1), f2 = obj(x2);
    while (b - a > kGoldenTol) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = obj(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = obj(x2);
        }
    }
    double bm = 0.5 * (a + b);
    double vm = obj(bm);

    // Interior minimum: polish the stationary point of N_gamma so that the
    // result is smooth in (alpha, phi, rho, delta). Golden section alone
    // leaves O(tol) staircase jitter that finite-difference consumers would
    // amplify.
    if (bm - lo > 2 * kGoldenTol && hi - bm > 2 * kGoldenTol) {
        double ra = std::max(lo, bm - 10 * kGoldenTol);
        double rb = std::min(hi, bm + 10 * kGoldenTol);
        double ga = n_gamma_beta_derivative(alpha, ra, phi, rho, delta);
        double gb = n_gamma_beta_derivative(alpha, rb, phi, rho, delta);
        if (std::isfinite(ga) && std::isfinite(gb) && ga < 0 && gb > 0) {
            double x = bm;
            for (int it = 0; it < 80; ++it) {
                const double g = n_gamma_beta_derivative(alpha, x, phi, rho, delta);
                if (g < 0)
                    ra = x;
                else
                    rb = x;
                // Newton on a central-difference slope of g, bisection fallback.
                const double h = 1e-7;
                const double gp = (n_gamma_beta_derivative(alpha, x + h, phi, rho, delta) -
                                   n_gamma_beta_derivative(alpha, x - h, phi, rho, delta)) /
                                  (2 * h);
                double xn = (std::isfinite(gp) && gp > 0) ? x - g / gp : 0.5 * (ra + rb);
                if (!(xn > ra && xn < rb)) xn = 0.5 * (ra + rb);
                if (std::abs(xn - x) < 1e-13) {
                    x = xn;
                    break;
                }
                x = xn;
            }
            const double vx = obj(x);
            if (std::isfinite(vx) && vx <= vm + 1e-15) {
                bm = x;
                vm = vx;
            }
        }
    }

    // Exact endpoints when they win (boundary minima are legitimate here).
    if (obj(lo) <= vm) {
        vm = obj(lo);
        bm = lo;
    }
    if (obj(hi) <= vm) {
        bm = hi;
    }
    return bm;
}

double wedge_force(const SoilParams& s, const ToolGeometry& t, const Engagement& e) {
    const BearingFactors f = bearing_factors(e.alpha, e.beta, s.phi, e.rho, s.delta);
    return e.d * e.d * t.w * s.gamma * kGravity * f.N_gamma +
           s.C * t.w * e.d * f.N_c +
           s.C_a * t.w * e.d * f.N_a +
           e.W_load * f.N_q;
}

BladeForces blade_forces(const SoilParams& s, const ToolGeometry& t, const Engagement& e) {
    BladeForces out;
    if (!(e.d > 0)) return out;
    const double P = bekker_pressure(s.k_c, s.k_phi, s.n, t.b, e.d);
    const double F = wedge_force(s, t, e);
    out.F_T = t.w * t.b * P + F * std::sin(s.delta) + s.C_a * t.w * e.L_t;
    out.F_N = F * std::cos(s.delta);
    out.F_R = std::sqrt(out.F_T * out.F_T + out.F_N * out.F_N);
    return out;
}

Engagement engagement_geometry(double tip_x, double tip_z, double Phi,
                               const PileProfile& pile, const ToolGeometry& t,
                               double payload_kg, DepthMode mode) {
    if (payload_kg < 0) throw InvalidInput("engagement_geometry: negative payload");
    Engagement e;
    e.alpha = std::atan(pile.slope(tip_x));
    double d = pile(tip_x) - tip_z;
    if (mode == DepthMode::SurfaceNormal) d *= std::cos(e.alpha);
    if (!(d > 0)) return e; // above the surface: zero engagement, zero forces
    e.d = d;
    e.rho = std::clamp(Phi + t.blade_offset, kEdge, kHalfPi - kEdge);
    e.W_load = payload_kg * kGravity;
    e.L_t = d / std::sin(e.rho);
    return e;
}

Engagement engagement_from_pose(double tip_x, double tip_z, double Phi,
                                const PileProfile& pile, const SoilParams& s,
                                const ToolGeometry& t, double payload_kg,
                                DepthMode mode) {
    Engagement e = engagement_geometry(tip_x, tip_z, Phi, pile, t, payload_kg,
                                       mode);
    if (e.d > 0) {
        e.beta = optimal_failure_angle(e.alpha, s.phi, e.rho, s.delta);
        e.L_f = e.d / std::sin(e.beta);
    }
    return e;
}

} // namespace fee
