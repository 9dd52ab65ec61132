#pragma once

// Test-only reference implementations, kept deliberately independent of the
// library code paths: factor formulas are evaluated through the sine-form
// identity instead of the cos+sin*cot form, and minimizations are dense grid
// scans. Tests freeze these as ground truth.

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace oracle {

inline constexpr double kPi = 3.141592653589793;
inline constexpr double kHalfPi = 1.5707963267948966;

// Common denominator via the angle-sum identity:
//   cos(rho+delta) + sin(rho+delta)*cot(beta+phi) = sin(beta+phi+rho+delta)/sin(beta+phi)
inline double denom(double beta, double phi, double rho, double delta) {
    return std::sin(beta + phi + rho + delta) / std::sin(beta + phi);
}

inline double n_gamma(double alpha, double beta, double phi, double rho, double delta) {
    const double cb = std::cos(beta) / std::sin(beta);
    const double cbp = std::cos(beta + phi) / std::sin(beta + phi);
    return (cb - std::tan(alpha)) * (std::cos(alpha) + std::sin(alpha) * cbp) /
           (2.0 * denom(beta, phi, rho, delta));
}

inline double n_c(double beta, double phi, double rho, double delta) {
    const double cb = std::cos(beta) / std::sin(beta);
    const double cbp = std::cos(beta + phi) / std::sin(beta + phi);
    return (1.0 + cb * cbp) / denom(beta, phi, rho, delta);
}

inline double n_a(double beta, double phi, double rho, double delta) {
    const double cr = std::cos(rho) / std::sin(rho);
    const double cbp = std::cos(beta + phi) / std::sin(beta + phi);
    return (1.0 - cr * cbp) / denom(beta, phi, rho, delta);
}

inline double n_q(double alpha, double beta, double phi, double rho, double delta) {
    const double cbp = std::cos(beta + phi) / std::sin(beta + phi);
    return (std::cos(alpha) + std::sin(alpha) * cbp) / denom(beta, phi, rho, delta);
}

// Admissible wedge interval, restated from the library contract.
inline bool beta_interval(double phi, double rho, double delta, double& lo, double& hi) {
    lo = 1e-3;
    hi = std::min(kHalfPi - phi, kPi - (rho + delta) - phi - 0.05) - 1e-3;
    return hi > lo;
}

// Dense grid argmin of N_gamma over the admissible interval.
inline double beta_grid_argmin(double alpha, double phi, double rho, double delta,
                               double step) {
    double lo, hi;
    if (!beta_interval(phi, rho, delta, lo, hi)) return std::numeric_limits<double>::quiet_NaN();
    const int n = static_cast<int>((hi - lo) / step) + 1;
    double best = std::numeric_limits<double>::infinity();
    double arg = lo;
    for (int i = 0; i <= n; ++i) {
        const double b = std::min(lo + i * step, hi);
        const double v = n_gamma(alpha, b, phi, rho, delta);
        if (std::isfinite(v) && v < best) {
            best = v;
            arg = b;
        }
        if (b >= hi) break;
    }
    return arg;
}

inline double beta_grid_min_value(double alpha, double phi, double rho, double delta,
                                  double step) {
    const double b = beta_grid_argmin(alpha, phi, rho, delta, step);
    return n_gamma(alpha, b, phi, rho, delta);
}

// Composite trapezoid rule on a callable.
inline double trapezoid(const std::function<double(double)>& f, double a, double b, int n) {
    double s = 0.5 * (f(a) + f(b));
    for (int i = 1; i < n; ++i) s += f(a + (b - a) * i / n);
    return s * (b - a) / n;
}

// Ishigami total-order indices (a = 7, b = 0.1), closed form.
struct IshigamiTotals {
    double st1, st2, st3;
};
inline IshigamiTotals ishigami_totals() {
    const double a = 7.0, b = 0.1;
    const double p4 = kPi * kPi * kPi * kPi;
    const double p8 = p4 * p4;
    const double v1 = 0.5 * (1.0 + b * p4 / 5.0) * (1.0 + b * p4 / 5.0);
    const double v2 = a * a / 8.0;
    const double v13 = b * b * p8 * 8.0 / 225.0;
    const double v = v1 + v2 + v13;
    return {(v1 + v13) / v, v2 / v, v13 / v};
}

} // namespace oracle
