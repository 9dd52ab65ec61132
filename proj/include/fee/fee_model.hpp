#pragma once

#include "fee/pile.hpp"
#include "fee/types.hpp"

namespace fee {

// Bekker pressure-sinkage law P = (k_c/b + k_phi) * d^n.
// Pre: b > 0, d >= 0, n in (0, 3].
double bekker_pressure(double k_c, double k_phi, double n, double b, double d);

// Passive-wedge bearing factors for a blade of rake angle rho cutting a
// surface of slope alpha, with wedge angle beta, internal friction phi and
// external friction delta. All four share the denominator
//   D = cos(rho+delta) + sin(rho+delta)*cot(beta+phi)
//     = sin(beta+phi+rho+delta)/sin(beta+phi),
// which vanishes when the four angles sum to pi; that and the cot()
// singularities raise SingularGeometry.
BearingFactors bearing_factors(double alpha, double beta, double phi,
                               double rho, double delta);

// Wedge angle search interval for the N_gamma minimization. The upper end is
// pi/2 - phi shortened so that beta+phi+rho+delta stays at least a fixed
// margin away from pi (where the common denominator vanishes and N_gamma
// dives to -inf). Throws SingularGeometry when the interval is empty.
struct BetaInterval {
    double lo = 0;
    double hi = 0;
};
BetaInterval beta_search_interval(double phi, double rho, double delta);

// Failure wedge angle: argmin over beta of N_gamma. Bracketing scan plus
// golden-section (1e-6 rad) with a safeguarded Newton polish on the analytic
// derivative when the minimum is interior, so beta* is a smooth function of
// the remaining angles. Boundary minima return the interval end exactly.
double optimal_failure_angle(double alpha, double phi, double rho, double delta);

// Analytic d(N_gamma)/d(beta); exposed for tests.
double n_gamma_beta_derivative(double alpha, double beta, double phi,
                               double rho, double delta);

// Wedge resistance force (per the fundamental earthmoving equation):
//   F = d^2 w gamma g N_gamma + C w d N_c + C_a w d N_a + W_load N_q.
double wedge_force(const SoilParams& s, const ToolGeometry& t, const Engagement& e);

// Blade force components:
//   F_T = w b P + F sin(delta) + C_a w L_t,   F_N = F cos(delta),
//   F_R = sqrt(F_T^2 + F_N^2).
// d == 0 short-circuits to zero forces.
BladeForces blade_forces(const SoilParams& s, const ToolGeometry& t, const Engagement& e);

enum class DepthMode {
    Vertical,     // d = max(0, p(x) - z)
    SurfaceNormal // vertical depth projected onto the surface normal
};

// Soil-independent engagement geometry for a tip pose on a pile: depth,
// engaged tool length, rake angle rho = Phi + blade_offset (clamped inside
// (0, pi/2)), local slope, and payload surcharge W = payload * g. The wedge
// angle beta and L_f are left at zero. Out-of-soil poses return a zero-depth
// engagement.
Engagement engagement_geometry(double tip_x, double tip_z, double Phi,
                               const PileProfile& pile, const ToolGeometry& t,
                               double payload_kg,
                               DepthMode mode = DepthMode::Vertical);

// Full engagement: the geometry above plus the minimized wedge angle for
// the given soil and L_f = d / sin(beta).
Engagement engagement_from_pose(double tip_x, double tip_z, double Phi,
                                const PileProfile& pile, const SoilParams& s,
                                const ToolGeometry& t, double payload_kg,
                                DepthMode mode = DepthMode::Vertical);

} // namespace fee
