#pragma once

#include "fee/pile.hpp"
#include "fee/types.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace fee {

// Bucket-tip state: payload mass, tangential speed, angular velocity, tilt,
// and tip position. Ordered as the optimization state vector.
struct BucketState {
    double m_p = 0;     // collected payload [kg]
    double v_b = 0;     // tip speed along the bucket tangent [m/s]
    double omega_b = 0; // bucket angular velocity [rad/s]
    double Phi = 0;     // bucket tilt [rad]
    double x_b = 0;     // tip position [m]
    double z_b = 0;

    std::array<double, 6> to_array() const;
    static BucketState from_array(const std::array<double, 6>& a);
};

struct ControlInput {
    double u_l = 0; // linear acceleration [m/s^2]
    double u_r = 0; // angular acceleration [rad/s^2]
};

// Per-state and per-input bounds. Defaults hold the planning scenario's
// published limits: v_b in [0, 1] m/s, omega_b in [-1, 1] rad/s, Phi in
// [0, 0.69] rad, |u| <= 1; mass and position limits are generous.
struct StateBox {
    std::array<double, 6> lo{};
    std::array<double, 6> hi{};
    static StateBox defaults();
};
struct InputBox {
    std::array<double, 2> lo{};
    std::array<double, 2> hi{};
    static InputBox defaults();
};

struct OcpConfig {
    int N = 50;      // steps
    double dT = 0.1; // [s]
    StateBox state_box = StateBox::defaults();
    InputBox input_box = InputBox::defaults();
    BucketState x0;
    double m_min = 150.0;       // terminal payload requirement [kg]
    double lambda_udot = 1e-4;  // input-rate penalty weight
    PileProfile pile = PileProfile::linear(0.7853981633974483);
    SoilParams soil;
    ToolGeometry tool; // carries the arm (r, Theta) and bucket weight F_B
    double P_ref = 0;  // power normalization [W]; <= 0 derives it from the guess

    // N >= 2, dT > 0, m_min >= 0, x0 inside the state box, boxes ordered.
    void validate() const;
};

// Continuous-time rates [m_p' v_b' omega_b' Phi' x_b' z_b']:
//   Phi' = omega_b, omega_b' = u_r, v_b' = u_l,
//   x_b' = (v_b + r omega_b cos Theta) cos Phi - r omega_b sin Theta sin Phi,
//   z_b' = (v_b + r omega_b cos Theta) sin Phi + r omega_b sin Theta cos Phi,
//   m_p' = gamma w max(0, x_b' (p(x_b) - z_b))  (no soil is shed on retreat).
std::array<double, 6> dynamics_rhs(const BucketState& x, const ControlInput& u,
                                   const OcpConfig& cfg);

// Analytic Jacobians of dynamics_rhs; the mass-rate row uses the accreting
// branch whenever x_b' (p - z) >= 0 so the on-surface start still sees the
// pull into the pile.
void dynamics_jacobians(const BucketState& x, const ControlInput& u,
                        const OcpConfig& cfg, Eigen::Matrix<double, 6, 6>& A,
                        Eigen::Matrix<double, 6, 2>& B);

// Classical fourth-order Runge-Kutta step with the input held constant.
BucketState rk4_step(const BucketState& x, const ControlInput& u, double dT,
                     const OcpConfig& cfg);

// Chain-rule Jacobians of rk4_step with respect to the state and the input.
void rk4_jacobians(const BucketState& x, const ControlInput& u, double dT,
                   const OcpConfig& cfg, Eigen::Matrix<double, 6, 6>& Jx,
                   Eigen::Matrix<double, 6, 2>& Ju);

// Instantaneous power demand
//   P_r = (F_T + F_B sin Phi)(v_b + r omega_b cos Theta)
//       + (F_N + F_B cos Phi)(r omega_b sin Theta),
// with the digging forces evaluated at the tip pose and W_load = m_p g.
double power_demand(const BucketState& x, const OcpConfig& cfg);

struct PlanGuess {
    std::vector<BucketState> states; // N+1
    std::vector<ControlInput> inputs; // N
};

// Deterministic default: states ramp linearly from x0 to
// [m_min, v_b0, 0, Phi0, x_t, p(x_t)] with x_t = x0.x_b + v_b0 N dT;
// inputs zero.
PlanGuess default_guess(const OcpConfig& cfg);

// Full-horizon transcription. Decision vector z = [x_0..x_N, u_0..u_{N-1}]
// (6(N+1) + 2N entries). Equalities: 6N scaled RK4 defects, 6 initial rows,
// and one terminal surface row z_b(t_f) - p(x_b(t_f)) in meters. The
// terminal payload requirement m_p(t_f) >= m_min and all box constraints
// are variable bounds.
struct Nlp {
    OcpConfig cfg;
    int n_vars = 0;
    int n_eq = 0;
    std::vector<double> lo, hi;     // variable bounds
    std::vector<double> z_init;     // transcribed guess, projected into bounds
    std::array<double, 6> state_scale{}; // defect row scaling
    double P_ref = 1;

    int x_offset(int i) const { return 6 * i; }
    int u_offset(int k) const { return 6 * (cfg.N + 1) + 2 * k; }

    // Wedge angles memoized at quantized rake-angle nodes and interpolated
    // with a C1 spline so cost evaluations and their finite differences see
    // one consistent, smooth, cheap surrogate. Filled lazily.
    mutable std::unordered_map<std::uint64_t, double> beta_nodes;

    std::vector<double> pack(const PlanGuess& g) const;
    void unpack(const std::vector<double>& z, std::vector<BucketState>& xs,
                std::vector<ControlInput>& us) const;

    // Cost written as a residual sum of squares: N normalized power terms
    // (states 1..N) and 2(N-1) weighted input-rate terms. The power terms
    // use a differentiable surrogate of power_demand (memoized wedge angles
    // plus a smooth fade-in of the soil reaction over the first few
    // millimetres of depth, where the exact model steps discontinuously when
    // payload is carried); reported solution power and energy stay exact.
    double eval_cost(const std::vector<double>& z) const;
    void eval_cost_residuals(const std::vector<double>& z, Eigen::VectorXd& r,
                             Eigen::MatrixXd* Jr) const;

    void eval_constraints(const std::vector<double>& z,
                          Eigen::VectorXd& c) const;
    void eval_constraint_jacobian(const std::vector<double>& z,
                                  Eigen::MatrixXd& J) const;

    // Structural nonzeros of the constraint Jacobian, row-major sorted.
    std::vector<std::pair<int, int>> sparsity() const;
};

Nlp build_nlp(const OcpConfig& cfg);
Nlp build_nlp(const OcpConfig& cfg, const PlanGuess& guess);

struct SolveOptions {
    double feas_tol = 1e-6; // max scaled equality violation
    double kkt_tol = 1e-6;  // max scaled projected Lagrangian gradient
    int max_outer = 50;
    int max_inner = 100;
    double mu0 = 10;       // initial penalty
    double mu_max = 1e12;
    bool verbose = false;
};

struct PlanSolution {
    std::vector<BucketState> states;
    std::vector<ControlInput> inputs;
    std::vector<double> power; // at every state, [W]
    double energy = 0;         // dT * sum of power over states 1..N [J]
    double energy_per_kg = 0;  // energy / m_p(t_f); 0 when no payload
    double cost = 0;           // final objective value
    double P_ref = 1;
    double kkt_residual = 0;
    double feasibility = 0;
    int iterations = 0;        // accepted inner steps
    double solve_time_s = 0;   // wall clock; not part of serialized results
    bool converged = false;
    std::string stop_reason;
};

// Augmented-Lagrangian solve with a projected-Newton inner loop; monotone
// merit acceptance, deterministic, single-threaded. Non-convergence returns
// a diagnosable solution instead of throwing.
PlanSolution solve_ocp(const OcpConfig& cfg);
PlanSolution solve_ocp(const OcpConfig& cfg, const PlanGuess& guess,
                       const SolveOptions& opt = {});

} // namespace fee
