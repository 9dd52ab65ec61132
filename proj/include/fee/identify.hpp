#pragma once

#include "fee/nls.hpp"
#include "fee/scenario.hpp"
#include "fee/sensitivity.hpp"
#include "fee/trace.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace fee {

// Per-sample observation plus soil-independent engagement geometry,
// precomputed once per trace. Wedge angles are not stored here; they depend
// on the candidate phi/delta and are recomputed inside the stage models.
struct TraceData {
    std::vector<double> t;
    std::vector<double> FT_obs, FN_obs;
    std::vector<double> d, L_t, rho, alpha; // engagement geometry
    std::vector<double> area;               // swept cross-section A_i [m^2]
    std::vector<std::size_t> engaged;       // indices with d > 0
    double peak_FT = 0.0, peak_FN = 0.0;    // max |observed| force
    ToolGeometry tool;
};

TraceData prepare_trace(const DigTrace& trace, const PileProfile& pile,
                        const ToolGeometry& tool);

// One stage of the pipeline: which parameters move, which are pinned by the
// reduced-order strategy, and the search box.
struct StageSpec {
    int stage = 0;                  // 1 | 2 | 3
    std::vector<Param> free_params; // ordered subset of the stage's set
    std::vector<std::pair<Param, double>> rom_fixed;
    ParamBox bounds;
};

// Stage 1 may free {C_a, delta, k_c, k_phi, n}, stage 2 {C, gamma, phi},
// stage 3 {k_c, k_phi, n}; parameters fixed by the strategy are removed.
std::array<StageSpec, 3> make_stage_specs(const RomStrategy& rom,
                                          const ParamBox& bounds);

struct FitResult {
    SoilParams theta_hat;
    double rmse_FT = 0.0; // [N], full model over all samples
    double rmse_FN = 0.0; // [N]
    int iterations = 0;
    std::vector<double> objective_history; // accepted, nonincreasing
    double wall_time_s = 0.0; // reported in manifests only
    int start_index = 0;
    bool converged = false;
    double projected_gradient = 0.0;
    std::string stop_reason;
};

// Each stage refines `start` in place logically: free parameters move, the
// rest pass through. Residuals run over engaged samples only; the reported
// rmse_* fields always use the full force model over the whole trace.
// Stage 1 fits the tangential-force decomposition with the wedge share
// reconstructed from the observed normal force; it throws NoInformation
// when no sample is engaged. Stage 2 fits the wedge force against
// F_N_obs / cos(delta), re-minimizing the wedge angle whenever phi moves
// (memoized at 1e-4 rad nodes with linear interpolation). Stage 3 refits
// the pressure-sinkage parameters against the tangential force with the
// wedge frozen at the stage-2 estimate and never worsens rmse_FT.
FitResult stage1_fit(const TraceData& td, const StageSpec& spec,
                     const SoilParams& start);
FitResult stage2_fit(const TraceData& td, const StageSpec& spec,
                     const SoilParams& start);
FitResult stage3_fit(const TraceData& td, const StageSpec& spec,
                     const SoilParams& start);

// Full-model force prediction (exact wedge minimization per sample) and the
// corresponding RMSE metrics over all samples.
void predict_trace(const TraceData& td, const SoilParams& theta,
                   std::vector<double>& FT, std::vector<double>& FN);
double trace_rmse_FT(const TraceData& td, const SoilParams& theta);
double trace_rmse_FN(const TraceData& td, const SoilParams& theta);

struct PipelineResult {
    FitResult best;                   // lowest rmse_FT^2 + rmse_FN^2
    std::vector<FitResult> per_start; // in start order
    bool converged = false;           // any start fully converged
};

// Runs stages 1 -> 2 -> 3 for each start. Start 0 begins at init0 when
// given, otherwise at the box midpoint; further starts draw uniform in the
// box from the master seed. Starts are independent and may run in parallel;
// selection is serial and deterministic (ties pick the lowest index).
PipelineResult run_pipeline(const DigTrace& trace, const PileProfile& pile,
                            const ToolGeometry& tool, const RomStrategy& rom,
                            const ParamBox& bounds, int starts,
                            std::uint64_t seed,
                            ExecPolicy policy = ExecPolicy::Parallel,
                            const SoilParams* init0 = nullptr);

} // namespace fee
