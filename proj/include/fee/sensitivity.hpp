#pragma once

#include "fee/scenario.hpp"
#include "fee/types.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace fee {

enum class ExecPolicy { Serial, Parallel };

struct SobolOptions {
    int base_n = 1 << 13;           // sample rows per matrix; power of two
    std::uint64_t seed = 0;
    int bootstrap_resamples = 200;  // confidence half-width resamples
    ExecPolicy policy = ExecPolicy::Parallel;
};

// Saltelli design over the unit cube: matrices A and B, with the pick-freeze
// matrix AB_i materialized on demand (row of A with column i from B).
struct SaltelliDesign {
    int dim = 0;
    int base_n = 0;
    std::vector<double> A, B; // row-major base_n x dim

    double a(int row, int col) const { return A[std::size_t(row) * dim + col]; }
    double b(int row, int col) const { return B[std::size_t(row) * dim + col]; }
    double ab(int i, int row, int col) const {
        return col == i ? b(row, col) : a(row, col);
    }
    long long n_evals() const { return static_cast<long long>(dim + 2) * base_n; }
};

// pre: 1 <= dim <= 10, base_n >= 64 and a power of two.
SaltelliDesign saltelli_sample(int dim, int base_n, std::uint64_t seed);

// Total-order Sobol indices (Jansen estimator) with percentile-bootstrap
// confidence half-widths. Deterministic per (dim, f, options); the parallel
// policy writes each evaluation into its own slot and reduces serially, so
// results are bit-identical for any thread count.
struct SobolIndices {
    int dim = 0;
    int base_n = 0;
    long long n_evals = 0;
    double mean = 0.0;
    double variance = 0.0;
    std::vector<double> total;   // S_T per input
    std::vector<double> ci_half; // 95% bootstrap half-width per input
    std::vector<int> ranking;    // input indices, descending S_T
    double wall_time_s = 0.0;    // measured; excluded from serialized results
};

using CubeFn = std::function<double(const double*)>;

// Throws ZeroVariance when the response variance vanishes and InvalidInput
// when an evaluation returns a non-finite value.
SobolIndices sobol_total_order(int dim, const CubeFn& f,
                               const SobolOptions& opt);

// Maps a unit-cube point to soil parameters via the box (degenerate
// dimensions pin to their lower bound).
SoilParams params_from_unit(const ParamBox& box, const double* u);

// Fixed 20-pose engagement context along the first reference dig path of
// cfg's pile, with payload surcharge accumulated under cfg's nominal soil
// density. Sensitivity evaluations re-minimize the wedge angle per draw and
// ignore the beta stored here.
std::vector<Engagement> default_eval_context(const ScenarioConfig& cfg);

struct SoilSensitivity {
    SobolIndices indices;                   // entries in Param order
    std::array<Param, kNumParams> ranking{}; // descending S_T
    std::vector<Param> fixed_params;        // degenerate box dimensions
};

// Total-order sensitivity of the mean resultant force F_R over the context.
SoilSensitivity rank_for_fr(const ParamBox& box,
                            const std::vector<Engagement>& context,
                            const ToolGeometry& tool, const SobolOptions& opt);

// Reduced-order strategy: low-influence parameters frozen at given values.
struct RomStrategy {
    std::vector<Param> fixed;                // subset of the designated five
    std::array<double, kNumParams> values{}; // entries for fixed params
    std::string name;                        // "full" or "fix{...}"
};

// The five parameters eligible for fixing.
extern const std::array<Param, 5> kLowInfluenceParams;

// Builds a strategy fixing fix_set at the box midpoint (or at nominal's
// values). Fixing anything outside the designated five, or anything inside
// the top-3 of the supplied ranking, throws ContractViolation. Fixed values
// outside the box throw InvalidInput. An empty fix_set is the full model.
RomStrategy make_rom(const std::array<Param, kNumParams>& ranking,
                     const std::vector<Param>& fix_set, const ParamBox& box);
RomStrategy make_rom(const std::array<Param, kNumParams>& ranking,
                     const std::vector<Param>& fix_set, const ParamBox& box,
                     const SoilParams& nominal);

// The 28 candidate fixing strategies: every non-empty subset of the five
// low-influence parameters except three designated combinations. Ordered by
// subset size, then by parameter order; names are unique.
std::vector<RomStrategy> enumerate_rom_strategies(
    const std::array<Param, kNumParams>& ranking, const ParamBox& box);

} // namespace fee
