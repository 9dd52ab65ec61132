#include "fee/sensitivity.hpp"

#include "fee/errors.hpp"
#include "fee/fee_model.hpp"
#include "fee/paths.hpp"
#include "fee/rng.hpp"
#include "fee/sobol.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <random>
#include <set>

namespace fee {

namespace {

bool is_pow2(int v) { return v > 0 && (v & (v - 1)) == 0; }

double percentile(std::vector<double>& sorted_vals, double p) {
    const std::size_t n = sorted_vals.size();
    double rank = p * static_cast<double>(n - 1);
    std::size_t lo = static_cast<std::size_t>(rank);
    std::size_t hi = std::min(lo + 1, n - 1);
    double frac = rank - static_cast<double>(lo);
    return sorted_vals[lo] + frac * (sorted_vals[hi] - sorted_vals[lo]);
}

} // namespace

SaltelliDesign saltelli_sample(int dim, int base_n, std::uint64_t seed) {
    if (dim < 1 || 2 * dim > SobolSequence::kMaxDim)
        throw InvalidInput("saltelli_sample supports 1..10 inputs, got " +
                           std::to_string(dim));
    if (base_n < 64 || !is_pow2(base_n))
        throw InvalidInput("base_n must be a power of two >= 64, got " +
                           std::to_string(base_n));

    // One 2*dim-dimensional scrambled stream supplies A (first half of each
    // point) and B (second half); the scramble also removes the zero point.
    std::uint64_t st = seed;
    std::uint64_t shift_seed = splitmix64(st) | 1ULL;
    SobolSequence seq(2 * dim, shift_seed);

    SaltelliDesign d;
    d.dim = dim;
    d.base_n = base_n;
    d.A.resize(std::size_t(base_n) * dim);
    d.B.resize(std::size_t(base_n) * dim);
    std::vector<double> point(std::size_t(2 * dim));
    for (int j = 0; j < base_n; ++j) {
        seq.next(point.data());
        for (int c = 0; c < dim; ++c) {
            d.A[std::size_t(j) * dim + c] = point[std::size_t(c)];
            d.B[std::size_t(j) * dim + c] = point[std::size_t(dim + c)];
        }
    }
    return d;
}

SobolIndices sobol_total_order(int dim, const CubeFn& f,
                               const SobolOptions& opt) {
    auto t0 = std::chrono::steady_clock::now();
    SaltelliDesign design = saltelli_sample(dim, opt.base_n, opt.seed);
    const int n = design.base_n;

    // Every evaluation has its own output slot; index r covers block 0 (A),
    // block 1 (B), then block 2+i (AB_i). The later reduction is serial, so
    // the result is independent of evaluation order and thread count.
    const long long total_evals = design.n_evals();
    std::vector<double> evals(static_cast<std::size_t>(total_evals));
    std::exception_ptr first_error = nullptr;

    auto eval_row = [&](long long r) {
        const int block = static_cast<int>(r / n);
        const int row = static_cast<int>(r % n);
        double u[SobolSequence::kMaxDim];
        for (int c = 0; c < dim; ++c) {
            if (block == 0)
                u[c] = design.a(row, c);
            else if (block == 1)
                u[c] = design.b(row, c);
            else
                u[c] = design.ab(block - 2, row, c);
        }
        evals[static_cast<std::size_t>(r)] = f(u);
    };

    if (opt.policy == ExecPolicy::Parallel) {
#pragma omp parallel for schedule(static)
        for (long long r = 0; r < total_evals; ++r) {
            try {
                eval_row(r);
            } catch (...) {
#pragma omp critical(fee_sobol_err)
                if (!first_error)
                    first_error = std::current_exception();
            }
        }
    } else {
        for (long long r = 0; r < total_evals; ++r)
            eval_row(r);
    }
    if (first_error)
        std::rethrow_exception(first_error);

    for (long long r = 0; r < total_evals; ++r)
        if (!std::isfinite(evals[static_cast<std::size_t>(r)]))
            throw InvalidInput("model evaluation " + std::to_string(r) +
                               " returned a non-finite value");

    const double* fA = evals.data();
    const double* fB = evals.data() + n;
    auto fAB = [&](int i) { return evals.data() + std::size_t(2 + i) * n; };

    double mean = 0.0;
    for (int j = 0; j < n; ++j)
        mean += fA[j] + fB[j];
    mean /= 2.0 * n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) {
        double da = fA[j] - mean;
        double db = fB[j] - mean;
        var += da * da + db * db;
    }
    var /= 2.0 * n - 1.0;

    if (var <= 1e-18 * std::max(1.0, mean * mean))
        throw ZeroVariance("response variance is zero; total-order indices "
                           "are undefined");

    SobolIndices out;
    out.dim = dim;
    out.base_n = n;
    out.n_evals = total_evals;
    out.mean = mean;
    out.variance = var;
    out.total.resize(static_cast<std::size_t>(dim));
    out.ci_half.resize(static_cast<std::size_t>(dim));

    // Jansen estimator: S_T,i = E[(f(A) - f(AB_i))^2] / (2 V)
    for (int i = 0; i < dim; ++i) {
        const double* g = fAB(i);
        double acc = 0.0;
        for (int j = 0; j < n; ++j) {
            double diff = fA[j] - g[j];
            acc += diff * diff;
        }
        out.total[static_cast<std::size_t>(i)] = acc / (2.0 * n * var);
    }

    // Percentile bootstrap over design rows; serial and seed-derived.
    if (opt.bootstrap_resamples > 0) {
        std::mt19937_64 rng(derive_seed(opt.seed, 0xB007ULL));
        std::uniform_int_distribution<int> pick(0, n - 1);
        std::vector<int> idx(static_cast<std::size_t>(n));
        std::vector<std::vector<double>> st_samples(
            static_cast<std::size_t>(dim),
            std::vector<double>(static_cast<std::size_t>(opt.bootstrap_resamples)));
        for (int r = 0; r < opt.bootstrap_resamples; ++r) {
            for (int j = 0; j < n; ++j)
                idx[static_cast<std::size_t>(j)] = pick(rng);
            double m = 0.0;
            for (int j : idx)
                m += fA[j] + fB[j];
            m /= 2.0 * n;
            double v = 0.0;
            for (int j : idx) {
                double da = fA[j] - m;
                double db = fB[j] - m;
                v += da * da + db * db;
            }
            v /= 2.0 * n - 1.0;
            if (v <= 0.0)
                v = var; // degenerate resample; fall back to the full-sample V
            for (int i = 0; i < dim; ++i) {
                const double* g = fAB(i);
                double acc = 0.0;
                for (int j : idx) {
                    double diff = fA[j] - g[j];
                    acc += diff * diff;
                }
                st_samples[static_cast<std::size_t>(i)]
                          [static_cast<std::size_t>(r)] =
                    acc / (2.0 * n * v);
            }
        }
        for (int i = 0; i < dim; ++i) {
            auto& s = st_samples[static_cast<std::size_t>(i)];
            std::sort(s.begin(), s.end());
            out.ci_half[static_cast<std::size_t>(i)] =
                0.5 * (percentile(s, 0.975) - percentile(s, 0.025));
        }
    }

    out.ranking.resize(static_cast<std::size_t>(dim));
    std::iota(out.ranking.begin(), out.ranking.end(), 0);
    std::stable_sort(out.ranking.begin(), out.ranking.end(),
                     [&](int a, int b) {
                         return out.total[static_cast<std::size_t>(a)] >
                                out.total[static_cast<std::size_t>(b)];
                     });

    out.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    return out;
}

SoilParams params_from_unit(const ParamBox& box, const double* u) {
    std::array<double, kNumParams> th{};
    for (int i = 0; i < kNumParams; ++i)
        th[static_cast<std::size_t>(i)] =
            box.lo[static_cast<std::size_t>(i)] +
            u[i] * (box.hi[static_cast<std::size_t>(i)] -
                    box.lo[static_cast<std::size_t>(i)]);
    return SoilParams::from_array(th);
}

std::vector<Engagement> default_eval_context(const ScenarioConfig& cfg) {
    PileProfile pile = cfg.pile();
    auto paths = reference_paths(pile);
    // 22 samples, trimmed of the zero-depth entry and exit poses
    auto poses = sample_poses(paths[0], 22, 0.5);
    auto payload = payload_along(poses, pile, cfg.soil.gamma, cfg.tool.w);

    std::vector<Engagement> ctx;
    ctx.reserve(20);
    for (std::size_t i = 1; i + 1 < poses.size(); ++i)
        ctx.push_back(engagement_from_pose(poses[i].x, poses[i].z,
                                           poses[i].Phi, pile, cfg.soil,
                                           cfg.tool, payload[i]));
    return ctx;
}

SoilSensitivity rank_for_fr(const ParamBox& box,
                            const std::vector<Engagement>& context,
                            const ToolGeometry& tool,
                            const SobolOptions& opt) {
    if (context.empty())
        throw InvalidInput("rank_for_fr needs a nonempty engagement context");
    box.validate();

    CubeFn f = [&box, &context, &tool](const double* u) {
        SoilParams s = params_from_unit(box, u);
        double acc = 0.0;
        for (const Engagement& base : context) {
            Engagement e = base;
            e.beta = optimal_failure_angle(e.alpha, s.phi, e.rho, s.delta);
            e.L_f = e.d / std::sin(e.beta);
            acc += blade_forces(s, tool, e).F_R;
        }
        return acc / static_cast<double>(context.size());
    };

    SoilSensitivity out;
    out.indices = sobol_total_order(kNumParams, f, opt);
    for (int i = 0; i < kNumParams; ++i)
        out.ranking[static_cast<std::size_t>(i)] =
            static_cast<Param>(out.indices.ranking[static_cast<std::size_t>(i)]);
    for (int i = 0; i < kNumParams; ++i)
        if (box.lo[static_cast<std::size_t>(i)] ==
            box.hi[static_cast<std::size_t>(i)])
            out.fixed_params.push_back(static_cast<Param>(i));
    return out;
}

const std::array<Param, 5> kLowInfluenceParams = {
    Param::gamma, Param::C, Param::C_a, Param::phi, Param::delta};

namespace {

// The source material reports 28 strategies out of the 31 non-empty subsets
// without naming the omitted three; these are the designated exclusions.
const std::vector<std::vector<Param>> kExcludedFixSets = {
    {Param::gamma, Param::C, Param::delta},
    {Param::gamma, Param::C, Param::phi, Param::delta},
    {Param::gamma, Param::C, Param::C_a, Param::delta},
};

std::string rom_name(const std::vector<Param>& fixed) {
    if (fixed.empty())
        return "full";
    std::string name = "fix{";
    for (std::size_t i = 0; i < fixed.size(); ++i) {
        if (i)
            name += ',';
        name += param_name(fixed[i]);
    }
    name += '}';
    return name;
}

std::vector<Param> sorted_by_param_order(std::vector<Param> set) {
    std::sort(set.begin(), set.end(), [](Param a, Param b) {
        return static_cast<int>(a) < static_cast<int>(b);
    });
    return set;
}

RomStrategy make_rom_impl(const std::array<Param, kNumParams>& ranking,
                          const std::vector<Param>& fix_set,
                          const ParamBox& box,
                          const std::array<double, kNumParams>& values) {
    std::set<Param> seen;
    for (Param p : fix_set) {
        if (std::find(kLowInfluenceParams.begin(), kLowInfluenceParams.end(),
                      p) == kLowInfluenceParams.end())
            throw ContractViolation(std::string("parameter ") + param_name(p) +
                                    " is not eligible for fixing");
        for (int r = 0; r < 3; ++r)
            if (ranking[static_cast<std::size_t>(r)] == p)
                throw ContractViolation(std::string("parameter ") +
                                        param_name(p) +
                                        " is in the sensitivity top-3 and "
                                        "must stay free");
        if (!seen.insert(p).second)
            throw InvalidInput(std::string("parameter ") + param_name(p) +
                               " listed twice in the fix set");
    }

    RomStrategy rom;
    rom.fixed = sorted_by_param_order(fix_set);
    rom.values = values;
    for (Param p : rom.fixed) {
        double v = values[static_cast<std::size_t>(index(p))];
        if (v < box.lo[static_cast<std::size_t>(index(p))] ||
            v > box.hi[static_cast<std::size_t>(index(p))])
            throw InvalidInput(std::string("fixed value for ") +
                               param_name(p) + " lies outside the box");
    }
    rom.name = rom_name(rom.fixed);
    return rom;
}

} // namespace

RomStrategy make_rom(const std::array<Param, kNumParams>& ranking,
                     const std::vector<Param>& fix_set, const ParamBox& box) {
    return make_rom_impl(ranking, fix_set, box, box.midpoint());
}

RomStrategy make_rom(const std::array<Param, kNumParams>& ranking,
                     const std::vector<Param>& fix_set, const ParamBox& box,
                     const SoilParams& nominal) {
    return make_rom_impl(ranking, fix_set, box, nominal.to_array());
}

std::vector<RomStrategy> enumerate_rom_strategies(
    const std::array<Param, kNumParams>& ranking, const ParamBox& box) {
    std::vector<std::vector<Param>> subsets;
    for (unsigned mask = 1; mask < 32; ++mask) {
        std::vector<Param> set;
        for (int b = 0; b < 5; ++b)
            if (mask & (1u << b))
                set.push_back(kLowInfluenceParams[static_cast<std::size_t>(b)]);
        set = sorted_by_param_order(set);
        if (std::find(kExcludedFixSets.begin(), kExcludedFixSets.end(), set) !=
            kExcludedFixSets.end())
            continue;
        subsets.push_back(std::move(set));
    }
    std::stable_sort(subsets.begin(), subsets.end(),
                     [](const std::vector<Param>& a,
                        const std::vector<Param>& b) {
                         return a.size() < b.size();
                     });

    std::vector<RomStrategy> out;
    out.reserve(subsets.size());
    for (const auto& s : subsets)
        out.push_back(make_rom(ranking, s, box));
    return out;
}

} // namespace fee
