#include "fee/identify.hpp"

#include "fee/errors.hpp"
#include "fee/fee_model.hpp"
#include "fee/paths.hpp"
#include "fee/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace fee {

namespace {

constexpr double kPhiNode = 1e-4; // wedge-angle memo node spacing [rad]

const std::vector<Param> kStage1Params = {Param::C_a, Param::delta,
                                          Param::k_c, Param::k_phi, Param::n};
const std::vector<Param> kStage2Params = {Param::C, Param::gamma, Param::phi};
const std::vector<Param> kStage3Params = {Param::k_c, Param::k_phi, Param::n};

SoilParams merge_rom(const StageSpec& spec, SoilParams theta) {
    for (const auto& [p, v] : spec.rom_fixed)
        theta.set(p, v);
    return theta;
}

// Wedge angles for the engaged samples, memoized at phi nodes and linearly
// interpolated between them. delta is fixed for the lifetime of the memo
// (one stage-2 solve); single-threaded by construction.
class BetaMemo {
public:
    BetaMemo(const TraceData& td, double delta) : td_(td), delta_(delta),
        cache_(td.engaged.size()) {}

    double beta(std::size_t ei, double phi) {
        long k = static_cast<long>(std::floor(phi / kPhiNode));
        double phi0 = static_cast<double>(k) * kPhiNode;
        double b0 = node(ei, k, phi0);
        double b1 = node(ei, k + 1, phi0 + kPhiNode);
        double s = (phi - phi0) / kPhiNode;
        return b0 + s * (b1 - b0);
    }

private:
    double node(std::size_t ei, long k, double phi) {
        auto& m = cache_[ei];
        auto it = m.find(k);
        if (it != m.end())
            return it->second;
        std::size_t i = td_.engaged[ei];
        double b = optimal_failure_angle(td_.alpha[i], phi, td_.rho[i], delta_);
        m.emplace(k, b);
        return b;
    }

    const TraceData& td_;
    double delta_;
    std::vector<std::unordered_map<long, double>> cache_;
};

struct StageOutcome {
    SoilParams theta;
    NlsDiagnostics diag;
};

// Shared solve scaffolding: pull the free coordinates out of theta, run the
// bounded solver, and merge the winners back.
StageOutcome solve_stage(const StageSpec& spec, const SoilParams& start,
                         const std::function<void(const SoilParams&,
                                                  std::vector<double>&)>& model_residual) {
    SoilParams theta = merge_rom(spec, start);

    const std::size_t nfree = spec.free_params.size();
    std::vector<double> x0(nfree), lo(nfree), hi(nfree);
    for (std::size_t j = 0; j < nfree; ++j) {
        int pi = index(spec.free_params[j]);
        lo[j] = spec.bounds.lo[pi];
        hi[j] = spec.bounds.hi[pi];
        x0[j] = std::clamp(theta.get(spec.free_params[j]), lo[j], hi[j]);
    }

    StageOutcome out;
    if (nfree == 0) {
        std::vector<double> r;
        model_residual(theta, r);
        double F = 0.0;
        for (double v : r)
            F += v * v;
        out.theta = theta;
        out.diag.converged = true;
        out.diag.stop_reason = "no free parameters";
        out.diag.objective = F;
        out.diag.objective_history = {F};
        return out;
    }

    ResidualFn fn = [&](const std::vector<double>& x, std::vector<double>& r) {
        SoilParams th = theta;
        for (std::size_t j = 0; j < nfree; ++j)
            th.set(spec.free_params[j], x[j]);
        model_residual(th, r);
    };

    auto xs = bounded_nls_solve(fn, x0, lo, hi, {}, &out.diag);
    out.theta = theta;
    for (std::size_t j = 0; j < nfree; ++j)
        out.theta.set(spec.free_params[j], xs[j]);
    return out;
}

FitResult finish_fit(const TraceData& td, StageOutcome&& so) {
    FitResult fit;
    fit.theta_hat = so.theta;
    fit.rmse_FT = trace_rmse_FT(td, so.theta);
    fit.rmse_FN = trace_rmse_FN(td, so.theta);
    fit.iterations = so.diag.iterations;
    fit.objective_history = std::move(so.diag.objective_history);
    fit.converged = so.diag.converged;
    fit.projected_gradient = so.diag.projected_gradient;
    fit.stop_reason = std::move(so.diag.stop_reason);
    return fit;
}

void check_stage(const StageSpec& spec, int expected) {
    if (spec.stage != expected)
        throw InvalidInput("stage spec " + std::to_string(spec.stage) +
                           " passed to the stage-" + std::to_string(expected) +
                           " fit");
}

double uniform_from_bits(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

} // namespace

TraceData prepare_trace(const DigTrace& trace, const PileProfile& pile,
                        const ToolGeometry& tool) {
    trace.validate();
    tool.validate();

    TraceData td;
    td.tool = tool;
    auto poses = trace.poses();
    td.area = swept_area_along(poses, pile);

    const std::size_t n = trace.samples.size();
    td.t.resize(n);
    td.FT_obs.resize(n);
    td.FN_obs.resize(n);
    td.d.resize(n);
    td.L_t.resize(n);
    td.rho.resize(n);
    td.alpha.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const TraceSample& s = trace.samples[i];
        td.t[i] = s.t;
        td.FT_obs[i] = s.F_T;
        td.FN_obs[i] = s.F_N;
        Engagement e = engagement_geometry(s.x_b, s.z_b, s.Phi, pile, tool,
                                           0.0);
        td.d[i] = e.d;
        td.L_t[i] = e.L_t;
        td.rho[i] = e.rho;
        td.alpha[i] = e.alpha;
        if (e.d > 0.0)
            td.engaged.push_back(i);
        td.peak_FT = std::max(td.peak_FT, std::fabs(s.F_T));
        td.peak_FN = std::max(td.peak_FN, std::fabs(s.F_N));
    }
    return td;
}

std::array<StageSpec, 3> make_stage_specs(const RomStrategy& rom,
                                          const ParamBox& bounds) {
    bounds.validate();
    auto build = [&](int stage, const std::vector<Param>& allowed) {
        StageSpec spec;
        spec.stage = stage;
        spec.bounds = bounds;
        for (Param p : allowed)
            if (std::find(rom.fixed.begin(), rom.fixed.end(), p) ==
                rom.fixed.end())
                spec.free_params.push_back(p);
        for (Param p : rom.fixed)
            spec.rom_fixed.emplace_back(p, rom.values[index(p)]);
        return spec;
    };
    return {build(1, kStage1Params), build(2, kStage2Params),
            build(3, kStage3Params)};
}

FitResult stage1_fit(const TraceData& td, const StageSpec& spec,
                     const SoilParams& start) {
    check_stage(spec, 1);
    if (td.engaged.empty())
        throw NoInformation("trace has no engaged samples (d > 0 nowhere); "
                            "stage 1 cannot proceed");

    auto residual = [&td](const SoilParams& th, std::vector<double>& r) {
        r.resize(td.engaged.size());
        const double w = td.tool.w, b = td.tool.b;
        const double tan_d = std::tan(th.delta);
        for (std::size_t ei = 0; ei < td.engaged.size(); ++ei) {
            std::size_t i = td.engaged[ei];
            double P = bekker_pressure(th.k_c, th.k_phi, th.n, b, td.d[i]);
            double model = w * b * P + td.FN_obs[i] * tan_d +
                           th.C_a * w * td.L_t[i];
            r[ei] = model - td.FT_obs[i];
        }
    };
    return finish_fit(td, solve_stage(spec, start, residual));
}

FitResult stage2_fit(const TraceData& td, const StageSpec& spec,
                     const SoilParams& start) {
    check_stage(spec, 2);
    if (td.engaged.empty())
        throw NoInformation("trace has no engaged samples (d > 0 nowhere); "
                            "stage 2 cannot proceed");

    const SoilParams merged = merge_rom(spec, start);
    const double delta_star = merged.delta;
    const double Ca_star = merged.C_a;
    const double cos_d = std::cos(delta_star);

    BetaMemo memo(td, delta_star);
    auto residual = [&](const SoilParams& th, std::vector<double>& r) {
        r.resize(td.engaged.size());
        const double w = td.tool.w;
        for (std::size_t ei = 0; ei < td.engaged.size(); ++ei) {
            std::size_t i = td.engaged[ei];
            double beta = memo.beta(ei, th.phi);
            BearingFactors f = bearing_factors(td.alpha[i], beta, th.phi,
                                               td.rho[i], delta_star);
            double W = th.gamma * w * td.area[i] * kGravity;
            double d = td.d[i];
            double F = d * d * w * th.gamma * kGravity * f.N_gamma +
                       th.C * w * d * f.N_c + Ca_star * w * d * f.N_a +
                       W * f.N_q;
            r[ei] = F - td.FN_obs[i] / cos_d;
        }
    };
    return finish_fit(td, solve_stage(spec, start, residual));
}

FitResult stage3_fit(const TraceData& td, const StageSpec& spec,
                     const SoilParams& start) {
    check_stage(spec, 3);
    if (td.engaged.empty())
        throw NoInformation("trace has no engaged samples (d > 0 nowhere); "
                            "stage 3 cannot proceed");

    const SoilParams s2 = merge_rom(spec, start);
    const double sin_d = std::sin(s2.delta);

    // wedge force frozen at the stage-2 parameter set, exact beta
    std::vector<double> F_hat(td.engaged.size());
    for (std::size_t ei = 0; ei < td.engaged.size(); ++ei) {
        std::size_t i = td.engaged[ei];
        Engagement e;
        e.d = td.d[i];
        e.L_t = td.L_t[i];
        e.rho = td.rho[i];
        e.alpha = td.alpha[i];
        e.W_load = s2.gamma * td.tool.w * td.area[i] * kGravity;
        e.beta = optimal_failure_angle(e.alpha, s2.phi, e.rho, s2.delta);
        e.L_f = e.d / std::sin(e.beta);
        F_hat[ei] = wedge_force(s2, td.tool, e);
    }

    auto residual = [&](const SoilParams& th, std::vector<double>& r) {
        r.resize(td.engaged.size());
        const double w = td.tool.w, b = td.tool.b;
        for (std::size_t ei = 0; ei < td.engaged.size(); ++ei) {
            std::size_t i = td.engaged[ei];
            double P = bekker_pressure(th.k_c, th.k_phi, th.n, b, td.d[i]);
            double model = w * b * P + F_hat[ei] * sin_d +
                           s2.C_a * w * td.L_t[i];
            r[ei] = model - td.FT_obs[i];
        }
    };

    FitResult fit = finish_fit(td, solve_stage(spec, start, residual));

    // The wedge does not depend on the pressure-sinkage parameters, so the
    // monotone solver cannot worsen the tangential fit; keep the guarantee
    // explicit against floating-point edge cases.
    double before = trace_rmse_FT(td, s2);
    if (fit.rmse_FT > before) {
        fit.theta_hat = s2;
        fit.rmse_FT = before;
        fit.rmse_FN = trace_rmse_FN(td, s2);
        fit.stop_reason += " (kept stage-2 point)";
    }
    return fit;
}

void predict_trace(const TraceData& td, const SoilParams& theta,
                   std::vector<double>& FT, std::vector<double>& FN) {
    const std::size_t n = td.d.size();
    FT.assign(n, 0.0);
    FN.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (td.d[i] <= 0.0)
            continue;
        Engagement e;
        e.d = td.d[i];
        e.L_t = td.L_t[i];
        e.rho = td.rho[i];
        e.alpha = td.alpha[i];
        e.W_load = theta.gamma * td.tool.w * td.area[i] * kGravity;
        e.beta = optimal_failure_angle(e.alpha, theta.phi, e.rho, theta.delta);
        e.L_f = e.d / std::sin(e.beta);
        BladeForces f = blade_forces(theta, td.tool, e);
        FT[i] = f.F_T;
        FN[i] = f.F_N;
    }
}

double trace_rmse_FT(const TraceData& td, const SoilParams& theta) {
    std::vector<double> FT, FN;
    predict_trace(td, theta, FT, FN);
    double acc = 0.0;
    for (std::size_t i = 0; i < FT.size(); ++i) {
        double d = FT[i] - td.FT_obs[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(FT.size()));
}

double trace_rmse_FN(const TraceData& td, const SoilParams& theta) {
    std::vector<double> FT, FN;
    predict_trace(td, theta, FT, FN);
    double acc = 0.0;
    for (std::size_t i = 0; i < FN.size(); ++i) {
        double d = FN[i] - td.FN_obs[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(FN.size()));
}

PipelineResult run_pipeline(const DigTrace& trace, const PileProfile& pile,
                            const ToolGeometry& tool, const RomStrategy& rom,
                            const ParamBox& bounds, int starts,
                            std::uint64_t seed, ExecPolicy policy,
                            const SoilParams* init0) {
    if (starts < 1)
        throw InvalidInput("run_pipeline needs starts >= 1");
    bounds.validate();

    TraceData td = prepare_trace(trace, pile, tool);
    auto specs = make_stage_specs(rom, bounds);
    auto mids = bounds.midpoint();

    std::vector<FitResult> results(static_cast<std::size_t>(starts));
    std::vector<std::string> failures(static_cast<std::size_t>(starts));

    const bool parallel = policy == ExecPolicy::Parallel;
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (int s = 0; s < starts; ++s) {
        auto t0 = std::chrono::steady_clock::now();
        SoilParams x0;
        if (s == 0 && init0 != nullptr) {
            x0 = *init0;
        } else if (s == 0) {
            x0 = SoilParams::from_array(mids);
        } else {
            std::uint64_t st = derive_seed(seed, static_cast<std::uint64_t>(s));
            std::array<double, kNumParams> a{};
            for (int j = 0; j < kNumParams; ++j) {
                double u = uniform_from_bits(splitmix64(st));
                a[static_cast<std::size_t>(j)] =
                    bounds.lo[static_cast<std::size_t>(j)] +
                    u * (bounds.hi[static_cast<std::size_t>(j)] -
                         bounds.lo[static_cast<std::size_t>(j)]);
            }
            x0 = SoilParams::from_array(a);
        }

        FitResult& slot = results[static_cast<std::size_t>(s)];
        try {
            FitResult f1 = stage1_fit(td, specs[0], x0);
            FitResult f2 = stage2_fit(td, specs[1], f1.theta_hat);
            FitResult f3 = stage3_fit(td, specs[2], f2.theta_hat);
            f3.iterations += f1.iterations + f2.iterations;
            f3.converged = f1.converged && f2.converged && f3.converged;
            slot = std::move(f3);
        } catch (const Error& e) {
            slot.converged = false;
            slot.rmse_FT = std::numeric_limits<double>::infinity();
            slot.rmse_FN = std::numeric_limits<double>::infinity();
            slot.stop_reason = e.what();
            failures[static_cast<std::size_t>(s)] = e.what();
        }
        slot.start_index = s;
        slot.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
    }

    PipelineResult out;
    out.per_start = std::move(results);

    int best = -1;
    double best_score = std::numeric_limits<double>::infinity();
    for (int s = 0; s < starts; ++s) {
        const FitResult& f = out.per_start[static_cast<std::size_t>(s)];
        double score = f.rmse_FT * f.rmse_FT + f.rmse_FN * f.rmse_FN;
        if (score < best_score) {
            best_score = score;
            best = s;
        }
        out.converged = out.converged || f.converged;
    }
    if (best < 0 || !std::isfinite(best_score)) {
        std::string why;
        for (const auto& f : failures)
            if (!f.empty()) {
                why = f;
                break;
            }
        throw NoInformation("every start failed to evaluate: " + why);
    }
    out.best = out.per_start[static_cast<std::size_t>(best)];
    return out;
}

} // namespace fee
