#include "fee/trace.hpp"

#include "fee/errors.hpp"
#include "fee/fee_model.hpp"
#include "fee/io_util.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <sstream>

namespace fee {

namespace {

constexpr const char* kHeader = "t,x_b,z_b,Phi,F_T,F_N";
constexpr int kNumFields = 6;

std::string sidecar_path(const std::string& csv_path) {
    return csv_path + ".meta.json";
}

// Splits one CSV line; complains with file:line context on malformed rows.
std::array<double, kNumFields> parse_row(const std::string& line,
                                         const std::string& path,
                                         std::size_t lineno) {
    std::array<double, kNumFields> out{};
    std::size_t pos = 0;
    for (int f = 0; f < kNumFields; ++f) {
        std::size_t end = line.find(',', pos);
        bool last = (f == kNumFields - 1);
        if (!last && end == std::string::npos)
            throw ParseError(path + ":" + std::to_string(lineno) +
                             ": expected " + std::to_string(kNumFields) +
                             " fields, got " + std::to_string(f + 1));
        std::string field = last ? line.substr(pos)
                                 : line.substr(pos, end - pos);
        if (last && field.find(',') != std::string::npos)
            throw ParseError(path + ":" + std::to_string(lineno) +
                             ": expected " + std::to_string(kNumFields) +
                             " fields, got more");
        const char* begin = field.c_str();
        char* stop = nullptr;
        double v = std::strtod(begin, &stop);
        if (stop == begin || *stop != '\0' || !std::isfinite(v))
            throw ParseError(path + ":" + std::to_string(lineno) + ": field " +
                             std::to_string(f + 1) + " ('" + field +
                             "') is not a finite number");
        out[static_cast<std::size_t>(f)] = v;
        pos = (end == std::string::npos) ? line.size() : end + 1;
    }
    return out;
}

} // namespace

void DigTrace::validate() const {
    if (samples.size() < 2)
        throw InvalidInput("trace needs at least 2 samples");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const TraceSample& s = samples[i];
        for (double v : {s.t, s.x_b, s.z_b, s.Phi, s.F_T, s.F_N})
            if (!std::isfinite(v))
                throw InvalidInput("trace sample " + std::to_string(i) +
                                   " has a non-finite field");
        if (i > 0 && !(s.t > samples[i - 1].t))
            throw InvalidInput("trace time must be strictly increasing at "
                               "sample " + std::to_string(i));
        if (s.F_N < 0.0)
            throw InvalidInput("trace F_N must be nonnegative at sample " +
                               std::to_string(i));
    }
}

std::vector<TipPose> DigTrace::poses() const {
    std::vector<TipPose> p(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
        p[i] = {samples[i].t, samples[i].x_b, samples[i].z_b, samples[i].Phi};
    return p;
}

DigTrace load_trace(const std::string& csv_path) {
    std::string text = read_file(csv_path);
    DigTrace trace;

    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (lineno == 1) {
            if (line != kHeader)
                throw ParseError(csv_path + ":1: expected header '" +
                                 std::string(kHeader) + "', got '" + line +
                                 "'");
            continue;
        }
        if (line.empty())
            continue;
        auto f = parse_row(line, csv_path, lineno);
        TraceSample s{f[0], f[1], f[2], f[3], f[4], f[5]};
        if (!trace.samples.empty() && !(s.t > trace.samples.back().t))
            throw ParseError(csv_path + ":" + std::to_string(lineno) +
                             ": time " + format_double(s.t) +
                             " does not increase over previous " +
                             format_double(trace.samples.back().t));
        trace.samples.push_back(s);
    }
    if (lineno == 0)
        throw ParseError(csv_path + ":1: empty file, expected header '" +
                         std::string(kHeader) + "'");

    std::string side = sidecar_path(csv_path);
    if (std::filesystem::exists(side)) {
        try {
            trace.meta = nlohmann::json::parse(read_file(side));
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(side + ": " + e.what());
        }
    }

    trace.validate();
    return trace;
}

void save_trace(const DigTrace& trace, const std::string& csv_path) {
    trace.validate();
    std::string out;
    out.reserve(64 * trace.samples.size() + 32);
    out += kHeader;
    out += '\n';
    for (const TraceSample& s : trace.samples) {
        out += format_double(s.t);
        out += ',';
        out += format_double(s.x_b);
        out += ',';
        out += format_double(s.z_b);
        out += ',';
        out += format_double(s.Phi);
        out += ',';
        out += format_double(s.F_T);
        out += ',';
        out += format_double(s.F_N);
        out += '\n';
    }
    write_file_atomic(csv_path, out);
    if (!trace.meta.empty())
        write_file_atomic(sidecar_path(csv_path), trace.meta.dump(2) + "\n");
}

DigTrace synth_trace(const ScenarioConfig& cfg,
                     const std::vector<TipPose>& poses) {
    cfg.validate();
    if (poses.size() < 2)
        throw InvalidInput("synth_trace needs at least 2 poses");

    PileProfile pile = cfg.pile();
    std::vector<double> payload =
        payload_along(poses, pile, cfg.soil.gamma, cfg.tool.w);

    DigTrace trace;
    trace.samples.resize(poses.size());

    std::mt19937_64 rng(cfg.rng_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    for (std::size_t i = 0; i < poses.size(); ++i) {
        const TipPose& p = poses[i];
        BladeForces forces;
        try {
            Engagement eng = engagement_from_pose(p.x, p.z, p.Phi, pile,
                                                  cfg.soil, cfg.tool,
                                                  payload[i]);
            forces = blade_forces(cfg.soil, cfg.tool, eng);
        } catch (const SingularGeometry& e) {
            throw SingularGeometry("pose " + std::to_string(i) + ": " +
                                   e.what());
        } catch (const InvalidInput& e) {
            throw InvalidInput("pose " + std::to_string(i) + ": " + e.what());
        }
        double F_T = forces.F_T;
        double F_N = forces.F_N;
        if (cfg.noise_std > 0.0) {
            F_T += cfg.noise_std * gauss(rng);
            F_N += cfg.noise_std * gauss(rng);
            if (F_N < 0.0)
                F_N = 0.0;
        }
        trace.samples[i] = {p.t, p.x, p.z, p.Phi, F_T, F_N};
    }

    trace.meta = {{"label", cfg.label},
                  {"tool_ref", cfg.label},
                  {"noise_std_N", cfg.noise_std},
                  {"rng_seed", cfg.rng_seed},
                  {"n_samples", trace.samples.size()},
                  {"scenario", cfg.to_json()}};
    if (cfg.pile_is_linear)
        trace.meta["pile_alpha_rad"] = cfg.pile_alpha;
    return trace;
}

DigTrace synth_trace(const ScenarioConfig& cfg,
                     const std::vector<std::array<double, 3>>& path_poses,
                     double dt) {
    if (dt <= 0.0)
        throw InvalidInput("synth_trace needs dt > 0");
    std::vector<TipPose> poses(path_poses.size());
    for (std::size_t i = 0; i < path_poses.size(); ++i)
        poses[i] = {dt * static_cast<double>(i), path_poses[i][0],
                    path_poses[i][1], path_poses[i][2]};
    return synth_trace(cfg, poses);
}

} // namespace fee
