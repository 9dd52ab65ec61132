#include "fee/scenario.hpp"

#include "fee/errors.hpp"
#include "fee/io_util.hpp"

#include <cmath>
#include <set>

namespace fee {

namespace {

// JSON field names carry their unit. Fields measured in N also accept a
// *_kN_* spelling; those values are scaled by 1000 at ingestion.
struct SoilField {
    Param p;
    const char* si_name;
    const char* kn_name; // nullptr when no kN spelling exists
};

const SoilField kSoilFields[] = {
    {Param::gamma, "gamma_kg_per_m3", nullptr},
    {Param::C, "C_N_per_m2", "C_kN_per_m2"},
    {Param::C_a, "C_a_N_per_m2", "C_a_kN_per_m2"},
    {Param::phi, "phi_rad", nullptr},
    {Param::delta, "delta_rad", nullptr},
    {Param::k_c, "k_c_N_per_m_n1", "k_c_kN_per_m_n1"},
    {Param::k_phi, "k_phi_N_per_m_n2", "k_phi_kN_per_m_n2"},
    {Param::n, "n", nullptr},
};

double require_number(const nlohmann::json& j, const std::string& where) {
    if (!j.is_number())
        throw ConfigError(where + ": expected a number, got " +
                          std::string(j.type_name()));
    return j.get<double>();
}

// Reads one unit-suffixed value. Returns false when neither spelling is
// present; throws when both are.
bool read_suffixed(const nlohmann::json& obj, const SoilField& f,
                   const std::string& where, double& out) {
    bool has_si = obj.contains(f.si_name);
    bool has_kn = f.kn_name != nullptr && obj.contains(f.kn_name);
    if (has_si && has_kn)
        throw ConfigError(where + ": both '" + f.si_name + "' and '" +
                          f.kn_name + "' given; use one");
    if (has_si) {
        out = require_number(obj.at(f.si_name), where + "." + f.si_name);
        return true;
    }
    if (has_kn) {
        out = 1000.0 * require_number(obj.at(f.kn_name),
                                      where + "." + f.kn_name);
        return true;
    }
    return false;
}

void reject_unknown_keys(const nlohmann::json& obj,
                         const std::set<std::string>& known,
                         const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (known.count(it.key()) == 0)
            throw ConfigError(where + ": unknown field '" + it.key() + "'");
}

std::set<std::string> soil_key_set() {
    std::set<std::string> keys;
    for (const auto& f : kSoilFields) {
        keys.insert(f.si_name);
        if (f.kn_name)
            keys.insert(f.kn_name);
    }
    return keys;
}

} // namespace

ParamBox ParamBox::defaults() {
    ParamBox b;
    b.lo[index(Param::gamma)] = 1200.0;
    b.hi[index(Param::gamma)] = 2500.0;
    b.lo[index(Param::C)] = 0.0;
    b.hi[index(Param::C)] = 2500.0;
    b.lo[index(Param::C_a)] = 0.0;
    b.hi[index(Param::C_a)] = 2500.0;
    b.lo[index(Param::phi)] = 0.0;
    b.hi[index(Param::phi)] = 0.785;
    b.lo[index(Param::delta)] = 0.0;
    b.hi[index(Param::delta)] = 0.785;
    b.lo[index(Param::k_c)] = 0.0;
    b.hi[index(Param::k_c)] = 5.0e6;
    b.lo[index(Param::k_phi)] = 0.0;
    b.hi[index(Param::k_phi)] = 5.0e6;
    b.lo[index(Param::n)] = 0.1;
    b.hi[index(Param::n)] = 1.5;
    return b;
}

std::array<double, kNumParams> ParamBox::midpoint() const {
    std::array<double, kNumParams> m{};
    for (int i = 0; i < kNumParams; ++i)
        m[i] = 0.5 * (lo[i] + hi[i]);
    return m;
}

void ParamBox::validate() const {
    for (int i = 0; i < kNumParams; ++i) {
        Param p = static_cast<Param>(i);
        if (!std::isfinite(lo[i]) || !std::isfinite(hi[i]))
            throw ConfigError(std::string("bounds for ") + param_name(p) +
                              " must be finite");
        if (lo[i] > hi[i])
            throw ConfigError(std::string("bounds for ") + param_name(p) +
                              " have lo > hi");
        if (lo[i] < 0.0)
            throw ConfigError(std::string("bounds for ") + param_name(p) +
                              " must be nonnegative");
    }
    if (lo[index(Param::gamma)] <= 0.0)
        throw ConfigError("gamma lower bound must be positive");
    if (hi[index(Param::phi)] >= M_PI / 2 || hi[index(Param::delta)] >= M_PI / 2)
        throw ConfigError("angle upper bounds must stay below pi/2");
    if (lo[index(Param::n)] <= 0.0 || hi[index(Param::n)] > 3.0)
        throw ConfigError("n bounds must stay inside (0, 3]");
}

PileProfile ScenarioConfig::pile() const {
    if (pile_is_linear)
        return PileProfile::linear(pile_alpha);
    return PileProfile::piecewise(pile_vertices);
}

void ScenarioConfig::validate() const {
    soil.validate();
    tool.validate();
    bounds.validate();
    if (noise_std < 0.0 || !std::isfinite(noise_std))
        throw ConfigError("noise_std_N must be finite and >= 0");
    if (pile_is_linear) {
        if (!(pile_alpha > 0.0) || pile_alpha >= M_PI / 2)
            throw ConfigError("pile alpha_rad must lie in (0, pi/2)");
    } else {
        try {
            pile(); // the piecewise constructor validates the vertices
        } catch (const Error& e) {
            throw ConfigError(std::string("scenario.pile: ") + e.what());
        }
    }
}

nlohmann::json ScenarioConfig::to_json() const {
    nlohmann::json j;
    j["label"] = label;

    nlohmann::json js;
    for (const auto& f : kSoilFields)
        js[f.si_name] = soil.get(f.p);
    j["soil"] = js;

    j["tool"] = {{"w_m", tool.w},
                 {"b_m", tool.b},
                 {"r_m", tool.r},
                 {"Theta_rad", tool.Theta},
                 {"blade_offset_rad", tool.blade_offset},
                 {"F_B_N", tool.F_B}};

    if (pile_is_linear) {
        j["pile"] = {{"type", "linear"}, {"alpha_rad", pile_alpha}};
    } else {
        j["pile"] = {{"type", "piecewise"}, {"vertices_m", pile_vertices}};
    }

    nlohmann::json jb;
    for (const auto& f : kSoilFields)
        jb[f.si_name] = {bounds.lo[index(f.p)], bounds.hi[index(f.p)]};
    j["bounds"] = jb;

    j["noise_std_N"] = noise_std;
    j["rng_seed"] = rng_seed;
    return j;
}

ScenarioConfig ScenarioConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object())
        throw ConfigError("scenario: top-level JSON must be an object");
    reject_unknown_keys(j,
                        {"label", "soil", "tool", "pile", "bounds",
                         "noise_std_N", "rng_seed"},
                        "scenario");

    ScenarioConfig cfg;

    if (j.contains("label")) {
        if (!j.at("label").is_string())
            throw ConfigError("scenario.label: expected a string");
        cfg.label = j.at("label").get<std::string>();
    }

    if (j.contains("soil")) {
        const auto& js = j.at("soil");
        if (!js.is_object())
            throw ConfigError("scenario.soil: expected an object");
        reject_unknown_keys(js, soil_key_set(), "scenario.soil");
        for (const auto& f : kSoilFields) {
            double v;
            if (read_suffixed(js, f, "scenario.soil", v))
                cfg.soil.set(f.p, v);
        }
    }

    if (j.contains("tool")) {
        const auto& jt = j.at("tool");
        if (!jt.is_object())
            throw ConfigError("scenario.tool: expected an object");
        reject_unknown_keys(jt,
                            {"w_m", "b_m", "r_m", "Theta_rad",
                             "blade_offset_rad", "F_B_N"},
                            "scenario.tool");
        auto opt = [&](const char* key, double& out) {
            if (jt.contains(key))
                out = require_number(jt.at(key),
                                     std::string("scenario.tool.") + key);
        };
        opt("w_m", cfg.tool.w);
        opt("b_m", cfg.tool.b);
        opt("r_m", cfg.tool.r);
        opt("Theta_rad", cfg.tool.Theta);
        opt("blade_offset_rad", cfg.tool.blade_offset);
        opt("F_B_N", cfg.tool.F_B);
    }

    if (j.contains("pile")) {
        const auto& jp = j.at("pile");
        if (!jp.is_object() || !jp.contains("type") ||
            !jp.at("type").is_string())
            throw ConfigError("scenario.pile: expected an object with a "
                              "'type' string");
        std::string type = jp.at("type").get<std::string>();
        if (type == "linear") {
            reject_unknown_keys(jp, {"type", "alpha_rad"}, "scenario.pile");
            cfg.pile_is_linear = true;
            if (jp.contains("alpha_rad"))
                cfg.pile_alpha = require_number(jp.at("alpha_rad"),
                                                "scenario.pile.alpha_rad");
        } else if (type == "piecewise") {
            reject_unknown_keys(jp, {"type", "vertices_m"}, "scenario.pile");
            cfg.pile_is_linear = false;
            if (!jp.contains("vertices_m") || !jp.at("vertices_m").is_array())
                throw ConfigError("scenario.pile: piecewise type needs a "
                                  "'vertices_m' array");
            for (const auto& v : jp.at("vertices_m")) {
                if (!v.is_array() || v.size() != 2)
                    throw ConfigError("scenario.pile.vertices_m: each vertex "
                                      "must be [x, z]");
                cfg.pile_vertices.push_back(
                    {require_number(v[0], "scenario.pile.vertices_m[..][0]"),
                     require_number(v[1], "scenario.pile.vertices_m[..][1]")});
            }
        } else {
            throw ConfigError("scenario.pile.type: expected 'linear' or "
                              "'piecewise', got '" + type + "'");
        }
    }

    if (j.contains("bounds")) {
        const auto& jb = j.at("bounds");
        if (!jb.is_object())
            throw ConfigError("scenario.bounds: expected an object");
        reject_unknown_keys(jb, soil_key_set(), "scenario.bounds");
        for (const auto& f : kSoilFields) {
            bool has_si = jb.contains(f.si_name);
            bool has_kn = f.kn_name != nullptr && jb.contains(f.kn_name);
            if (has_si && has_kn)
                throw ConfigError(std::string("scenario.bounds: both '") +
                                  f.si_name + "' and '" + f.kn_name +
                                  "' given; use one");
            if (!has_si && !has_kn)
                continue;
            const char* key = has_si ? f.si_name : f.kn_name;
            double scale = has_si ? 1.0 : 1000.0;
            const auto& pair = jb.at(key);
            if (!pair.is_array() || pair.size() != 2)
                throw ConfigError(std::string("scenario.bounds.") + key +
                                  ": expected [lo, hi]");
            cfg.bounds.lo[index(f.p)] =
                scale * require_number(pair[0], std::string("scenario.bounds.") +
                                                    key + "[0]");
            cfg.bounds.hi[index(f.p)] =
                scale * require_number(pair[1], std::string("scenario.bounds.") +
                                                    key + "[1]");
        }
    }

    if (j.contains("noise_std_N"))
        cfg.noise_std = require_number(j.at("noise_std_N"),
                                       "scenario.noise_std_N");
    if (j.contains("rng_seed")) {
        if (!j.at("rng_seed").is_number_unsigned())
            throw ConfigError("scenario.rng_seed: expected an unsigned integer");
        cfg.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    }

    cfg.validate();
    return cfg;
}

ScenarioConfig ScenarioConfig::from_file(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    try {
        return from_json(j);
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

void ScenarioConfig::save(const std::string& path) const {
    write_file_atomic(path, to_json().dump(2) + "\n");
}

} // namespace fee
