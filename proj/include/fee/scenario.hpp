#pragma once

#include "fee/pile.hpp"
#include "fee/types.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace fee {

// Per-parameter search box over the eight soil parameters (SI units).
struct ParamBox {
    std::array<double, kNumParams> lo{};
    std::array<double, kNumParams> hi{};

    static ParamBox defaults();

    double width(Param p) const { return hi[index(p)] - lo[index(p)]; }
    std::array<double, kNumParams> midpoint() const;

    // Requires lo <= hi, finite bounds, and the box to stay inside the
    // validity domain of SoilParams. Throws ConfigError otherwise.
    void validate() const;
};

// One fully specified scenario: soil truth, tool, pile, search box, noise.
struct ScenarioConfig {
    std::string label = "reference";
    SoilParams soil = reference_soil();
    ToolGeometry tool = reference_tool();

    bool pile_is_linear = true;
    double pile_alpha = 0.7853981633974483; // 45 deg
    std::vector<std::array<double, 2>> pile_vertices;

    ParamBox bounds = ParamBox::defaults();
    double noise_std = 0.0; // force noise, 1-sigma [N]
    std::uint64_t rng_seed = 0;

    PileProfile pile() const;
    void validate() const;

    nlohmann::json to_json() const;
    static ScenarioConfig from_json(const nlohmann::json& j);
    static ScenarioConfig from_file(const std::string& path);
    void save(const std::string& path) const;
};

} // namespace fee
