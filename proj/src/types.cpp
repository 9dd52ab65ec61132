#include "fee/types.hpp"

#include <cmath>

namespace fee {

namespace {
constexpr const char* kParamNames[kNumParams] = {
    "gamma", "C", "C_a", "phi", "delta", "k_c", "k_phi", "n"};
constexpr double kHalfPi = 1.5707963267948966;
} // namespace

const char* param_name(Param p) { return kParamNames[static_cast<int>(p)]; }

Param param_from_name(std::string_view name) {
    for (int i = 0; i < kNumParams; ++i) {
        if (name == kParamNames[i]) return static_cast<Param>(i);
    }
    throw ConfigError("unknown parameter name: " + std::string(name));
}

std::array<double, kNumParams> SoilParams::to_array() const {
    return {gamma, C, C_a, phi, delta, k_c, k_phi, n};
}

SoilParams SoilParams::from_array(const std::array<double, kNumParams>& a) {
    SoilParams s;
    s.gamma = a[0];
    s.C = a[1];
    s.C_a = a[2];
    s.phi = a[3];
    s.delta = a[4];
    s.k_c = a[5];
    s.k_phi = a[6];
    s.n = a[7];
    return s;
}

double SoilParams::get(Param p) const { return to_array()[static_cast<int>(p)]; }

void SoilParams::set(Param p, double v) {
    auto a = to_array();
    a[static_cast<int>(p)] = v;
    *this = from_array(a);
}

void SoilParams::validate() const {
    if (!(gamma > 0)) throw InvalidInput("SoilParams: gamma must be > 0");
    if (C < 0 || C_a < 0) throw InvalidInput("SoilParams: cohesion/adhesion must be >= 0");
    if (phi < 0 || phi >= kHalfPi) throw InvalidInput("SoilParams: phi outside [0, pi/2)");
    if (delta < 0 || delta >= kHalfPi) throw InvalidInput("SoilParams: delta outside [0, pi/2)");
    if (k_c < 0 || k_phi < 0) throw InvalidInput("SoilParams: sinkage moduli must be >= 0");
    if (!(n > 0) || n > 3) throw InvalidInput("SoilParams: n outside (0, 3]");
}

void ToolGeometry::validate() const {
    if (!(w > 0) || !(b > 0)) throw InvalidInput("ToolGeometry: w and b must be > 0");
    if (!(r > 0)) throw InvalidInput("ToolGeometry: r must be > 0");
    if (blade_offset <= 0 || blade_offset >= kHalfPi)
        throw InvalidInput("ToolGeometry: blade_offset outside (0, pi/2)");
}

SoilParams reference_soil() {
    SoilParams s;
    s.gamma = 1850;
    s.C = 518;
    s.C_a = 53.8;
    s.phi = 0.075;
    s.delta = 0.609;
    s.k_c = 1930;  // 1.93 kN/m^(n+1)
    s.k_phi = 190; // 0.19 kN/m^(n+2)
    s.n = 0.94;
    return s;
}

ToolGeometry reference_tool() { return ToolGeometry{}; }

} // namespace fee
