#pragma once

#include <array>
#include <string>
#include <string_view>

#include "fee/errors.hpp"

namespace fee {

inline constexpr double kGravity = 9.81; // [m/s^2]

// Identification order of the soil parameter vector theta.
enum class Param : int {
    gamma = 0, // bulk density            [kg/m^3]
    C     = 1, // cohesion                [N/m^2]
    C_a   = 2, // soil-tool adhesion      [N/m^2]
    phi   = 3, // internal friction angle [rad]
    delta = 4, // external friction angle [rad]
    k_c   = 5, // cohesive sinkage modulus   [N/m^(n+1)]
    k_phi = 6, // frictional sinkage modulus [N/m^(n+2)]
    n     = 7  // sinkage exponent        [-]
};

inline constexpr int kNumParams = 8;

inline constexpr int index(Param p) { return static_cast<int>(p); }

const char* param_name(Param p);
Param param_from_name(std::string_view name); // throws ConfigError on unknown names

// Soil state in SI units. kN-valued inputs are converted at ingestion
// (scenario files may use *_kN_* field names); everything past that point
// is N, m, kg, rad, s.
struct SoilParams {
    double gamma = 0;
    double C = 0;
    double C_a = 0;
    double phi = 0;
    double delta = 0;
    double k_c = 0;
    double k_phi = 0;
    double n = 0;

    std::array<double, kNumParams> to_array() const;
    static SoilParams from_array(const std::array<double, kNumParams>& a);
    double get(Param p) const;
    void set(Param p, double v);

    // gamma > 0, n in (0,3], angles in [0, pi/2), moduli >= 0.
    void validate() const;
};

// Bucket/blade constants. w and b are the Bekker contact dimensions,
// r/Theta the tip arm used by the bucket kinematics, blade_offset the
// fixed offset between the bucket angle Phi and the rake angle rho.
struct ToolGeometry {
    double w = 1.69;            // cut width [m]
    double b = 0.03;            // blade contact dimension [m]
    double r = 0.5;             // pivot-to-tip arm length [m]
    double Theta = 1.099;       // fixed arm angle against the velocity frame [rad]
    double blade_offset = 0.35; // rho = Phi + blade_offset [rad]
    double F_B = 0.0;           // bucket weight force [N]

    void validate() const;
};

// Per-pose soil engagement geometry feeding the force model.
struct Engagement {
    double d = 0;      // tool depth below the surface [m]
    double L_t = 0;    // engaged tool length [m]
    double L_f = 0;    // failure-surface length [m]
    double rho = 0;    // rake angle [rad]
    double alpha = 0;  // local surface slope [rad]
    double beta = 0;   // failure wedge angle [rad]
    double W_load = 0; // surcharge force from carried payload [N]
};

struct BearingFactors {
    double N_gamma = 0;
    double N_c = 0;
    double N_a = 0;
    double N_q = 0;
};

struct BladeForces {
    double F_T = 0; // tangential (draft) [N]
    double F_N = 0; // normal [N]
    double F_R = 0; // resultant magnitude [N]
};

// Table-style reference values used by fixtures and default configs.
SoilParams reference_soil();
ToolGeometry reference_tool();

} // namespace fee
