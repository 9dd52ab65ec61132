#pragma once

#include "fee/pile.hpp"

#include <string>
#include <vector>

namespace fee {

// Bucket tip pose at one instant.
struct TipPose {
    double t = 0.0;   // time [s]
    double x = 0.0;   // tip position, horizontal [m]
    double z = 0.0;   // tip position, vertical [m]
    double Phi = 0.0; // bucket pitch [rad]
};

// A dig path stored as a dense polyline over strictly increasing x.
struct DigPath {
    std::string name;
    std::vector<double> x;   // [m]
    std::vector<double> z;   // [m]
    std::vector<double> Phi; // [rad]

    // Cross-sectional area enclosed between the pile surface and the path
    // [m^2]. Segments where the path rises above the surface contribute 0.
    double enclosed_area(const PileProfile& pile) const;
};

// Nine reference dig paths, all entering at the pile toe (x = 0) and exiting
// on the pile surface: five smooth sine-depth profiles and four
// piecewise-linear ones, each with pitch ramping 0 -> 0.35 rad.
// The pile must be linear with slope 35 deg or 45 deg (within 2e-3 rad);
// anything else throws ConfigError.
std::vector<DigPath> reference_paths(const PileProfile& pile);

// Resamples a path to n poses spaced dt apart, uniform in x.
std::vector<TipPose> sample_poses(const DigPath& path, int n, double dt);

// Swept cross-sectional area up to each pose [m^2]: trapezoidal integration
// of max(0, dx * (p(x) - z)) over the pose sequence. A[0] = 0.
std::vector<double> swept_area_along(const std::vector<TipPose>& poses,
                                     const PileProfile& pile);

// Accumulated payload mass gamma * w * A_i at each pose [kg].
std::vector<double> payload_along(const std::vector<TipPose>& poses,
                                  const PileProfile& pile, double gamma,
                                  double w);

} // namespace fee
