#pragma once

#include <array>
#include <vector>

#include "fee/errors.hpp"

namespace fee {

// Soil pile surface p(x). Either a straight slope through the origin
// (z = x * tan(alpha)) or a piecewise-linear profile given by vertices with
// strictly increasing x; end segments extrapolate with their own slope.
class PileProfile {
public:
    static PileProfile linear(double alpha_rad);
    static PileProfile piecewise(std::vector<std::array<double, 2>> vertices);

    double operator()(double x) const; // surface height p(x)
    double slope(double x) const;      // dp/dx at x (one-sided at vertices)

    bool is_linear() const { return linear_; }
    double alpha() const; // linear profiles only; throws otherwise

private:
    PileProfile() = default;
    bool linear_ = true;
    double tan_alpha_ = 0;
    double alpha_ = 0;
    std::vector<std::array<double, 2>> verts_;
};

} // namespace fee
