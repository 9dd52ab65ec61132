#include "fee/pile.hpp"

#include <cmath>

namespace fee {

PileProfile PileProfile::linear(double alpha_rad) {
    if (!(alpha_rad > 0) || alpha_rad >= 1.5707963267948966)
        throw InvalidInput("PileProfile: slope angle outside (0, pi/2)");
    PileProfile p;
    p.linear_ = true;
    p.alpha_ = alpha_rad;
    p.tan_alpha_ = std::tan(alpha_rad);
    return p;
}

PileProfile PileProfile::piecewise(std::vector<std::array<double, 2>> vertices) {
    if (vertices.size() < 2)
        throw InvalidInput("PileProfile: piecewise profile needs at least 2 vertices");
    for (size_t i = 1; i < vertices.size(); ++i) {
        if (!(vertices[i][0] > vertices[i - 1][0]))
            throw InvalidInput("PileProfile: vertex x-coordinates must be strictly increasing");
    }
    PileProfile p;
    p.linear_ = false;
    p.verts_ = std::move(vertices);
    return p;
}

double PileProfile::operator()(double x) const {
    if (linear_) return tan_alpha_ * x;
    // locate segment; end segments extrapolate
    size_t hi = 1;
    while (hi + 1 < verts_.size() && verts_[hi][0] < x) ++hi;
    const auto& a = verts_[hi - 1];
    const auto& b = verts_[hi];
    const double t = (x - a[0]) / (b[0] - a[0]);
    return a[1] + t * (b[1] - a[1]);
}

double PileProfile::slope(double x) const {
    if (linear_) return tan_alpha_;
    size_t hi = 1;
    while (hi + 1 < verts_.size() && verts_[hi][0] < x) ++hi;
    const auto& a = verts_[hi - 1];
    const auto& b = verts_[hi];
    return (b[1] - a[1]) / (b[0] - a[0]);
}

double PileProfile::alpha() const {
    if (!linear_) throw InvalidInput("PileProfile: alpha() requires a linear profile");
    return alpha_;
}

} // namespace fee
