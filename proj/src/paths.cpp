#include "fee/paths.hpp"

#include "fee/errors.hpp"

#include <cmath>
#include <cstddef>

namespace fee {

namespace {

constexpr int kPathPoints = 801;
constexpr double kPitchEnd = 0.35; // final bucket pitch on every path [rad]

// Depth profile below the surface as a function of progress u in [0, 1].
struct DepthShape {
    // Smooth family: depth * sin(pi u)^q. Piecewise family: linear
    // interpolation of (u_i, d_i) vertices with d = 0 at both ends.
    bool smooth = true;
    double depth = 0.0;
    double q = 1.0;
    std::vector<double> u, d;

    double operator()(double uu) const {
        if (smooth)
            return depth * std::pow(std::sin(M_PI * uu), q);
        if (uu <= u.front())
            return d.front();
        if (uu >= u.back())
            return d.back();
        std::size_t i = 1;
        while (u[i] < uu)
            ++i;
        double s = (uu - u[i - 1]) / (u[i] - u[i - 1]);
        return d[i - 1] + s * (d[i] - d[i - 1]);
    }
};

DigPath make_path(const std::string& name, const PileProfile& pile,
                  double length, const DepthShape& shape) {
    DigPath p;
    p.name = name;
    p.x.reserve(kPathPoints);
    p.z.reserve(kPathPoints);
    p.Phi.reserve(kPathPoints);
    for (int i = 0; i < kPathPoints; ++i) {
        double u = static_cast<double>(i) / (kPathPoints - 1);
        double x = u * length;
        p.x.push_back(x);
        p.z.push_back(pile(x) - shape(u));
        p.Phi.push_back(kPitchEnd * u);
    }
    // The endpoints sit exactly on the surface.
    p.z.front() = pile(p.x.front());
    p.z.back() = pile(p.x.back());
    return p;
}

} // namespace

double DigPath::enclosed_area(const PileProfile& pile) const {
    double area = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) {
        double d0 = pile(x[i - 1]) - z[i - 1];
        double d1 = pile(x[i]) - z[i];
        double seg = 0.5 * (d0 + d1) * (x[i] - x[i - 1]);
        if (seg > 0.0)
            area += seg;
    }
    return area;
}

std::vector<DigPath> reference_paths(const PileProfile& pile) {
    if (!pile.is_linear())
        throw ConfigError("reference paths require a linear pile profile");
    const double a = pile.alpha();
    const double a35 = 35.0 * M_PI / 180.0;
    const double a45 = 45.0 * M_PI / 180.0;
    if (std::fabs(a - a35) > 2e-3 && std::fabs(a - a45) > 2e-3)
        throw ConfigError("reference paths are defined for 35 deg and 45 deg "
                          "pile slopes only");

    std::vector<DigPath> out;
    out.reserve(9);

    auto smooth = [&](const std::string& name, double length, double depth,
                      double q) {
        DepthShape s;
        s.smooth = true;
        s.depth = depth;
        s.q = q;
        out.push_back(make_path(name, pile, length, s));
    };
    auto piecewise = [&](const std::string& name, double length,
                         std::vector<double> u, std::vector<double> d) {
        DepthShape s;
        s.smooth = false;
        s.u = std::move(u);
        s.d = std::move(d);
        out.push_back(make_path(name, pile, length, s));
    };

    smooth("smooth-a", 0.90, 0.22, 1.0);
    smooth("smooth-b", 0.80, 0.18, 1.0);
    smooth("smooth-c", 1.00, 0.25, 1.5);
    smooth("smooth-d", 0.70, 0.15, 1.0);
    smooth("smooth-e", 0.85, 0.20, 2.0);
    piecewise("vee-a", 0.90, {0.0, 0.40, 1.0}, {0.0, 0.20, 0.0});
    piecewise("vee-b", 0.75, {0.0, 0.35, 1.0}, {0.0, 0.14, 0.0});
    piecewise("flat-a", 0.95, {0.0, 0.30, 0.70, 1.0}, {0.0, 0.18, 0.18, 0.0});
    piecewise("flat-b", 0.80, {0.0, 0.25, 0.65, 1.0}, {0.0, 0.12, 0.12, 0.0});
    return out;
}

std::vector<TipPose> sample_poses(const DigPath& path, int n, double dt) {
    if (n < 2)
        throw InvalidInput("sample_poses needs at least 2 samples");
    if (dt <= 0.0)
        throw InvalidInput("sample_poses needs dt > 0");
    if (path.x.size() < 2)
        throw InvalidInput("sample_poses needs a path with at least 2 points");

    std::vector<TipPose> poses(static_cast<std::size_t>(n));
    const double x0 = path.x.front();
    const double x1 = path.x.back();
    std::size_t seg = 1;
    for (int i = 0; i < n; ++i) {
        double u = static_cast<double>(i) / (n - 1);
        double x = x0 + u * (x1 - x0);
        while (seg + 1 < path.x.size() && path.x[seg] < x)
            ++seg;
        double s = (x - path.x[seg - 1]) / (path.x[seg] - path.x[seg - 1]);
        TipPose& p = poses[static_cast<std::size_t>(i)];
        p.t = i * dt;
        p.x = x;
        p.z = path.z[seg - 1] + s * (path.z[seg] - path.z[seg - 1]);
        p.Phi = path.Phi[seg - 1] + s * (path.Phi[seg] - path.Phi[seg - 1]);
    }
    return poses;
}

std::vector<double> swept_area_along(const std::vector<TipPose>& poses,
                                     const PileProfile& pile) {
    std::vector<double> area(poses.size(), 0.0);
    for (std::size_t i = 1; i < poses.size(); ++i) {
        double d0 = pile(poses[i - 1].x) - poses[i - 1].z;
        double d1 = pile(poses[i].x) - poses[i].z;
        double seg = 0.5 * (d0 + d1) * (poses[i].x - poses[i - 1].x);
        area[i] = area[i - 1] + (seg > 0.0 ? seg : 0.0);
    }
    return area;
}

std::vector<double> payload_along(const std::vector<TipPose>& poses,
                                  const PileProfile& pile, double gamma,
                                  double w) {
    if (gamma <= 0.0 || w <= 0.0)
        throw InvalidInput("payload_along needs gamma > 0 and w > 0");
    std::vector<double> m = swept_area_along(poses, pile);
    for (double& v : m)
        v *= gamma * w;
    return m;
}

} // namespace fee
