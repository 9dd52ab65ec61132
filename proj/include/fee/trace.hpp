#pragma once

#include "fee/paths.hpp"
#include "fee/scenario.hpp"

#include <json.hpp>

#include <array>
#include <string>
#include <vector>

namespace fee {

// One row of a dig-force trace.
struct TraceSample {
    double t = 0.0;   // [s]
    double x_b = 0.0; // tip position, horizontal [m]
    double z_b = 0.0; // tip position, vertical [m]
    double Phi = 0.0; // bucket pitch [rad]
    double F_T = 0.0; // observed tangential force [N]
    double F_N = 0.0; // observed normal force [N]
};

// A recorded dig: pose and force samples plus free-form metadata.
// The CSV on disk has the fixed header t,x_b,z_b,Phi,F_T,F_N; metadata
// lives in a <file>.meta.json sidecar.
struct DigTrace {
    std::vector<TraceSample> samples;
    nlohmann::json meta = nlohmann::json::object();

    // Requires >= 2 samples, finite fields, strictly increasing t.
    void validate() const;

    std::vector<TipPose> poses() const;
};

// Parse errors cite the file, 1-based line, and offending field.
DigTrace load_trace(const std::string& csv_path);

// Writes the CSV (and the sidecar when meta is non-empty) atomically,
// LF line endings, shortest round-trip number formatting.
void save_trace(const DigTrace& trace, const std::string& csv_path);

// Evaluates the force model along the given poses under cfg's soil, tool
// and pile, with payload accumulated from the swept area. cfg.noise_std > 0
// adds seeded Gaussian noise to both forces; F_N is clamped at 0.
// Poses the model cannot evaluate raise errors naming the pose index.
DigTrace synth_trace(const ScenarioConfig& cfg,
                     const std::vector<TipPose>& poses);

// Same, for a timeless (x_b, z_b, Phi) pose list sampled every dt seconds.
DigTrace synth_trace(const ScenarioConfig& cfg,
                     const std::vector<std::array<double, 3>>& path_poses,
                     double dt);

} // namespace fee
