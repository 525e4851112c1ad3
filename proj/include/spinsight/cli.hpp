#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "spinsight/camera.hpp"
#include "spinsight/datagen.hpp"
#include "spinsight/physics.hpp"
#include "spinsight/train.hpp"

namespace spinsight {

// Every tunable of a run. Keys are namespaced: physics.*, sampler.*,
// data.*, model.*, train.*, aug.*.
struct RunConfig {
  PhysicsParams physics;
  SamplerRanges sampler;
  ImageSize image;
  std::size_t n_valid = 50000;
  TrainConfig train;

  RunConfig();

  // Throws UsageError for unknown keys or malformed values.
  void set(std::string_view key, std::string_view value);
  void apply_text(std::string_view text);
  void apply_file(const std::filesystem::path& path);
  std::string to_text() const;
};

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);  // args exclude argv[0]

// --- single-component spin runs ---------------------------------------------

struct SpinRun {
  std::string label;
  Vec3 spin_ball;  // Hz
  Trajectory traj;
  double deviation = 0.0;  // m, against the spin-free run
};

// Start state shared by the single-component runs: a fast, flat stroke
// from behind the left end that bounces once on the right half.
BallState fig1_initial_state();

// Spin-free reference followed by one run per ball-frame component set to
// component_hz.
std::vector<SpinRun> fig1_runs(const PhysicsParams& p, double component_hz = -100.0);

// Largest 3D distance between two runs over their common fine samples.
double max_deviation(const Trajectory& a, const Trajectory& b);

}  // namespace spinsight
