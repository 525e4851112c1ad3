#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spinsight/camera.hpp"
#include "spinsight/geometry.hpp"
#include "spinsight/physics.hpp"
#include "spinsight/rng.hpp"

namespace spinsight {

inline constexpr int kRecordFormatVersion = 1;
inline constexpr int kManifestFormatVersion = 1;

enum class Split { kTrain, kVal, kTest, kReal };
enum class CameraMode { kFixed, kResample };

const char* to_string(Split s);
Split parse_split(std::string_view s);

// One training / evaluation example. Synthetic records carry ground truth;
// real records carry only the 2D observations and an annotated spin class.
struct SampleRecord {
  std::string id;
  Split split = Split::kTrain;
  int fps = 50;
  int fine_fps = 500;
  ImageSize image_size;
  std::vector<Pixel> ball_2d;
  std::vector<Pixel> table_2d;
  CameraMode camera_mode = CameraMode::kFixed;
  std::optional<CameraModel> camera;
  std::optional<BallState> init;  // simulator start, for re-simulation
  std::vector<Vec3> gt_traj_3d;
  std::optional<Vec3> gt_spin_world;
  std::optional<Vec3> gt_spin_ball;
  std::vector<Vec3> fine_traj_3d;
  std::optional<std::size_t> bounce_frame;
  std::optional<int> spin_class;  // +1 topspin, -1 backspin

  std::size_t length() const { return ball_2d.size(); }
  int fine_stride() const { return fine_fps / fps; }
  bool has_ground_truth() const {
    return !gt_traj_3d.empty() && gt_spin_world.has_value();
  }
};

bool operator==(const SampleRecord& a, const SampleRecord& b);

struct SamplerRanges {
  double x_min = -1.6, x_max = -1.2;
  double y_min = -0.6, y_max = 0.6;
  double z_min = 0.1, z_max = 0.5;  // above the table surface
  double vx_min = 3.0, vx_max = 8.0;
  double vy_min = -1.5, vy_max = 1.5;
  double vz_min = -1.0, vz_max = 3.0;
  double spin_max = 100.0;  // Hz, per component

  std::string canonical_text() const;
};

BallState sample_initial(Rng& rng, const SamplerRanges& ranges = {});

// Ball-frame spin from the world spin and the first two positions.
Vec3 spin_in_ball_frame(const Vec3& spin_world, std::span<const Vec3> traj);

// Builds a synthetic record from a simulated trajectory observed by cam.
SampleRecord make_record(const BallState& init, const Trajectory& traj,
                         const CameraModel& cam, std::string id, Split split,
                         CameraMode mode);

// Replaces the camera and recomputes every 2D observation from the 3D data.
SampleRecord reproject(const SampleRecord& rec, const CameraModel& cam);

// Re-simulates from the stored start and checks the validity rule.
bool record_is_valid(const SampleRecord& rec, const PhysicsParams& p,
                     const ValidityRules& rules = {});

// --- augmentations -------------------------------------------------------

// Re-times each frame to a fine sample within +-window*(1/fps) of the
// nominal time, moving both the 2D observation and the 3D ground truth.
SampleRecord augment_motion_blur(const SampleRecord& s, Rng& rng,
                                 double window = 0.4);

// With the given probability drops a uniform number of trailing frames,
// always keeping the bounce frame and at least min_frames frames.
SampleRecord augment_sudden_end(const SampleRecord& s, Rng& rng,
                                double probability = 0.5,
                                std::size_t min_frames = 8);

// Adds iid N(0, sigma^2) pixel noise to the ball track and table keypoints.
SampleRecord augment_gaussian(const SampleRecord& s, Rng& rng,
                              double sigma = 2.0);

struct AugmentationOptions {
  bool resample_camera = true;
  bool motion_blur = true;
  bool sudden_end = true;
  bool gaussian = true;
  double motion_blur_window = 0.4;
  double sudden_end_probability = 0.5;
  double gaussian_sigma = 2.0;
  int camera_attempts = 20;
};

// Full train-time transform: camera resampling (for resample-mode records),
// then motion blur, sudden end and Gaussian noise.
SampleRecord apply_training_pipeline(const SampleRecord& rec, Rng& rng,
                                     const AugmentationOptions& options);

// --- serialization -------------------------------------------------------

std::string serialize_record(const SampleRecord& rec);
SampleRecord parse_record(std::string_view line, std::size_t line_number = 0);

void write_jsonl(const std::filesystem::path& path,
                 const std::vector<SampleRecord>& records);
std::vector<SampleRecord> read_jsonl(const std::filesystem::path& path);

// --- dataset -------------------------------------------------------------

struct DatasetManifest {
  int format_version = kManifestFormatVersion;
  std::uint64_t seed = 0;
  std::size_t n_valid = 0;
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  std::size_t n_test = 0;
  std::size_t attempts = 0;
  std::string physics_hash;
  std::string sampler_hash;
  ImageSize image_size;
};

struct DatasetOptions {
  std::size_t n_valid = 50000;
  std::uint64_t seed = 0;
  PhysicsParams physics;
  SamplerRanges sampler;
  ImageSize image_size;
  ValidityRules rules;
  // Generation aborts when this many simulations produced too few samples.
  std::size_t max_attempts = 0;  // 0 = 200 * n_valid
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<SampleRecord> train;
  std::vector<SampleRecord> val;
  std::vector<SampleRecord> test;
};

// 70/10/20 split with floor division; the remainder goes to train.
struct SplitCounts {
  std::size_t train, val, test;
};
SplitCounts split_counts(std::size_t n_valid);

// Rejection-samples valid trajectories; a pure function of the options.
Dataset generate_dataset(const DatasetOptions& options);

// Writes train/val/test JSONL and manifest.json into dir.
DatasetManifest generate_dataset(const DatasetOptions& options,
                                 const std::filesystem::path& dir);

void write_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

std::string fnv1a_hex(std::string_view text);

std::string manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(std::string_view text);

}  // namespace spinsight
