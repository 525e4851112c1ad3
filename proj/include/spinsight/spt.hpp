#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "spinsight/autograd.hpp"
#include "spinsight/datagen.hpp"
#include "spinsight/geometry.hpp"

namespace spinsight {

enum class Variant { kSingleStage, kTwoStage, kConnectStage };
enum class Embedding { kContextFree, kConcatenation, kDynamic };
enum class SpinFrame { kWorld, kBall };

const char* to_string(Variant v);
const char* to_string(Embedding e);
const char* to_string(SpinFrame f);

inline constexpr std::size_t kPointsPerFrame = 1 + kNumTableKeypoints;

struct SptConfig {
  Variant variant = Variant::kConnectStage;
  Embedding embedding = Embedding::kConcatenation;
  std::string preset = "large";
  int layers = 16;
  int heads = 4;
  int dim = 128;
  int mlp_hidden = 0;  // transformer MLP width; 0 means dim
  int second_stage_layers = 4;
  int dynamic_layers = 4;
  SpinFrame spin_frame = SpinFrame::kWorld;
  std::size_t max_length = 40;  // location tokens
  double omega_scale = 100.0;   // Hz
  double rope_base = 10000.0;

  // small(8,4,32), base(12,4,64), large(16,4,128), huge(16,8,192).
  static SptConfig from_preset(std::string_view name);

  int hidden() const { return mlp_hidden > 0 ? mlp_hidden : dim; }
  int first_stage_layers() const {
    return variant == Variant::kSingleStage ? layers : layers - second_stage_layers;
  }

  // Throws UsageError.
  void validate() const;
  // Applies one key=value override; throws UsageError on unknown keys.
  void set(std::string_view key, std::string_view value);
  // "model.key=value" lines in a fixed order.
  std::string to_text() const;
};

// Per-frame observations in normalized image coordinates:
// (p - (W/2, H/2)) / sqrt(W^2 + H^2), ball first, then the 13 keypoints.
struct ModelInput {
  ag::Tensor points;      // [rows, 28]
  std::size_t length = 0;  // valid frames; rows beyond are padding

  std::size_t rows() const { return points.dim(0); }
};

ModelInput make_input(const SampleRecord& rec, std::size_t pad_to = 0);
Pixel normalize_pixel(const Pixel& p, const ImageSize& img);

struct ModelOutput {
  std::vector<Vec3> traj;  // world frame, m, one per valid frame
  Vec3 spin;               // Hz, in the configured spin frame
};

ag::Parameters init_parameters(const SptConfig& cfg, std::uint64_t seed);

// --- graph construction ----------------------------------------------------

struct SptGraph {
  ag::Var traj;         // [rows, 3] m
  ag::Var spin_scaled;  // [1, 3], spin / omega_scale
};

ag::Var embed_context_free(ag::Tape& t, const ag::Parameters& p,
                           const SptConfig& cfg, const ag::Tensor& points);
ag::Var embed_concatenation(ag::Tape& t, const ag::Parameters& p,
                            const SptConfig& cfg, const ag::Tensor& points);
ag::Var embed_dynamic(ag::Tape& t, const ag::Parameters& p,
                      const SptConfig& cfg, const ag::Tensor& points);
// Dispatches on cfg.embedding; returns [rows, dim].
ag::Var embed(ag::Tape& t, const ag::Parameters& p, const SptConfig& cfg,
              const ag::Tensor& points);

// Throws SequenceTooLong and ShapeMismatch.
SptGraph spt_forward(ag::Tape& t, const SptConfig& cfg, const ag::Parameters& p,
                     const ModelInput& input);

struct LossTarget {
  std::vector<Vec3> traj;  // one per valid frame
  Vec3 spin;               // Hz, in the configured spin frame
};

LossTarget make_target(const SampleRecord& rec, const SptConfig& cfg);

// (1/T) sum_t ||r_pred - r_gt||^2 + ||(w_pred - w_gt) / omega_scale||^2,
// with padded rows weighted zero.
ag::Var spt_loss(ag::Tape& t, const SptGraph& g, const ModelInput& input,
                 const LossTarget& target, double omega_scale);

ModelOutput predict(const SptConfig& cfg, const ag::Parameters& p,
                    const ModelInput& input);

// Spin in the ball frame built from the first two positions of traj.
// Falls back to the +x direction when traj cannot define a frame.
Vec3 spin_to_ball_frame(const Vec3& spin_world, const std::vector<Vec3>& traj);

// Ball-frame spin of a prediction, converting with the predicted
// trajectory when the model predicts world-frame spin.
Vec3 predicted_ball_spin(const SptConfig& cfg, const ModelOutput& out);

}  // namespace spinsight
