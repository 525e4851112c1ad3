#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spinsight/autograd.hpp"
#include "spinsight/camera.hpp"
#include "spinsight/datagen.hpp"
#include "spinsight/geometry.hpp"
#include "spinsight/spt.hpp"

namespace spinsight {

// Mean of ||pred - gt|| over trajectories, Hz. Throws EmptySet.
double spin_error(std::span<const Vec3> preds, std::span<const Vec3> gts);

// Mean over trajectories of the per-trajectory mean 3D distance, m.
// Throws EmptySet and LengthMismatch.
double traj_error_world(const std::vector<std::vector<Vec3>>& preds,
                        const std::vector<std::vector<Vec3>>& gts);

// sign(w) with 0 for exact zero.
int spin_sign(double omega_y);

// Fraction of trajectories whose predicted sign equals the class (+1 topspin,
// -1 backspin). A zero prediction never matches.
double spin_sign_accuracy(std::span<const int> classes,
                          std::span<const double> omega_y);

double macro_f1(std::span<const int> classes, std::span<const double> omega_y);

struct RocPoint {
  double threshold;  // Hz; predict topspin when score >= threshold
  double fpr;
  double tpr;
};

struct RocResult {
  double auc = 0.0;
  std::vector<RocPoint> curve;  // from (0,0) at +inf to (1,1)
};

// Topspin is the positive class and omega_y the score. AUC by pairwise
// counting with ties worth one half. Throws SingleClass.
RocResult roc_auc(std::span<const int> classes, std::span<const double> omega_y);

// Trapezoid area under a curve sorted by increasing fpr.
double auc_trapezoid(const std::vector<RocPoint>& curve);

// rows: annotated class (0 backspin, 1 topspin); cols: predicted sign.
// Zero predictions land in the column of the opposite class.
using Confusion = std::array<std::array<std::int64_t, 2>, 2>;
Confusion confusion(std::span<const int> classes, std::span<const double> omega_y);

// Mean 2D distance between projected predictions and observations for one
// trajectory, px.
double mean_pixel_error(const CameraModel& cam, const std::vector<Vec3>& pred,
                        const std::vector<Pixel>& observed);

// Mean over trajectories of the per-trajectory pixel error divided by the
// image diagonal (a fraction, not a percentage).
double reproj_error_rel(const std::vector<std::vector<Vec3>>& preds,
                        const std::vector<std::vector<Pixel>>& observed,
                        const std::vector<CameraModel>& cams);

struct MetricReport {
  std::size_t n = 0;
  std::optional<double> spin_error_hz;
  std::optional<double> zero_baseline_hz;
  std::optional<double> traj_error_world_cm;
  double spin_sign_accuracy = 0.0;
  double macro_f1 = 0.0;
  std::optional<double> roc_auc;
  std::optional<double> reproj_error_rel_pct;
  Confusion confusion{};
  std::vector<RocPoint> roc_curve;

  std::string to_json() const;
  std::string to_csv() const;
};

struct PredictionRecord {
  std::string id;
  int spin_class = 0;
  ModelOutput output;
  Vec3 spin_ball;  // predicted, ball frame
};

struct EvalOptions {
  // Calibrate each sample's camera from its table keypoints to score the
  // 2D reprojection; the RANSAC stream is seeded from seed and the index.
  bool reprojection = true;
  std::uint64_t seed = 0;
};

struct EvalResult {
  MetricReport report;
  std::vector<PredictionRecord> predictions;
};

// Class label of a record: the annotation when present, else the sign of
// the ground-truth ball-frame topspin component.
int record_spin_class(const SampleRecord& rec);

EvalResult evaluate(const SptConfig& cfg, const ag::Parameters& params,
                    const std::vector<SampleRecord>& records,
                    const EvalOptions& options = {});

// Spin error of the model on records with ground truth.
double validation_spin_error(const SptConfig& cfg, const ag::Parameters& params,
                             const std::vector<SampleRecord>& records);

}  // namespace spinsight
