#include "spinsight/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "spinsight/errors.hpp"
#include "spinsight/parallel.hpp"

namespace spinsight {

namespace {

void check_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw LengthMismatch(std::string(what) + ": " + std::to_string(a) + " vs " +
                         std::to_string(b));
  }
}

int class_index(int c) { return c > 0 ? 1 : 0; }

}  // namespace

double spin_error(std::span<const Vec3> preds, std::span<const Vec3> gts) {
  check_lengths(preds.size(), gts.size(), "spin_error");
  if (preds.empty()) throw EmptySet("spin_error over no trajectories");
  double s = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) s += norm(preds[i] - gts[i]);
  return s / static_cast<double>(preds.size());
}

double traj_error_world(const std::vector<std::vector<Vec3>>& preds,
                        const std::vector<std::vector<Vec3>>& gts) {
  check_lengths(preds.size(), gts.size(), "traj_error_world");
  if (preds.empty()) throw EmptySet("traj_error_world over no trajectories");
  double total = 0.0;
  for (std::size_t j = 0; j < preds.size(); ++j) {
    check_lengths(preds[j].size(), gts[j].size(), "traj_error_world trajectory");
    if (preds[j].empty()) throw EmptySet("empty trajectory");
    double s = 0.0;
    for (std::size_t i = 0; i < preds[j].size(); ++i) s += norm(preds[j][i] - gts[j][i]);
    total += s / static_cast<double>(preds[j].size());
  }
  return total / static_cast<double>(preds.size());
}

int spin_sign(double omega_y) { return omega_y > 0.0 ? 1 : (omega_y < 0.0 ? -1 : 0); }

double spin_sign_accuracy(std::span<const int> classes, std::span<const double> omega_y) {
  check_lengths(classes.size(), omega_y.size(), "spin_sign_accuracy");
  if (classes.empty()) throw EmptySet("spin_sign_accuracy over no trajectories");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    hits += spin_sign(omega_y[i]) == classes[i] ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(classes.size());
}

double macro_f1(std::span<const int> classes, std::span<const double> omega_y) {
  check_lengths(classes.size(), omega_y.size(), "macro_f1");
  if (classes.empty()) throw EmptySet("macro_f1 over no trajectories");
  double sum = 0.0;
  int counted = 0;
  for (const int c : {1, -1}) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < classes.size(); ++i) {
      const bool pred = spin_sign(omega_y[i]) == c;
      const bool truth = classes[i] == c;
      tp += pred && truth;
      fp += pred && !truth;
      fn += !pred && truth;
    }
    const std::size_t denom = 2 * tp + fp + fn;
    if (denom == 0) continue;
    sum += 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
    ++counted;
  }
  return counted ? sum / counted : 0.0;
}

RocResult roc_auc(std::span<const int> classes, std::span<const double> omega_y) {
  check_lengths(classes.size(), omega_y.size(), "roc_auc");
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    (classes[i] > 0 ? pos : neg).push_back(omega_y[i]);
  }
  if (pos.empty() || neg.empty()) {
    throw SingleClass("roc_auc needs both topspin and backspin samples");
  }
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());

  // Pairwise counting via sorted merge: for each positive, negatives below
  // count 1 and equal ones count 1/2.
  double wins = 0.0;
  for (const double s : pos) {
    const auto lo = std::lower_bound(neg.begin(), neg.end(), s);
    const auto hi = std::upper_bound(neg.begin(), neg.end(), s);
    wins += static_cast<double>(lo - neg.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  RocResult r;
  r.auc = wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));

  std::vector<double> thresholds(omega_y.begin(), omega_y.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  const double np = static_cast<double>(pos.size());
  const double nn = static_cast<double>(neg.size());
  r.curve.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  for (const double t : thresholds) {
    const auto tp = static_cast<double>(pos.end() - std::lower_bound(pos.begin(), pos.end(), t));
    const auto fp = static_cast<double>(neg.end() - std::lower_bound(neg.begin(), neg.end(), t));
    r.curve.push_back({t, fp / nn, tp / np});
  }
  return r;
}

double auc_trapezoid(const std::vector<RocPoint>& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    area += (curve[i].fpr - curve[i - 1].fpr) * 0.5 * (curve[i].tpr + curve[i - 1].tpr);
  }
  return area;
}

Confusion confusion(std::span<const int> classes, std::span<const double> omega_y) {
  check_lengths(classes.size(), omega_y.size(), "confusion");
  Confusion m{};
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const int row = class_index(classes[i]);
    const int s = spin_sign(omega_y[i]);
    const int col = s == 0 ? 1 - row : class_index(s);
    ++m[row][col];
  }
  return m;
}

double mean_pixel_error(const CameraModel& cam, const std::vector<Vec3>& pred,
                        const std::vector<Pixel>& observed) {
  check_lengths(pred.size(), observed.size(), "reprojection");
  if (pred.empty()) throw EmptySet("empty trajectory");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    s += distance(project(cam, pred[i]), observed[i]);
  }
  return s / static_cast<double>(pred.size());
}

double reproj_error_rel(const std::vector<std::vector<Vec3>>& preds,
                        const std::vector<std::vector<Pixel>>& observed,
                        const std::vector<CameraModel>& cams) {
  check_lengths(preds.size(), observed.size(), "reproj_error_rel");
  check_lengths(preds.size(), cams.size(), "reproj_error_rel cameras");
  if (preds.empty()) throw EmptySet("reproj_error_rel over no trajectories");
  double total = 0.0;
  for (std::size_t j = 0; j < preds.size(); ++j) {
    total += mean_pixel_error(cams[j], preds[j], observed[j]) /
             cams[j].image_size().diagonal();
  }
  return total / static_cast<double>(preds.size());
}

// --- report ----------------------------------------------------------------

std::string MetricReport::to_json() const {
  nlohmann::ordered_json j;
  auto opt = [](const std::optional<double>& x) {
    return x ? nlohmann::ordered_json(*x) : nlohmann::ordered_json(nullptr);
  };
  j["n"] = n;
  j["spin_error_hz"] = opt(spin_error_hz);
  j["zero_baseline_hz"] = opt(zero_baseline_hz);
  j["traj_error_world_cm"] = opt(traj_error_world_cm);
  j["spin_sign_accuracy"] = spin_sign_accuracy;
  j["macro_f1"] = macro_f1;
  j["roc_auc"] = opt(roc_auc);
  j["reproj_error_rel_pct"] = opt(reproj_error_rel_pct);
  j["confusion"] = {{"rows", "annotated backspin, topspin"},
                    {"cols", "predicted backspin, topspin"},
                    {"counts", {{confusion[0][0], confusion[0][1]},
                                {confusion[1][0], confusion[1][1]}}}};
  auto curve = nlohmann::ordered_json::array();
  for (const auto& p : roc_curve) {
    curve.push_back({{"threshold_hz", std::isfinite(p.threshold)
                                          ? nlohmann::ordered_json(p.threshold)
                                          : nlohmann::ordered_json("inf")},
                     {"fpr", p.fpr},
                     {"tpr", p.tpr}});
  }
  j["roc_curve"] = curve;
  return j.dump(2) + "\n";
}

std::string MetricReport::to_csv() const {
  std::ostringstream os;
  os << std::setprecision(10);
  auto opt = [&](const std::optional<double>& x) {
    if (x) os << *x;
  };
  os << "n,spin_error_hz,zero_baseline_hz,traj_error_world_cm,spin_sign_accuracy,"
        "macro_f1,roc_auc,reproj_error_rel_pct\n";
  os << n << ',';
  opt(spin_error_hz);
  os << ',';
  opt(zero_baseline_hz);
  os << ',';
  opt(traj_error_world_cm);
  os << ',' << spin_sign_accuracy << ',' << macro_f1 << ',';
  opt(roc_auc);
  os << ',';
  opt(reproj_error_rel_pct);
  os << '\n';
  return os.str();
}

// --- model evaluation ------------------------------------------------------

int record_spin_class(const SampleRecord& rec) {
  if (rec.spin_class) return *rec.spin_class;
  if (rec.gt_spin_ball) return rec.gt_spin_ball->y >= 0.0 ? 1 : -1;
  throw ShapeMismatch("record " + rec.id + " has neither a spin class nor ground truth");
}

EvalResult evaluate(const SptConfig& cfg, const ag::Parameters& params,
                    const std::vector<SampleRecord>& records,
                    const EvalOptions& options) {
  if (records.empty()) throw EmptySet("no records to evaluate");
  const std::size_t n = records.size();
  EvalResult res;
  res.predictions.resize(n);
  std::vector<std::optional<CameraModel>> cams(n);
  parallel_for(n, [&](std::size_t i) {
    const SampleRecord& rec = records[i];
    PredictionRecord& p = res.predictions[i];
    p.id = rec.id;
    p.spin_class = record_spin_class(rec);
    p.output = predict(cfg, params, make_input(rec));
    p.spin_ball = predicted_ball_spin(cfg, p.output);
    if (options.reprojection) {
      std::vector<Correspondence> corr;
      const auto keypoints = table_keypoints_3d();
      for (std::size_t k = 0; k < kNumTableKeypoints; ++k) {
        corr.push_back({keypoints[k], rec.table_2d[k]});
      }
      Rng rng(derive_seed(options.seed, i, 0xca1));
      cams[i] = calibrate_ransac(corr, rng, rec.image_size).camera;
    }
  });

  MetricReport& r = res.report;
  r.n = n;
  std::vector<int> classes;
  std::vector<double> omega_y;
  for (const auto& p : res.predictions) {
    classes.push_back(p.spin_class);
    omega_y.push_back(p.spin_ball.y);
  }
  r.spin_sign_accuracy = spin_sign_accuracy(classes, omega_y);
  r.macro_f1 = macro_f1(classes, omega_y);
  r.confusion = confusion(classes, omega_y);
  const bool both = std::count(classes.begin(), classes.end(), 1) > 0 &&
                    std::count(classes.begin(), classes.end(), -1) > 0;
  if (both) {
    RocResult roc = roc_auc(classes, omega_y);
    r.roc_auc = roc.auc;
    r.roc_curve = std::move(roc.curve);
  }

  const bool gt = std::all_of(records.begin(), records.end(), [](const SampleRecord& s) {
    return s.has_ground_truth() && s.gt_spin_ball.has_value();
  });
  if (gt) {
    std::vector<Vec3> pred_spin, gt_spin, zero(n);
    std::vector<std::vector<Vec3>> pred_traj, gt_traj;
    for (std::size_t i = 0; i < n; ++i) {
      pred_spin.push_back(res.predictions[i].spin_ball);
      gt_spin.push_back(*records[i].gt_spin_ball);
      pred_traj.push_back(res.predictions[i].output.traj);
      gt_traj.push_back(records[i].gt_traj_3d);
    }
    r.spin_error_hz = spin_error(pred_spin, gt_spin);
    r.zero_baseline_hz = spin_error(zero, gt_spin);
    r.traj_error_world_cm = 100.0 * traj_error_world(pred_traj, gt_traj);
  }
  if (options.reprojection) {
    std::vector<std::vector<Vec3>> pred_traj;
    std::vector<std::vector<Pixel>> observed;
    std::vector<CameraModel> models;
    for (std::size_t i = 0; i < n; ++i) {
      pred_traj.push_back(res.predictions[i].output.traj);
      observed.push_back(records[i].ball_2d);
      models.push_back(*cams[i]);
    }
    r.reproj_error_rel_pct = 100.0 * reproj_error_rel(pred_traj, observed, models);
  }
  return res;
}

double validation_spin_error(const SptConfig& cfg, const ag::Parameters& params,
                             const std::vector<SampleRecord>& records) {
  if (records.empty()) throw EmptySet("empty validation set");
  std::vector<Vec3> pred(records.size()), gt(records.size());
  parallel_for(records.size(), [&](std::size_t i) {
    const SampleRecord& rec = records[i];
    if (!rec.gt_spin_ball) throw ShapeMismatch("validation record " + rec.id + " lacks spin");
    pred[i] = predicted_ball_spin(cfg, predict(cfg, params, make_input(rec)));
    gt[i] = *rec.gt_spin_ball;
  });
  return spin_error(pred, gt);
}

}  // namespace spinsight
