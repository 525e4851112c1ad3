#include "spinsight/camera.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>

#include "spinsight/errors.hpp"
#include "spinsight/physics.hpp"

namespace spinsight {

namespace {

using Vector12 = Eigen::Matrix<double, 12, 1>;
using Matrix12 = Eigen::Matrix<double, 12, 12>;

double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

Eigen::Vector4d homogeneous(const Vec3& r) { return {r.x, r.y, r.z, 1.0}; }

ProjectionMatrix unflatten(const Vector12& p) {
  ProjectionMatrix m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) m(i, j) = p(4 * i + j);
  return m;
}

Vector12 flatten(const ProjectionMatrix& m) {
  Vector12 p;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) p(4 * i + j) = m(i, j);
  return p;
}

// Similarity transforms for Hartley normalization.
struct Normalization {
  Eigen::Matrix3d t2 = Eigen::Matrix3d::Identity();
  Eigen::Matrix4d t3 = Eigen::Matrix4d::Identity();
  double scale2 = 1.0;
};

Normalization hartley(std::span<const Correspondence> corr) {
  const double n = static_cast<double>(corr.size());
  Eigen::Vector2d c2 = Eigen::Vector2d::Zero();
  Eigen::Vector3d c3 = Eigen::Vector3d::Zero();
  for (const auto& c : corr) {
    c2 += Eigen::Vector2d(c.pixel.u, c.pixel.v);
    c3 += Eigen::Vector3d(c.world.x, c.world.y, c.world.z);
  }
  c2 /= n;
  c3 /= n;
  double ss2 = 0.0;
  double ss3 = 0.0;
  for (const auto& c : corr) {
    ss2 += (Eigen::Vector2d(c.pixel.u, c.pixel.v) - c2).squaredNorm();
    ss3 += (Eigen::Vector3d(c.world.x, c.world.y, c.world.z) - c3)
               .squaredNorm();
  }
  const double rms2 = std::sqrt(ss2 / n);
  const double rms3 = std::sqrt(ss3 / n);
  if (!(rms2 > 0.0) || !(rms3 > 0.0)) {
    throw DegenerateConfiguration("all points coincide");
  }
  Normalization out;
  const double s2 = std::sqrt(2.0) / rms2;
  const double s3 = std::sqrt(3.0) / rms3;
  out.scale2 = s2;
  out.t2 << s2, 0, -s2 * c2.x(), 0, s2, -s2 * c2.y(), 0, 0, 1;
  out.t3.setIdentity();
  out.t3.topLeftCorner<3, 3>() *= s3;
  out.t3.topRightCorner<3, 1>() = -s3 * c3;
  return out;
}

struct NormalizedPoint {
  Eigen::Vector4d world;
  Eigen::Vector2d pixel;
};

std::vector<NormalizedPoint> normalize_points(
    std::span<const Correspondence> corr, const Normalization& nrm) {
  std::vector<NormalizedPoint> out;
  out.reserve(corr.size());
  for (const auto& c : corr) {
    const Eigen::Vector3d x = nrm.t2 * Eigen::Vector3d(c.pixel.u, c.pixel.v, 1);
    out.push_back({nrm.t3 * homogeneous(c.world), x.head<2>()});
  }
  return out;
}

// Sum of squared residuals in normalized image space and its gradient.
double objective(const Vector12& p, const std::vector<NormalizedPoint>& pts,
                 Vector12* grad) {
  double f = 0.0;
  if (grad) grad->setZero();
  for (const auto& pt : pts) {
    const double y0 = p.segment<4>(0).dot(pt.world);
    const double y1 = p.segment<4>(4).dot(pt.world);
    const double y2 = p.segment<4>(8).dot(pt.world);
    if (y2 == 0.0) return std::numeric_limits<double>::infinity();
    const double u = y0 / y2;
    const double v = y1 / y2;
    const double eu = u - pt.pixel.x();
    const double ev = v - pt.pixel.y();
    f += eu * eu + ev * ev;
    if (grad) {
      const double inv = 2.0 / y2;
      grad->segment<4>(0) += (inv * eu) * pt.world;
      grad->segment<4>(4) += (inv * ev) * pt.world;
      grad->segment<4>(8) -= (inv * (eu * u + ev * v)) * pt.world;
    }
  }
  return f;
}

}  // namespace

CameraModel::CameraModel(const ProjectionMatrix& p, ImageSize image_size)
    : image_size_(image_size) {
  const double fro = p.norm();
  if (!(fro > 0.0) || !std::isfinite(fro)) {
    throw DegenerateConfiguration("projection matrix has zero or non-finite norm");
  }
  // Matrices already at unit norm are kept bit-exact so stored cameras
  // survive a save/load cycle unchanged.
  const bool unit = std::abs(fro - 1.0) <= 8.0 * std::numeric_limits<double>::epsilon();
  p_ = unit ? p : ProjectionMatrix(p / fro);
  if (p_(2, 3) < 0.0) p_ = -p_;
}

double CameraModel::depth(const Vec3& r) const {
  return p_.row(2).dot(homogeneous(r));
}

std::array<Vec3, kNumTableKeypoints> table_keypoints_3d() {
  const TableGeometry t;
  const double hx = t.half_length();
  const double hy = t.half_width();
  const double post_y = hy + t.net_overhang;
  return {{
      {-hx, -hy, 0.0},
      {hx, -hy, 0.0},
      {hx, hy, 0.0},
      {-hx, hy, 0.0},
      {0.0, -hy, 0.0},
      {0.0, hy, 0.0},
      {-hx, 0.0, 0.0},
      {hx, 0.0, 0.0},
      {0.0, 0.0, 0.0},
      {0.0, -post_y, t.net_height},
      {0.0, post_y, t.net_height},
      {0.0, -post_y, 0.0},
      {0.0, post_y, 0.0},
  }};
}

Pixel project(const ProjectionMatrix& p, const Vec3& r) {
  const Eigen::Vector3d y = p * homogeneous(r);
  if (!(y.z() > 0.0)) {
    throw BehindCamera("homogeneous depth " + std::to_string(y.z()));
  }
  return {y.x() / y.z(), y.y() / y.z()};
}

Pixel project(const CameraModel& cam, const Vec3& r) {
  return project(cam.matrix(), r);
}

bool projects_inside(const CameraModel& cam, const Vec3& r,
                     const ImageSize& img) {
  const Eigen::Vector3d y = cam.matrix() * homogeneous(r);
  if (!(y.z() > 0.0)) return false;
  const double u = y.x() / y.z();
  const double v = y.y() / y.z();
  return u >= 0.0 && u < img.width && v >= 0.0 && v < img.height;
}

CameraModel make_camera(const LookAtCamera& c, ImageSize img) {
  const Eigen::Vector3d pos(c.position.x, c.position.y, c.position.z);
  const Eigen::Vector3d tgt(c.target.x, c.target.y, c.target.z);
  const Eigen::Vector3d forward = (tgt - pos).normalized();
  const Eigen::Vector3d up(0, 0, 1);
  Eigen::Vector3d right = forward.cross(up);
  if (right.norm() < 1e-12) throw DegenerateConfiguration("camera looks straight down");
  right.normalize();
  Eigen::Vector3d down = forward.cross(right);
  const double cr = std::cos(c.roll_rad);
  const double sr = std::sin(c.roll_rad);
  const Eigen::Vector3d right_r = cr * right + sr * down;
  const Eigen::Vector3d down_r = -sr * right + cr * down;

  Eigen::Matrix3d rot;
  rot.row(0) = right_r;
  rot.row(1) = down_r;
  rot.row(2) = forward;
  Eigen::Matrix3d k;
  k << c.focal_px, 0, c.principal.u, 0, c.focal_px, c.principal.v, 0, 0, 1;
  ProjectionMatrix ext;
  ext.leftCols<3>() = rot;
  ext.col(3) = -rot * pos;
  return CameraModel(k * ext, img);
}

CameraModel default_camera(ImageSize img) {
  LookAtCamera c;
  c.position = {-8.0, 0.0, 2.6};
  c.target = {0.0, 0.0, 0.0};
  c.focal_px = 1.2 * img.width;
  c.principal = {0.5 * img.width, 0.5 * img.height};
  return make_camera(c, img);
}

CameraModel sample_camera(Rng& rng, ImageSize img,
                          const CameraSamplerRanges& ranges) {
  const auto keypoints = table_keypoints_3d();
  for (int attempt = 0; attempt < ranges.max_attempts; ++attempt) {
    LookAtCamera c;
    c.focal_px = uniform(rng, ranges.focal_min, ranges.focal_max) * img.width;
    c.principal = {
        img.width * (0.5 + uniform(rng, -ranges.principal_jitter,
                                   ranges.principal_jitter)),
        img.height * (0.5 + uniform(rng, -ranges.principal_jitter,
                                    ranges.principal_jitter))};
    const double dist = uniform(rng, ranges.distance_min, ranges.distance_max);
    const double azimuth = deg_to_rad(
        uniform(rng, -ranges.azimuth_max_deg, ranges.azimuth_max_deg));
    const double height = uniform(rng, ranges.height_min, ranges.height_max);
    const double horizontal = std::sqrt(dist * dist - height * height);
    c.position = {-horizontal * std::cos(azimuth),
                  horizontal * std::sin(azimuth), height};
    c.target = {uniform(rng, -ranges.target_jitter, ranges.target_jitter),
                uniform(rng, -ranges.target_jitter, ranges.target_jitter),
                uniform(rng, -ranges.target_jitter, ranges.target_jitter)};
    c.roll_rad =
        deg_to_rad(uniform(rng, -ranges.roll_max_deg, ranges.roll_max_deg));
    const CameraModel cam = make_camera(c, img);
    const bool all_inside =
        std::all_of(keypoints.begin(), keypoints.end(), [&](const Vec3& k) {
          return projects_inside(cam, k, img);
        });
    if (all_inside) return cam;
  }
  throw SamplingExhausted("no camera with all keypoints in frame after " +
                          std::to_string(ranges.max_attempts) + " attempts");
}

double coplanarity_measure(std::span<const Vec3> points) {
  if (points.empty()) return 0.0;
  Eigen::MatrixXd m(static_cast<Eigen::Index>(points.size()), 3);
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : points) mean += Eigen::Vector3d(p.x, p.y, p.z);
  mean /= static_cast<double>(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    m.row(static_cast<Eigen::Index>(i)) =
        Eigen::Vector3d(points[i].x, points[i].y, points[i].z) - mean;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

CameraModel dlt(std::span<const Correspondence> corr, ImageSize img) {
  if (corr.size() < 6) {
    throw DegenerateConfiguration("DLT needs at least 6 correspondences, got " +
                                  std::to_string(corr.size()));
  }
  const Normalization nrm = hartley(corr);
  const auto pts = normalize_points(corr, nrm);

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * static_cast<Eigen::Index>(pts.size()), 12);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(2 * i);
    const Eigen::RowVector4d x = pts[i].world.transpose();
    a.block<1, 4>(r, 0) = x;
    a.block<1, 4>(r, 8) = -pts[i].pixel.x() * x;
    a.block<1, 4>(r + 1, 4) = x;
    a.block<1, 4>(r + 1, 8) = -pts[i].pixel.y() * x;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (!(sv(10) > 1e-9 * sv(0))) {
    throw DegenerateConfiguration("design matrix null space has dimension > 1");
  }
  const Vector12 p = svd.matrixV().col(11);
  const ProjectionMatrix p_norm = unflatten(p);
  const ProjectionMatrix p_pix = nrm.t2.inverse() * p_norm * nrm.t3;

  Eigen::JacobiSVD<Eigen::Matrix3d> left(p_pix.leftCols<3>());
  const auto& lsv = left.singularValues();
  if (!(lsv(2) > 1e-9 * lsv(0))) {
    throw DegenerateConfiguration("recovered camera has rank-deficient rotation block");
  }
  return CameraModel(p_pix, img);
}

double mean_squared_reprojection(const ProjectionMatrix& p,
                                 std::span<const Correspondence> corr) {
  double sum = 0.0;
  for (const auto& c : corr) {
    const Eigen::Vector3d y = p * homogeneous(c.world);
    const double du = y.x() / y.z() - c.pixel.u;
    const double dv = y.y() / y.z() - c.pixel.v;
    sum += du * du + dv * dv;
  }
  return sum / static_cast<double>(corr.size());
}

double mean_reprojection_error(const CameraModel& cam,
                               std::span<const Correspondence> corr) {
  double sum = 0.0;
  for (const auto& c : corr) sum += distance(project(cam, c.world), c.pixel);
  return sum / static_cast<double>(corr.size());
}

double max_reprojection_error(const CameraModel& cam,
                              std::span<const Correspondence> corr) {
  double worst = 0.0;
  for (const auto& c : corr) {
    worst = std::max(worst, distance(project(cam, c.world), c.pixel));
  }
  return worst;
}

CameraModel refine_bfgs(const CameraModel& p0,
                        std::span<const Correspondence> corr,
                        const BfgsOptions& options, BfgsReport* report) {
  BfgsReport local;
  BfgsReport& rep = report ? *report : local;
  rep = {};
  if (corr.empty()) return p0;

  // Optimize in Hartley-normalized coordinates; the pixel-space objective
  // is the normalized one divided by (n * scale^2).
  const Normalization nrm = hartley(corr);
  const auto pts = normalize_points(corr, nrm);
  const double to_pixels =
      1.0 / (static_cast<double>(corr.size()) * nrm.scale2 * nrm.scale2);

  ProjectionMatrix start = nrm.t2 * p0.matrix() * nrm.t3.inverse();
  start /= start.norm();
  Vector12 x = flatten(start);

  Vector12 g;
  double f = objective(x, pts, &g) * to_pixels;
  g *= to_pixels;
  rep.initial_error = f;
  Vector12 best_x = x;
  double best_f = f;

  Matrix12 h = Matrix12::Identity();
  bool scaled = false;
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    if (!std::isfinite(f)) break;
    if (g.norm() < options.gradient_tolerance) {
      rep.converged = true;
      break;
    }
    Vector12 dir = -h * g;
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      h.setIdentity();
      dir = -g;
      slope = -g.squaredNorm();
    }

    // Backtracking line search with the Armijo condition.
    double step = 1.0;
    Vector12 x_new;
    Vector12 g_new;
    double f_new = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = x + step * dir;
      f_new = objective(x_new, pts, &g_new) * to_pixels;
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    g_new *= to_pixels;

    const Vector12 s = x_new - x;
    const Vector12 y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-300) {
      if (!scaled) {
        h *= sy / y.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Matrix12 i_rsy = Matrix12::Identity() - rho * s * y.transpose();
      h = i_rsy * h * i_rsy.transpose() + rho * s * s.transpose();
    }
    const double decrease = f - f_new;
    x = x_new;
    f = f_new;
    g = g_new;
    if (decrease <= options.function_tolerance * std::max({std::abs(f), 1.0})) {
      rep.converged = true;
      ++it;
      if (f < best_f) {
        best_f = f;
        best_x = x;
      }
      break;
    }
    if (f < best_f) {
      best_f = f;
      best_x = x;
    }
  }
  rep.iterations = it;
  rep.final_error = best_f;
  if (best_f >= rep.initial_error) return p0;
  const ProjectionMatrix refined =
      nrm.t2.inverse() * unflatten(best_x) * nrm.t3;
  return CameraModel(refined, p0.image_size());
}

CalibrationResult calibrate_ransac(std::span<const Correspondence> corr,
                                   Rng& rng, ImageSize img,
                                   const RansacOptions& options) {
  const std::size_t n = corr.size();
  const auto k = static_cast<std::size_t>(options.sample_size);
  if (n < k) {
    throw CalibrationFailed("need at least " + std::to_string(k) +
                            " correspondences");
  }

  auto count_inliers = [&](const CameraModel& cam, std::vector<bool>& mask) {
    mask.assign(n, false);
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (cam.depth(corr[i].world) <= 0.0) continue;
      if (distance(project(cam, corr[i].world), corr[i].pixel) <=
          options.inlier_threshold_px) {
        mask[i] = true;
        ++count;
      }
    }
    return count;
  };

  const std::uint64_t base_seed = rng();
  CalibrationResult best;
  std::vector<bool> mask;
  std::vector<std::size_t> order(n);
  std::vector<Correspondence> subset(k);
  std::vector<Vec3> subset_world(k);

  for (int iter = 0; iter < options.iterations; ++iter) {
    Rng it_rng(derive_seed(base_seed, static_cast<std::uint64_t>(iter)));
    // Draws are repeated until the minimal set admits a unique linear fit;
    // coplanar and collinear-heavy subsets are rejected here.
    std::optional<CameraModel> linear;
    for (int draw = 0; draw < options.max_draws_per_iteration && !linear; ++draw) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      for (std::size_t i = 0; i < k; ++i) {
        const auto j = static_cast<std::size_t>(
            uniform_int(it_rng, static_cast<long>(i), static_cast<long>(n - 1)));
        std::swap(order[i], order[j]);
      }
      for (std::size_t i = 0; i < k; ++i) subset_world[i] = corr[order[i]].world;
      if (!(coplanarity_measure(subset_world) > options.coplanarity_tolerance)) continue;
      for (std::size_t i = 0; i < k; ++i) subset[i] = corr[order[i]];
      try {
        linear = dlt(subset, img);
      } catch (const DegenerateConfiguration&) {
      }
    }
    if (!linear) continue;
    const CameraModel model = refine_bfgs(*linear, subset, options.bfgs);
    const std::size_t inliers = count_inliers(model, mask);
    if (inliers > best.inlier_count) {
      best.inlier_count = inliers;
      best.inliers = mask;
      best.camera = model;
      best.best_iteration = iter;
    }
  }

  const auto needed =
      static_cast<std::size_t>(std::max(options.min_inliers, options.sample_size));
  if (best.inlier_count < needed) {
    throw CalibrationFailed("best model has " +
                            std::to_string(best.inlier_count) + " inliers, need " +
                            std::to_string(needed));
  }

  std::vector<Correspondence> inlier_set;
  for (std::size_t i = 0; i < n; ++i) {
    if (best.inliers[i]) inlier_set.push_back(corr[i]);
  }
  CameraModel start = best.camera;
  try {
    start = dlt(inlier_set, img);
  } catch (const DegenerateConfiguration&) {
    // Inlier set alone does not pin down the camera linearly; keep the
    // minimal-sample model as the starting point.
  }
  best.camera = refine_bfgs(start, inlier_set, options.bfgs);
  best.mean_error_inliers = mean_reprojection_error(best.camera, inlier_set);
  return best;
}

}  // namespace spinsight
