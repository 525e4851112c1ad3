#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "spinsight/geometry.hpp"
#include "spinsight/rng.hpp"

namespace spinsight {

struct ImageSize {
  int width = 2560;
  int height = 1440;

  double diagonal() const {
    return std::sqrt(static_cast<double>(width) * width +
                     static_cast<double>(height) * height);
  }
  friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

struct Pixel {
  double u = 0.0;
  double v = 0.0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

inline double distance(const Pixel& a, const Pixel& b) {
  return std::hypot(a.u - b.u, a.v - b.v);
}

using ProjectionMatrix = Eigen::Matrix<double, 3, 4>;

// 3x4 projective camera, stored with unit Frobenius norm and the sign
// chosen so that the table center (world origin) has positive depth.
class CameraModel {
 public:
  CameraModel() = default;
  CameraModel(const ProjectionMatrix& p, ImageSize image_size);

  const ProjectionMatrix& matrix() const { return p_; }
  ImageSize image_size() const { return image_size_; }

  // Homogeneous depth of a world point (sign of the third row product).
  double depth(const Vec3& r) const;

 private:
  ProjectionMatrix p_ = ProjectionMatrix::Zero();
  ImageSize image_size_;
};

struct Correspondence {
  Vec3 world;
  Pixel pixel;
};

inline constexpr std::size_t kNumTableKeypoints = 13;

// Canonical keypoint order:
//   0-3   table-top corners (-x,-y), (+x,-y), (+x,+y), (-x,+y)
//   4-5   long-edge midpoints where the net line meets the edges, -y then +y
//   6-7   short-edge midpoints (center-line endpoints), -x then +x
//   8     table center
//   9-10  net-post tops, -y then +y
//   11-12 net-post bases, -y then +y
std::array<Vec3, kNumTableKeypoints> table_keypoints_3d();

// Throws BehindCamera when the homogeneous depth is not positive.
Pixel project(const CameraModel& cam, const Vec3& r);
Pixel project(const ProjectionMatrix& p, const Vec3& r);

// True when the point is in front of the camera and inside [0,W)x[0,H).
bool projects_inside(const CameraModel& cam, const Vec3& r,
                     const ImageSize& img);

struct LookAtCamera {
  Vec3 position;
  Vec3 target;
  double focal_px = 0.0;
  Pixel principal;
  double roll_rad = 0.0;
};

CameraModel make_camera(const LookAtCamera& c, ImageSize img);

// Frozen evaluation camera: 8 m behind the table, 2.6 m above the surface,
// aimed at the table center, focal length 1.2 W.
CameraModel default_camera(ImageSize img = {});

struct CameraSamplerRanges {
  double focal_min = 0.8;  // multiples of image width
  double focal_max = 1.6;
  double principal_jitter = 0.02;  // fraction of W / H
  double distance_min = 6.0;       // m from table center
  double distance_max = 10.0;
  double azimuth_max_deg = 25.0;  // around the -x axis
  double height_min = 1.5;        // m above the table plane
  double height_max = 4.5;
  double target_jitter = 0.3;  // m, per axis
  double roll_max_deg = 3.0;
  int max_attempts = 1000;
};

// Samples a broadcast-like camera with every table keypoint in frame.
// Throws SamplingExhausted after max_attempts rejections.
CameraModel sample_camera(Rng& rng, ImageSize img,
                          const CameraSamplerRanges& ranges = {});

// Normalized direct linear transform. Throws DegenerateConfiguration for
// fewer than six points or rank-deficient designs.
CameraModel dlt(std::span<const Correspondence> corr, ImageSize img = {});

struct BfgsOptions {
  double gradient_tolerance = 1e-10;
  // Stops when an accepted step lowers the objective (px^2) by less than
  // this times max(|f|, 1).
  double function_tolerance = 1e-14;
  int max_iterations = 500;
};

struct BfgsReport {
  int iterations = 0;
  double initial_error = 0.0;  // mean squared pixel error
  double final_error = 0.0;
  bool converged = false;
};

// Minimizes the mean squared pixel reprojection error over the twelve
// matrix entries. Returns the best iterate.
CameraModel refine_bfgs(const CameraModel& p0,
                        std::span<const Correspondence> corr,
                        const BfgsOptions& options = {},
                        BfgsReport* report = nullptr);

double mean_squared_reprojection(const ProjectionMatrix& p,
                                 std::span<const Correspondence> corr);
double mean_reprojection_error(const CameraModel& cam,
                               std::span<const Correspondence> corr);
double max_reprojection_error(const CameraModel& cam,
                              std::span<const Correspondence> corr);

struct RansacOptions {
  int iterations = 100;
  int sample_size = 6;
  // A minimal sample nearly always fits its own six points, so support has
  // to extend beyond it.
  int min_inliers = 7;
  double inlier_threshold_px = 3.0;
  double coplanarity_tolerance = 1e-6;
  int max_draws_per_iteration = 1000;
  BfgsOptions bfgs;
};

struct CalibrationResult {
  CameraModel camera;
  std::vector<bool> inliers;
  std::size_t inlier_count = 0;
  int best_iteration = -1;
  double mean_error_inliers = 0.0;  // px
};

// Robust calibration from the table keypoints. Throws CalibrationFailed
// when fewer than min_inliers inliers are found.
CalibrationResult calibrate_ransac(std::span<const Correspondence> corr,
                                   Rng& rng, ImageSize img = {},
                                   const RansacOptions& options = {});

// Smallest singular value of the mean-centered point matrix.
double coplanarity_measure(std::span<const Vec3> points);

}  // namespace spinsight
