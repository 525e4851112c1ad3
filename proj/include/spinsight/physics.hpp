#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "spinsight/geometry.hpp"

namespace spinsight {

class CameraModel;
struct ImageSize;

// ITTF table. The world origin sits at the table center on the playing
// surface, so the surface is z = 0 and the floor is z = -height.
struct TableGeometry {
  double length = 2.74;
  double width = 1.525;
  double height = 0.76;
  double net_height = 0.1525;
  double net_overhang = 0.1525;

  double half_length() const { return 0.5 * length; }
  double half_width() const { return 0.5 * width; }
  bool contains(double x, double y) const {
    return std::abs(x) <= half_length() && std::abs(y) <= half_width();
  }
};

struct PhysicsParams {
  double gravity = 9.81;     // m/s^2
  double mass = 0.0027;      // kg
  double radius = 0.02;      // m
  double k_drag = 0.141;     // 1/m, a_drag = -k_drag |v| v
  double k_magnus = 5.4e-5;  // F = k_magnus (w x v), w in Hz
  double k_friction = 1.35e-5;  // bounce impulse per Hz of spin
  double restitution = 0.89;    // vertical
  double spin_retention = 0.7;  // w scaled by this at bounce
  double dt = 1.0 / 500.0;      // fine integration step, s
  int frame_stride = 10;        // fine steps per output frame (50 Hz)
  double x_limit = 2.5;         // |x| beyond which simulation stops, m
  TableGeometry table;

  double frame_dt() const { return dt * frame_stride; }

  // Throws UsageError when an invariant is violated.
  void validate() const;
  // Stable text dump used for hashing and config echo.
  std::string canonical_text() const;
};

struct BallState {
  Vec3 r;  // m
  Vec3 v;  // m/s
  Vec3 w;  // Hz, world frame
  double t = 0.0;
};

enum class Termination {
  kNone,
  kInvalidStart,
  kSecondBounce,
  kBelowTable,
  kOutOfRange,
  kTimeLimit,
};

const char* to_string(Termination t);

struct Trajectory {
  std::vector<BallState> fine;    // every dt
  std::vector<BallState> frames;  // every frame_stride-th fine sample
  // Index of the first fine sample after the bounce.
  std::optional<std::size_t> bounce_index;
  std::optional<Vec3> bounce_point;
  double bounce_time = 0.0;
  int bounce_count = 0;  // table contacts seen, including the terminating one
  int frame_stride = 10;
  Termination termination = Termination::kNone;

  bool empty() const { return fine.empty(); }
  // First frame at or after the bounce.
  std::optional<std::size_t> bounce_frame() const;
};

Vec3 acceleration(const BallState& s, const PhysicsParams& p);

// Classical RK4 on (r, v); spin is constant in flight.
BallState step_rk4(const BallState& s, double dt, const PhysicsParams& p);

// Instantaneous table bounce. Throws NotInContact unless the ball touches
// the table surface while moving down.
BallState bounce(const BallState& s, const PhysicsParams& p);

Trajectory simulate(const BallState& init, const PhysicsParams& p,
                    double max_t = 2.0);

struct ValidityRules {
  std::size_t min_frames = 8;
  std::size_t max_frames = 40;
};

bool is_valid(const Trajectory& traj, const CameraModel& cam,
              const ImageSize& img, const PhysicsParams& p = {},
              const ValidityRules& rules = {});

}  // namespace spinsight
