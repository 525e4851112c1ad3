#include "spinsight/physics.hpp"

#include <cmath>
#include <sstream>

#include "spinsight/camera.hpp"
#include "spinsight/errors.hpp"

namespace spinsight {

namespace {

// Contact is accepted this far above the surface to absorb the linear
// contact-time interpolation error.
constexpr double kContactTolerance = 1e-4;

struct Derivative {
  Vec3 dr;
  Vec3 dv;
};

Derivative derivative(const BallState& s, const PhysicsParams& p) {
  return {s.v, acceleration(s, p)};
}

BallState advance(const BallState& s, const Derivative& d, double h) {
  BallState out = s;
  out.r = s.r + d.dr * h;
  out.v = s.v + d.dv * h;
  out.t = s.t + h;
  return out;
}

}  // namespace

void PhysicsParams::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw UsageError(std::string("physics parameter ") + what);
  };
  require(gravity > 0, "gravity must be positive");
  require(mass > 0, "mass must be positive");
  require(radius > 0, "radius must be positive");
  require(k_drag >= 0, "k_drag must be non-negative");
  require(k_magnus >= 0, "k_magnus must be non-negative");
  require(k_friction >= 0, "k_friction must be non-negative");
  require(restitution > 0 && restitution < 1, "restitution must be in (0,1)");
  require(spin_retention > 0 && spin_retention <= 1,
          "spin_retention must be in (0,1]");
  require(dt > 0, "dt must be positive");
  require(frame_stride >= 1, "frame_stride must be >= 1");
  require(x_limit > 0, "x_limit must be positive");
}

std::string PhysicsParams::canonical_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "gravity=" << gravity << "\nmass=" << mass << "\nradius=" << radius
     << "\nk_drag=" << k_drag << "\nk_magnus=" << k_magnus
     << "\nk_friction=" << k_friction << "\nrestitution=" << restitution
     << "\nspin_retention=" << spin_retention << "\ndt=" << dt
     << "\nframe_stride=" << frame_stride << "\nx_limit=" << x_limit
     << "\ntable_length=" << table.length << "\ntable_width=" << table.width
     << "\ntable_height=" << table.height
     << "\nnet_height=" << table.net_height << "\n";
  return os.str();
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::kNone: return "none";
    case Termination::kInvalidStart: return "invalid_start";
    case Termination::kSecondBounce: return "second_bounce";
    case Termination::kBelowTable: return "below_table";
    case Termination::kOutOfRange: return "out_of_range";
    case Termination::kTimeLimit: return "time_limit";
  }
  return "unknown";
}

std::optional<std::size_t> Trajectory::bounce_frame() const {
  if (!bounce_index) return std::nullopt;
  const auto stride = static_cast<std::size_t>(frame_stride);
  return (*bounce_index + stride - 1) / stride;
}

Vec3 acceleration(const BallState& s, const PhysicsParams& p) {
  const double speed = norm(s.v);
  Vec3 a{0.0, 0.0, -p.gravity};
  a -= s.v * (p.k_drag * speed);
  a += cross(s.w, s.v) * (p.k_magnus / p.mass);
  return a;
}

BallState step_rk4(const BallState& s, double dt, const PhysicsParams& p) {
  const Derivative k1 = derivative(s, p);
  const Derivative k2 = derivative(advance(s, k1, 0.5 * dt), p);
  const Derivative k3 = derivative(advance(s, k2, 0.5 * dt), p);
  const Derivative k4 = derivative(advance(s, k3, dt), p);
  BallState out = s;
  out.r = s.r + (k1.dr + 2.0 * k2.dr + 2.0 * k3.dr + k4.dr) * (dt / 6.0);
  out.v = s.v + (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv) * (dt / 6.0);
  out.t = s.t + dt;
  return out;
}

BallState bounce(const BallState& s, const PhysicsParams& p) {
  const double gap = s.r.z - p.radius;
  if (!(gap <= kContactTolerance)) {
    throw NotInContact("ball " + std::to_string(gap) + " m above contact");
  }
  if (!(s.v.z < 0.0)) throw NotInContact("ball not moving towards the table");
  if (!p.table.contains(s.r.x, s.r.y)) {
    throw NotInContact("contact point outside the table");
  }

  BallState out = s;
  out.v.z = -p.restitution * s.v.z;

  // Friction axes follow the instantaneous horizontal motion. Without
  // horizontal motion the friction impulse has no defined direction.
  const Vec3 horizontal{s.v.x, s.v.y, 0.0};
  if (norm(horizontal) > kDegenerateDirectionEps) {
    const BallFrame f = ball_frame_from_direction(horizontal);
    const Vec3 w_ball = world_to_ball(s.w, f);
    const double gain = p.k_friction / p.mass;
    out.v += (f.e_y * w_ball.x + f.e_x * w_ball.y) * gain;
  }
  out.w = s.w * p.spin_retention;
  return out;
}

Trajectory simulate(const BallState& init, const PhysicsParams& p,
                    double max_t) {
  Trajectory traj;
  traj.frame_stride = p.frame_stride;
  if (!is_finite(init.r) || !is_finite(init.v) || !is_finite(init.w) ||
      init.r.z < p.radius) {
    traj.termination = Termination::kInvalidStart;
    return traj;
  }

  const auto max_steps = static_cast<long>(std::llround(max_t / p.dt));
  BallState s = init;
  traj.fine.push_back(s);
  traj.termination = Termination::kTimeLimit;

  for (long k = 1; k <= max_steps; ++k) {
    const double t_next = init.t + static_cast<double>(k) * p.dt;
    BallState next = step_rk4(s, p.dt, p);
    const double h0 = s.r.z - p.radius;
    const double h1 = next.r.z - p.radius;

    bool bounced = false;
    if (h0 > 0.0 && h1 <= 0.0) {
      const double alpha = h0 / (h0 - h1);
      BallState contact = step_rk4(s, alpha * p.dt, p);
      if (p.table.contains(contact.r.x, contact.r.y) && contact.v.z < 0.0) {
        ++traj.bounce_count;
        if (traj.bounce_count > 1) {
          traj.termination = Termination::kSecondBounce;
          break;
        }
        contact.r.z = p.radius;
        const BallState after = bounce(contact, p);
        next = step_rk4(after, (1.0 - alpha) * p.dt, p);
        traj.bounce_index = traj.fine.size();
        traj.bounce_point = contact.r;
        traj.bounce_time = contact.t;
        bounced = true;
      }
    }
    next.t = t_next;

    if (next.r.z < 0.0) {
      traj.termination = Termination::kBelowTable;
      break;
    }
    // Entering the table volume from below the contact level is an edge hit.
    if (!bounced && h0 <= 0.0 && next.r.z - p.radius < 0.0 &&
        p.table.contains(next.r.x, next.r.y)) {
      traj.termination = Termination::kBelowTable;
      break;
    }
    if (std::abs(next.r.x) > p.x_limit) {
      traj.termination = Termination::kOutOfRange;
      break;
    }
    traj.fine.push_back(next);
    s = next;
  }

  const auto stride = static_cast<std::size_t>(p.frame_stride);
  for (std::size_t i = 0; i < traj.fine.size(); i += stride) {
    traj.frames.push_back(traj.fine[i]);
  }
  return traj;
}

bool is_valid(const Trajectory& traj, const CameraModel& cam,
              const ImageSize& img, const PhysicsParams& p,
              const ValidityRules& rules) {
  if (traj.empty()) return false;
  const std::size_t n = traj.frames.size();
  if (n < rules.min_frames || n > rules.max_frames) return false;
  if (!(traj.frames.front().r.x < 0.0)) return false;
  if (traj.bounce_count != 1 || traj.termination == Termination::kSecondBounce)
    return false;
  if (!traj.bounce_point) return false;
  const Vec3& b = *traj.bounce_point;
  if (!(b.x > 0.0 && b.x <= p.table.half_length() &&
        std::abs(b.y) <= p.table.half_width()))
    return false;
  if (!(traj.frames.back().r.x > 0.0)) return false;
  const auto bf = traj.bounce_frame();
  if (!bf || *bf >= n) return false;
  for (const BallState& s : traj.frames) {
    if (!projects_inside(cam, s.r, img)) return false;
  }
  return true;
}

}  // namespace spinsight
