#pragma once

#include <cmath>

namespace spinsight {

// Plain 3-vector. Units depend on context: meters for positions, m/s for
// velocities, Hz for spin.
struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr Vec3& operator-=(const Vec3& o) {
    x -= o.x;
    y -= o.y;
    z -= o.z;
    return *this;
  }
  constexpr Vec3& operator*=(double s) {
    x *= s;
    y *= s;
    z *= s;
    return *this;
  }

  friend constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
  friend constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
  friend constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
  friend constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
  friend constexpr Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

constexpr double dot(const Vec3& a, const Vec3& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

inline bool is_finite(const Vec3& a) {
  return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z);
}

// Per-trajectory ball coordinate system: x along the initial horizontal
// motion, z up, y = z cross x.
struct BallFrame {
  Vec3 e_x;
  Vec3 e_y;
  Vec3 e_z{0.0, 0.0, 1.0};
  Vec3 origin;
};

// Horizontal displacements at or below this norm cannot define a frame.
inline constexpr double kDegenerateDirectionEps = 1e-9;

// Builds the ball frame from the first two trajectory positions. Throws
// DegenerateDirection for purely vertical or stationary starts.
BallFrame ball_frame(const Vec3& p0, const Vec3& p1);

// Frame built from a horizontal direction only (origin at zero).
BallFrame ball_frame_from_direction(const Vec3& direction);

// Free-vector transforms (no origin shift); used for spin and velocity.
Vec3 world_to_ball(const Vec3& v, const BallFrame& f);
Vec3 ball_to_world(const Vec3& v, const BallFrame& f);

// Point transforms (origin subtracted / added).
Vec3 world_to_ball_point(const Vec3& p, const BallFrame& f);
Vec3 ball_to_world_point(const Vec3& p, const BallFrame& f);

}  // namespace spinsight
