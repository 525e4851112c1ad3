#include "spinsight/geometry.hpp"

#include "spinsight/errors.hpp"

namespace spinsight {

BallFrame ball_frame_from_direction(const Vec3& direction) {
  const Vec3 delta{direction.x, direction.y, 0.0};
  const double len = norm(delta);
  if (!(len > kDegenerateDirectionEps)) {
    throw DegenerateDirection("horizontal displacement norm " +
                              std::to_string(len) + " m");
  }
  BallFrame f;
  f.e_x = delta * (1.0 / len);
  f.e_z = {0.0, 0.0, 1.0};
  f.e_y = cross(f.e_z, f.e_x);
  return f;
}

BallFrame ball_frame(const Vec3& p0, const Vec3& p1) {
  BallFrame f = ball_frame_from_direction(p1 - p0);
  f.origin = p0;
  return f;
}

Vec3 world_to_ball(const Vec3& v, const BallFrame& f) {
  return {dot(v, f.e_x), dot(v, f.e_y), dot(v, f.e_z)};
}

Vec3 ball_to_world(const Vec3& v, const BallFrame& f) {
  return f.e_x * v.x + f.e_y * v.y + f.e_z * v.z;
}

Vec3 world_to_ball_point(const Vec3& p, const BallFrame& f) {
  return world_to_ball(p - f.origin, f);
}

Vec3 ball_to_world_point(const Vec3& p, const BallFrame& f) {
  return ball_to_world(p, f) + f.origin;
}

}  // namespace spinsight
