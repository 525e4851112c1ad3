#include <doctest.h>

#include <cmath>

#include "spinsight/camera.hpp"
#include "spinsight/errors.hpp"
#include "spinsight/physics.hpp"
#include "spinsight/rng.hpp"

using namespace spinsight;

namespace {

PhysicsParams vacuum() {
  PhysicsParams p;
  p.k_drag = 0.0;
  p.k_magnus = 0.0;
  p.x_limit = 1e6;
  return p;
}

BallState state(Vec3 r, Vec3 v, Vec3 w = {}) {
  BallState s;
  s.r = r;
  s.v = v;
  s.w = w;
  return s;
}

double energy(const BallState& s, const PhysicsParams& p) {
  return 0.5 * p.mass * dot(s.v, s.v) + p.mass * p.gravity * s.r.z;
}

// Horizontal speed of a serve-like launch, bisected so that the bounce
// lands at target_x.
Trajectory serve_bouncing_at(double target_x) {
  const PhysicsParams p;
  double lo = 2.0, hi = 9.0;
  Trajectory best;
  for (int i = 0; i < 60; ++i) {
    const double vx = 0.5 * (lo + hi);
    best = simulate(state({-1.4, 0, 0.3}, {vx, 0, 0.5}), p);
    const double x = best.bounce_point ? best.bounce_point->x : 1e9;
    (x < target_x ? lo : hi) = vx;
  }
  return best;
}

}  // namespace

TEST_SUITE("physics") {
  TEST_CASE("gravity only at rest") {
    const Vec3 a = acceleration(state({0, 0, 1}, {}), PhysicsParams{});
    CHECK(a == Vec3{0, 0, -9.81});
  }

  TEST_CASE("topspin pushes a forward ball down") {
    PhysicsParams p;
    p.k_drag = 0.0;
    const double w = 50.0, v = 6.0;
    const Vec3 a = acceleration(state({0, 0, 1}, {v, 0, 0}, {0, w, 0}), p);
    CHECK(a.x == doctest::Approx(0.0));
    CHECK(a.y == doctest::Approx(0.0));
    CHECK(a.z == doctest::Approx(-9.81 - p.k_magnus / p.mass * w * v).epsilon(1e-14));
    CHECK(a.z < -9.81);
  }

  TEST_CASE("spin parallel to velocity has no Magnus term") {
    PhysicsParams p;
    p.k_drag = 0.0;
    const Vec3 v{3, -1, 2};
    const Vec3 a = acceleration(state({0, 0, 1}, v, v * 7.0), p);
    CHECK(std::abs(a.x) < 1e-12);
    CHECK(std::abs(a.y) < 1e-12);
    CHECK(std::abs(a.z + 9.81) < 1e-12);
  }

  TEST_CASE("Magnus force is orthogonal to velocity") {
    PhysicsParams p;
    p.k_drag = 0.0;
    p.gravity = 1e-300;
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) {
      const Vec3 v{uniform(rng, -8, 8), uniform(rng, -8, 8), uniform(rng, -8, 8)};
      const Vec3 w{uniform(rng, -100, 100), uniform(rng, -100, 100),
                   uniform(rng, -100, 100)};
      const Vec3 f = acceleration(state({}, v, w), p) * p.mass;
      CHECK(std::abs(dot(f, v)) <= 1e-12 * norm(f) * norm(v) + 1e-300);
    }
  }

  TEST_CASE("fixed point without velocity and gravity") {
    PhysicsParams p;
    p.gravity = 0.0;
    const BallState s = state({0.1, 0.2, 0.3}, {}, {10, 20, 30});
    const BallState n = step_rk4(s, p.dt, p);
    CHECK(n.r == s.r);
    CHECK(n.v == s.v);
    CHECK(n.w == s.w);
  }

  TEST_CASE("drag free flight matches the parabola") {
    const PhysicsParams p = vacuum();
    const BallState init = state({0, 0, 10}, {1, 0, 0});
    const Trajectory tr = simulate(init, p, 1.0);
    REQUIRE(tr.fine.size() == 501);
    double worst = 0.0;
    for (const BallState& s : tr.fine) {
      const Vec3 exact{s.t, 0.0, 10.0 - 0.5 * p.gravity * s.t * s.t};
      worst = std::max(worst, norm(s.r - exact));
    }
    CHECK(worst < 1e-6);
    CHECK(tr.termination == Termination::kTimeLimit);
  }

  TEST_CASE("timestamps increase and frames subsample the fine track") {
    const Trajectory tr = serve_bouncing_at(0.6);
    for (std::size_t i = 1; i < tr.fine.size(); ++i) CHECK(tr.fine[i].t > tr.fine[i - 1].t);
    for (std::size_t i = 0; i < tr.frames.size(); ++i)
      CHECK(tr.frames[i].t == tr.fine[i * 10].t);
    CHECK(tr.bounce_count == 1);
  }

  TEST_CASE("contact time matches the quadratic root") {
    const PhysicsParams p = vacuum();
    const double z0 = 0.3, vz = 1.0;
    const Trajectory tr = simulate(state({-0.5, 0, z0}, {1, 0, vz}), p);
    REQUIRE(tr.bounce_point.has_value());
    const double g = p.gravity;
    const double h = z0 - p.radius;
    const double t_exact = (vz + std::sqrt(vz * vz + 2 * g * h)) / g;
    CHECK(std::abs(tr.bounce_time - t_exact) < 2e-3);
    CHECK(std::abs(tr.bounce_point->x - (-0.5 + t_exact)) < 2e-3);
  }

  TEST_CASE("bounce without spin keeps horizontal velocity") {
    const PhysicsParams p;
    const BallState s = state({0.5, 0.1, p.radius}, {4, -1, -3});
    const BallState o = bounce(s, p);
    CHECK(o.v.x == s.v.x);
    CHECK(o.v.y == s.v.y);
    CHECK(o.v.z == doctest::Approx(3 * p.restitution).epsilon(1e-15));
    CHECK(o.w == Vec3{});
  }

  TEST_CASE("topspin speeds up the ball at the bounce") {
    const PhysicsParams p;
    const double w = 80.0;
    const BallState s = state({0.5, 0, p.radius}, {4, 0, -3}, {0, w, 0});
    const BallState o = bounce(s, p);
    CHECK(o.v.x - s.v.x == doctest::Approx(p.k_friction / p.mass * w).epsilon(1e-12));
    CHECK(o.v.y == 0.0);
    CHECK(o.w.y == doctest::Approx(w * p.spin_retention));
  }

  TEST_CASE("sidespin about the motion axis kicks laterally only") {
    const PhysicsParams p;
    // Motion along +y: e_x = (0,1,0), e_y = (-1,0,0).
    const double w = 60.0;
    const BallState s = state({0.5, 0, p.radius}, {0, 4, -3}, {0, w, 0});
    const BallState o = bounce(s, p);
    const double kick = p.k_friction / p.mass * w;  // 0.005 * 60 = 0.3 m/s
    CHECK(kick == doctest::Approx(0.3));
    CHECK(o.v.x == doctest::Approx(-kick).epsilon(1e-12));
    CHECK(o.v.y == doctest::Approx(4.0).epsilon(1e-15));
  }

  TEST_CASE("bounce preconditions") {
    const PhysicsParams p;
    CHECK_THROWS_AS(bounce(state({0, 0, 0.5}, {1, 0, -1}), p), NotInContact);
    CHECK_THROWS_AS(bounce(state({0, 0, p.radius}, {1, 0, 1}), p), NotInContact);
    CHECK_THROWS_AS(bounce(state({2.0, 0, p.radius}, {1, 0, -1}), p), NotInContact);
  }

  TEST_CASE("start below the table gives an empty trajectory") {
    const Trajectory tr = simulate(state({-1, 0, -0.1}, {3, 0, 1}), PhysicsParams{});
    CHECK(tr.empty());
    CHECK(tr.frames.empty());
    CHECK(tr.termination == Termination::kInvalidStart);
  }

  TEST_CASE("energy is conserved without drag and Magnus") {
    const PhysicsParams p = vacuum();
    const BallState init = state({0, 0, 5}, {2, 1, 3});
    const Trajectory tr = simulate(init, p, 1.0);
    const double e0 = energy(init, p);
    for (const BallState& s : tr.fine) CHECK(std::abs(energy(s, p) - e0) < 1e-6);
  }

  TEST_CASE("drag never increases horizontal speed") {
    PhysicsParams p;
    p.x_limit = 1e6;
    const Trajectory tr = simulate(state({0, 0, 20}, {15, 5, 4}), p, 1.0);
    for (std::size_t i = 1; i < tr.fine.size(); ++i) {
      const auto h = [](const BallState& s) { return std::hypot(s.v.x, s.v.y); };
      CHECK(h(tr.fine[i]) < h(tr.fine[i - 1]));
    }
  }

  TEST_CASE("mirroring y mirrors the trajectory") {
    const PhysicsParams p;
    const BallState a = state({-1.4, 0.2, 0.3}, {5, 0.6, 0.8}, {30, -40, 70});
    const BallState b = state({-1.4, -0.2, 0.3}, {5, -0.6, 0.8}, {-30, -40, -70});
    const Trajectory ta = simulate(a, p), tb = simulate(b, p);
    REQUIRE(ta.fine.size() == tb.fine.size());
    for (std::size_t i = 0; i < ta.fine.size(); ++i) {
      const Vec3 m{tb.fine[i].r.x, -tb.fine[i].r.y, tb.fine[i].r.z};
      CHECK(norm(ta.fine[i].r - m) < 1e-9);
    }
    CHECK(ta.bounce_index == tb.bounce_index);
  }

  TEST_CASE("RK4 converges at fourth order") {
    PhysicsParams p;
    p.k_magnus = 0.0;
    p.k_drag = 0.141;
    const BallState init = state({0, 0, 0}, {20, 5, 10});
    auto run = [&](double dt) {
      BallState s = init;
      const long n = std::lround(1.0 / dt);
      for (long i = 0; i < n; ++i) s = step_rk4(s, dt, p);
      return s.r;
    };
    const Vec3 ref = run(1e-5);
    const double e1 = norm(run(0.02) - ref);
    const double e2 = norm(run(0.01) - ref);
    CHECK(e1 / e2 > 15.0);
    CHECK(e1 / e2 < 17.5);
  }

  TEST_CASE("validity rule") {
    const CameraModel cam = default_camera();
    const ImageSize img;
    const PhysicsParams p;

    SUBCASE("serve with one bounce on the right half is valid") {
      const Trajectory tr = serve_bouncing_at(0.6);
      REQUIRE(tr.bounce_point.has_value());
      CHECK(std::abs(tr.bounce_point->x - 0.6) < 0.01);
      CHECK(is_valid(tr, cam, img, p));
    }
    SUBCASE("two bounces are invalid") {
      const Trajectory tr = simulate(state({-0.3, 0, 0.3}, {1.0, 0, 0}), p);
      CHECK(tr.bounce_count == 2);
      CHECK(tr.termination == Termination::kSecondBounce);
      CHECK_FALSE(is_valid(tr, cam, img, p));
    }
    SUBCASE("bounce on the left half is invalid") {
      const Trajectory tr = simulate(state({-1.0, 0, 0.3}, {2.0, 0, 0}), p);
      REQUIRE(tr.bounce_point.has_value());
      CHECK(tr.bounce_point->x < 0.0);
      CHECK_FALSE(is_valid(tr, cam, img, p));
    }
    SUBCASE("too short a track is invalid") {
      Trajectory tr = serve_bouncing_at(0.6);
      ValidityRules rules;
      rules.min_frames = tr.frames.size() + 1;
      CHECK_FALSE(is_valid(tr, cam, img, p, rules));
    }
  }
}
