#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "spinsight/errors.hpp"
#include "spinsight/eval.hpp"

using namespace spinsight;

namespace {

double brute_traj_error(const std::vector<std::vector<Vec3>>& p,
                        const std::vector<std::vector<Vec3>>& g) {
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double s = 0.0;
    for (std::size_t t = 0; t < p[i].size(); ++t) {
      const double dx = p[i][t].x - g[i][t].x, dy = p[i][t].y - g[i][t].y,
                   dz = p[i][t].z - g[i][t].z;
      s += std::sqrt(dx * dx + dy * dy + dz * dz);
    }
    total += s / static_cast<double>(p[i].size());
  }
  return total / static_cast<double>(p.size());
}

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("spin error") {
    const std::vector<Vec3> gt{{1, 2, 3}, {0, 0, 0}};
    CHECK(spin_error(gt, gt) == 0.0);
    CHECK(spin_error(std::vector<Vec3>{{3, 4, 0}}, std::vector<Vec3>{{0, 0, 0}}) == 5.0);
    CHECK_THROWS_AS(spin_error(std::vector<Vec3>{}, std::vector<Vec3>{}), EmptySet);
    CHECK_THROWS_AS(spin_error(gt, std::vector<Vec3>{{0, 0, 0}}), LengthMismatch);
  }

  TEST_CASE("zero predictor baseline on the sampler is about 96 Hz") {
    Rng rng(1);
    std::vector<Vec3> gts, zeros;
    for (int i = 0; i < 20000; ++i) {
      gts.push_back(sample_initial(rng).w);
      zeros.push_back({});
    }
    CHECK(spin_error(zeros, gts) == doctest::Approx(96.06).epsilon(0.01));
  }

  TEST_CASE("spin error is invariant under frame round trips and ordering") {
    Rng rng(2);
    std::vector<Vec3> p, g, p2, g2;
    for (int i = 0; i < 100; ++i) {
      p.push_back({uniform(rng, -100, 100), uniform(rng, -100, 100), uniform(rng, -100, 100)});
      g.push_back({uniform(rng, -100, 100), uniform(rng, -100, 100), uniform(rng, -100, 100)});
      const BallFrame f = ball_frame_from_direction({uniform(rng, -1, 1), uniform(rng, -1, 1), 0});
      p2.push_back(ball_to_world(world_to_ball(p.back(), f), f));
      g2.push_back(ball_to_world(world_to_ball(g.back(), f), f));
    }
    const double e = spin_error(p, g);
    CHECK(std::abs(spin_error(p2, g2) - e) < 1e-12);
    std::reverse(p.begin(), p.end());
    std::reverse(g.begin(), g.end());
    CHECK(std::abs(spin_error(p, g) - e) < 1e-12);
  }

  TEST_CASE("trajectory error") {
    const std::vector<std::vector<Vec3>> gt{{{0, 0, 0}, {1, 1, 1}}, {{2, 2, 2}}};
    CHECK(traj_error_world(gt, gt) == 0.0);
    auto off = gt;
    for (auto& r : off[0]) r.x += 0.01;
    CHECK(traj_error_world(off, gt) == doctest::Approx(0.005).epsilon(1e-12));
    CHECK_THROWS_AS(traj_error_world({{{0, 0, 0}}, {{0, 0, 0}}}, gt), LengthMismatch);
    CHECK_THROWS_AS(traj_error_world({}, {}), EmptySet);

    Rng rng(3);
    std::vector<std::vector<Vec3>> p, g;
    for (int i = 0; i < 50; ++i) {
      const auto n = static_cast<std::size_t>(uniform_int(rng, 8, 40));
      p.emplace_back(n);
      g.emplace_back(n);
      for (std::size_t t = 0; t < n; ++t) {
        p.back()[t] = {uniform(rng, -2, 2), uniform(rng, -1, 1), uniform(rng, 0, 1)};
        g.back()[t] = {uniform(rng, -2, 2), uniform(rng, -1, 1), uniform(rng, 0, 1)};
      }
    }
    CHECK(std::abs(traj_error_world(p, g) - brute_traj_error(p, g)) < 1e-12);
  }

  TEST_CASE("sign accuracy") {
    const std::vector<int> c{1, -1, 1};
    CHECK(spin_sign_accuracy(c, std::vector<double>{5, -3, 1}) == 1.0);
    CHECK(spin_sign_accuracy(c, std::vector<double>{5, -3, -1}) == doctest::Approx(2.0 / 3));
    CHECK(spin_sign_accuracy(c, std::vector<double>{0, 0, 0}) == 0.0);
    CHECK_THROWS_AS(spin_sign_accuracy(c, std::vector<double>{1}), LengthMismatch);
    CHECK(spin_sign(0.0) == 0);
    CHECK(spin_sign(-2.0) == -1);
  }

  TEST_CASE("macro F1") {
    const std::vector<int> c{1, 1, -1, -1};
    CHECK(macro_f1(c, std::vector<double>{1, 2, -1, -2}) == 1.0);
    CHECK(macro_f1(c, std::vector<double>{1, -1, 1, -1}) == doctest::Approx(0.5));
    CHECK(macro_f1(c, std::vector<double>{1, 1, 1, 1}) == doctest::Approx(1.0 / 3));
    // A class with no instances and no predictions is left out.
    CHECK(macro_f1(std::vector<int>{1, 1}, std::vector<double>{1, 1}) == 1.0);
    CHECK_THROWS_AS(macro_f1(c, std::vector<double>{1}), LengthMismatch);
  }

  TEST_CASE("ROC AUC") {
    const std::vector<int> labels{-1, -1, 1, 1};
    const RocResult r = roc_auc(labels, std::vector<double>{0.1, 0.4, 0.35, 0.8});
    CHECK(r.auc == 0.75);
    CHECK(auc_trapezoid(r.curve) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(r.curve.front().fpr == 0.0);
    CHECK(r.curve.front().tpr == 0.0);
    CHECK(r.curve.back().fpr == 1.0);
    CHECK(r.curve.back().tpr == 1.0);
    CHECK(r.curve.size() == 5);
    CHECK(roc_auc(labels, std::vector<double>{-5, -1, 1, 5}).auc == 1.0);
    CHECK_THROWS_AS(roc_auc(std::vector<int>{1, 1}, std::vector<double>{1, 2}), SingleClass);

    Rng rng(4);
    std::vector<int> shuffled(200);
    for (auto& l : shuffled) l = uniform01(rng) < 0.5 ? 1 : -1;
    shuffled[0] = 1;
    shuffled[1] = -1;
    const RocResult flat = roc_auc(shuffled, std::vector<double>(200, 3.0));
    CHECK(flat.auc == 0.5);
    CHECK(flat.curve.size() == 2);
  }

  TEST_CASE("pairwise and trapezoid AUC agree") {
    Rng rng(5);
    for (int s = 0; s < 200; ++s) {
      const auto n = static_cast<std::size_t>(uniform_int(rng, 2, 60));
      std::vector<int> c(n);
      std::vector<double> w(n);
      for (std::size_t i = 0; i < n; ++i) {
        c[i] = uniform01(rng) < 0.5 ? 1 : -1;
        w[i] = static_cast<double>(uniform_int(rng, -5, 5));  // many ties
      }
      c[0] = 1;
      c[1] = -1;
      const RocResult r = roc_auc(c, w);
      CHECK(std::abs(r.auc - auc_trapezoid(r.curve)) < 1e-9);
      for (std::size_t i = 1; i < r.curve.size(); ++i) {
        CHECK(r.curve[i].fpr >= r.curve[i - 1].fpr);
        CHECK(r.curve[i].tpr >= r.curve[i - 1].tpr);
        CHECK(r.curve[i].threshold < r.curve[i - 1].threshold);
      }
    }
  }

  TEST_CASE("confusion matrix") {
    const std::vector<int> c{1, 1, -1, -1, 1};
    const Confusion perfect = confusion(c, std::vector<double>{1, 1, -1, -1, 2});
    CHECK(perfect[0][0] == 2);
    CHECK(perfect[1][1] == 3);
    CHECK(perfect[0][1] + perfect[1][0] == 0);
    const Confusion flipped = confusion(c, std::vector<double>{-1, -1, 1, 1, -1});
    CHECK(flipped[0][1] == 2);
    CHECK(flipped[1][0] == 3);
    const Confusion zeros = confusion(c, std::vector<double>{0, 0, 0, 0, 0});
    CHECK(zeros[1][0] == 3);
    CHECK(zeros[0][1] == 2);

    Rng rng(6);
    for (int s = 0; s < 100; ++s) {
      std::vector<int> cl(31);
      std::vector<double> w(31);
      for (std::size_t i = 0; i < cl.size(); ++i) {
        cl[i] = uniform01(rng) < 0.5 ? 1 : -1;
        w[i] = static_cast<double>(uniform_int(rng, -3, 3));
      }
      const Confusion m = confusion(cl, w);
      CHECK(m[0][0] + m[0][1] + m[1][0] + m[1][1] == 31);
      CHECK(static_cast<double>(m[0][0] + m[1][1]) / 31.0 == spin_sign_accuracy(cl, w));
    }
  }

  TEST_CASE("relative reprojection error") {
    const CameraModel cam = default_camera();
    const std::vector<Vec3> traj{{-1, 0, 0.3}, {0, 0.1, 0.4}, {1, -0.2, 0.2}};
    std::vector<Pixel> exact, shifted;
    for (const Vec3& r : traj) {
      exact.push_back(project(cam, r));
      shifted.push_back({exact.back().u + 29.36, exact.back().v});
    }
    CHECK(reproj_error_rel({traj}, {exact}, {cam}) < 1e-12);
    CHECK(mean_pixel_error(cam, traj, shifted) == doctest::Approx(29.36).epsilon(1e-9));
    CHECK(100.0 * reproj_error_rel({traj}, {shifted}, {cam}) == doctest::Approx(1.0).epsilon(1e-3));
  }

  TEST_CASE("end to end evaluation report") {
    DatasetOptions o;
    o.n_valid = 30;
    o.seed = 8;
    const Dataset ds = generate_dataset(o);
    const SptConfig cfg = SptConfig::from_preset("small");
    const auto params = init_parameters(cfg, 1);
    const EvalResult r = evaluate(cfg, params, ds.test);
    const MetricReport& m = r.report;
    CHECK(m.n == ds.test.size());
    REQUIRE(m.spin_error_hz.has_value());
    CHECK(*m.spin_error_hz > 0.0);
    std::vector<Vec3> gts, zeros(ds.test.size());
    for (const auto& rec : ds.test) gts.push_back(*rec.gt_spin_ball);
    CHECK(*m.zero_baseline_hz == doctest::Approx(spin_error(zeros, gts)).epsilon(1e-12));
    CHECK(m.spin_sign_accuracy ==
          static_cast<double>(m.confusion[0][0] + m.confusion[1][1]) / static_cast<double>(m.n));
    CHECK(m.reproj_error_rel_pct.has_value());
    CHECK(r.predictions.size() == ds.test.size());
    CHECK(r.predictions[0].spin_class == record_spin_class(ds.test[0]));

    const auto j = nlohmann::json::parse(m.to_json());
    for (const char* key : {"n", "spin_error_hz", "zero_baseline_hz", "traj_error_world_cm", "spin_sign_accuracy",
                            "macro_f1", "roc_auc", "reproj_error_rel_pct", "confusion", "roc_curve"})
      CHECK(j.contains(key));
    CHECK(m.to_csv().find("spin_error_hz") != std::string::npos);

    // Same inputs, same numbers.
    CHECK(evaluate(cfg, params, ds.test).report.to_json() == m.to_json());
    CHECK_THROWS_AS(evaluate(cfg, params, {}), EmptySet);
  }

  TEST_CASE("spin class of synthetic and annotated records") {
    SampleRecord rec;
    rec.gt_spin_ball = Vec3{0, -3, 0};
    CHECK(record_spin_class(rec) == -1);
    rec.gt_spin_ball = Vec3{0, 0, 0};
    CHECK(record_spin_class(rec) == 1);
    rec.spin_class = -1;
    CHECK(record_spin_class(rec) == -1);
  }
}
