#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "spinsight/datagen.hpp"
#include "spinsight/errors.hpp"

using namespace spinsight;
namespace fs = std::filesystem;

namespace {

const Dataset& small_dataset() {
  static const Dataset ds = [] {
    DatasetOptions o;
    o.n_valid = 40;
    o.seed = 17;
    return generate_dataset(o);
  }();
  return ds;
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("spinsight_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

}  // namespace

TEST_SUITE("datagen") {
  TEST_CASE("split counts use floor division with the remainder in train") {
    const auto c = split_counts(100);
    CHECK(c.train == 70);
    CHECK(c.val == 10);
    CHECK(c.test == 20);
    const auto d = split_counts(57);
    CHECK(d.val == 5);
    CHECK(d.test == 11);
    CHECK(d.train == 41);
    CHECK(split_counts(0).train == 0);
  }

  TEST_CASE("initial states are reproducible and inside the sampler box") {
    Rng a(5), b(5);
    const BallState sa = sample_initial(a), sb = sample_initial(b);
    CHECK(sa.r == sb.r);
    CHECK(sa.v == sb.v);
    CHECK(sa.w == sb.w);

    const SamplerRanges r;
    Rng rng(6);
    double mean_spin = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
      const BallState s = sample_initial(rng);
      CHECK((s.r.x >= r.x_min && s.r.x <= r.x_max));
      CHECK((s.r.y >= r.y_min && s.r.y <= r.y_max));
      CHECK((s.r.z >= r.z_min && s.r.z <= r.z_max));
      CHECK((s.v.x >= r.vx_min && s.v.x <= r.vx_max));
      CHECK((s.v.y >= r.vy_min && s.v.y <= r.vy_max));
      CHECK((s.v.z >= r.vz_min && s.v.z <= r.vz_max));
      CHECK(std::abs(s.w.x) <= 100.0);
      CHECK(std::abs(s.w.y) <= 100.0);
      CHECK(std::abs(s.w.z) <= 100.0);
      mean_spin += norm(s.w) / n;
    }
    // Mean distance from the center of a cube of half-width 100 is 96.06.
    CHECK(mean_spin == doctest::Approx(96.06).epsilon(0.01));
  }

  TEST_CASE("generated records are consistent and valid") {
    const Dataset& ds = small_dataset();
    CHECK(ds.train.size() == 28);
    CHECK(ds.val.size() == 4);
    CHECK(ds.test.size() == 8);
    for (const auto* split : {&ds.train, &ds.val, &ds.test}) {
      for (const SampleRecord& rec : *split) {
        CHECK(rec.length() >= 8);
        CHECK(rec.length() <= 40);
        CHECK(rec.ball_2d.size() == rec.gt_traj_3d.size());
        CHECK(rec.table_2d.size() == kNumTableKeypoints);
        CHECK(rec.fine_traj_3d.size() > 10 * (rec.length() - 1));
        const Vec3 b = spin_in_ball_frame(*rec.gt_spin_world, rec.gt_traj_3d);
        CHECK(norm(b - *rec.gt_spin_ball) < 1e-9);
        CHECK(record_is_valid(rec, PhysicsParams{}));
        REQUIRE(rec.bounce_frame.has_value());
        CHECK(*rec.bounce_frame < rec.length());
      }
    }
    CHECK(ds.train.front().camera_mode == CameraMode::kResample);
    CHECK(ds.test.front().camera_mode == CameraMode::kFixed);
    CHECK(ds.test.front().camera->matrix() == default_camera().matrix());
  }

  TEST_CASE("dataset files are byte identical across runs") {
    DatasetOptions o;
    o.n_valid = 100;
    o.seed = 3;
    const fs::path a = temp_dir("gen_a"), b = temp_dir("gen_b");
    const auto ma = generate_dataset(o, a);
    generate_dataset(o, b);
    for (const char* f : {"train.jsonl", "val.jsonl", "test.jsonl", "manifest.json"})
      CHECK(read_file(a / f) == read_file(b / f));
    CHECK(ma.n_train == 70);
    const Dataset loaded = load_dataset(a);
    CHECK(loaded.val.size() == 10);
    for (const auto& rec : loaded.test) CHECK(record_is_valid(rec, PhysicsParams{}));
    o.seed = 4;
    const fs::path c = temp_dir("gen_c");
    generate_dataset(o, c);
    CHECK(read_file(a / "train.jsonl") != read_file(c / "train.jsonl"));
  }

  TEST_CASE("serialization round trip") {
    for (const SampleRecord& rec : small_dataset().train) {
      const SampleRecord back = parse_record(serialize_record(rec));
      CHECK(back == rec);
      CHECK(serialize_record(back) == serialize_record(rec));
    }
    SampleRecord real;
    real.id = "real-000";
    real.split = Split::kReal;
    real.ball_2d = {{10, 20}, {30, 40}};
    real.table_2d.assign(13, Pixel{1.5, 2.5});
    real.spin_class = -1;
    CHECK(parse_record(serialize_record(real)) == real);
  }

  TEST_CASE("parse errors carry line and field") {
    const std::string good = serialize_record(small_dataset().val.front());
    SUBCASE("truncated line") {
      try {
        parse_record(good.substr(0, good.size() / 2), 7);
        FAIL("expected ParseError");
      } catch (const ParseError& e) {
        CHECK(e.line() == 7);
      }
    }
    SUBCASE("non-finite coordinate") {
      std::string bad = good;
      const auto pos = bad.find("\"ball_2d\":[[") + 12;
      const auto end = bad.find(',', pos);
      bad.replace(pos, end - pos, "NaN");
      CHECK_THROWS_AS(parse_record(bad, 1), ParseError);
      SampleRecord rec = small_dataset().val.front();
      rec.ball_2d[0].u = std::numeric_limits<double>::quiet_NaN();
      CHECK_THROWS_AS(serialize_record(rec), ParseError);
    }
    SUBCASE("unknown field") {
      std::string bad = good;
      bad.insert(1, "\"extra\":1,");
      try {
        parse_record(bad, 3);
        FAIL("expected ParseError");
      } catch (const ParseError& e) {
        CHECK(e.field() == "/extra");
      }
    }
    SUBCASE("wrong version") {
      std::string bad = good;
      const auto pos = bad.find("\"version\":1");
      REQUIRE(pos != std::string::npos);
      bad.replace(pos, 11, "\"version\":2");
      CHECK_THROWS_AS(parse_record(bad, 1), ParseError);
    }
    SUBCASE("line numbers from a file") {
      const fs::path dir = temp_dir("parse");
      std::ofstream(dir / "x.jsonl") << good << "\n" << good << "\n{\"id\":\n";
      try {
        read_jsonl(dir / "x.jsonl");
        FAIL("expected ParseError");
      } catch (const ParseError& e) {
        CHECK(e.line() == 3);
      }
    }
  }

  TEST_CASE("motion blur") {
    const SampleRecord& rec = small_dataset().train.front();
    Rng rng(1);
    SUBCASE("zero window is the identity") {
      CHECK(augment_motion_blur(rec, rng, 0.0) == rec);
    }
    SUBCASE("2D and 3D stay consistent and displacement is bounded") {
      for (int k = 0; k < 50; ++k) {
        const SampleRecord out = augment_motion_blur(rec, rng);
        for (std::size_t i = 0; i < out.length(); ++i) {
          CHECK(distance(project(*out.camera, out.gt_traj_3d[i]), out.ball_2d[i]) < 1e-9);
          double vmax = 0.0;
          const std::size_t lo = i * 10 >= 4 ? i * 10 - 4 : 0;
          for (std::size_t j = lo; j <= std::min(i * 10 + 4, rec.fine_traj_3d.size() - 1); ++j)
            if (j > 0) vmax = std::max(vmax, norm(rec.fine_traj_3d[j] - rec.fine_traj_3d[j - 1]) * 500.0);
          CHECK(norm(out.gt_traj_3d[i] - rec.gt_traj_3d[i]) <= vmax * 0.4 / 50.0 + 1e-3);
        }
      }
    }
    SUBCASE("missing fine track") {
      SampleRecord bare = rec;
      bare.fine_traj_3d.clear();
      CHECK_THROWS_AS(augment_motion_blur(bare, rng), MissingFineTrack);
    }
  }

  TEST_CASE("sudden end") {
    const SampleRecord& rec = small_dataset().train.front();
    Rng rng(2);
    SUBCASE("probability zero never truncates") {
      for (int i = 0; i < 100; ++i) CHECK(augment_sudden_end(rec, rng, 0.0) == rec);
    }
    SUBCASE("bounce frame always retained and lengths uniform") {
      SampleRecord base = rec;
      std::size_t longest = 0;
      for (const auto& r : small_dataset().train)
        if (r.length() > longest) { longest = r.length(); base = r; }
      const std::size_t keep_min = std::max<std::size_t>(8, *base.bounce_frame + 1);
      REQUIRE(keep_min + 3 <= base.length());
      const std::size_t bins = base.length() - keep_min;
      std::vector<double> counts(bins, 0.0);
      std::size_t truncated = 0;
      const int n = 10000;
      for (int i = 0; i < n; ++i) {
        const SampleRecord out = augment_sudden_end(base, rng);
        CHECK(out.length() > *base.bounce_frame);
        CHECK(out.length() >= 8);
        CHECK(out.gt_traj_3d.size() == out.length());
        if (out.length() < base.length()) {
          ++truncated;
          counts[out.length() - keep_min] += 1.0;
        }
      }
      CHECK(static_cast<double>(truncated) / n == doctest::Approx(0.5).epsilon(0.05));
      double chi2 = 0.0;
      const double expected = static_cast<double>(truncated) / static_cast<double>(bins);
      for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
      // 99.9% quantile of chi-square with up to 31 degrees of freedom is < 62.
      CHECK(chi2 < 62.0);
    }
  }

  TEST_CASE("gaussian noise") {
    const SampleRecord& rec = small_dataset().train.front();
    Rng rng(3);
    CHECK(augment_gaussian(rec, rng, 0.0) == rec);
    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    while (n < 100000) {
      const SampleRecord out = augment_gaussian(rec, rng, 2.0);
      CHECK(out.gt_traj_3d == rec.gt_traj_3d);
      for (std::size_t i = 0; i < out.ball_2d.size(); ++i) {
        for (double d : {out.ball_2d[i].u - rec.ball_2d[i].u, out.ball_2d[i].v - rec.ball_2d[i].v}) {
          sum += d;
          sq += d * d;
          ++n;
        }
      }
      for (std::size_t i = 0; i < out.table_2d.size(); ++i) {
        const double d = out.table_2d[i].u - rec.table_2d[i].u;
        sum += d;
        sq += d * d;
        ++n;
      }
    }
    const double mean = sum / static_cast<double>(n);
    const double sd = std::sqrt(sq / static_cast<double>(n) - mean * mean);
    CHECK(std::abs(mean) < 3.0 * 2.0 / std::sqrt(static_cast<double>(n)));
    CHECK(sd == doctest::Approx(2.0).epsilon(0.02));
  }

  TEST_CASE("augmentation commutes with serialization") {
    const SampleRecord& rec = small_dataset().train[3];
    const SampleRecord loaded = parse_record(serialize_record(rec));
    AugmentationOptions opt;
    Rng a(99), b(99);
    CHECK(apply_training_pipeline(rec, a, opt) == apply_training_pipeline(loaded, b, opt));
  }

  TEST_CASE("training pipeline resamples the camera for train records only") {
    const Dataset& ds = small_dataset();
    AugmentationOptions opt;
    opt.motion_blur = opt.sudden_end = opt.gaussian = false;
    Rng rng(4);
    const SampleRecord t = apply_training_pipeline(ds.train.front(), rng, opt);
    CHECK(t.camera->matrix() != ds.train.front().camera->matrix());
    CHECK(t.gt_traj_3d == ds.train.front().gt_traj_3d);
    const SampleRecord v = apply_training_pipeline(ds.val.front(), rng, opt);
    CHECK(v == ds.val.front());
  }

  TEST_CASE("manifest round trip and hashes") {
    const DatasetManifest m = small_dataset().manifest;
    const DatasetManifest back = manifest_from_json(manifest_to_json(m));
    CHECK(back.n_train == m.n_train);
    CHECK(back.physics_hash == m.physics_hash);
    CHECK(back.seed == 17);
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    PhysicsParams p;
    p.k_drag = 0.2;
    CHECK(fnv1a_hex(p.canonical_text()) != m.physics_hash);
  }
}
