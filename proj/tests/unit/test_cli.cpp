#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "spinsight/cli.hpp"
#include "spinsight/eval.hpp"

using namespace spinsight;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("spinsight_cli_" + name);
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

void write_keypoints(const fs::path& path, const std::vector<Pixel>& px) {
  nlohmann::json j;
  j["image_size"] = {2560, 1440};
  for (const Pixel& p : px) j["keypoints_2d"].push_back({p.u, p.v});
  std::ofstream(path) << j.dump();
}

std::vector<Pixel> clean_keypoints(std::uint64_t seed) {
  Rng rng(seed);
  const CameraModel cam = sample_camera(rng, {});
  std::vector<Pixel> out;
  for (const Vec3& k : table_keypoints_3d()) out.push_back(project(cam, k));
  return out;
}

// Small synthetic dataset shared by the train and eval cases.
const fs::path& smoke_data() {
  static const fs::path dir = [] {
    const fs::path d = temp_dir("smoke_data");
    REQUIRE(run_cli({"gen-data", "--n", "200", "--seed", "4", "--out", d.string()}) == kExitOk);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors") {
    const fs::path d = temp_dir("usage");
    CHECK(run_cli({"simulate", "--out", d.string(), "--set", "physics.bogus=1"}) == kExitUsage);
    CHECK(run_cli({"simulate", "--out", d.string(), "--set", "physics.mass"}) == kExitUsage);
    CHECK(run_cli({"simulate", "--out", d.string(), "--set", "physics.mass=heavy"}) == kExitUsage);
    CHECK(run_cli({"simulate", "--out", d.string(), "--set", "physics.restitution=1.5"}) == kExitUsage);
    CHECK(run_cli({"simulate"}) == kExitUsage);
    CHECK(run_cli({"teleport", "--out", d.string()}) == kExitUsage);
    CHECK(run_cli({}) == kExitUsage);
    std::ofstream(d / "bad.cfg") << "model.dim=32\nnot a setting\n";
    CHECK(run_cli({"simulate", "--out", d.string(), "--config", (d / "bad.cfg").string()}) == kExitUsage);
  }

  TEST_CASE("the installed tool maps failures to exit codes") {
    const fs::path d = temp_dir("tool");
    const std::string tool = SPINSIGHT_TOOL_PATH;
    auto run = [&](const std::string& args) {
      const int status = std::system((tool + " " + args + " > /dev/null 2>&1").c_str());
      return WEXITSTATUS(status);
    };
    CHECK(run("--help") == 0);
    CHECK(run("simulate --out " + d.string() + " --set nope=1") == kExitUsage);
    CHECK(run("eval --checkpoint " + (d / "missing.ckpt").string() + " --data " + d.string() +
              " --out " + d.string()) == kExitData);
    CHECK(run("simulate --out " + d.string()) == kExitOk);
  }

  TEST_CASE("simulate echoes the config and is reproducible") {
    const fs::path a = temp_dir("sim_a"), b = temp_dir("sim_b");
    REQUIRE(run_cli({"simulate", "--seed", "9", "--out", a.string(), "--set", "physics.k_drag=0.12"}) == kExitOk);
    REQUIRE(run_cli({"simulate", "--seed", "9", "--out", b.string(), "--set", "physics.k_drag=0.12"}) == kExitOk);
    CHECK(read_file(a / "trajectory.jsonl") == read_file(b / "trajectory.jsonl"));
    CHECK(!read_file(a / "trajectory.jsonl").empty());
    const std::string cfg = read_file(a / "config.txt");
    CHECK(cfg.rfind("# simulate\n# seed=9\n", 0) == 0);
    CHECK(cfg.find("physics.k_drag=0.12\n") != std::string::npos);
    CHECK(cfg.find("model.dim=128\n") != std::string::npos);
    for (const char* f : {"summary.json", "trajectory_top.svg", "trajectory_side.svg", "trajectory_image.svg"})
      CHECK(fs::exists(a / f));
    // The echoed config is itself a valid config file.
    const fs::path c = temp_dir("sim_c");
    CHECK(run_cli({"simulate", "--seed", "9", "--out", c.string(), "--config", (a / "config.txt").string()}) == kExitOk);
    CHECK(read_file(a / "trajectory.jsonl") == read_file(c / "trajectory.jsonl"));
  }

  TEST_CASE("single component runs") {
    const fs::path d = temp_dir("fig1");
    REQUIRE(run_cli({"simulate", "--fig1", "--out", d.string()}) == kExitOk);
    for (const char* f : {"fig1.jsonl", "fig1_deviation.csv", "fig1_top.svg", "fig1_side.svg", "fig1_image.svg"})
      CHECK(fs::exists(d / f));
    const auto runs = fig1_runs(PhysicsParams{});
    REQUIRE(runs.size() == 4);
    CHECK(runs[0].deviation == 0.0);
    const double dx = runs[1].deviation, dy = runs[2].deviation, dz = runs[3].deviation;
    CHECK(dx < 0.1 * std::min(dy, dz));
    // Sidespin moves the ball sideways, topspin changes the length.
    const auto lateral = [](const Trajectory& t) {
      double m = 0.0;
      for (const auto& s : t.fine) m = std::max(m, std::abs(s.r.y));
      return m;
    };
    CHECK(lateral(runs[3].traj) > 5.0 * lateral(runs[2].traj));
    CHECK(runs[2].traj.bounce_point->x != doctest::Approx(runs[0].traj.bounce_point->x).epsilon(0.05));
  }

  TEST_CASE("gen-data is fast, exact and byte reproducible") {
    const fs::path a = temp_dir("gen_a"), b = temp_dir("gen_b");
    const auto t0 = std::chrono::steady_clock::now();
    REQUIRE(run_cli({"gen-data", "--n", "100", "--seed", "7", "--out", a.string()}) == kExitOk);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(secs < 5.0);
    REQUIRE(run_cli({"gen-data", "--n", "100", "--seed", "7", "--out", b.string()}) == kExitOk);
    for (const char* f : {"train.jsonl", "val.jsonl", "test.jsonl", "manifest.json", "config.txt"})
      CHECK(read_file(a / f) == read_file(b / f));
    const auto m = nlohmann::json::parse(read_file(a / "manifest.json"));
    CHECK(m["counts"]["train"] == 70);
    CHECK(m["counts"]["val"] == 10);
    CHECK(m["counts"]["test"] == 20);
  }

  TEST_CASE("calibrate") {
    const fs::path d = temp_dir("cal");
    SUBCASE("clean keypoints") {
      write_keypoints(d / "kp.json", clean_keypoints(1));
      REQUIRE(run_cli({"calibrate", "--keypoints", (d / "kp.json").string(), "--out", d.string()}) == kExitOk);
      const auto j = nlohmann::json::parse(read_file(d / "camera.json"));
      CHECK(j["inlier_count"] == 13);
      for (double e : j["per_point_error_px"]) CHECK(e < 1e-6);
      CHECK(fs::exists(d / "reprojection.csv"));
    }
    SUBCASE("corrupted keypoints are masked out") {
      auto px = clean_keypoints(2);
      for (std::size_t i : {1, 6, 11}) px[i].u += 50.0;
      write_keypoints(d / "kp.json", px);
      REQUIRE(run_cli({"calibrate", "--keypoints", (d / "kp.json").string(), "--out", d.string()}) == kExitOk);
      const auto j = nlohmann::json::parse(read_file(d / "camera.json"));
      for (std::size_t i = 0; i < 13; ++i) CHECK(j["inliers"][i].get<bool>() == (i != 1 && i != 6 && i != 11));
    }
    SUBCASE("too few inliers fail") {
      auto px = clean_keypoints(3);
      Rng rng(3);
      for (std::size_t i = 0; i < 10; ++i) {
        px[i].u += 50.0 * standard_normal(rng);
        px[i].v += 50.0 * standard_normal(rng);
      }
      write_keypoints(d / "kp.json", px);
      CHECK(run_cli({"calibrate", "--keypoints", (d / "kp.json").string(), "--out", d.string()}) == kExitNumerical);
    }
    SUBCASE("malformed file") {
      std::ofstream(d / "kp.json") << "{\"keypoints_2d\": [[1,2]]}";
      CHECK(run_cli({"calibrate", "--keypoints", (d / "kp.json").string(), "--out", d.string()}) == kExitData);
    }
  }

  TEST_CASE("train smoke run, resume and eval") {
    const fs::path data = smoke_data();
    const fs::path out = temp_dir("train");
    const std::vector<std::string> common{"--data", data.string(), "--seed", "3", "--quiet",
                                          "--set", "model.preset=small", "--set", "train.epochs=5",
                                          "--set", "train.lr=1e-3",
                                          "--set", "train.ema_decay=0.9"};
    auto args = [&](std::vector<std::string> head, const fs::path& dir) {
      head.insert(head.end(), common.begin(), common.end());
      head.push_back("--out");
      head.push_back(dir.string());
      return head;
    };
    const auto t0 = std::chrono::steady_clock::now();
    REQUIRE(run_cli(args({"train"}, out)) == kExitOk);
    CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 120.0);
    for (const char* f : {"best.ckpt", "last.ckpt", "train_log.csv", "config.txt"}) CHECK(fs::exists(out / f));

    // The best column is a running minimum.
    std::istringstream log(read_file(out / "train_log.csv"));
    std::string line;
    std::getline(log, line);
    double best = INFINITY;
    int rows = 0;
    while (std::getline(log, line)) {
      const double b = std::stod(line.substr(line.rfind(',') + 1));
      CHECK(b <= best);
      best = b;
      ++rows;
    }
    CHECK(rows == 5);

    const auto last = load_model(out / "last.ckpt");
    CHECK(last.epoch == 5);
    const auto steps = last.step;
    std::vector<std::string> more = args({"train", "--resume", (out / "last.ckpt").string()}, out);
    more.push_back("--set");
    more.push_back("train.epochs=6");
    REQUIRE(run_cli(more) == kExitOk);
    CHECK(load_model(out / "last.ckpt").step == steps + steps / 5);

    const fs::path ev = temp_dir("eval");
    REQUIRE(run_cli({"eval", "--checkpoint", (out / "best.ckpt").string(), "--data", data.string(),
                     "--split", "train", "--out", ev.string()}) == kExitOk);
    const auto m = nlohmann::json::parse(read_file(ev / "metrics.json"));
    CHECK(m["spin_error_hz"].get<double>() < m["zero_baseline_hz"].get<double>());
    for (const char* key : {"n", "spin_sign_accuracy", "macro_f1", "roc_auc", "traj_error_world_cm",
                            "reproj_error_rel_pct", "confusion", "roc_curve"})
      CHECK(m.contains(key));
    for (const char* f : {"metrics.csv", "predictions.jsonl", "confusion.svg", "roc.svg",
                          "reprojection_0.svg", "config.txt"})
      CHECK(fs::exists(ev / f));
    CHECK(run_cli({"eval", "--checkpoint", (out / "nothing.ckpt").string(), "--data", data.string(),
                   "--out", ev.string()}) == kExitData);
    CHECK(run_cli({"eval", "--checkpoint", (out / "best.ckpt").string(), "--out", ev.string()}) == kExitUsage);
  }

  TEST_CASE("train is byte reproducible through the CLI") {
    const fs::path data = smoke_data();
    const fs::path a = temp_dir("repro_a"), b = temp_dir("repro_b");
    for (const fs::path& d : {a, b}) {
      REQUIRE(run_cli({"train", "--data", data.string(), "--seed", "1", "--quiet", "--set",
                       "model.preset=small", "--set", "train.epochs=1", "--out", d.string()}) == kExitOk);
    }
    for (const char* f : {"best.ckpt", "last.ckpt", "train_log.csv", "config.txt"})
      CHECK(read_file(a / f) == read_file(b / f));
  }
}
