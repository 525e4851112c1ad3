#include "spinsight/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "spinsight/errors.hpp"
#include "spinsight/eval.hpp"
#include "spinsight/svg.hpp"

namespace spinsight {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

// --- config ------------------------------------------------------------------

namespace {

double to_double(std::string_view key, std::string_view v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(std::string(v), &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw UsageError(std::string(key) + ": expected a number, got '" + std::string(v) + "'");
}

long to_long(std::string_view key, std::string_view v) {
  const double x = to_double(key, v);
  if (x != std::floor(x)) throw UsageError(std::string(key) + ": expected an integer");
  return static_cast<long>(x);
}

struct Binding {
  std::function<void(std::string_view)> set;
  std::function<std::string()> get;
};

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

std::map<std::string, Binding, std::less<>> bindings(RunConfig& c) {
  std::map<std::string, Binding, std::less<>> b;
  auto real = [&](const std::string& key, double& ref) {
    b[key] = {[&ref, key](std::string_view v) { ref = to_double(key, v); },
              [&ref] { return fmt(ref); }};
  };
  PhysicsParams& p = c.physics;
  real("physics.gravity", p.gravity);
  real("physics.mass", p.mass);
  real("physics.radius", p.radius);
  real("physics.k_drag", p.k_drag);
  real("physics.k_magnus", p.k_magnus);
  real("physics.k_friction", p.k_friction);
  real("physics.restitution", p.restitution);
  real("physics.spin_retention", p.spin_retention);
  real("physics.dt", p.dt);
  real("physics.x_limit", p.x_limit);
  real("physics.table_length", p.table.length);
  real("physics.table_width", p.table.width);
  real("physics.table_height", p.table.height);
  real("physics.net_height", p.table.net_height);
  b["physics.frame_stride"] = {
      [&p](std::string_view v) { p.frame_stride = static_cast<int>(to_long("physics.frame_stride", v)); },
      [&p] { return std::to_string(p.frame_stride); }};
  SamplerRanges& s = c.sampler;
  real("sampler.x_min", s.x_min);
  real("sampler.x_max", s.x_max);
  real("sampler.y_min", s.y_min);
  real("sampler.y_max", s.y_max);
  real("sampler.z_min", s.z_min);
  real("sampler.z_max", s.z_max);
  real("sampler.vx_min", s.vx_min);
  real("sampler.vx_max", s.vx_max);
  real("sampler.vy_min", s.vy_min);
  real("sampler.vy_max", s.vy_max);
  real("sampler.vz_min", s.vz_min);
  real("sampler.vz_max", s.vz_max);
  real("sampler.spin_max", s.spin_max);
  b["data.n"] = {[&c](std::string_view v) {
                   const long n = to_long("data.n", v);
                   if (n < 1) throw UsageError("data.n must be positive");
                   c.n_valid = static_cast<std::size_t>(n);
                 },
                 [&c] { return std::to_string(c.n_valid); }};
  b["data.image_width"] = {[&c](std::string_view v) { c.image.width = static_cast<int>(to_long("data.image_width", v)); },
                           [&c] { return std::to_string(c.image.width); }};
  b["data.image_height"] = {[&c](std::string_view v) { c.image.height = static_cast<int>(to_long("data.image_height", v)); },
                            [&c] { return std::to_string(c.image.height); }};
  return b;
}

}  // namespace

RunConfig::RunConfig() { train.model = SptConfig::from_preset("large"); }

void RunConfig::set(std::string_view key, std::string_view value) {
  if (key.starts_with("model.") || key.starts_with("train.") || key.starts_with("aug.")) {
    train.set(key, value);
    return;
  }
  auto b = bindings(*this);
  const auto it = b.find(key);
  if (it == b.end()) throw UsageError("unknown config key '" + std::string(key) + "'");
  it->second.set(value);
}

void RunConfig::apply_text(std::string_view text) {
  for_each_config_line(text, [&](std::string_view k, std::string_view v) { set(k, v); });
}

void RunConfig::apply_file(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw UsageError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  apply_text(ss.str());
}

std::string RunConfig::to_text() const {
  RunConfig copy = *this;
  std::ostringstream os;
  for (const auto& [k, b] : bindings(copy)) os << k << '=' << b.get() << '\n';
  os << train.to_text();
  return os.str();
}

// --- single-component spin runs ---------------------------------------------

BallState fig1_initial_state() {
  BallState s;
  s.r = {-1.6, 0.0, 0.05};
  s.v = {7.5, 0.0, 1.75};
  return s;
}

double max_deviation(const Trajectory& a, const Trajectory& b) {
  const std::size_t n = std::min(a.fine.size(), b.fine.size());
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, norm(a.fine[i].r - b.fine[i].r));
  return m;
}

std::vector<SpinRun> fig1_runs(const PhysicsParams& p, double component_hz) {
  const BallState init = fig1_initial_state();
  const BallFrame frame = ball_frame_from_direction(init.v);
  std::vector<SpinRun> runs;
  runs.push_back({"no spin", {}, simulate(init, p), 0.0});
  const char* labels[] = {"w_x", "w_y", "w_z"};
  for (int c = 0; c < 3; ++c) {
    Vec3 w;
    (c == 0 ? w.x : c == 1 ? w.y : w.z) = component_hz;
    BallState s = init;
    s.w = ball_to_world(w, frame);
    SpinRun r{labels[c], w, simulate(s, p), 0.0};
    r.deviation = max_deviation(runs[0].traj, r.traj);
    runs.push_back(std::move(r));
  }
  return runs;
}

// --- helpers -------------------------------------------------------------------

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoFailure("cannot create " + dir.string() + ": " + ec.message());
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoFailure("cannot write " + path.string());
  f << text;
  if (!f) throw IoFailure("short write to " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoFailure("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

ojson vec(const Vec3& v) { return ojson::array({v.x, v.y, v.z}); }

void echo_config(const fs::path& dir, const std::string& command, std::uint64_t seed,
                 const RunConfig& cfg) {
  write_file(dir / "config.txt", "# " + command + "\n# seed=" + std::to_string(seed) + "\n" +
                                     cfg.to_text());
}

svg::Series path_series(const Trajectory& t, const std::string& label, int ax, int ay) {
  svg::Series s{label, {}, {}, "", false};
  auto comp = [](const Vec3& v, int a) { return a == 0 ? v.x : a == 1 ? v.y : v.z; };
  for (const auto& b : t.fine) {
    s.x.push_back(comp(b.r, ax));
    s.y.push_back(comp(b.r, ay));
  }
  return s;
}

svg::Series image_series(const Trajectory& t, const CameraModel& cam, const std::string& label) {
  svg::Series s{label, {}, {}, "", false};
  for (const auto& b : t.fine) {
    if (cam.depth(b.r) <= 0.0) continue;
    const Pixel px = project(cam, b.r);
    s.x.push_back(px.u);
    s.y.push_back(px.v);
  }
  return s;
}

void write_views(const fs::path& dir, const std::string& stem,
                 const std::vector<std::pair<std::string, const Trajectory*>>& runs,
                 const PhysicsParams& p, const ImageSize& img) {
  const TableGeometry& tb = p.table;
  const double hx = tb.half_length(), hy = tb.half_width();

  std::vector<svg::Series> top, side, image;
  for (const auto& [label, t] : runs) {
    top.push_back(path_series(*t, label, 0, 1));
    side.push_back(path_series(*t, label, 0, 2));
  }
  top.push_back({"table", {-hx, hx, hx, -hx, -hx}, {-hy, -hy, hy, hy, -hy}, "#888"});
  side.push_back({"table", {-hx, hx}, {0.0, 0.0}, "#888"});
  svg::PlotOptions o;
  o.title = "Top view";
  o.x_label = "x (m)";
  o.y_label = "y (m)";
  o.equal_aspect = true;
  o.width = 800;
  o.height = 420;
  write_file(dir / (stem + "_top.svg"), svg::line_plot(top, o));
  o.title = "Side view";
  o.y_label = "z (m)";
  write_file(dir / (stem + "_side.svg"), svg::line_plot(side, o));

  const CameraModel cam = default_camera(img);
  for (const auto& [label, t] : runs) image.push_back(image_series(*t, cam, label));
  svg::Series table{"table", {}, {}, "#888"};
  const auto kp = table_keypoints_3d();
  for (int k : {0, 1, 2, 3, 0}) {
    const Pixel px = project(cam, kp[k]);
    table.x.push_back(px.u);
    table.y.push_back(px.v);
  }
  image.push_back(table);
  svg::PlotOptions io;
  io.title = "Image plane (evaluation camera)";
  io.x_label = "u (px)";
  io.y_label = "v (px)";
  io.flip_y = true;
  io.equal_aspect = true;
  io.width = 800;
  io.height = 500;
  io.x_min = 0, io.x_max = img.width, io.y_min = 0, io.y_max = img.height;
  write_file(dir / (stem + "_image.svg"), svg::line_plot(image, io));
}

std::string trajectory_jsonl(const std::string& run, const Trajectory& t, bool fine) {
  std::ostringstream os;
  const auto& states = fine ? t.fine : t.frames;
  for (std::size_t i = 0; i < states.size(); ++i) {
    ojson j;
    j["run"] = run;
    j["index"] = i;
    j["t"] = states[i].t;
    j["r"] = vec(states[i].r);
    j["v"] = vec(states[i].v);
    j["w"] = vec(states[i].w);
    os << j.dump() << '\n';
  }
  return os.str();
}

ojson trajectory_summary(const Trajectory& t) {
  ojson j;
  j["termination"] = to_string(t.termination);
  j["fine_samples"] = t.fine.size();
  j["frames"] = t.frames.size();
  j["bounce_count"] = t.bounce_count;
  if (t.bounce_point) {
    j["bounce_point"] = vec(*t.bounce_point);
    j["bounce_time"] = t.bounce_time;
  }
  if (const auto bf = t.bounce_frame()) j["bounce_frame"] = *bf;
  return j;
}

BallState parse_init(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) v.push_back(to_double("--init", item));
  if (v.size() != 9) throw UsageError("--init expects 9 comma-separated numbers rx,ry,rz,vx,vy,vz,wx,wy,wz");
  BallState s;
  s.r = {v[0], v[1], v[2]};
  s.v = {v[3], v[4], v[5]};
  s.w = {v[6], v[7], v[8]};
  return s;
}

// --- commands ------------------------------------------------------------------

struct Common {
  std::uint64_t seed = 0;
  std::string config_file;
  std::vector<std::string> overrides;
  std::string out;

  RunConfig load() const {
    RunConfig cfg;
    if (!config_file.empty()) cfg.apply_file(config_file);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
  }
};

void add_common(CLI::App* app, Common& c, bool need_out) {
  app->add_option("--seed", c.seed, "Random seed");
  app->add_option("--config", c.config_file, "key=value config file");
  app->add_option("--set", c.overrides, "Override one config key (key=value), repeatable");
  auto* out = app->add_option("--out", c.out, "Output directory");
  if (need_out) out->required();
}

struct SimulateArgs {
  Common common;
  bool fig1 = false;
  bool fine = false;
  std::string init;
};

int cmd_simulate(const SimulateArgs& a) {
  RunConfig cfg = a.common.load();
  cfg.physics.validate();
  const fs::path dir = a.common.out;
  ensure_dir(dir);
  echo_config(dir, "simulate", a.common.seed, cfg);
  if (a.fig1) {
    const auto runs = fig1_runs(cfg.physics);
    std::string jsonl;
    std::ostringstream csv;
    csv << std::setprecision(10) << "run,spin_x_hz,spin_y_hz,spin_z_hz,max_deviation_m\n";
    std::vector<std::pair<std::string, const Trajectory*>> views;
    for (const auto& r : runs) {
      jsonl += trajectory_jsonl(r.label, r.traj, a.fine);
      csv << r.label << ',' << r.spin_ball.x << ',' << r.spin_ball.y << ',' << r.spin_ball.z
          << ',' << r.deviation << '\n';
      views.emplace_back(r.label, &r.traj);
      std::cout << r.label << ": max deviation " << r.deviation << " m, "
                << to_string(r.traj.termination) << '\n';
    }
    write_file(dir / "fig1.jsonl", jsonl);
    write_file(dir / "fig1_deviation.csv", csv.str());
    write_views(dir, "fig1", views, cfg.physics, cfg.image);
    return kExitOk;
  }
  BallState init;
  if (!a.init.empty()) {
    init = parse_init(a.init);
  } else {
    Rng rng(derive_seed(a.common.seed, 0x51a));
    init = sample_initial(rng, cfg.sampler);
  }
  const Trajectory t = simulate(init, cfg.physics);
  write_file(dir / "trajectory.jsonl", trajectory_jsonl("sim", t, a.fine));
  ojson summary = trajectory_summary(t);
  summary["init"] = {{"r", vec(init.r)}, {"v", vec(init.v)}, {"w", vec(init.w)}};
  summary["valid"] = is_valid(t, default_camera(cfg.image), cfg.image, cfg.physics);
  write_file(dir / "summary.json", summary.dump(2) + "\n");
  write_views(dir, "trajectory", {{"trajectory", &t}}, cfg.physics, cfg.image);
  std::cout << "simulated " << t.fine.size() << " fine samples, " << t.frames.size()
            << " frames, termination " << to_string(t.termination) << '\n';
  return kExitOk;
}

struct GenArgs {
  Common common;
  long n = -1;
};

int cmd_gen_data(const GenArgs& a) {
  RunConfig cfg = a.common.load();
  if (a.n >= 0) cfg.n_valid = static_cast<std::size_t>(a.n);
  if (cfg.n_valid < 1) throw UsageError("--n must be positive");
  DatasetOptions o;
  o.n_valid = cfg.n_valid;
  o.seed = a.common.seed;
  o.physics = cfg.physics;
  o.sampler = cfg.sampler;
  o.image_size = cfg.image;
  const fs::path dir = a.common.out;
  ensure_dir(dir);
  echo_config(dir, "gen-data", a.common.seed, cfg);
  const DatasetManifest m = generate_dataset(o, dir);
  std::cout << "wrote " << m.n_train << " train, " << m.n_val << " val, " << m.n_test
            << " test records (" << m.attempts << " simulations) to " << dir.string() << '\n';
  return kExitOk;
}

struct CalibrateArgs {
  Common common;
  std::string keypoints;
};

int cmd_calibrate(const CalibrateArgs& a) {
  RunConfig cfg = a.common.load();
  ojson in;
  try {
    in = ojson::parse(read_file(a.keypoints));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, "", std::string("keypoint file: ") + e.what());
  }
  ImageSize img = cfg.image;
  try {
    if (in.contains("image_size")) {
      img.width = in["image_size"].at(0).get<int>();
      img.height = in["image_size"].at(1).get<int>();
    }
    const auto& kp = in.at("keypoints_2d");
    if (!kp.is_array() || kp.size() != kNumTableKeypoints) {
      throw ParseError(0, "/keypoints_2d", "expected 13 [u, v] pairs");
    }
    std::vector<Correspondence> corr;
    const auto world = table_keypoints_3d();
    for (std::size_t k = 0; k < kNumTableKeypoints; ++k) {
      corr.push_back({world[k], {kp[k].at(0).get<double>(), kp[k].at(1).get<double>()}});
    }
    Rng rng(derive_seed(a.common.seed, 0xca1));
    const CalibrationResult res = calibrate_ransac(corr, rng, img);
    const fs::path dir = a.common.out;
    ensure_dir(dir);
    echo_config(dir, "calibrate", a.common.seed, cfg);

    ojson out;
    out["image_size"] = {img.width, img.height};
    ojson m = ojson::array();
    for (int r = 0; r < 3; ++r) {
      ojson row = ojson::array();
      for (int c = 0; c < 4; ++c) row.push_back(res.camera.matrix()(r, c));
      m.push_back(row);
    }
    out["matrix"] = m;
    out["inliers"] = res.inliers;
    out["inlier_count"] = res.inlier_count;
    out["best_iteration"] = res.best_iteration;
    out["mean_error_inliers_px"] = res.mean_error_inliers;
    std::ostringstream csv;
    csv << std::setprecision(10) << "index,u,v,projected_u,projected_v,error_px,inlier\n";
    ojson errors = ojson::array();
    for (std::size_t k = 0; k < corr.size(); ++k) {
      const Pixel p = project(res.camera, corr[k].world);
      const double e = distance(p, corr[k].pixel);
      errors.push_back(e);
      csv << k << ',' << corr[k].pixel.u << ',' << corr[k].pixel.v << ',' << p.u << ',' << p.v
          << ',' << e << ',' << (res.inliers[k] ? 1 : 0) << '\n';
    }
    out["per_point_error_px"] = errors;
    if (in.contains("ball_2d")) out["ball_2d_count"] = in["ball_2d"].size();
    write_file(dir / "camera.json", out.dump(2) + "\n");
    write_file(dir / "reprojection.csv", csv.str());
    std::cout << "calibrated with " << res.inlier_count << "/" << corr.size()
              << " inliers, mean inlier error " << res.mean_error_inliers << " px\n";
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, "", std::string("keypoint file: ") + e.what());
  }
  return kExitOk;
}

struct TrainArgs {
  Common common;
  std::string data;
  std::string resume;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a, bool seed_given) {
  RunConfig cfg = a.common.load();
  if (seed_given) cfg.train.seed = a.common.seed;
  cfg.train.validate();
  const Dataset ds = load_dataset(a.data);
  const fs::path dir = a.common.out;
  ensure_dir(dir);
  echo_config(dir, "train", cfg.train.seed, cfg);
  TrainHooks hooks;
  if (!a.quiet) {
    hooks.on_epoch = [](const EpochLog& e) {
      std::cout << "epoch " << e.epoch << " loss " << e.train_loss << " val spin error "
                << e.val_spin_error << " Hz (best " << e.best_val << ")" << std::endl;
    };
  }
  std::optional<fs::path> resume;
  if (!a.resume.empty()) resume = a.resume;
  const TrainResult r = train(cfg.train, ds, dir, hooks, resume);
  std::cout << "best epoch " << r.best_epoch << ", checkpoint " << (dir / "best.ckpt").string()
            << '\n';
  return kExitOk;
}

struct EvalArgs {
  Common common;
  std::string checkpoint;
  std::string data;
  std::string split = "test";
  std::string records;
  bool no_reprojection = false;
  int overlays = 3;
};

int cmd_eval(const EvalArgs& a) {
  RunConfig cfg = a.common.load();
  if (a.data.empty() == a.records.empty()) {
    throw UsageError("give exactly one of --data DIR or --records FILE");
  }
  if (!fs::exists(a.checkpoint)) throw IoFailure("checkpoint not found: " + a.checkpoint);
  const LoadedModel model = load_model(fs::path(a.checkpoint));
  std::vector<SampleRecord> records;
  if (!a.records.empty()) {
    records = read_jsonl(a.records);
  } else {
    Dataset ds = load_dataset(a.data);
    const Split s = parse_split(a.split);
    if (s == Split::kTrain) records = std::move(ds.train);
    else if (s == Split::kVal) records = std::move(ds.val);
    else if (s == Split::kTest) records = std::move(ds.test);
    else throw UsageError("--split must be train, val or test");
  }
  EvalOptions opts;
  opts.reprojection = !a.no_reprojection;
  opts.seed = a.common.seed;
  const EvalResult res = evaluate(model.config.model, model.params, records, opts);

  const fs::path dir = a.common.out;
  ensure_dir(dir);
  RunConfig echo = cfg;
  echo.train = model.config;
  echo_config(dir, "eval", a.common.seed, echo);
  write_file(dir / "metrics.json", res.report.to_json());
  write_file(dir / "metrics.csv", res.report.to_csv());
  std::ostringstream preds;
  for (const auto& p : res.predictions) {
    ojson j;
    j["id"] = p.id;
    j["spin_class"] = p.spin_class;
    j["spin_pred"] = vec(p.output.spin);
    j["spin_pred_ball"] = vec(p.spin_ball);
    ojson traj = ojson::array();
    for (const auto& r : p.output.traj) traj.push_back(vec(r));
    j["traj_pred"] = traj;
    preds << j.dump() << '\n';
  }
  write_file(dir / "predictions.jsonl", preds.str());
  write_file(dir / "confusion.svg", svg::confusion_plot(res.report.confusion));
  if (res.report.roc_auc) {
    write_file(dir / "roc.svg", svg::roc_plot(res.report.roc_curve, *res.report.roc_auc));
  }
  if (opts.reprojection) {
    const int n = std::min<int>(a.overlays, static_cast<int>(records.size()));
    for (int i = 0; i < n; ++i) {
      const SampleRecord& rec = records[static_cast<std::size_t>(i)];
      std::vector<Correspondence> corr;
      const auto kp = table_keypoints_3d();
      for (std::size_t k = 0; k < kNumTableKeypoints; ++k) corr.push_back({kp[k], rec.table_2d[k]});
      Rng rng(derive_seed(opts.seed, static_cast<std::uint64_t>(i), 0xca1));
      const CameraModel cam = calibrate_ransac(corr, rng, rec.image_size).camera;
      std::vector<Pixel> projected;
      for (const auto& r : res.predictions[static_cast<std::size_t>(i)].output.traj) {
        projected.push_back(project(cam, r));
      }
      const std::string name = "reprojection_" + std::to_string(i) + ".svg";
      write_file(dir / name, svg::reprojection_overlay(rec.image_size, rec.ball_2d, projected,
                                                       rec.table_2d, rec.id));
    }
  }
  std::cout << res.report.to_json();
  return kExitOk;
}

int exit_code(const Error& e) {
  switch (e.category()) {
    case Error::Category::kUsage: return kExitUsage;
    case Error::Category::kData: return kExitData;
    case Error::Category::kNumerical: return kExitNumerical;
  }
  return kExitNumerical;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Table-tennis spin toolkit: simulation, synthetic data, SPT training and evaluation"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Simulate one trajectory or the single-component spin runs");
  add_common(s, sim.common, true);
  s->add_flag("--fig1", sim.fig1, "Run the spin-free and three single-component (-100 Hz) runs");
  s->add_flag("--fine", sim.fine, "Write 500 Hz samples instead of 50 Hz frames");
  s->add_option("--init", sim.init, "rx,ry,rz,vx,vy,vz,wx,wy,wz (world frame, spin in Hz)");

  GenArgs gen;
  auto* g = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  add_common(g, gen.common, true);
  g->add_option("--n", gen.n, "Number of valid trajectories (default data.n)");

  CalibrateArgs cal;
  auto* c = app.add_subcommand("calibrate", "Calibrate a camera from 13 table keypoints");
  add_common(c, cal.common, true);
  c->add_option("--keypoints", cal.keypoints, "JSON file with image_size and keypoints_2d")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model on a generated dataset");
  add_common(t, tr.common, true);
  t->add_option("--data", tr.data, "Dataset directory")->required();
  t->add_option("--resume", tr.resume, "Continue from a last.ckpt");
  t->add_flag("--quiet", tr.quiet, "Suppress per-epoch output");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(e, ev.common, true);
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  e->add_option("--data", ev.data, "Dataset directory");
  e->add_option("--split", ev.split, "train, val or test");
  e->add_option("--records", ev.records, "JSONL file of (annotated real) records");
  e->add_flag("--no-reprojection", ev.no_reprojection, "Skip camera calibration and 2D error");
  e->add_option("--overlays", ev.overlays, "Number of reprojection overlay SVGs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (s->parsed()) return cmd_simulate(sim);
    if (g->parsed()) return cmd_gen_data(gen);
    if (c->parsed()) return cmd_calibrate(cal);
    if (t->parsed()) return cmd_train(tr, t->count("--seed") > 0);
    if (e->parsed()) return cmd_eval(ev);
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return exit_code(err);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"spinsight"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace spinsight
