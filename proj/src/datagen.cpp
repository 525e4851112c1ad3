#include "spinsight/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "spinsight/errors.hpp"

namespace spinsight {

using ojson = nlohmann::ordered_json;

namespace {

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw ParseError(0, what, "non-finite value on write");
}

ojson vec_json(const Vec3& v) {
  require_finite(v.x, "vec3");
  require_finite(v.y, "vec3");
  require_finite(v.z, "vec3");
  return ojson::array({v.x, v.y, v.z});
}

ojson pixel_json(const Pixel& p) {
  require_finite(p.u, "pixel");
  require_finite(p.v, "pixel");
  return ojson::array({p.u, p.v});
}

template <typename T, typename F>
ojson list_json(const std::vector<T>& xs, F&& f) {
  ojson arr = ojson::array();
  for (const auto& x : xs) arr.push_back(f(x));
  return arr;
}

// Field reader that reports line number and path on failure.
class Reader {
 public:
  explicit Reader(std::size_t line) : line_(line) {}

  [[noreturn]] void fail(const std::string& path, const std::string& msg) const {
    throw ParseError(line_, path, msg);
  }

  double number(const ojson& j, const std::string& path) const {
    if (j.is_null()) fail(path, "non-finite");
    if (!j.is_number()) fail(path, "expected number");
    const double x = j.get<double>();
    if (!std::isfinite(x)) fail(path, "non-finite");
    return x;
  }

  long integer(const ojson& j, const std::string& path) const {
    if (!j.is_number_integer()) fail(path, "expected integer");
    return j.get<long>();
  }

  std::string string(const ojson& j, const std::string& path) const {
    if (!j.is_string()) fail(path, "expected string");
    return j.get<std::string>();
  }

  const ojson& array(const ojson& j, const std::string& path,
                     std::optional<std::size_t> size = std::nullopt) const {
    if (!j.is_array()) fail(path, "expected array");
    if (size && j.size() != *size) {
      fail(path, "expected " + std::to_string(*size) + " elements, got " +
                     std::to_string(j.size()));
    }
    return j;
  }

  Vec3 vec3(const ojson& j, const std::string& path) const {
    array(j, path, 3);
    return {number(j[0], path + "/0"), number(j[1], path + "/1"),
            number(j[2], path + "/2")};
  }

  Pixel pixel(const ojson& j, const std::string& path) const {
    array(j, path, 2);
    return {number(j[0], path + "/0"), number(j[1], path + "/1")};
  }

  std::vector<Vec3> vec3_list(const ojson& j, const std::string& path) const {
    array(j, path);
    std::vector<Vec3> out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
      out.push_back(vec3(j[i], path + "/" + std::to_string(i)));
    }
    return out;
  }

  std::vector<Pixel> pixel_list(const ojson& j, const std::string& path) const {
    array(j, path);
    std::vector<Pixel> out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
      out.push_back(pixel(j[i], path + "/" + std::to_string(i)));
    }
    return out;
  }

 private:
  std::size_t line_;
};

const std::set<std::string>& known_record_fields() {
  static const std::set<std::string> fields = {
      "version",     "id",          "split",         "fps",
      "fine_fps",    "image_size",  "camera_mode",   "camera",
      "ball_2d",     "table_2d",    "init",          "gt_traj_3d",
      "gt_spin_world", "gt_spin_ball", "fine_traj_3d", "bounce_frame",
      "spin_class"};
  return fields;
}

}  // namespace

const char* to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
    case Split::kReal: return "real";
  }
  return "unknown";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  if (s == "real") return Split::kReal;
  throw ParseError(0, "/split", "unknown split '" + std::string(s) + "'");
}

bool operator==(const SampleRecord& a, const SampleRecord& b) {
  const bool cams_equal =
      a.camera.has_value() == b.camera.has_value() &&
      (!a.camera || (a.camera->matrix() == b.camera->matrix() &&
                     a.camera->image_size() == b.camera->image_size()));
  auto state_eq = [](const std::optional<BallState>& x,
                     const std::optional<BallState>& y) {
    if (x.has_value() != y.has_value()) return false;
    if (!x) return true;
    return x->r == y->r && x->v == y->v && x->w == y->w && x->t == y->t;
  };
  return a.id == b.id && a.split == b.split && a.fps == b.fps &&
         a.fine_fps == b.fine_fps && a.image_size == b.image_size &&
         a.ball_2d == b.ball_2d && a.table_2d == b.table_2d &&
         a.camera_mode == b.camera_mode && cams_equal &&
         state_eq(a.init, b.init) && a.gt_traj_3d == b.gt_traj_3d &&
         a.gt_spin_world == b.gt_spin_world &&
         a.gt_spin_ball == b.gt_spin_ball && a.fine_traj_3d == b.fine_traj_3d &&
         a.bounce_frame == b.bounce_frame && a.spin_class == b.spin_class;
}

std::string SamplerRanges::canonical_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "x=" << x_min << "," << x_max << "\ny=" << y_min << "," << y_max
     << "\nz=" << z_min << "," << z_max << "\nvx=" << vx_min << "," << vx_max
     << "\nvy=" << vy_min << "," << vy_max << "\nvz=" << vz_min << ","
     << vz_max << "\nspin_max=" << spin_max << "\n";
  return os.str();
}

BallState sample_initial(Rng& rng, const SamplerRanges& r) {
  BallState s;
  s.r.x = uniform(rng, r.x_min, r.x_max);
  s.r.y = uniform(rng, r.y_min, r.y_max);
  s.r.z = uniform(rng, r.z_min, r.z_max);
  s.v.x = uniform(rng, r.vx_min, r.vx_max);
  s.v.y = uniform(rng, r.vy_min, r.vy_max);
  s.v.z = uniform(rng, r.vz_min, r.vz_max);
  s.w.x = uniform(rng, -r.spin_max, r.spin_max);
  s.w.y = uniform(rng, -r.spin_max, r.spin_max);
  s.w.z = uniform(rng, -r.spin_max, r.spin_max);
  s.t = 0.0;
  return s;
}

Vec3 spin_in_ball_frame(const Vec3& spin_world, std::span<const Vec3> traj) {
  if (traj.size() < 2) throw DegenerateDirection("trajectory shorter than 2");
  return world_to_ball(spin_world, ball_frame(traj[0], traj[1]));
}

SampleRecord make_record(const BallState& init, const Trajectory& traj,
                         const CameraModel& cam, std::string id, Split split,
                         CameraMode mode) {
  SampleRecord rec;
  rec.id = std::move(id);
  rec.split = split;
  rec.fps = 50;
  rec.fine_fps = rec.fps * traj.frame_stride;
  rec.image_size = cam.image_size();
  rec.camera_mode = mode;
  rec.init = init;
  for (const auto& s : traj.frames) rec.gt_traj_3d.push_back(s.r);
  for (const auto& s : traj.fine) rec.fine_traj_3d.push_back(s.r);
  rec.gt_spin_world = init.w;
  rec.gt_spin_ball = spin_in_ball_frame(init.w, rec.gt_traj_3d);
  rec.bounce_frame = traj.bounce_frame();
  return reproject(rec, cam);
}

SampleRecord reproject(const SampleRecord& rec, const CameraModel& cam) {
  SampleRecord out = rec;
  out.camera = cam;
  out.image_size = cam.image_size();
  out.ball_2d.clear();
  for (const auto& r : out.gt_traj_3d) out.ball_2d.push_back(project(cam, r));
  out.table_2d.clear();
  for (const auto& k : table_keypoints_3d()) out.table_2d.push_back(project(cam, k));
  return out;
}

bool record_is_valid(const SampleRecord& rec, const PhysicsParams& p,
                     const ValidityRules& rules) {
  if (!rec.init || !rec.camera) return false;
  const Trajectory traj = simulate(*rec.init, p);
  return is_valid(traj, *rec.camera, rec.image_size, p, rules);
}

SampleRecord augment_motion_blur(const SampleRecord& s, Rng& rng,
                                 double window) {
  if (s.fine_traj_3d.empty()) throw MissingFineTrack("record " + s.id);
  if (!s.camera) throw MissingFineTrack("record " + s.id + " has no camera");
  const long stride = s.fine_stride();
  const long reach =
      static_cast<long>(std::floor(window * static_cast<double>(stride) + 1e-9));
  const long last = static_cast<long>(s.fine_traj_3d.size()) - 1;

  SampleRecord out = s;
  for (std::size_t i = 0; i < out.gt_traj_3d.size(); ++i) {
    const long nominal = static_cast<long>(i) * stride;
    const long lo = std::max(0L, nominal - reach);
    const long hi = std::min(last, nominal + reach);
    const long pick = uniform_int(rng, lo, hi);
    out.gt_traj_3d[i] = s.fine_traj_3d[static_cast<std::size_t>(pick)];
    out.ball_2d[i] = project(*s.camera, out.gt_traj_3d[i]);
  }
  if (out.gt_spin_world) {
    out.gt_spin_ball = spin_in_ball_frame(*out.gt_spin_world, out.gt_traj_3d);
  }
  return out;
}

SampleRecord augment_sudden_end(const SampleRecord& s, Rng& rng,
                                double probability, std::size_t min_frames) {
  const double u = uniform01(rng);
  if (!(u < probability)) return s;
  const std::size_t n = s.length();
  std::size_t keep_min = min_frames;
  if (s.bounce_frame) keep_min = std::max(keep_min, *s.bounce_frame + 1);
  if (keep_min >= n) return s;
  const auto keep = static_cast<std::size_t>(uniform_int(
      rng, static_cast<long>(keep_min), static_cast<long>(n - 1)));

  SampleRecord out = s;
  out.ball_2d.resize(keep);
  if (!out.gt_traj_3d.empty()) out.gt_traj_3d.resize(keep);
  if (!out.fine_traj_3d.empty()) {
    const std::size_t fine_keep =
        std::min(out.fine_traj_3d.size(),
                 keep * static_cast<std::size_t>(s.fine_stride()));
    out.fine_traj_3d.resize(fine_keep);
  }
  return out;
}

SampleRecord augment_gaussian(const SampleRecord& s, Rng& rng, double sigma) {
  SampleRecord out = s;
  for (auto& p : out.ball_2d) {
    p.u += sigma * standard_normal(rng);
    p.v += sigma * standard_normal(rng);
  }
  for (auto& p : out.table_2d) {
    p.u += sigma * standard_normal(rng);
    p.v += sigma * standard_normal(rng);
  }
  return out;
}

SampleRecord apply_training_pipeline(const SampleRecord& rec, Rng& rng,
                                     const AugmentationOptions& options) {
  SampleRecord out = rec;
  if (options.resample_camera && rec.camera_mode == CameraMode::kResample &&
      !rec.gt_traj_3d.empty()) {
    for (int attempt = 0; attempt < options.camera_attempts; ++attempt) {
      const CameraModel cam = sample_camera(rng, rec.image_size);
      const bool visible = std::all_of(
          rec.fine_traj_3d.begin(), rec.fine_traj_3d.end(), [&](const Vec3& r) {
            return projects_inside(cam, r, rec.image_size);
          });
      if (visible) {
        out = reproject(rec, cam);
        break;
      }
    }
  }
  if (options.motion_blur && !out.fine_traj_3d.empty()) {
    out = augment_motion_blur(out, rng, options.motion_blur_window);
  }
  if (options.sudden_end) {
    out = augment_sudden_end(out, rng, options.sudden_end_probability);
  }
  if (options.gaussian) {
    out = augment_gaussian(out, rng, options.gaussian_sigma);
  }
  return out;
}

std::string serialize_record(const SampleRecord& rec) {
  ojson j;
  j["version"] = kRecordFormatVersion;
  j["id"] = rec.id;
  j["split"] = to_string(rec.split);
  j["fps"] = rec.fps;
  j["fine_fps"] = rec.fine_fps;
  j["image_size"] = ojson::array({rec.image_size.width, rec.image_size.height});
  if (rec.camera) {
    j["camera_mode"] =
        rec.camera_mode == CameraMode::kResample ? "resample" : "fixed";
    ojson p = ojson::array();
    const auto& m = rec.camera->matrix();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c) p.push_back(m(r, c));
    j["camera"] = p;
  }
  j["ball_2d"] = list_json(rec.ball_2d, pixel_json);
  j["table_2d"] = list_json(rec.table_2d, pixel_json);
  if (rec.init) {
    ojson init;
    init["r"] = vec_json(rec.init->r);
    init["v"] = vec_json(rec.init->v);
    init["w"] = vec_json(rec.init->w);
    init["t"] = rec.init->t;
    j["init"] = init;
  }
  if (!rec.gt_traj_3d.empty()) j["gt_traj_3d"] = list_json(rec.gt_traj_3d, vec_json);
  if (rec.gt_spin_world) j["gt_spin_world"] = vec_json(*rec.gt_spin_world);
  if (rec.gt_spin_ball) j["gt_spin_ball"] = vec_json(*rec.gt_spin_ball);
  if (!rec.fine_traj_3d.empty()) {
    j["fine_traj_3d"] = list_json(rec.fine_traj_3d, vec_json);
  }
  if (rec.bounce_frame) j["bounce_frame"] = *rec.bounce_frame;
  if (rec.spin_class) j["spin_class"] = *rec.spin_class;
  return j.dump();
}

SampleRecord parse_record(std::string_view line, std::size_t line_number) {
  const Reader rd(line_number);
  ojson j;
  try {
    j = ojson::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    const std::string text(line);
    if (text.find("NaN") != std::string::npos ||
        text.find("Infinity") != std::string::npos) {
      rd.fail("", "non-finite");
    }
    rd.fail("", std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) rd.fail("", "expected object");
  for (const auto& [key, value] : j.items()) {
    if (!known_record_fields().count(key)) rd.fail("/" + key, "unknown field");
  }
  for (const char* req : {"version", "id", "split", "fps", "image_size",
                          "ball_2d", "table_2d"}) {
    if (!j.contains(req)) rd.fail(std::string("/") + req, "missing field");
  }
  if (rd.integer(j["version"], "/version") != kRecordFormatVersion) {
    rd.fail("/version", "unsupported version");
  }

  SampleRecord rec;
  rec.id = rd.string(j["id"], "/id");
  try {
    rec.split = parse_split(rd.string(j["split"], "/split"));
  } catch (const ParseError&) {
    rd.fail("/split", "unknown split");
  }
  rec.fps = static_cast<int>(rd.integer(j["fps"], "/fps"));
  if (j.contains("fine_fps")) {
    rec.fine_fps = static_cast<int>(rd.integer(j["fine_fps"], "/fine_fps"));
  }
  if (rec.fps <= 0 || rec.fine_fps < rec.fps || rec.fine_fps % rec.fps != 0) {
    rd.fail("/fine_fps", "must be a positive multiple of fps");
  }
  rd.array(j["image_size"], "/image_size", 2);
  rec.image_size = {static_cast<int>(rd.integer(j["image_size"][0], "/image_size/0")),
                    static_cast<int>(rd.integer(j["image_size"][1], "/image_size/1"))};
  if (rec.image_size.width <= 0 || rec.image_size.height <= 0) {
    rd.fail("/image_size", "must be positive");
  }
  if (j.contains("camera")) {
    const auto& c = rd.array(j["camera"], "/camera", 12);
    ProjectionMatrix m;
    for (int r = 0; r < 3; ++r)
      for (int k = 0; k < 4; ++k)
        m(r, k) = rd.number(c[static_cast<std::size_t>(4 * r + k)],
                            "/camera/" + std::to_string(4 * r + k));
    try {
      rec.camera = CameraModel(m, rec.image_size);
    } catch (const Error& e) {
      rd.fail("/camera", e.what());
    }
    const std::string mode =
        j.contains("camera_mode") ? rd.string(j["camera_mode"], "/camera_mode")
                                  : "fixed";
    if (mode == "fixed") {
      rec.camera_mode = CameraMode::kFixed;
    } else if (mode == "resample") {
      rec.camera_mode = CameraMode::kResample;
    } else {
      rd.fail("/camera_mode", "unknown camera mode");
    }
  } else if (j.contains("camera_mode")) {
    rd.fail("/camera_mode", "camera_mode without camera");
  }
  rec.ball_2d = rd.pixel_list(j["ball_2d"], "/ball_2d");
  rec.table_2d = rd.pixel_list(j["table_2d"], "/table_2d");
  if (rec.table_2d.size() != kNumTableKeypoints) {
    rd.fail("/table_2d", "expected 13 keypoints");
  }
  if (j.contains("init")) {
    const auto& in = j["init"];
    if (!in.is_object()) rd.fail("/init", "expected object");
    for (const auto& [key, value] : in.items()) {
      if (key != "r" && key != "v" && key != "w" && key != "t") {
        rd.fail("/init/" + key, "unknown field");
      }
    }
    for (const char* req : {"r", "v", "w", "t"}) {
      if (!in.contains(req)) rd.fail(std::string("/init/") + req, "missing field");
    }
    BallState s;
    s.r = rd.vec3(in["r"], "/init/r");
    s.v = rd.vec3(in["v"], "/init/v");
    s.w = rd.vec3(in["w"], "/init/w");
    s.t = rd.number(in["t"], "/init/t");
    rec.init = s;
  }
  if (j.contains("gt_traj_3d")) {
    rec.gt_traj_3d = rd.vec3_list(j["gt_traj_3d"], "/gt_traj_3d");
    if (rec.gt_traj_3d.size() != rec.ball_2d.size()) {
      rd.fail("/gt_traj_3d", "length differs from ball_2d");
    }
  }
  if (j.contains("gt_spin_world")) {
    rec.gt_spin_world = rd.vec3(j["gt_spin_world"], "/gt_spin_world");
  }
  if (j.contains("gt_spin_ball")) {
    rec.gt_spin_ball = rd.vec3(j["gt_spin_ball"], "/gt_spin_ball");
  }
  if (j.contains("fine_traj_3d")) {
    rec.fine_traj_3d = rd.vec3_list(j["fine_traj_3d"], "/fine_traj_3d");
  }
  if (j.contains("bounce_frame")) {
    const long b = rd.integer(j["bounce_frame"], "/bounce_frame");
    if (b < 0) rd.fail("/bounce_frame", "must be non-negative");
    rec.bounce_frame = static_cast<std::size_t>(b);
  }
  if (j.contains("spin_class")) {
    const long c = rd.integer(j["spin_class"], "/spin_class");
    if (c != 1 && c != -1) rd.fail("/spin_class", "must be +1 or -1");
    rec.spin_class = static_cast<int>(c);
  }
  return rec;
}

void write_jsonl(const std::filesystem::path& path,
                 const std::vector<SampleRecord>& records) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoFailure("cannot open " + path.string() + " for writing");
  for (const auto& r : records) os << serialize_record(r) << '\n';
  os.flush();
  if (!os) throw IoFailure("write failed for " + path.string());
}

std::vector<SampleRecord> read_jsonl(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoFailure("cannot open " + path.string());
  std::vector<SampleRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    out.push_back(parse_record(line, line_no));
  }
  return out;
}

SplitCounts split_counts(std::size_t n_valid) {
  const std::size_t val = n_valid / 10;
  const std::size_t test = n_valid / 5;
  return {n_valid - val - test, val, test};
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

Dataset generate_dataset(const DatasetOptions& options) {
  options.physics.validate();
  const SplitCounts counts = split_counts(options.n_valid);
  const CameraModel eval_cam = default_camera(options.image_size);
  const std::size_t max_attempts =
      options.max_attempts ? options.max_attempts : 200 * std::max<std::size_t>(options.n_valid, 1);

  Dataset ds;
  std::size_t accepted = 0;
  std::size_t attempt = 0;
  for (; accepted < options.n_valid; ++attempt) {
    if (attempt >= max_attempts) {
      throw SamplingExhausted("only " + std::to_string(accepted) +
                              " valid trajectories after " +
                              std::to_string(attempt) + " simulations");
    }
    Rng rng(derive_seed(options.seed, attempt));
    const BallState init = sample_initial(rng, options.sampler);
    const Trajectory traj = simulate(init, options.physics);
    if (!is_valid(traj, eval_cam, options.image_size, options.physics,
                  options.rules)) {
      continue;
    }
    Split split = Split::kTrain;
    std::vector<SampleRecord>* dest = &ds.train;
    if (accepted >= counts.train + counts.val) {
      split = Split::kTest;
      dest = &ds.test;
    } else if (accepted >= counts.train) {
      split = Split::kVal;
      dest = &ds.val;
    }
    const CameraMode mode =
        split == Split::kTrain ? CameraMode::kResample : CameraMode::kFixed;
    std::ostringstream id;
    id << to_string(split) << "-";
    id.width(6);
    id.fill('0');
    id << dest->size();
    dest->push_back(make_record(init, traj, eval_cam, id.str(), split, mode));
    ++accepted;
  }

  ds.manifest.seed = options.seed;
  ds.manifest.n_valid = options.n_valid;
  ds.manifest.n_train = counts.train;
  ds.manifest.n_val = counts.val;
  ds.manifest.n_test = counts.test;
  ds.manifest.attempts = attempt;
  ds.manifest.physics_hash = fnv1a_hex(options.physics.canonical_text());
  ds.manifest.sampler_hash = fnv1a_hex(options.sampler.canonical_text());
  ds.manifest.image_size = options.image_size;
  return ds;
}

std::string manifest_to_json(const DatasetManifest& m) {
  ojson j;
  j["format_version"] = m.format_version;
  j["seed"] = m.seed;
  j["n_valid"] = m.n_valid;
  j["counts"] = {{"train", m.n_train}, {"val", m.n_val}, {"test", m.n_test}};
  j["attempts"] = m.attempts;
  j["physics_hash"] = m.physics_hash;
  j["sampler_hash"] = m.sampler_hash;
  j["image_size"] = ojson::array({m.image_size.width, m.image_size.height});
  j["files"] = {{"train", "train.jsonl"}, {"val", "val.jsonl"}, {"test", "test.jsonl"}};
  return j.dump(2) + "\n";
}

DatasetManifest manifest_from_json(std::string_view text) {
  DatasetManifest m;
  try {
    const ojson j = ojson::parse(text);
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != kManifestFormatVersion) {
      throw ParseError(0, "/format_version", "unsupported manifest version");
    }
    m.seed = j.at("seed").get<std::uint64_t>();
    m.n_valid = j.at("n_valid").get<std::size_t>();
    m.n_train = j.at("counts").at("train").get<std::size_t>();
    m.n_val = j.at("counts").at("val").get<std::size_t>();
    m.n_test = j.at("counts").at("test").get<std::size_t>();
    m.attempts = j.at("attempts").get<std::size_t>();
    m.physics_hash = j.at("physics_hash").get<std::string>();
    m.sampler_hash = j.at("sampler_hash").get<std::string>();
    m.image_size = {j.at("image_size").at(0).get<int>(),
                    j.at("image_size").at(1).get<int>()};
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, "manifest", e.what());
  }
  return m;
}

void write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoFailure("cannot create " + dir.string() + ": " + ec.message());
  write_jsonl(dir / "train.jsonl", ds.train);
  write_jsonl(dir / "val.jsonl", ds.val);
  write_jsonl(dir / "test.jsonl", ds.test);
  std::ofstream os(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  if (!os) throw IoFailure("cannot write manifest in " + dir.string());
  os << manifest_to_json(ds.manifest);
  if (!os) throw IoFailure("manifest write failed");
}

DatasetManifest generate_dataset(const DatasetOptions& options,
                                 const std::filesystem::path& dir) {
  const Dataset ds = generate_dataset(options);
  write_dataset(ds, dir);
  return ds.manifest;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  std::ifstream is(dir / "manifest.json", std::ios::binary);
  if (!is) throw IoFailure("missing manifest.json in " + dir.string());
  std::stringstream buf;
  buf << is.rdbuf();
  ds.manifest = manifest_from_json(buf.str());
  ds.train = read_jsonl(dir / "train.jsonl");
  ds.val = read_jsonl(dir / "val.jsonl");
  ds.test = read_jsonl(dir / "test.jsonl");
  if (ds.train.size() != ds.manifest.n_train ||
      ds.val.size() != ds.manifest.n_val ||
      ds.test.size() != ds.manifest.n_test) {
    throw ParseError(0, "manifest", "split counts do not match files");
  }
  return ds;
}

}  // namespace spinsight
