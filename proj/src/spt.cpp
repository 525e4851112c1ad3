#include "spinsight/spt.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "spinsight/errors.hpp"
#include "spinsight/rng.hpp"

namespace spinsight {

using ag::Parameters;
using ag::Tape;
using ag::Tensor;
using ag::Var;

const char* to_string(Variant v) {
  switch (v) {
    case Variant::kSingleStage: return "single_stage";
    case Variant::kTwoStage: return "two_stage";
    case Variant::kConnectStage: return "connect_stage";
  }
  return "?";
}

const char* to_string(Embedding e) {
  switch (e) {
    case Embedding::kContextFree: return "context_free";
    case Embedding::kConcatenation: return "concatenation";
    case Embedding::kDynamic: return "dynamic";
  }
  return "?";
}

const char* to_string(SpinFrame f) {
  return f == SpinFrame::kWorld ? "world" : "ball";
}

namespace {

long parse_int(std::string_view key, std::string_view value) {
  try {
    std::size_t used = 0;
    const long x = std::stol(std::string(value), &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return x;
  } catch (const std::exception&) {
    throw UsageError("model." + std::string(key) + ": expected an integer, got '" +
                     std::string(value) + "'");
  }
}

double parse_double(std::string_view key, std::string_view value) {
  try {
    std::size_t used = 0;
    const double x = std::stod(std::string(value), &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return x;
  } catch (const std::exception&) {
    throw UsageError("model." + std::string(key) + ": expected a number, got '" +
                     std::string(value) + "'");
  }
}

}  // namespace

SptConfig SptConfig::from_preset(std::string_view name) {
  SptConfig c;
  c.preset = std::string(name);
  if (name == "small") {
    c.layers = 8, c.heads = 4, c.dim = 32;
  } else if (name == "base") {
    c.layers = 12, c.heads = 4, c.dim = 64;
  } else if (name == "large") {
    c.layers = 16, c.heads = 4, c.dim = 128;
  } else if (name == "huge") {
    c.layers = 16, c.heads = 8, c.dim = 192;
  } else {
    throw UsageError("unknown model preset '" + std::string(name) +
                     "' (small, base, large, huge)");
  }
  return c;
}

void SptConfig::validate() const {
  if (layers < 1 || heads < 1 || dim < 2) throw UsageError("model sizes must be positive");
  if (dim % (2 * heads) != 0) {
    throw UsageError("model.dim must be divisible by 2 * model.heads");
  }
  if (mlp_hidden < 0) throw UsageError("model.mlp_hidden must be >= 0");
  if (variant != Variant::kSingleStage && layers <= second_stage_layers) {
    throw UsageError("two-stage variants need more layers than the second stage");
  }
  if (second_stage_layers < 1 || dynamic_layers < 1) {
    throw UsageError("stage layer counts must be positive");
  }
  if (max_length < 1) throw UsageError("model.max_length must be positive");
  if (!(omega_scale > 0.0) || !(rope_base > 1.0)) {
    throw UsageError("model.omega_scale and model.rope_base must be positive");
  }
}

void SptConfig::set(std::string_view key, std::string_view value) {
  if (key == "variant") {
    if (value == "single_stage") variant = Variant::kSingleStage;
    else if (value == "two_stage") variant = Variant::kTwoStage;
    else if (value == "connect_stage") variant = Variant::kConnectStage;
    else throw UsageError("model.variant: unknown value '" + std::string(value) + "'");
  } else if (key == "embedding") {
    if (value == "context_free") embedding = Embedding::kContextFree;
    else if (value == "concatenation") embedding = Embedding::kConcatenation;
    else if (value == "dynamic") embedding = Embedding::kDynamic;
    else throw UsageError("model.embedding: unknown value '" + std::string(value) + "'");
  } else if (key == "preset") {
    const SptConfig p = from_preset(value);
    preset = p.preset;
    layers = p.layers;
    heads = p.heads;
    dim = p.dim;
  } else if (key == "layers") {
    layers = static_cast<int>(parse_int(key, value));
  } else if (key == "heads") {
    heads = static_cast<int>(parse_int(key, value));
  } else if (key == "dim") {
    dim = static_cast<int>(parse_int(key, value));
  } else if (key == "mlp_hidden") {
    mlp_hidden = static_cast<int>(parse_int(key, value));
  } else if (key == "second_stage_layers") {
    second_stage_layers = static_cast<int>(parse_int(key, value));
  } else if (key == "dynamic_layers") {
    dynamic_layers = static_cast<int>(parse_int(key, value));
  } else if (key == "spin_frame") {
    if (value == "world") spin_frame = SpinFrame::kWorld;
    else if (value == "ball") spin_frame = SpinFrame::kBall;
    else throw UsageError("model.spin_frame: unknown value '" + std::string(value) + "'");
  } else if (key == "max_length") {
    max_length = static_cast<std::size_t>(parse_int(key, value));
  } else if (key == "omega_scale") {
    omega_scale = parse_double(key, value);
  } else if (key == "rope_base") {
    rope_base = parse_double(key, value);
  } else {
    throw UsageError("unknown config key 'model." + std::string(key) + "'");
  }
}

std::string SptConfig::to_text() const {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "model.variant=" << to_string(variant) << '\n'
     << "model.embedding=" << to_string(embedding) << '\n'
     << "model.preset=" << preset << '\n'
     << "model.layers=" << layers << '\n'
     << "model.heads=" << heads << '\n'
     << "model.dim=" << dim << '\n'
     << "model.mlp_hidden=" << mlp_hidden << '\n'
     << "model.second_stage_layers=" << second_stage_layers << '\n'
     << "model.dynamic_layers=" << dynamic_layers << '\n'
     << "model.spin_frame=" << to_string(spin_frame) << '\n'
     << "model.max_length=" << max_length << '\n'
     << "model.omega_scale=" << omega_scale << '\n'
     << "model.rope_base=" << rope_base << '\n';
  return os.str();
}

// --- inputs --------------------------------------------------------------

Pixel normalize_pixel(const Pixel& p, const ImageSize& img) {
  const double diag = img.diagonal();
  return {(p.u - 0.5 * img.width) / diag, (p.v - 0.5 * img.height) / diag};
}

ModelInput make_input(const SampleRecord& rec, std::size_t pad_to) {
  if (rec.table_2d.size() != kNumTableKeypoints) {
    throw ShapeMismatch("record " + rec.id + " has " +
                        std::to_string(rec.table_2d.size()) + " table keypoints");
  }
  const std::size_t n = rec.length();
  const std::size_t rows = std::max(n, pad_to);
  ModelInput in;
  in.length = n;
  in.points = Tensor({rows, 2 * kPointsPerFrame});
  std::array<Pixel, kNumTableKeypoints> table;
  for (std::size_t k = 0; k < kNumTableKeypoints; ++k) {
    table[k] = normalize_pixel(rec.table_2d[k], rec.image_size);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Pixel b = normalize_pixel(rec.ball_2d[i], rec.image_size);
    in.points.at(i, 0) = b.u;
    in.points.at(i, 1) = b.v;
    for (std::size_t k = 0; k < kNumTableKeypoints; ++k) {
      in.points.at(i, 2 + 2 * k) = table[k].u;
      in.points.at(i, 3 + 2 * k) = table[k].v;
    }
  }
  return in;
}

// --- parameters ------------------------------------------------------------

namespace {

struct Init {
  Parameters& params;
  Rng rng;

  void normal(const std::string& name, ag::Shape shape, double stddev) {
    Tensor t(std::move(shape));
    for (auto& x : t.values()) x = stddev * standard_normal(rng);
    params.add(name, std::move(t));
  }
  void constant(const std::string& name, ag::Shape shape, double value) {
    params.add(name, Tensor(std::move(shape), value));
  }
  void linear(const std::string& name, std::size_t in, std::size_t out,
              double gain = 1.0) {
    normal(name + ".w", {in, out}, gain / std::sqrt(static_cast<double>(in)));
    constant(name + ".b", {out}, 0.0);
  }
  void mlp(const std::string& name, std::size_t in, std::size_t hidden,
           std::size_t out) {
    linear(name + ".fc1", in, hidden);
    linear(name + ".fc2", hidden, out);
  }
  void layer_norm(const std::string& name, std::size_t d) {
    constant(name + ".g", {d}, 1.0);
    constant(name + ".b", {d}, 0.0);
  }
  void block(const std::string& name, std::size_t d, std::size_t hidden,
             int depth) {
    const double residual_gain = 1.0 / std::sqrt(2.0 * depth);
    layer_norm(name + ".ln1", d);
    linear(name + ".qkv", d, 3 * d);
    linear(name + ".out", d, d, residual_gain);
    layer_norm(name + ".ln2", d);
    linear(name + ".fc1", d, hidden);
    linear(name + ".fc2", hidden, d, residual_gain);
  }
  void encoder(const std::string& name, int layers, std::size_t d,
               std::size_t hidden) {
    for (int i = 0; i < layers; ++i) {
      block(name + ".layer" + std::to_string(i), d, hidden, layers);
    }
    layer_norm(name + ".ln_f", d);
  }
};

}  // namespace

Parameters init_parameters(const SptConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Parameters params;
  Init init{params, Rng(derive_seed(seed, 0x5e7))};
  const auto d = static_cast<std::size_t>(cfg.dim);
  const auto h = static_cast<std::size_t>(cfg.hidden());

  switch (cfg.embedding) {
    case Embedding::kContextFree:
      init.mlp("embed", 2, d, d);
      break;
    case Embedding::kConcatenation:
      init.mlp("embed", 2 * kPointsPerFrame, d, d);
      break;
    case Embedding::kDynamic:
      init.mlp("embed.point", 2, d, d);
      init.normal("embed.type", {kPointsPerFrame, d}, 0.02);
      init.encoder("embed.enc", cfg.dynamic_layers, d, h);
      break;
  }

  if (cfg.variant == Variant::kSingleStage) {
    init.normal("stage1.spin_token", {1, d}, 0.02);
  }
  init.encoder("stage1", cfg.first_stage_layers(), d, h);
  init.mlp("pos_head", d, d, 3);
  if (cfg.variant != Variant::kSingleStage) {
    if (cfg.variant == Variant::kTwoStage) init.linear("stage2.in", 3, d);
    init.normal("stage2.spin_token", {1, d}, 0.02);
    init.encoder("stage2", cfg.second_stage_layers, d, h);
  }
  init.mlp("spin_head", d, d, 3);
  return params;
}

// --- graph -----------------------------------------------------------------

namespace {

struct Ctx {
  Tape& t;
  const Parameters& p;
  const SptConfig& cfg;

  Var param(const std::string& name) const { return t.param(p, name); }

  Var linear(const std::string& name, Var x) const {
    return ag::add(ag::matmul(x, param(name + ".w")), param(name + ".b"));
  }
  Var mlp(const std::string& name, Var x) const {
    return linear(name + ".fc2", ag::gelu(linear(name + ".fc1", x)));
  }
  Var layer_norm(const std::string& name, Var x) const {
    return ag::layer_norm(x, param(name + ".g"), param(name + ".b"));
  }

  // Multi-head self-attention over consecutive row groups of size group
  // (0 means one group holding every row). positions enables RoPE.
  Var attention(const std::string& name, Var x, std::size_t group,
                const std::vector<double>* positions,
                const Tensor* mask) const {
    const std::size_t d = static_cast<std::size_t>(cfg.dim);
    const std::size_t heads = static_cast<std::size_t>(cfg.heads);
    const std::size_t hd = d / heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
    const Var qkv = linear(name + ".qkv", x);
    const std::size_t rows = x.value().dim(0);
    if (group == 0) group = rows;
    Var mask_var;
    if (mask) mask_var = t.constant(*mask);
    std::vector<Var> groups;
    for (std::size_t g0 = 0; g0 < rows; g0 += group) {
      const Var part = group == rows ? qkv : ag::slice_rows(qkv, g0, g0 + group);
      std::vector<Var> outs;
      for (std::size_t h = 0; h < heads; ++h) {
        Var q = ag::slice(part, h * hd, (h + 1) * hd);
        Var k = ag::slice(part, d + h * hd, d + (h + 1) * hd);
        const Var v = ag::slice(part, 2 * d + h * hd, 2 * d + (h + 1) * hd);
        if (positions) {
          q = ag::rope(q, *positions, cfg.rope_base);
          k = ag::rope(k, *positions, cfg.rope_base);
        }
        Var logits = ag::scale(ag::matmul_nt(q, k), inv_sqrt);
        if (mask) logits = ag::add(logits, mask_var);
        outs.push_back(ag::matmul(ag::softmax(logits), v));
      }
      groups.push_back(outs.size() == 1 ? outs[0] : ag::concat(outs));
    }
    const Var merged = groups.size() == 1 ? groups[0] : ag::concat_rows(groups);
    return linear(name + ".out", merged);
  }

  Var block(const std::string& name, Var x, std::size_t group,
            const std::vector<double>* positions, const Tensor* mask) const {
    x = ag::add(x, attention(name, layer_norm(name + ".ln1", x), group,
                             positions, mask));
    const Var h = layer_norm(name + ".ln2", x);
    return ag::add(x, linear(name + ".fc2", ag::gelu(linear(name + ".fc1", h))));
  }

  Var encoder(const std::string& name, int layers, Var x, std::size_t group,
              const std::vector<double>* positions, const Tensor* mask) const {
    for (int i = 0; i < layers; ++i) {
      x = block(name + ".layer" + std::to_string(i), x, group, positions, mask);
    }
    return layer_norm(name + ".ln_f", x);
  }
};

// Additive attention mask hiding key columns at or beyond first_padded.
Tensor key_mask(std::size_t n, std::size_t first_padded) {
  Tensor m({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = first_padded; j < n; ++j) {
      m.at(i, j) = -std::numeric_limits<double>::infinity();
    }
  }
  return m;
}

void check_points(const Tensor& points) {
  if (points.rank() != 2 || points.dim(1) != 2 * kPointsPerFrame) {
    throw ShapeMismatch("model input must be [T, " +
                        std::to_string(2 * kPointsPerFrame) + "], got " +
                        ag::shape_string(points.shape()));
  }
}

}  // namespace

Var embed_context_free(Tape& t, const Parameters& p, const SptConfig& cfg,
                       const Tensor& points) {
  check_points(points);
  const Ctx c{t, p, cfg};
  const Var ball = ag::slice(t.constant(points), 0, 2);
  return c.mlp("embed", ball);
}

Var embed_concatenation(Tape& t, const Parameters& p, const SptConfig& cfg,
                        const Tensor& points) {
  check_points(points);
  const Ctx c{t, p, cfg};
  return c.mlp("embed", t.constant(points));
}

Var embed_dynamic(Tape& t, const Parameters& p, const SptConfig& cfg,
                  const Tensor& points) {
  check_points(points);
  const Ctx c{t, p, cfg};
  const std::size_t rows = points.dim(0);
  // One row per point: [rows * 14, 2].
  const Tensor flat({rows * kPointsPerFrame, 2}, points.values());
  Var x = c.mlp("embed.point", t.constant(flat));
  const Var type = c.param("embed.type");
  x = ag::add(x, rows == 1 ? type : ag::concat_rows(std::vector<Var>(rows, type)));
  x = c.encoder("embed.enc", cfg.dynamic_layers, x, kPointsPerFrame, nullptr, nullptr);
  if (rows == 1) return ag::slice_rows(x, 0, 1);
  std::vector<Var> balls;
  balls.reserve(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    balls.push_back(ag::slice_rows(x, i * kPointsPerFrame, i * kPointsPerFrame + 1));
  }
  return ag::concat_rows(balls);
}

Var embed(Tape& t, const Parameters& p, const SptConfig& cfg, const Tensor& points) {
  switch (cfg.embedding) {
    case Embedding::kContextFree: return embed_context_free(t, p, cfg, points);
    case Embedding::kConcatenation: return embed_concatenation(t, p, cfg, points);
    case Embedding::kDynamic: return embed_dynamic(t, p, cfg, points);
  }
  throw UsageError("unknown embedding");
}

SptGraph spt_forward(Tape& t, const SptConfig& cfg, const Parameters& p,
                     const ModelInput& input) {
  check_points(input.points);
  const std::size_t rows = input.rows();
  if (input.length > cfg.max_length || rows > cfg.max_length) {
    throw SequenceTooLong(std::to_string(std::max(input.length, rows)) +
                          " frames exceed the maximum of " +
                          std::to_string(cfg.max_length));
  }
  if (input.length == 0 || input.length > rows) {
    throw ShapeMismatch("model input length " + std::to_string(input.length) +
                        " invalid for " + std::to_string(rows) + " rows");
  }
  const bool padded = input.length < rows;
  const Ctx c{t, p, cfg};
  const Var tokens = embed(t, p, cfg, input.points);

  // Spin token at position 0, locations at 1..rows.
  std::vector<double> with_spin(rows + 1);
  for (std::size_t i = 0; i <= rows; ++i) with_spin[i] = static_cast<double>(i);
  const std::vector<double> locations(with_spin.begin() + 1, with_spin.end());
  const Tensor mask_with_spin = padded ? key_mask(rows + 1, input.length + 1) : Tensor();
  const Tensor* mws = padded ? &mask_with_spin : nullptr;

  SptGraph g;
  if (cfg.variant == Variant::kSingleStage) {
    const Var seq = ag::concat_rows({c.param("stage1.spin_token"), tokens});
    const Var out = c.encoder("stage1", cfg.layers, seq, 0, &with_spin, mws);
    g.traj = c.mlp("pos_head", ag::slice_rows(out, 1, rows + 1));
    g.spin_scaled = c.mlp("spin_head", ag::slice_rows(out, 0, 1));
    return g;
  }

  const Tensor mask_locations = padded ? key_mask(rows, input.length) : Tensor();
  const Var hidden = c.encoder("stage1", cfg.first_stage_layers(), tokens, 0,
                               &locations, padded ? &mask_locations : nullptr);
  g.traj = c.mlp("pos_head", hidden);
  const Var second = cfg.variant == Variant::kTwoStage
                         ? c.linear("stage2.in", g.traj)
                         : hidden;
  const Var seq = ag::concat_rows({c.param("stage2.spin_token"), second});
  const Var out = c.encoder("stage2", cfg.second_stage_layers, seq, 0, &with_spin, mws);
  g.spin_scaled = c.mlp("spin_head", ag::slice_rows(out, 0, 1));
  return g;
}

LossTarget make_target(const SampleRecord& rec, const SptConfig& cfg) {
  if (!rec.has_ground_truth() || !rec.gt_spin_ball) {
    throw ShapeMismatch("record " + rec.id + " carries no 3D ground truth");
  }
  if (rec.gt_traj_3d.size() != rec.length()) {
    throw ShapeMismatch("record " + rec.id + ": trajectory and 2D track lengths differ");
  }
  return {rec.gt_traj_3d,
          cfg.spin_frame == SpinFrame::kWorld ? *rec.gt_spin_world : *rec.gt_spin_ball};
}

Var spt_loss(Tape& t, const SptGraph& g, const ModelInput& input,
             const LossTarget& target, double omega_scale) {
  const std::size_t rows = input.rows();
  if (target.traj.size() != input.length) {
    throw ShapeMismatch("target has " + std::to_string(target.traj.size()) +
                        " positions for " + std::to_string(input.length) + " frames");
  }
  Tensor traj({rows, 3});
  std::vector<double> weights(rows, 0.0);
  const double inv_t = 1.0 / static_cast<double>(input.length);
  for (std::size_t i = 0; i < input.length; ++i) {
    traj.at(i, 0) = target.traj[i].x;
    traj.at(i, 1) = target.traj[i].y;
    traj.at(i, 2) = target.traj[i].z;
    weights[i] = inv_t;
  }
  const Vec3 w = target.spin * (1.0 / omega_scale);
  const Tensor spin({1, 3}, {w.x, w.y, w.z});
  const Var pos_term = ag::squared_error(g.traj, t.constant(std::move(traj)), weights);
  const Var spin_term = ag::squared_error(g.spin_scaled, t.constant(spin));
  return ag::add(pos_term, spin_term);
}

ModelOutput predict(const SptConfig& cfg, const Parameters& p, const ModelInput& input) {
  Tape t(false);
  const SptGraph g = spt_forward(t, cfg, p, input);
  ModelOutput out;
  const Tensor& traj = g.traj.value();
  out.traj.reserve(input.length);
  for (std::size_t i = 0; i < input.length; ++i) {
    out.traj.push_back({traj.at(i, 0), traj.at(i, 1), traj.at(i, 2)});
  }
  const Tensor& s = g.spin_scaled.value();
  out.spin = Vec3{s[0], s[1], s[2]} * cfg.omega_scale;
  return out;
}

Vec3 spin_to_ball_frame(const Vec3& spin_world, const std::vector<Vec3>& traj) {
  if (traj.size() >= 2) {
    const Vec3 d = traj[1] - traj[0];
    if (std::hypot(d.x, d.y) > kDegenerateDirectionEps) {
      return world_to_ball(spin_world, ball_frame(traj[0], traj[1]));
    }
  }
  return world_to_ball(spin_world, ball_frame_from_direction({1.0, 0.0, 0.0}));
}

Vec3 predicted_ball_spin(const SptConfig& cfg, const ModelOutput& out) {
  if (cfg.spin_frame == SpinFrame::kBall) return out.spin;
  return spin_to_ball_frame(out.spin, out.traj);
}

}  // namespace spinsight
