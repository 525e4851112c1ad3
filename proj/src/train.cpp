#include "spinsight/train.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "spinsight/errors.hpp"
#include "spinsight/eval.hpp"
#include "spinsight/parallel.hpp"
#include "spinsight/rng.hpp"

namespace spinsight {

namespace {

// Batches are split into this many contiguous groups whose gradients are
// summed in order, so results do not depend on the worker count.
constexpr std::size_t kGradGroups = 8;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw UsageError(std::string(key) + ": expected true/false, got '" + std::string(v) + "'");
}

double parse_number(std::string_view key, std::string_view v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(std::string(v), &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw UsageError(std::string(key) + ": expected a number, got '" + std::string(v) + "'");
}

std::uint64_t parse_unsigned(std::string_view key, std::string_view v) {
  try {
    std::size_t used = 0;
    const auto x = std::stoull(std::string(v), &used);
    if (used == v.size() && !v.empty() && v[0] != '-') return x;
  } catch (const std::exception&) {
  }
  throw UsageError(std::string(key) + ": expected a non-negative integer, got '" +
                   std::string(v) + "'");
}

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

}  // namespace

void for_each_config_line(
    std::string_view text,
    const std::function<void(std::string_view, std::string_view)>& fn) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const std::string line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config line " + std::to_string(line_no) + ": expected key=value");
    }
    fn(trim(std::string_view(line).substr(0, eq)), trim(std::string_view(line).substr(eq + 1)));
  }
}

void TrainConfig::validate() const {
  model.validate();
  if (epochs < 1) throw UsageError("train.epochs must be positive");
  if (batch_size < 1) throw UsageError("train.batch_size must be positive");
  if (!(lr > 0.0)) throw UsageError("train.lr must be positive");
  if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw UsageError("train.ema_decay must be in [0, 1)");
}

void TrainConfig::set(std::string_view key, std::string_view value) {
  if (key.starts_with("model.")) {
    model.set(key.substr(6), value);
  } else if (key == "train.epochs") {
    epochs = parse_unsigned(key, value);
  } else if (key == "train.batch_size") {
    batch_size = parse_unsigned(key, value);
  } else if (key == "train.lr") {
    lr = parse_number(key, value);
  } else if (key == "train.seed") {
    seed = parse_unsigned(key, value);
  } else if (key == "train.ema_decay") {
    ema_decay = parse_number(key, value);
  } else if (key == "train.augment") {
    augment = parse_bool(key, value);
  } else if (key == "aug.resample_camera") {
    augmentation.resample_camera = parse_bool(key, value);
  } else if (key == "aug.motion_blur") {
    augmentation.motion_blur = parse_bool(key, value);
  } else if (key == "aug.sudden_end") {
    augmentation.sudden_end = parse_bool(key, value);
  } else if (key == "aug.gaussian") {
    augmentation.gaussian = parse_bool(key, value);
  } else if (key == "aug.motion_blur_window") {
    augmentation.motion_blur_window = parse_number(key, value);
  } else if (key == "aug.sudden_end_probability") {
    augmentation.sudden_end_probability = parse_number(key, value);
  } else if (key == "aug.gaussian_sigma") {
    augmentation.gaussian_sigma = parse_number(key, value);
  } else {
    throw UsageError("unknown config key '" + std::string(key) + "'");
  }
}

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  os << model.to_text();
  const auto b = [](bool x) { return x ? "true" : "false"; };
  os << "train.epochs=" << epochs << '\n'
     << "train.batch_size=" << batch_size << '\n'
     << "train.lr=" << fmt(lr) << '\n'
     << "train.seed=" << seed << '\n'
     << "train.ema_decay=" << fmt(ema_decay) << '\n'
     << "train.augment=" << b(augment) << '\n'
     << "aug.resample_camera=" << b(augmentation.resample_camera) << '\n'
     << "aug.motion_blur=" << b(augmentation.motion_blur) << '\n'
     << "aug.sudden_end=" << b(augmentation.sudden_end) << '\n'
     << "aug.gaussian=" << b(augmentation.gaussian) << '\n'
     << "aug.motion_blur_window=" << fmt(augmentation.motion_blur_window) << '\n'
     << "aug.sudden_end_probability=" << fmt(augmentation.sudden_end_probability) << '\n'
     << "aug.gaussian_sigma=" << fmt(augmentation.gaussian_sigma) << '\n';
  return os.str();
}

std::string epoch_log_csv(const std::vector<EpochLog>& log) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "epoch,train_loss,val_spin_error,best_val\n";
  for (const auto& e : log) {
    os << e.epoch << ',' << e.train_loss << ',' << e.val_spin_error << ',' << e.best_val << '\n';
  }
  return os.str();
}

double dataset_loss(const SptConfig& cfg, const ag::Parameters& params,
                    const std::vector<SampleRecord>& records) {
  if (records.empty()) throw EmptySet("no records");
  std::vector<double> losses(records.size());
  parallel_for(records.size(), [&](std::size_t i) {
    ag::Tape t(false);
    const ModelInput in = make_input(records[i]);
    const SptGraph g = spt_forward(t, cfg, params, in);
    losses[i] = spt_loss(t, g, in, make_target(records[i], cfg), cfg.omega_scale).value().item();
  });
  return std::accumulate(losses.begin(), losses.end(), 0.0) /
         static_cast<double>(records.size());
}

namespace {

struct State {
  ag::Parameters params;
  ag::Adam adam;
  ag::Ema ema;
  std::size_t epoch = 0;  // completed epochs
  double best_val = std::numeric_limits<double>::infinity();
};

Checkpoint snapshot(const TrainConfig& cfg, const State& s) {
  Checkpoint c;
  c.step = static_cast<std::uint64_t>(s.adam.steps());
  c.config = cfg.to_text() + "state.epoch=" + std::to_string(s.epoch) + "\n" +
             "state.best_val=" + fmt(s.best_val) + "\n";
  append_parameters(c, "params/", s.params);
  for (std::size_t i = 0; i < s.params.size(); ++i) {
    c.tensors.emplace_back("adam_m/" + s.params.name(i), s.adam.first_moments()[i]);
  }
  for (std::size_t i = 0; i < s.params.size(); ++i) {
    c.tensors.emplace_back("adam_v/" + s.params.name(i), s.adam.second_moments()[i]);
  }
  append_parameters(c, "ema/", s.ema.shadow());
  return c;
}

struct StateText {
  TrainConfig config;
  std::size_t epoch = 0;
  double best_val = std::numeric_limits<double>::infinity();
};

StateText parse_state_text(const std::string& text) {
  StateText st;
  for_each_config_line(text, [&](std::string_view k, std::string_view v) {
    if (k == "state.epoch") {
      st.epoch = parse_unsigned(k, v);
    } else if (k == "state.best_val") {
      st.best_val = v == "inf" ? std::numeric_limits<double>::infinity() : parse_number(k, v);
    } else {
      st.config.set(k, v);
    }
  });
  return st;
}

void restore(const Checkpoint& c, State& s) {
  load_parameters(c, "params/", s.params);
  for (std::size_t i = 0; i < s.params.size(); ++i) {
    const ag::Tensor* m = c.find("adam_m/" + s.params.name(i));
    const ag::Tensor* v = c.find("adam_v/" + s.params.name(i));
    if (!m || !v) throw IoFailure("checkpoint lacks optimizer state for " + s.params.name(i));
    s.adam.first_moments()[i] = *m;
    s.adam.second_moments()[i] = *v;
  }
  s.adam.set_steps(static_cast<std::int64_t>(c.step));
  load_parameters(c, "ema/", s.ema.shadow());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoFailure("cannot write " + path.string());
  f << text;
  if (!f) throw IoFailure("short write to " + path.string());
}

std::vector<std::size_t> shuffled(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, epoch, 0x5f1e));
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<long>(i - 1)));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const Dataset& ds,
                  const std::optional<std::filesystem::path>& out,
                  const TrainHooks& hooks,
                  const std::optional<std::filesystem::path>& resume) {
  cfg.validate();
  if (ds.train.empty()) throw EmptySet("training split is empty");
  if (ds.val.empty()) throw EmptySet("validation split is empty");
  if (out) {
    std::error_code ec;
    std::filesystem::create_directories(*out, ec);
    if (ec) throw IoFailure("cannot create " + out->string() + ": " + ec.message());
    write_text(*out / "train_config.txt", cfg.to_text());
    if (!resume) std::filesystem::remove(*out / "train_log.csv", ec);
  }

  State s;
  s.params = init_parameters(cfg.model, cfg.seed);
  s.adam = ag::Adam(s.params, {cfg.lr, 0.9, 0.999, 1e-8});
  s.ema = ag::Ema(s.params, cfg.ema_decay);

  TrainResult result;
  if (resume) {
    const Checkpoint c = read_checkpoint(*resume);
    const StateText st = parse_state_text(c.config);
    if (st.config.model.to_text() != cfg.model.to_text()) {
      throw UsageError("resume checkpoint was trained with a different model config");
    }
    restore(c, s);
    s.epoch = st.epoch;
    s.best_val = st.best_val;
    result.last = c;
    if (out && std::filesystem::exists(*out / "best.ckpt")) {
      result.best = read_checkpoint(*out / "best.ckpt");
    } else {
      result.best = c;
    }
    result.best_epoch = parse_state_text(result.best.config).epoch;
  }

  const std::size_t n = ds.train.size();
  const std::size_t nparams = s.params.size();
  for (std::size_t epoch = s.epoch + 1; epoch <= cfg.epochs; ++epoch) {
    const auto order = shuffled(n, cfg.seed, epoch);
    double loss_sum = 0.0;
    for (std::size_t b0 = 0; b0 < n; b0 += cfg.batch_size) {
      const std::size_t bn = std::min(cfg.batch_size, n - b0);
      std::vector<ag::Gradients> group_grads(kGradGroups);
      std::vector<double> losses(bn, 0.0);
      parallel_for(kGradGroups, [&](std::size_t g) {
        const std::size_t lo = bn * g / kGradGroups;
        const std::size_t hi = bn * (g + 1) / kGradGroups;
        if (lo == hi) return;
        group_grads[g] = s.params.zeros_like();
        for (std::size_t k = lo; k < hi; ++k) {
          const std::size_t idx = order[b0 + k];
          const SampleRecord& raw = ds.train[idx];
          SampleRecord aug;
          if (cfg.augment) {
            Rng rng(derive_seed(cfg.seed, epoch, idx + 1));
            aug = apply_training_pipeline(raw, rng, cfg.augmentation);
          }
          const SampleRecord& rec = cfg.augment ? aug : raw;
          ag::Tape t;
          const ModelInput in = make_input(rec);
          const SptGraph graph = spt_forward(t, cfg.model, s.params, in);
          const ag::Var loss =
              spt_loss(t, graph, in, make_target(rec, cfg.model), cfg.model.omega_scale);
          const double lv = loss.value().item();
          if (!std::isfinite(lv)) {
            throw NonFiniteLoss("epoch " + std::to_string(epoch) + ", step " +
                                std::to_string(s.adam.steps() + 1) + ", sample " +
                                rec.id + ": loss " + fmt(lv));
          }
          losses[k] = lv;
          t.backward(loss);
          t.accumulate(group_grads[g]);
        }
      });
      ag::Gradients grads = s.params.zeros_like();
      for (const auto& gg : group_grads) {
        if (gg.empty()) continue;
        for (std::size_t p = 0; p < nparams; ++p) {
          for (std::size_t i = 0; i < grads[p].size(); ++i) grads[p][i] += gg[p][i];
        }
      }
      const double inv = 1.0 / static_cast<double>(bn);
      for (auto& g : grads) {
        for (auto& x : g.values()) x *= inv;
      }
      for (const double l : losses) loss_sum += l;
      s.adam.step(s.params, grads);
      s.ema.update(s.params);
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = loss_sum / static_cast<double>(n);
    double val = validation_spin_error(cfg.model, s.ema.shadow(), ds.val);
    if (hooks.validation_override) val = hooks.validation_override(epoch, val);
    entry.val_spin_error = val;
    s.epoch = epoch;
    const bool improved = val < s.best_val;
    if (improved) s.best_val = val;
    entry.best_val = s.best_val;
    result.log.push_back(entry);

    result.last = snapshot(cfg, s);
    if (improved) {
      result.best = result.last;
      result.best_epoch = epoch;
    }
    if (out) {
      if (improved) write_checkpoint(*out / "best.ckpt", result.best);
      write_checkpoint(*out / "last.ckpt", result.last);
      const auto log_path = *out / "train_log.csv";
      std::ofstream f(log_path, std::ios::binary | std::ios::app);
      if (!f) throw IoFailure("cannot append to " + log_path.string());
      if (f.tellp() == 0) f << "epoch,train_loss,val_spin_error,best_val\n";
      f << std::setprecision(10) << entry.epoch << ',' << entry.train_loss << ','
        << entry.val_spin_error << ',' << entry.best_val << '\n';
    }
    if (hooks.on_epoch) hooks.on_epoch(entry);
  }
  return result;
}

LoadedModel load_model(const Checkpoint& c) {
  const StateText st = parse_state_text(c.config);
  LoadedModel m;
  m.config = st.config;
  m.config.validate();
  m.step = c.step;
  m.epoch = st.epoch;
  m.params = init_parameters(m.config.model, 0);
  load_parameters(c, "ema/", m.params);
  return m;
}

LoadedModel load_model(const std::filesystem::path& path) {
  return load_model(read_checkpoint(path));
}

}  // namespace spinsight
