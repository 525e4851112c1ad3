#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spinsight/autograd.hpp"
#include "spinsight/checkpoint.hpp"
#include "spinsight/datagen.hpp"
#include "spinsight/spt.hpp"

namespace spinsight {

struct TrainConfig {
  SptConfig model;
  std::size_t epochs = 800;
  std::size_t batch_size = 64;
  double lr = 1e-4;
  std::uint64_t seed = 0;
  double ema_decay = 0.999;
  bool augment = true;
  AugmentationOptions augmentation;

  void validate() const;
  // Accepts model.*, train.* and aug.* keys; throws UsageError otherwise.
  void set(std::string_view key, std::string_view value);
  std::string to_text() const;
};

// Calls fn(key, value) for each "key=value" line in order; blank lines and
// '#' comments are skipped. Throws UsageError on malformed lines.
void for_each_config_line(
    std::string_view text,
    const std::function<void(std::string_view, std::string_view)>& fn);

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_spin_error = 0.0;
  double best_val = 0.0;
};

struct TrainHooks {
  // May replace the measured validation spin error of an epoch.
  std::function<double(std::size_t epoch, double measured)> validation_override;
  std::function<void(const EpochLog&)> on_epoch;
};

struct TrainResult {
  Checkpoint best;  // full training state at the best-validation epoch
  Checkpoint last;
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
};

// Trains on ds.train and selects on ds.val with the EMA weights. When out
// is given, writes best.ckpt, last.ckpt, train_log.csv and train_config.txt there
// after each epoch. resume continues from a last.ckpt written earlier.
TrainResult train(const TrainConfig& cfg, const Dataset& ds,
                  const std::optional<std::filesystem::path>& out = std::nullopt,
                  const TrainHooks& hooks = {},
                  const std::optional<std::filesystem::path>& resume = std::nullopt);

// Mean per-sample loss over records with the given weights, no augmentation.
double dataset_loss(const SptConfig& cfg, const ag::Parameters& params,
                    const std::vector<SampleRecord>& records);

struct LoadedModel {
  TrainConfig config;
  ag::Parameters params;  // EMA weights
  std::uint64_t step = 0;
  std::size_t epoch = 0;
};

// Restores the config echo and the EMA weights of a checkpoint.
LoadedModel load_model(const Checkpoint& c);
LoadedModel load_model(const std::filesystem::path& path);

std::string epoch_log_csv(const std::vector<EpochLog>& log);

}  // namespace spinsight
