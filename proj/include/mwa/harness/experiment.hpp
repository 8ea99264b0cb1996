#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mwa/adam.hpp"
#include "mwa/gradcheck.hpp"
#include "mwa/harness/model.hpp"
#include "mwa/harness/synthetic.hpp"

namespace mwa::harness {

struct TrainConfig {
  double lr = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-6;
  double weight_decay = 0.01;
  double warmup_ratio = 0.1;
  std::size_t epochs = 3;
  std::size_t batch_size = 16;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
};

/// Where the examples come from: a synthetic task or JSON Lines files.
struct DataConfig {
  std::optional<SyntheticTaskSpec> synthetic;
  std::uint64_t synthetic_seed = 1;
  std::filesystem::path train_file;
  std::filesystem::path dev_file;
  std::filesystem::path test_file;
};

struct ExperimentConfig {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
  std::vector<std::string> sources;
  std::string random_source = "rand:13:2.0";
  std::vector<Variant> variants;
  /// Canonical JSON the config was parsed from; hashed into reports.
  nlohmann::json raw;

  void validate() const;
};

/// Flat JSON document; relative paths resolve against `base_dir`.
ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);
/// FNV-1a 64 of the canonical config dump, as 16 hex digits.
std::string config_fingerprint(const ExperimentConfig& config);

/// Loaded segmenters and examples, ready for any variant.
struct Experiment {
  ExperimentConfig config;
  Dataset data;
  std::vector<seg::Segmenter> sources;
  seg::Segmenter random_source;
};

Experiment prepare_experiment(const ExperimentConfig& config);

/// One example with the partitions computed by every segmenter a variant
/// needs.
struct PreparedExample {
  const Example* example = nullptr;
  std::vector<seg::WordPartition> partitions;
  /// One entry per model source; null means unaligned.
  std::vector<const seg::WordPartition*> inputs;
};

std::size_t source_count(const Variant& variant, const Experiment& exp);
std::vector<std::string> source_labels(const Variant& variant, const Experiment& exp);
std::vector<PreparedExample> prepare_split(const Variant& variant, const Experiment& exp,
                                           const std::vector<Example>& split);

/// Fraction of examples whose argmax prediction matches the label.
/// Throws InputError on an empty split.
double evaluate(const SequenceClassifier& model, const std::vector<PreparedExample>& split);
double mean_loss(SequenceClassifier& model, const std::vector<PreparedExample>& split);

struct SeedResult {
  std::uint64_t seed = 0;
  bool failed = false;
  std::string failure;
  double initial_dev_loss = 0.0;
  double dev_accuracy = 0.0;
  std::optional<double> test_accuracy;
  /// Mean training loss per epoch.
  std::vector<double> loss_curve;
  double wall_clock_seconds = 0.0;
};

struct RunReport {
  std::string variant;
  std::string fingerprint;
  std::vector<SeedResult> seeds;
  double mean_dev_accuracy = 0.0;
  double std_dev_accuracy = 0.0;
  std::optional<double> mean_test_accuracy;
  std::optional<double> std_test_accuracy;

  /// JSON with "report_version": 1.
  nlohmann::json to_json() const;
  static RunReport from_json(const nlohmann::json& j);
  /// Equality of everything except wall-clock times.
  bool same_metrics(const RunReport& other) const;
};

/// Trained model of one seed, kept for checkpoints.
struct TrainedModel {
  std::uint64_t seed = 0;
  SequenceClassifier model;
};

/// Trains every configured seed independently. Divergence marks the seed as
/// failed instead of throwing. Aggregates exclude failed seeds.
RunReport train(const Variant& variant, const Experiment& exp,
                std::vector<TrainedModel>* keep_models = nullptr);

std::vector<RunReport> ablation_matrix(const Experiment& exp);
/// variant x mean+-std table.
std::string format_ablation_table(const std::vector<RunReport>& reports);

/// Mean and sample standard deviation (0 for fewer than two values).
std::pair<double, double> mean_std(const std::vector<double>& xs);

struct ModelGradCheck {
  GradCheckReport report;
  /// Draws rejected for a max-pool gap below the tie threshold.
  std::size_t redraws = 0;
  double max_pool_margin = 0.0;
};

/// Finite-difference check of the whole classifier (encoder, MWA layer,
/// fusion, head, cross-entropy) for the multi-source variant on a small
/// batch of training examples chosen by `seed`. Batches whose max pooling
/// has a gap below `tie_margin` are redrawn. The objective is the excess
/// cross-entropy, which differs from the training loss by a constant.
ModelGradCheck gradcheck_model(const Experiment& exp, std::uint64_t seed, double eps = 1e-5,
                               std::size_t batch = 1, double tie_margin = 1e-5);

// File formats.

std::vector<Example> load_dataset(const std::filesystem::path& path);
void write_dataset(const std::filesystem::path& path, const std::vector<Example>& examples);

nlohmann::json checkpoint_json(SequenceClassifier& model, const Variant& variant,
                               std::uint64_t seed);
void write_checkpoint(const std::filesystem::path& path, SequenceClassifier& model,
                      const Variant& variant, std::uint64_t seed);
/// Rebuilds a classifier with the stored config and tensors. Throws IoError
/// on version, name or shape mismatches.
SequenceClassifier read_checkpoint(const std::filesystem::path& path, Variant* variant = nullptr,
                                   std::uint64_t* seed = nullptr);
SequenceClassifier checkpoint_from_json(const nlohmann::json& j, Variant* variant = nullptr,
                                        std::uint64_t* seed = nullptr);

nlohmann::json model_config_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace mwa::harness
