#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mwa/fusion.hpp"

namespace mwa::harness {

/// Fixed sinusoidal table: even columns sin(pos / 10000^(2i/d)), odd cos.
Matrix sinusoidal_positions(std::size_t max_n, std::size_t d);

/// Embedding lookup plus positional rows; stands in for a pretrained
/// character encoder.
struct ToyEncoder {
  Parameter embedding;
  Matrix positional;

  static ToyEncoder init(std::size_t vocab_size, std::size_t max_n, std::size_t d,
                         std::mt19937_64& rng);
  /// Throws InputError for ids >= vocab size or sequences longer than max_n.
  Matrix encode(const seg::CharSequence& seq) const;
  Var encode(Tape& tape, const seg::CharSequence& seq);
};

/// Linear classifier over the mean of the fused rows.
struct ClassifierHead {
  Parameter w;
  Parameter b;
};

struct ModelConfig {
  attn::LayerConfig layer;
  std::size_t vocab_size = 12;
  std::size_t max_len = 32;
  std::size_t classes = 2;
  bool share_attention = true;

  void validate() const;
};

/// Ablation arms: plain attention, one aligned source, the random segmenter,
/// and all sources fused.
struct Variant {
  enum class Kind { kBaseline, kWaSingle, kWaRandom, kMwaMulti };
  Kind kind = Kind::kBaseline;
  std::size_t source = 0;

  /// "baseline", "wa_single:<i>", "wa_random", "mwa_multi"
  std::string name() const;
  static Variant parse(std::string_view name);
  friend bool operator==(const Variant&, const Variant&) = default;
};

/// Encoder -> MWA layer -> fusion -> mean over positions -> linear head.
class SequenceClassifier {
 public:
  static SequenceClassifier init(const ModelConfig& config, std::vector<std::string> sources,
                                 std::uint64_t seed);

  const ModelConfig& config() const noexcept { return config_; }
  std::size_t source_count() const noexcept { return mwa_.source_count(); }
  ToyEncoder& encoder() noexcept { return encoder_; }
  fusion::MWAModel& mwa() noexcept { return mwa_; }
  ClassifierHead& head() noexcept { return head_; }
  const fusion::MWAModel& mwa() const noexcept { return mwa_; }

  /// Fused n x d representation.
  Matrix represent(const seg::CharSequence& seq,
                   std::span<const seg::WordPartition* const> partitions) const;
  Matrix logits(const seg::CharSequence& seq,
                std::span<const seg::WordPartition* const> partitions) const;
  /// Argmax of logits, lowest class index on ties.
  std::size_t predict(const seg::CharSequence& seq,
                      std::span<const seg::WordPartition* const> partitions) const;

  Var logits(Tape& tape, const seg::CharSequence& seq,
             std::span<const seg::WordPartition* const> partitions);
  /// `excess` as in Tape::cross_entropy.
  Var loss(Tape& tape, const seg::CharSequence& seq,
           std::span<const seg::WordPartition* const> partitions, std::size_t label,
           bool excess = false);

  std::vector<Parameter*> parameters();

 private:
  ModelConfig config_;
  ToyEncoder encoder_;
  fusion::MWAModel mwa_;
  ClassifierHead head_;
};

std::size_t argmax_row(const Matrix& logits);

}  // namespace mwa::harness
