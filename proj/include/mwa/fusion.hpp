#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mwa/attention.hpp"

namespace mwa::fusion {

struct FusionParams {
  Parameter W_g;
  static FusionParams init(std::size_t d, std::mt19937_64& rng);
};

/// sum over sources of tanh(rep_m * W_g), added in source order.
Matrix fuse(std::span<const Matrix> reps, const Matrix& W_g);
Var fuse(Tape& tape, std::span<const Var> reps, Var W_g);

/// Word-aligned layer(s) plus fusion over M segmentation sources. With
/// shared attention there is a single layer used by every source; otherwise
/// one layer per source.
struct MWAModel {
  std::vector<attn::MWALayerParams> layers;
  FusionParams fusion;
  std::vector<std::string> sources;

  static MWAModel init(const attn::LayerConfig& config, std::vector<std::string> sources,
                       bool share_attention, std::mt19937_64& rng);

  std::size_t source_count() const noexcept { return sources.size(); }
  bool shared() const noexcept { return layers.size() == 1; }
  const attn::MWALayerParams& layer_for(std::size_t source) const;
  attn::MWALayerParams& layer_for(std::size_t source);
  std::vector<Parameter*> parameters();
};

/// Entry m of `partitions` aligns source m; a null entry runs that source
/// without alignment. Throws ConfigError when the count differs from M.
Matrix mwa_forward(const Matrix& H, std::span<const seg::WordPartition* const> partitions,
                   const MWAModel& model);
Matrix mwa_forward(const Matrix& H, std::span<const seg::WordPartition> partitions,
                   const MWAModel& model);
Var mwa_forward(Tape& tape, Var H, std::span<const seg::WordPartition* const> partitions,
                MWAModel& model);

}  // namespace mwa::fusion
