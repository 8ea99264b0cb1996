#include "mwa/fusion.hpp"

#include <cmath>

#include "mwa/errors.hpp"

namespace mwa::fusion {

namespace {

void check_sources(std::size_t given, const MWAModel& model) {
  if (model.sources.empty()) throw ConfigError("MWA model needs at least one source");
  if (given != model.source_count()) {
    throw ConfigError("got " + std::to_string(given) + " partitions for " +
                      std::to_string(model.source_count()) + " sources");
  }
}

}  // namespace

FusionParams FusionParams::init(std::size_t d, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix w(d, d);
  for (double& x : w.data()) x = dist(rng);
  return FusionParams{Parameter("W_g", std::move(w))};
}

Matrix fuse(std::span<const Matrix> reps, const Matrix& W_g) {
  if (reps.empty()) throw ShapeError("fuse: no source representations");
  if (W_g.rows() != W_g.cols()) throw ShapeError("fuse: W_g must be square, got " + W_g.shape_string());
  Matrix out = tanh_map(matmul(reps.front(), W_g));
  for (std::size_t m = 1; m < reps.size(); ++m) {
    if (!reps[m].same_shape(reps.front())) {
      throw ShapeError("fuse: source " + std::to_string(m) + " is " + reps[m].shape_string() +
                       ", expected " + reps.front().shape_string());
    }
    out += tanh_map(matmul(reps[m], W_g));
  }
  return out;
}

Var fuse(Tape& tape, std::span<const Var> reps, Var W_g) {
  if (reps.empty()) throw ShapeError("fuse: no source representations");
  const Matrix& w = tape.value(W_g);
  if (w.rows() != w.cols()) throw ShapeError("fuse: W_g must be square, got " + w.shape_string());
  Var out = tape.tanh(tape.matmul(reps.front(), W_g));
  for (std::size_t m = 1; m < reps.size(); ++m) {
    if (!tape.value(reps[m]).same_shape(tape.value(reps.front()))) {
      throw ShapeError("fuse: source " + std::to_string(m) + " shape mismatch");
    }
    out = tape.add(out, tape.tanh(tape.matmul(reps[m], W_g)));
  }
  return out;
}

MWAModel MWAModel::init(const attn::LayerConfig& config, std::vector<std::string> sources,
                        bool share_attention, std::mt19937_64& rng) {
  if (sources.empty()) throw ConfigError("MWA model needs at least one source");
  MWAModel model;
  model.sources = std::move(sources);
  const std::size_t layers = share_attention ? 1 : model.sources.size();
  for (std::size_t m = 0; m < layers; ++m) {
    const std::string prefix = share_attention ? "" : "src" + std::to_string(m) + ".";
    model.layers.push_back(attn::MWALayerParams::init(config, rng, prefix));
  }
  model.fusion = FusionParams::init(config.d, rng);
  return model;
}

const attn::MWALayerParams& MWAModel::layer_for(std::size_t source) const {
  return shared() ? layers.front() : layers.at(source);
}

attn::MWALayerParams& MWAModel::layer_for(std::size_t source) {
  return shared() ? layers.front() : layers.at(source);
}

std::vector<Parameter*> MWAModel::parameters() {
  std::vector<Parameter*> out;
  for (auto& layer : layers) {
    auto ps = layer.parameters();
    out.insert(out.end(), ps.begin(), ps.end());
  }
  out.push_back(&fusion.W_g);
  return out;
}

Matrix mwa_forward(const Matrix& H, std::span<const seg::WordPartition* const> partitions,
                   const MWAModel& model) {
  check_sources(partitions.size(), model);
  std::vector<Matrix> reps;
  reps.reserve(partitions.size());
  for (std::size_t m = 0; m < partitions.size(); ++m) {
    reps.push_back(attn::multi_head(H, partitions[m], model.layer_for(m)));
  }
  return fuse(reps, model.fusion.W_g.value);
}

Matrix mwa_forward(const Matrix& H, std::span<const seg::WordPartition> partitions,
                   const MWAModel& model) {
  std::vector<const seg::WordPartition*> ptrs;
  for (const auto& p : partitions) ptrs.push_back(&p);
  return mwa_forward(H, ptrs, model);
}

Var mwa_forward(Tape& tape, Var H, std::span<const seg::WordPartition* const> partitions,
                MWAModel& model) {
  check_sources(partitions.size(), model);
  std::vector<Var> reps;
  for (std::size_t m = 0; m < partitions.size(); ++m) {
    reps.push_back(attn::multi_head(tape, H, partitions[m], model.layer_for(m)));
  }
  return fuse(tape, reps, tape.parameter(model.fusion.W_g));
}

}  // namespace mwa::fusion
