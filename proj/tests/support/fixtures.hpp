#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "mwa/attention.hpp"
#include "mwa/fusion.hpp"
#include "mwa/matrix.hpp"
#include "mwa/segmentation.hpp"
#include "oracle.hpp"

namespace fixtures {

inline oracle::Grid to_grid(const mwa::Matrix& m) {
  oracle::Grid g = oracle::zeros(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) g[i][j] = m(i, j);
  return g;
}

inline mwa::Matrix to_matrix(const oracle::Grid& g) {
  mwa::Matrix m(g.size(), g.empty() ? 0 : g[0].size());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) = g[i][j];
  return m;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::size_t between(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline mwa::Matrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c,
                                 double scale = 1.0) {
  mwa::Matrix m(r, c);
  for (double& x : m.data()) x = uniform(rng, -scale, scale);
  return m;
}

/// Random probability rows (each row sums to 1).
inline mwa::Matrix random_stochastic(std::mt19937_64& rng, std::size_t n) {
  mwa::Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += (m(i, j) = uniform(rng, 0.01, 1.0));
    for (std::size_t j = 0; j < n; ++j) m(i, j) /= total;
  }
  return m;
}

inline std::vector<std::size_t> random_lengths(std::mt19937_64& rng, std::size_t n,
                                               std::size_t max_len = 4) {
  std::vector<std::size_t> lengths;
  std::size_t left = n;
  while (left > 0) {
    const std::size_t l = between(rng, 1, std::min(max_len, left));
    lengths.push_back(l);
    left -= l;
  }
  return lengths;
}

inline mwa::seg::WordPartition random_partition(std::mt19937_64& rng, std::size_t n,
                                                std::size_t max_len = 4) {
  return mwa::seg::partition_from_lengths(random_lengths(rng, n, max_len));
}

/// Layer with projections drawn wider than the default init and a random
/// lambda_raw, so alignment is not a near-uniform average.
inline mwa::attn::MWALayerParams random_layer(std::mt19937_64& rng, std::size_t d, std::size_t K) {
  mwa::attn::LayerConfig cfg;
  cfg.d = d;
  cfg.heads = K;
  auto layer = mwa::attn::MWALayerParams::init(cfg, rng);
  for (auto& h : layer.heads) {
    h.W_k.value = random_matrix(rng, d, d / K);
    h.W_q.value = random_matrix(rng, d, d / K);
    h.W_v.value = random_matrix(rng, d, d / K);
    h.lambda_raw.value(0, 0) = uniform(rng, -2.0, 2.0);
  }
  return layer;
}

inline oracle::Layer to_oracle(const mwa::attn::MWALayerParams& p) {
  oracle::Layer L;
  for (const auto& h : p.heads) {
    L.heads.push_back({to_grid(h.W_k.value), to_grid(h.W_q.value), to_grid(h.W_v.value),
                       h.lambda_raw.value(0, 0)});
  }
  L.Wo = to_grid(p.W_o.value);
  return L;
}

}  // namespace fixtures
