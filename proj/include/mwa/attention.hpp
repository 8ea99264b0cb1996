#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "mwa/matrix.hpp"
#include "mwa/segmentation.hpp"
#include "mwa/tape.hpp"

namespace mwa::attn {

/// Which product forms the score matrix. kAsWritten computes
/// (H W_k)(H W_q)^T, so row i holds the scores of character i as key;
/// kConventional computes (H W_q)(H W_k)^T.
enum class ScoreOrientation { kAsWritten, kConventional };

/// kMixed learns lambda; kMean and kMax pin it to 0 and 1.
enum class PoolMode { kMixed, kMean, kMax };

double logistic(double x);

/// softmax_rows(scores / sqrt(d_h)) with d_h = W_k.cols().
Matrix char_attention_scores(const Matrix& H, const Matrix& W_k, const Matrix& W_q,
                             ScoreOrientation orientation = ScoreOrientation::kAsWritten);

/// Row blocks of A in partition order; block i has len_i rows.
std::vector<Matrix> partition_rows(const Matrix& A, const seg::WordPartition& p);

/// lambda * columnwise max + (1 - lambda) * columnwise mean over the rows.
Matrix mixed_pool(const Matrix& rows, double lambda);

/// l stacked copies of the 1 x n row a_w.
Matrix upsample(const Matrix& a_w, std::ptrdiff_t l);

/// Score matrix after word alignment. Rows inside a block are identical.
struct AlignedAttention {
  Matrix matrix;
  seg::WordPartition partition;
};

/// Pools every block of rows with mixed_pool and writes the pooled row back
/// to every position of the block. Single-character blocks are copied.
AlignedAttention align(const Matrix& A, const seg::WordPartition& p, double lambda);

/// aligned * (H W_v)
Matrix head_output(const AlignedAttention& aligned, const Matrix& H, const Matrix& W_v);

struct AttentionHeadParams {
  Parameter W_k;
  Parameter W_q;
  Parameter W_v;
  /// Unconstrained; lambda = logistic(lambda_raw) in mixed mode.
  Parameter lambda_raw;
};

struct LayerConfig {
  std::size_t d = 32;
  std::size_t heads = 4;
  ScoreOrientation orientation = ScoreOrientation::kAsWritten;
  PoolMode pool = PoolMode::kMixed;

  std::size_t head_dim() const { return d / heads; }
  /// Throws ConfigError unless d > 0 and heads divides d.
  void validate() const;
};

struct MWALayerParams {
  LayerConfig config;
  std::vector<AttentionHeadParams> heads;
  Parameter W_o;

  /// Projections ~ U(-1/sqrt(d), 1/sqrt(d)), lambda_raw = 0.
  static MWALayerParams init(const LayerConfig& config, std::mt19937_64& rng,
                             const std::string& prefix = "");

  double lambda(std::size_t head) const;
  std::vector<Parameter*> parameters();
};

/// Intermediate values of one head, for inspection and dumps.
struct HeadTrace {
  Matrix scores;
  Matrix aligned;
  Matrix output;
  double lambda = 0.0;
};

/// Runs every head and returns the per-head intermediates. A null partition
/// skips alignment (plain multi-head attention).
std::vector<HeadTrace> trace_heads(const Matrix& H, const seg::WordPartition* p,
                                   const MWALayerParams& params);

/// Concat(head outputs) * W_o, n x d.
Matrix multi_head(const Matrix& H, const seg::WordPartition* p, const MWALayerParams& params);
inline Matrix multi_head(const Matrix& H, const seg::WordPartition& p,
                         const MWALayerParams& params) {
  return multi_head(H, &p, params);
}

/// Differentiable align; `lambda` is a 1x1 variable. Ties in max pooling
/// send the gradient to the lowest row index. Reports the smallest
/// max/runner-up gap to the tape.
Var align(Tape& tape, Var scores, const seg::WordPartition& p, Var lambda);

/// Differentiable multi-head layer over tape variables.
Var multi_head(Tape& tape, Var H, const seg::WordPartition* p, MWALayerParams& params);

}  // namespace mwa::attn
