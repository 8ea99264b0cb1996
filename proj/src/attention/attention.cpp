#include "mwa/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mwa/errors.hpp"

namespace mwa::attn {

namespace {

void check_partition(const Matrix& A, const seg::WordPartition& p) {
  if (A.rows() != A.cols()) throw ShapeError("alignment expects a square matrix, got " + A.shape_string());
  if (auto v = seg::validate_partition(p, A.rows())) {
    throw ShapeError("partition does not fit " + A.shape_string() + " scores: " + v->message);
  }
}

void check_lambda(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ConfigError("pooling weight must lie in [0, 1], got " + std::to_string(lambda));
  }
}

/// Forward alignment. When `winners` is given it receives, per block and
/// column, the row offset of the max (lowest index on ties).
Matrix align_kernel(const Matrix& A, const seg::WordPartition& p, double lambda,
                    std::vector<std::vector<std::size_t>>* winners, double* margin) {
  const std::size_t n = A.cols();
  Matrix out(A.rows(), n);
  if (winners) winners->assign(p.blocks.size(), {});
  for (std::size_t b = 0; b < p.blocks.size(); ++b) {
    const auto [s, l] = p.blocks[b];
    if (l == 1) {
      const auto src = A.row(s);
      std::copy(src.begin(), src.end(), out.row(s).begin());
      continue;
    }
    std::vector<std::size_t> arg(n, 0);
    auto pooled = out.row(s);
    for (std::size_t j = 0; j < n; ++j) {
      double mx = A(s, j);
      double runner_up = -std::numeric_limits<double>::infinity();
      double total = A(s, j);
      for (std::size_t r = 1; r < l; ++r) {
        const double x = A(s + r, j);
        total += x;
        if (x > mx) {
          runner_up = mx;
          mx = x;
          arg[j] = r;
        } else if (x > runner_up) {
          runner_up = x;
        }
      }
      const double mean = total / static_cast<double>(l);
      pooled[j] = lambda * mx + (1.0 - lambda) * mean;
      if (margin) *margin = std::min(*margin, mx - runner_up);
    }
    for (std::size_t r = 1; r < l; ++r) std::copy(pooled.begin(), pooled.end(), out.row(s + r).begin());
    if (winners) (*winners)[b] = std::move(arg);
  }
  return out;
}

Matrix scores_kernel(const Matrix& keys, const Matrix& queries, ScoreOrientation o, double inv_scale) {
  Matrix logits = o == ScoreOrientation::kAsWritten ? matmul_nt(keys, queries) : matmul_nt(queries, keys);
  return softmax_rows(scale(logits, inv_scale));
}

}  // namespace

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Matrix char_attention_scores(const Matrix& H, const Matrix& W_k, const Matrix& W_q,
                             ScoreOrientation orientation) {
  if (!W_k.same_shape(W_q)) {
    throw ShapeError("W_k " + W_k.shape_string() + " and W_q " + W_q.shape_string() + " differ");
  }
  const Matrix keys = matmul(H, W_k);
  const Matrix queries = matmul(H, W_q);
  return scores_kernel(keys, queries, orientation, 1.0 / std::sqrt(static_cast<double>(W_k.cols())));
}

std::vector<Matrix> partition_rows(const Matrix& A, const seg::WordPartition& p) {
  if (auto v = seg::validate_partition(p, A.rows())) {
    throw ShapeError("partition does not fit " + A.shape_string() + ": " + v->message);
  }
  std::vector<Matrix> out;
  out.reserve(p.blocks.size());
  for (const auto& [s, l] : p.blocks) {
    Matrix block(l, A.cols());
    for (std::size_t r = 0; r < l; ++r) {
      const auto src = A.row(s + r);
      std::copy(src.begin(), src.end(), block.row(r).begin());
    }
    out.push_back(std::move(block));
  }
  return out;
}

Matrix mixed_pool(const Matrix& rows, double lambda) {
  if (rows.rows() == 0) throw ShapeError("mixed_pool: empty block");
  check_lambda(lambda);
  Matrix out(1, rows.cols());
  if (rows.rows() == 1) {
    std::copy(rows.row(0).begin(), rows.row(0).end(), out.row(0).begin());
    return out;
  }
  for (std::size_t j = 0; j < rows.cols(); ++j) {
    double mx = rows(0, j);
    double total = rows(0, j);
    for (std::size_t r = 1; r < rows.rows(); ++r) {
      mx = std::max(mx, rows(r, j));
      total += rows(r, j);
    }
    out(0, j) = lambda * mx + (1.0 - lambda) * (total / static_cast<double>(rows.rows()));
  }
  return out;
}

Matrix upsample(const Matrix& a_w, std::ptrdiff_t l) {
  if (l <= 0) throw ShapeError("upsample: block length must be positive, got " + std::to_string(l));
  if (a_w.rows() != 1) throw ShapeError("upsample: expected a single row, got " + a_w.shape_string());
  Matrix out(static_cast<std::size_t>(l), a_w.cols());
  for (std::size_t r = 0; r < out.rows(); ++r) std::copy(a_w.row(0).begin(), a_w.row(0).end(), out.row(r).begin());
  return out;
}

AlignedAttention align(const Matrix& A, const seg::WordPartition& p, double lambda) {
  check_partition(A, p);
  check_lambda(lambda);
  return AlignedAttention{align_kernel(A, p, lambda, nullptr, nullptr), p};
}

Matrix head_output(const AlignedAttention& aligned, const Matrix& H, const Matrix& W_v) {
  if (aligned.matrix.cols() != H.rows()) {
    throw ShapeError("head_output: attention " + aligned.matrix.shape_string() + " vs H " + H.shape_string());
  }
  return matmul(aligned.matrix, matmul(H, W_v));
}

void LayerConfig::validate() const {
  if (d == 0 || heads == 0) throw ConfigError("model width and head count must be positive");
  if (d % heads != 0) {
    throw ConfigError("head count " + std::to_string(heads) + " does not divide width " + std::to_string(d));
  }
}

MWALayerParams MWALayerParams::init(const LayerConfig& config, std::mt19937_64& rng,
                                    const std::string& prefix) {
  config.validate();
  const double bound = 1.0 / std::sqrt(static_cast<double>(config.d));
  std::uniform_real_distribution<double> dist(-bound, bound);
  auto draw = [&](std::size_t r, std::size_t c) {
    Matrix m(r, c);
    for (double& x : m.data()) x = dist(rng);
    return m;
  };
  MWALayerParams out;
  out.config = config;
  const std::size_t dh = config.head_dim();
  for (std::size_t k = 0; k < config.heads; ++k) {
    const std::string h = prefix + "head" + std::to_string(k) + ".";
    AttentionHeadParams head;
    head.W_k = Parameter(h + "W_k", draw(config.d, dh));
    head.W_q = Parameter(h + "W_q", draw(config.d, dh));
    head.W_v = Parameter(h + "W_v", draw(config.d, dh));
    head.lambda_raw = Parameter(h + "lambda_raw", Matrix(1, 1, 0.0), /*decay=*/false);
    out.heads.push_back(std::move(head));
  }
  out.W_o = Parameter(prefix + "W_o", draw(config.d, config.d));
  return out;
}

double MWALayerParams::lambda(std::size_t head) const {
  switch (config.pool) {
    case PoolMode::kMean:
      return 0.0;
    case PoolMode::kMax:
      return 1.0;
    case PoolMode::kMixed:
      break;
  }
  return logistic(heads.at(head).lambda_raw.value(0, 0));
}

std::vector<Parameter*> MWALayerParams::parameters() {
  std::vector<Parameter*> out;
  for (auto& h : heads) {
    out.push_back(&h.W_k);
    out.push_back(&h.W_q);
    out.push_back(&h.W_v);
    out.push_back(&h.lambda_raw);
  }
  out.push_back(&W_o);
  return out;
}

std::vector<HeadTrace> trace_heads(const Matrix& H, const seg::WordPartition* p,
                                   const MWALayerParams& params) {
  params.config.validate();
  if (H.cols() != params.config.d) {
    throw ShapeError("layer width " + std::to_string(params.config.d) + " does not match H " + H.shape_string());
  }
  std::vector<HeadTrace> out;
  for (std::size_t k = 0; k < params.heads.size(); ++k) {
    const auto& head = params.heads[k];
    HeadTrace t;
    t.lambda = params.lambda(k);
    t.scores = char_attention_scores(H, head.W_k.value, head.W_q.value, params.config.orientation);
    t.aligned = p ? align(t.scores, *p, t.lambda).matrix : t.scores;
    t.output = matmul(t.aligned, matmul(H, head.W_v.value));
    out.push_back(std::move(t));
  }
  return out;
}

Matrix multi_head(const Matrix& H, const seg::WordPartition* p, const MWALayerParams& params) {
  auto traces = trace_heads(H, p, params);
  std::vector<Matrix> outputs;
  outputs.reserve(traces.size());
  for (auto& t : traces) outputs.push_back(std::move(t.output));
  return matmul(concat_columns(outputs), params.W_o.value);
}

Var align(Tape& tape, Var scores, const seg::WordPartition& p, Var lambda_var) {
  const Matrix& A = tape.value(scores);
  check_partition(A, p);
  const Matrix& lv = tape.value(lambda_var);
  if (lv.rows() != 1 || lv.cols() != 1) throw ShapeError("align: lambda must be 1x1");
  const double lambda = lv(0, 0);
  check_lambda(lambda);

  std::vector<std::vector<std::size_t>> winners;
  double margin = std::numeric_limits<double>::infinity();
  Matrix out = align_kernel(A, p, lambda, &winners, &margin);
  if (lambda > 0.0) tape.note_max_pool_margin(margin);

  return tape.record(
      std::move(out), {scores, lambda_var},
      [&tape, scores, p, lambda, winners = std::move(winners)](const Matrix& g, std::span<Matrix* const> gi) {
        const Matrix& A = tape.value(scores);
        Matrix& gA = *gi[0];
        double dlambda = 0.0;
        for (std::size_t b = 0; b < p.blocks.size(); ++b) {
          const auto [s, l] = p.blocks[b];
          if (l == 1) {
            for (std::size_t j = 0; j < g.cols(); ++j) gA(s, j) += g(s, j);
            continue;
          }
          const double inv_l = 1.0 / static_cast<double>(l);
          for (std::size_t j = 0; j < g.cols(); ++j) {
            double gw = 0.0;
            double total = 0.0;
            for (std::size_t r = 0; r < l; ++r) {
              gw += g(s + r, j);
              total += A(s + r, j);
            }
            const std::size_t win = winners[b][j];
            for (std::size_t r = 0; r < l; ++r) gA(s + r, j) += (1.0 - lambda) * inv_l * gw;
            gA(s + win, j) += lambda * gw;
            dlambda += gw * (A(s + win, j) - total * inv_l);
          }
        }
        (*gi[1])(0, 0) += dlambda;
      });
}

Var multi_head(Tape& tape, Var H, const seg::WordPartition* p, MWALayerParams& params) {
  params.config.validate();
  const Matrix& hv = tape.value(H);
  if (hv.cols() != params.config.d) {
    throw ShapeError("layer width " + std::to_string(params.config.d) + " does not match H " + hv.shape_string());
  }
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(params.config.head_dim()));
  std::vector<Var> outputs;
  for (std::size_t k = 0; k < params.heads.size(); ++k) {
    auto& head = params.heads[k];
    const Var keys = tape.matmul(H, tape.parameter(head.W_k));
    const Var queries = tape.matmul(H, tape.parameter(head.W_q));
    const Var logits = params.config.orientation == ScoreOrientation::kAsWritten
                           ? tape.matmul_nt(keys, queries)
                           : tape.matmul_nt(queries, keys);
    Var attention = tape.softmax_rows(tape.scale(logits, inv_scale));
    if (p != nullptr) {
      Var lambda;
      switch (params.config.pool) {
        case PoolMode::kMixed:
          lambda = tape.logistic(tape.parameter(head.lambda_raw));
          break;
        case PoolMode::kMean:
          lambda = tape.constant(Matrix(1, 1, 0.0));
          break;
        case PoolMode::kMax:
          lambda = tape.constant(Matrix(1, 1, 1.0));
          break;
      }
      attention = align(tape, attention, *p, lambda);
    }
    const Var values = tape.matmul(H, tape.parameter(head.W_v));
    outputs.push_back(tape.matmul(attention, values));
  }
  return tape.matmul(tape.concat_columns(outputs), tape.parameter(params.W_o));
}

}  // namespace mwa::attn
