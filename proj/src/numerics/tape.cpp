#include "mwa/tape.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "mwa/errors.hpp"

namespace mwa {

namespace testing {
namespace {
std::atomic<bool> g_corrupt{false};
}
void set_corrupt_backward(bool enabled) { g_corrupt.store(enabled); }
bool corrupt_backward() { return g_corrupt.load(); }
}  // namespace testing

void zero_grads(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || v.index >= nodes_.size()) throw StateError("Tape: unknown variable");
  return nodes_[v.index];
}

const Matrix& Tape::value(Var v) const { return node(v).value; }
const Matrix& Tape::grad(Var v) const { return node(v).grad; }

Var Tape::parameter(Parameter& p) {
  Node n;
  n.value = p.value;
  n.param = &p;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::record(Matrix value, std::vector<Var> inputs, BackwardFn backward) {
  for (Var in : inputs) node(in);
  Node n;
  n.value = std::move(value);
  n.inputs = std::move(inputs);
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

void Tape::backward(Var loss) {
  if (nodes_.empty()) throw StateError("backward called before any forward pass was recorded");
  const Node& root = node(loss);
  if (root.value.rows() != 1 || root.value.cols() != 1) {
    throw ShapeError("backward: loss must be 1x1, got " + root.value.shape_string());
  }
  for (std::size_t i = 0; i <= loss.index; ++i) {
    nodes_[i].grad = Matrix::zeros(nodes_[i].value.rows(), nodes_[i].value.cols());
  }
  nodes_[loss.index].grad(0, 0) = 1.0;

  std::vector<Matrix*> grad_in;
  for (std::size_t i = loss.index + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward) continue;
    grad_in.clear();
    for (Var in : n.inputs) grad_in.push_back(&nodes_[in.index].grad);
    n.backward(n.grad, grad_in);
  }
  for (std::size_t i = 0; i <= loss.index; ++i) {
    if (nodes_[i].param != nullptr) nodes_[i].param->grad += nodes_[i].grad;
  }
}

Var Tape::matmul(Var a, Var b) {
  Matrix out = mwa::matmul(value(a), value(b));
  return record(std::move(out), {a, b}, [this, a, b](const Matrix& g, std::span<Matrix* const> gi) {
    Matrix ga = mwa::matmul_nt(g, value(b));
    if (testing::corrupt_backward()) ga = mwa::scale(ga, 1.01);
    *gi[0] += ga;
    *gi[1] += matmul_tn(value(a), g);
  });
}

Var Tape::matmul_nt(Var a, Var b) {
  Matrix out = mwa::matmul_nt(value(a), value(b));
  return record(std::move(out), {a, b}, [this, a, b](const Matrix& g, std::span<Matrix* const> gi) {
    *gi[0] += mwa::matmul(g, value(b));
    *gi[1] += matmul_tn(g, value(a));
  });
}

Var Tape::add(Var a, Var b) {
  Matrix out = mwa::add(value(a), value(b));
  return record(std::move(out), {a, b}, [](const Matrix& g, std::span<Matrix* const> gi) {
    *gi[0] += g;
    *gi[1] += g;
  });
}

Var Tape::add_row(Var a, Var row) {
  const Matrix& av = value(a);
  const Matrix& rv = value(row);
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    throw ShapeError("add_row: cannot broadcast " + rv.shape_string() + " over " +
                     av.shape_string());
  }
  Matrix out = av;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += rv(0, j);
  return record(std::move(out), {a, row}, [](const Matrix& g, std::span<Matrix* const> gi) {
    *gi[0] += g;
    Matrix& gr = *gi[1];
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) gr(0, j) += g(i, j);
  });
}

Var Tape::scale(Var a, double s) {
  return record(mwa::scale(value(a), s), {a}, [s](const Matrix& g, std::span<Matrix* const> gi) {
    Matrix& ga = *gi[0];
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
  });
}

Var Tape::softmax_rows(Var a) {
  Var out = record(mwa::softmax_rows(value(a)), {a}, {});
  // The rule needs the node's own output, so it is attached after recording.
  nodes_[out.index].backward = [this, out](const Matrix& g, std::span<Matrix* const> gi) {
    const Matrix& y = value(out);
    Matrix& ga = *gi[0];
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j) ga(i, j) += y(i, j) * (g(i, j) - dot);
    }
  };
  return out;
}

Var Tape::tanh(Var a) {
  Var out = record(tanh_map(value(a)), {a}, {});
  nodes_[out.index].backward = [this, out](const Matrix& g, std::span<Matrix* const> gi) {
    const Matrix& y = value(out);
    Matrix& ga = *gi[0];
    for (std::size_t i = 0; i < y.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
  };
  return out;
}

Var Tape::logistic(Var a) {
  Matrix y = value(a);
  for (double& x : y.data()) x = 1.0 / (1.0 + std::exp(-x));
  Var out = record(std::move(y), {a}, {});
  nodes_[out.index].backward = [this, out](const Matrix& g, std::span<Matrix* const> gi) {
    const Matrix& s = value(out);
    Matrix& ga = *gi[0];
    for (std::size_t i = 0; i < s.size(); ++i) ga[i] += g[i] * s[i] * (1.0 - s[i]);
  };
  return out;
}

Var Tape::concat_columns(std::span<const Var> parts) {
  std::vector<Matrix> values;
  std::vector<std::size_t> widths;
  for (Var p : parts) {
    values.push_back(value(p));
    widths.push_back(values.back().cols());
  }
  Matrix out = mwa::concat_columns(values);
  return record(std::move(out), std::vector<Var>(parts.begin(), parts.end()),
                [widths](const Matrix& g, std::span<Matrix* const> gi) {
                  auto pieces = split_columns(g, widths);
                  for (std::size_t k = 0; k < pieces.size(); ++k) *gi[k] += pieces[k];
                });
}

Var Tape::gather_rows(Var table, std::vector<std::size_t> ids) {
  const Matrix& t = value(table);
  Matrix out(ids.size(), t.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= t.rows()) {
      throw InputError("gather_rows: id " + std::to_string(ids[i]) + " out of range for " +
                       std::to_string(t.rows()) + " rows");
    }
    const auto src = t.row(ids[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return record(std::move(out), {table},
                [ids = std::move(ids)](const Matrix& g, std::span<Matrix* const> gi) {
                  Matrix& gt = *gi[0];
                  for (std::size_t i = 0; i < ids.size(); ++i)
                    for (std::size_t j = 0; j < g.cols(); ++j) gt(ids[i], j) += g(i, j);
                });
}

Var Tape::mean_rows(Var a) {
  const Matrix& av = value(a);
  if (av.rows() == 0) throw ShapeError("mean_rows: no rows");
  const double inv = 1.0 / static_cast<double>(av.rows());
  Matrix out(1, av.cols());
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t j = 0; j < av.cols(); ++j) out(0, j) += av(i, j);
  for (double& x : out.data()) x *= inv;
  return record(std::move(out), {a}, [inv](const Matrix& g, std::span<Matrix* const> gi) {
    Matrix& ga = *gi[0];
    for (std::size_t i = 0; i < ga.rows(); ++i)
      for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g(0, j) * inv;
  });
}

Var Tape::sum(Var a) {
  Matrix out(1, 1, mwa::sum(value(a)));
  return record(std::move(out), {a}, [](const Matrix& g, std::span<Matrix* const> gi) {
    for (double& x : gi[0]->data()) x += g(0, 0);
  });
}

Var Tape::cross_entropy(Var logits, std::size_t label, bool excess) {
  const Matrix& z = value(logits);
  if (z.rows() != 1) throw ShapeError("cross_entropy: expected 1xC logits, got " + z.shape_string());
  if (label >= z.cols()) throw InputError("cross_entropy: label out of range");
  Matrix p = mwa::softmax_rows(z);
  const double mx = *std::max_element(z.data().begin(), z.data().end());
  double loss = 0.0;
  if (excess) {
    double shifted = 0.0;
    for (double x : z.data()) shifted += std::expm1(x - mx);
    loss = (mx - z(0, label)) + std::log1p(shifted / static_cast<double>(z.cols()));
  } else {
    double total = 0.0;
    for (double x : z.data()) total += std::exp(x - mx);
    loss = std::log(total) + mx - z(0, label);
  }
  return record(Matrix(1, 1, loss), {logits},
                [p = std::move(p), label](const Matrix& g, std::span<Matrix* const> gi) {
                  Matrix& gz = *gi[0];
                  for (std::size_t j = 0; j < p.cols(); ++j) {
                    const double target = j == label ? 1.0 : 0.0;
                    gz(0, j) += g(0, 0) * (p(0, j) - target);
                  }
                });
}

}  // namespace mwa
