#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "mwa/attention.hpp"
#include "mwa/errors.hpp"
#include "mwa/fusion.hpp"
#include "mwa/segmentation.hpp"

namespace py = pybind11;
using mwa::Matrix;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw mwa::ShapeError("expected a 2-d array, got " + std::to_string(a.ndim()) + "-d");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto cols = static_cast<std::size_t>(a.shape(1));
  return Matrix(rows, cols, std::vector<double>(a.data(), a.data() + rows * cols));
}

Array to_array(const Matrix& m) {
  Array out({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

mwa::seg::WordPartition checked_partition(const std::vector<std::size_t>& lengths, std::size_t n) {
  auto p = mwa::seg::partition_from_lengths(lengths);
  if (const auto v = mwa::seg::validate_partition(p, n))
    throw mwa::InputError("word lengths do not cover " + std::to_string(n) + " characters");
  return p;
}

mwa::attn::ScoreOrientation orientation(bool conventional) {
  return conventional ? mwa::attn::ScoreOrientation::kConventional : mwa::attn::ScoreOrientation::kAsWritten;
}

// One shared layer assembled from per-head weight lists.
mwa::attn::MWALayerParams make_layer(std::size_t d, const std::vector<Array>& W_k, const std::vector<Array>& W_q,
                                     const std::vector<Array>& W_v, const std::vector<double>& lambda_raw,
                                     const Array& W_o, bool conventional) {
  const std::size_t K = W_k.size();
  if (W_q.size() != K || W_v.size() != K || lambda_raw.size() != K)
    throw mwa::ShapeError("per-head weight lists differ in length");
  mwa::attn::MWALayerParams layer;
  layer.config.d = d;
  layer.config.heads = K;
  layer.config.orientation = orientation(conventional);
  layer.config.validate();
  for (std::size_t k = 0; k < K; ++k) {
    const std::string h = "head" + std::to_string(k) + ".";
    layer.heads.push_back({mwa::Parameter(h + "W_k", to_matrix(W_k[k])), mwa::Parameter(h + "W_q", to_matrix(W_q[k])),
                           mwa::Parameter(h + "W_v", to_matrix(W_v[k])),
                           mwa::Parameter(h + "lambda_raw", Matrix{{lambda_raw[k]}}, false)});
  }
  layer.W_o = mwa::Parameter("W_o", to_matrix(W_o));
  return layer;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  auto base = py::register_exception<mwa::Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<mwa::ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<mwa::ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<mwa::InputError>(m, "InputError", base.ptr());
  py::register_exception<mwa::IoError>(m, "IoError", base.ptr());

  m.def(
      "segment",
      [](const std::string& text, const std::string& source) {
        mwa::seg::Vocabulary vocab;
        const auto seq = mwa::seg::sequence_from_text(text, vocab);
        const auto seg = mwa::seg::Segmenter::from_spec(mwa::seg::SourceSpec::parse(source));
        return mwa::seg::words_of(seq, seg.segment(seq));
      },
      py::arg("text"), py::arg("source"), "Words of `text` under a source spec such as 'fmm:dict.txt'.");

  m.def(
      "softmax_rows", [](const Array& a) { return to_array(mwa::softmax_rows(to_matrix(a))); }, py::arg("m"));

  m.def(
      "char_attention_scores",
      [](const Array& H, const Array& W_k, const Array& W_q, bool conventional) {
        return to_array(
            mwa::attn::char_attention_scores(to_matrix(H), to_matrix(W_k), to_matrix(W_q), orientation(conventional)));
      },
      py::arg("H"), py::arg("W_k"), py::arg("W_q"), py::arg("conventional") = false);

  m.def(
      "align",
      [](const Array& A, const std::vector<std::size_t>& lengths, double lam) {
        const Matrix a = to_matrix(A);
        return to_array(mwa::attn::align(a, checked_partition(lengths, a.rows()), lam).matrix);
      },
      py::arg("A"), py::arg("lengths"), py::arg("lam"), "Word-aligned attention for a partition given as word lengths.");

  m.def(
      "fuse",
      [](const std::vector<Array>& reps, const Array& W_g) {
        std::vector<Matrix> ms;
        for (const auto& r : reps) ms.push_back(to_matrix(r));
        return to_array(mwa::fusion::fuse(ms, to_matrix(W_g)));
      },
      py::arg("reps"), py::arg("W_g"));

  m.def(
      "mwa_forward",
      [](const Array& H, const std::vector<std::vector<std::size_t>>& partitions, const std::vector<Array>& W_k,
         const std::vector<Array>& W_q, const std::vector<Array>& W_v, const std::vector<double>& lambda_raw,
         const Array& W_o, const Array& W_g, bool conventional) {
        const Matrix h = to_matrix(H);
        mwa::fusion::MWAModel model;
        model.layers.push_back(make_layer(h.cols(), W_k, W_q, W_v, lambda_raw, W_o, conventional));
        model.fusion.W_g = mwa::Parameter("W_g", to_matrix(W_g));
        std::vector<mwa::seg::WordPartition> parts;
        for (const auto& lengths : partitions) {
          parts.push_back(checked_partition(lengths, h.rows()));
          model.sources.push_back("src" + std::to_string(model.sources.size()));
        }
        return to_array(mwa::fusion::mwa_forward(h, parts, model));
      },
      py::arg("H"), py::arg("partitions"), py::arg("W_k"), py::arg("W_q"), py::arg("W_v"), py::arg("lambda_raw"),
      py::arg("W_o"), py::arg("W_g"), py::arg("conventional") = false,
      "Fused representation with one shared layer; partitions are lists of word lengths.");
}
