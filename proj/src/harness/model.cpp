#include "mwa/harness/model.hpp"

#include <charconv>
#include <cmath>

#include "mwa/errors.hpp"

namespace mwa::harness {

Matrix sinusoidal_positions(std::size_t max_n, std::size_t d) {
  Matrix table(max_n, d);
  for (std::size_t pos = 0; pos < max_n; ++pos) {
    for (std::size_t j = 0; j < d; ++j) {
      const double exponent = static_cast<double>(j - j % 2) / static_cast<double>(d);
      const double angle = static_cast<double>(pos) / std::pow(10000.0, exponent);
      table(pos, j) = j % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  }
  return table;
}

ToyEncoder ToyEncoder::init(std::size_t vocab_size, std::size_t max_n, std::size_t d,
                            std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix emb(vocab_size, d);
  for (double& x : emb.data()) x = dist(rng);
  return ToyEncoder{Parameter("embedding", std::move(emb)), sinusoidal_positions(max_n, d)};
}

namespace {

void check_sequence(const ToyEncoder& enc, const seg::CharSequence& seq) {
  if (seq.size() == 0) throw InputError("encode: empty sequence");
  if (seq.size() > enc.positional.rows()) {
    throw InputError("encode: sequence length " + std::to_string(seq.size()) + " exceeds max " +
                     std::to_string(enc.positional.rows()));
  }
  for (std::size_t id : seq.ids) {
    if (id >= enc.embedding.value.rows()) {
      throw InputError("encode: id " + std::to_string(id) + " outside vocabulary of " +
                       std::to_string(enc.embedding.value.rows()));
    }
  }
}

Matrix positional_rows(const ToyEncoder& enc, std::size_t n) {
  Matrix out(n, enc.positional.cols());
  for (std::size_t i = 0; i < n; ++i) {
    const auto src = enc.positional.row(i);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace

Matrix ToyEncoder::encode(const seg::CharSequence& seq) const {
  check_sequence(*this, seq);
  Matrix h = positional_rows(*this, seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const auto e = embedding.value.row(seq.ids[i]);
    auto out = h.row(i);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = e[j] + out[j];
  }
  return h;
}

Var ToyEncoder::encode(Tape& tape, const seg::CharSequence& seq) {
  check_sequence(*this, seq);
  const Var rows = tape.gather_rows(tape.parameter(embedding), seq.ids);
  return tape.add(rows, tape.constant(positional_rows(*this, seq.size())));
}

void ModelConfig::validate() const {
  layer.validate();
  if (vocab_size == 0) throw ConfigError("vocab_size must be positive");
  if (max_len == 0) throw ConfigError("max_length must be positive");
  if (classes < 2) throw ConfigError("need at least two classes");
}

std::string Variant::name() const {
  switch (kind) {
    case Kind::kBaseline:
      return "baseline";
    case Kind::kWaSingle:
      return "wa_single:" + std::to_string(source);
    case Kind::kWaRandom:
      return "wa_random";
    case Kind::kMwaMulti:
      return "mwa_multi";
  }
  return {};
}

Variant Variant::parse(std::string_view name) {
  if (name == "baseline") return {Kind::kBaseline, 0};
  if (name == "wa_random") return {Kind::kWaRandom, 0};
  if (name == "mwa_multi") return {Kind::kMwaMulti, 0};
  constexpr std::string_view prefix = "wa_single:";
  if (name.starts_with(prefix)) {
    const std::string_view idx = name.substr(prefix.size());
    std::size_t source = 0;
    auto [ptr, ec] = std::from_chars(idx.data(), idx.data() + idx.size(), source);
    if (ec == std::errc() && ptr == idx.data() + idx.size() && !idx.empty()) {
      return {Kind::kWaSingle, source};
    }
  }
  throw ConfigError("unknown variant '" + std::string(name) + "'");
}

SequenceClassifier SequenceClassifier::init(const ModelConfig& config,
                                            std::vector<std::string> sources, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  SequenceClassifier m;
  m.config_ = config;
  m.encoder_ = ToyEncoder::init(config.vocab_size, config.max_len, config.layer.d, rng);
  m.mwa_ = fusion::MWAModel::init(config.layer, std::move(sources), config.share_attention, rng);
  const double bound = 1.0 / std::sqrt(static_cast<double>(config.layer.d));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix w(config.layer.d, config.classes);
  for (double& x : w.data()) x = dist(rng);
  m.head_.w = Parameter("classifier.w", std::move(w));
  m.head_.b = Parameter("classifier.b", Matrix(1, config.classes), /*decay=*/false);
  return m;
}

Matrix SequenceClassifier::represent(const seg::CharSequence& seq,
                                     std::span<const seg::WordPartition* const> partitions) const {
  return fusion::mwa_forward(encoder_.encode(seq), partitions, mwa_);
}

Matrix SequenceClassifier::logits(const seg::CharSequence& seq,
                                  std::span<const seg::WordPartition* const> partitions) const {
  const Matrix fused = represent(seq, partitions);
  Matrix pooled(1, fused.cols());
  const double inv = 1.0 / static_cast<double>(fused.rows());
  for (std::size_t i = 0; i < fused.rows(); ++i)
    for (std::size_t j = 0; j < fused.cols(); ++j) pooled(0, j) += fused(i, j);
  for (double& x : pooled.data()) x *= inv;
  Matrix z = matmul(pooled, head_.w.value);
  z += head_.b.value;
  return z;
}

std::size_t argmax_row(const Matrix& logits) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < logits.cols(); ++j)
    if (logits(0, j) > logits(0, best)) best = j;
  return best;
}

std::size_t SequenceClassifier::predict(const seg::CharSequence& seq,
                                        std::span<const seg::WordPartition* const> partitions) const {
  return argmax_row(logits(seq, partitions));
}

Var SequenceClassifier::logits(Tape& tape, const seg::CharSequence& seq,
                               std::span<const seg::WordPartition* const> partitions) {
  const Var h = encoder_.encode(tape, seq);
  const Var fused = fusion::mwa_forward(tape, h, partitions, mwa_);
  const Var pooled = tape.mean_rows(fused);
  return tape.add_row(tape.matmul(pooled, tape.parameter(head_.w)), tape.parameter(head_.b));
}

Var SequenceClassifier::loss(Tape& tape, const seg::CharSequence& seq,
                             std::span<const seg::WordPartition* const> partitions,
                             std::size_t label, bool excess) {
  return tape.cross_entropy(logits(tape, seq, partitions), label, excess);
}

std::vector<Parameter*> SequenceClassifier::parameters() {
  std::vector<Parameter*> out{&encoder_.embedding};
  auto ps = mwa_.parameters();
  out.insert(out.end(), ps.begin(), ps.end());
  out.push_back(&head_.w);
  out.push_back(&head_.b);
  return out;
}

}  // namespace mwa::harness
