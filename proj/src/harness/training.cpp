#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "mwa/errors.hpp"
#include "mwa/harness/experiment.hpp"

namespace mwa::harness {

namespace {

void check_split(const std::vector<Example>& split, const ModelConfig& model, const char* name) {
  for (std::size_t i = 0; i < split.size(); ++i) {
    const auto& ex = split[i];
    if (ex.seq.size() == 0 || ex.seq.size() > model.max_len) {
      throw InputError(std::string(name) + " example " + std::to_string(i) + " has length " +
                       std::to_string(ex.seq.size()) + " (max_length " +
                       std::to_string(model.max_len) + ")");
    }
    for (std::size_t id : ex.seq.ids) {
      if (id >= model.vocab_size) {
        throw InputError(std::string(name) + " example " + std::to_string(i) + " has id " +
                         std::to_string(id) + " outside vocab_size " +
                         std::to_string(model.vocab_size));
      }
    }
    if (ex.label >= model.classes) {
      throw InputError(std::string(name) + " example " + std::to_string(i) + " has label " +
                       std::to_string(ex.label) + " outside " + std::to_string(model.classes) +
                       " classes");
    }
  }
}

Var batch_loss(Tape& tape, SequenceClassifier& model, const std::vector<PreparedExample>& data,
               std::span<const std::size_t> indices, bool excess = false) {
  Var total;
  for (std::size_t idx : indices) {
    const auto& ex = data[idx];
    const Var l = model.loss(tape, ex.example->seq, ex.inputs, ex.example->label, excess);
    total = total.valid() ? tape.add(total, l) : l;
  }
  return tape.scale(total, 1.0 / static_cast<double>(indices.size()));
}

}  // namespace

Experiment prepare_experiment(const ExperimentConfig& config) {
  config.validate();
  Experiment exp;
  exp.config = config;
  for (const auto& s : config.sources) {
    exp.sources.push_back(seg::Segmenter::from_spec(seg::SourceSpec::parse(s)));
  }
  exp.random_source = seg::Segmenter::from_spec(seg::SourceSpec::parse(config.random_source));
  if (config.data.synthetic) {
    exp.data = synth_dataset(*config.data.synthetic, config.data.synthetic_seed);
  } else {
    exp.data.train = load_dataset(config.data.train_file);
    exp.data.dev = load_dataset(config.data.dev_file);
    if (!config.data.test_file.empty()) exp.data.test = load_dataset(config.data.test_file);
  }
  check_split(exp.data.train, config.model, "train");
  check_split(exp.data.dev, config.model, "dev");
  check_split(exp.data.test, config.model, "test");
  return exp;
}

std::size_t source_count(const Variant& variant, const Experiment& exp) {
  return variant.kind == Variant::Kind::kMwaMulti ? exp.sources.size() : 1;
}

std::vector<std::string> source_labels(const Variant& variant, const Experiment& exp) {
  switch (variant.kind) {
    case Variant::Kind::kBaseline:
      return {"none"};
    case Variant::Kind::kWaSingle:
      return {exp.sources.at(variant.source).label()};
    case Variant::Kind::kWaRandom:
      return {exp.random_source.label()};
    case Variant::Kind::kMwaMulti: {
      std::vector<std::string> out;
      for (const auto& s : exp.sources) out.push_back(s.label());
      return out;
    }
  }
  return {};
}

std::vector<PreparedExample> prepare_split(const Variant& variant, const Experiment& exp,
                                           const std::vector<Example>& split) {
  std::vector<PreparedExample> out(split.size());
  for (std::size_t i = 0; i < split.size(); ++i) {
    PreparedExample& p = out[i];
    p.example = &split[i];
    switch (variant.kind) {
      case Variant::Kind::kBaseline:
        break;
      case Variant::Kind::kWaSingle:
        p.partitions.push_back(exp.sources.at(variant.source).segment(split[i].seq));
        break;
      case Variant::Kind::kWaRandom:
        p.partitions.push_back(exp.random_source.segment(split[i].seq));
        break;
      case Variant::Kind::kMwaMulti:
        for (const auto& s : exp.sources) p.partitions.push_back(s.segment(split[i].seq));
        break;
    }
    if (variant.kind == Variant::Kind::kBaseline) {
      p.inputs.push_back(nullptr);
    } else {
      for (const auto& part : p.partitions) p.inputs.push_back(&part);
    }
  }
  return out;
}

double evaluate(const SequenceClassifier& model, const std::vector<PreparedExample>& split) {
  if (split.empty()) throw InputError("evaluate: empty split");
  std::size_t correct = 0;
  for (const auto& ex : split) {
    if (model.predict(ex.example->seq, ex.inputs) == ex.example->label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(split.size());
}

double mean_loss(SequenceClassifier& model, const std::vector<PreparedExample>& split) {
  if (split.empty()) throw InputError("mean_loss: empty split");
  double total = 0.0;
  for (const auto& ex : split) {
    Tape tape;
    total += tape.value(model.loss(tape, ex.example->seq, ex.inputs, ex.example->label))(0, 0);
  }
  return total / static_cast<double>(split.size());
}

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double total = 0.0;
  for (double x : xs) total += x;
  const double mean = total / static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double sq = 0.0;
  for (double x : xs) sq += (x - mean) * (x - mean);
  return {mean, std::sqrt(sq / static_cast<double>(xs.size() - 1))};
}

RunReport train(const Variant& variant, const Experiment& exp,
                std::vector<TrainedModel>* keep_models) {
  const ExperimentConfig& cfg = exp.config;
  const TrainConfig& tc = cfg.train;
  if (tc.seeds.empty()) throw ConfigError("train: no seeds");
  if (exp.data.dev.empty()) throw InputError("train: empty dev split");

  const auto train_set = prepare_split(variant, exp, exp.data.train);
  const auto dev_set = prepare_split(variant, exp, exp.data.dev);
  const auto test_set = prepare_split(variant, exp, exp.data.test);
  const auto labels = source_labels(variant, exp);

  RunReport report;
  report.variant = variant.name();
  report.fingerprint = config_fingerprint(cfg);

  const std::size_t batches =
      train_set.empty() ? 0 : (train_set.size() + tc.batch_size - 1) / tc.batch_size;
  const std::size_t total_steps = tc.epochs * batches;

  for (std::uint64_t seed : tc.seeds) {
    const auto started = std::chrono::steady_clock::now();
    SeedResult result;
    result.seed = seed;
    SequenceClassifier model = SequenceClassifier::init(cfg.model, labels, seed);
    auto params = model.parameters();
    result.initial_dev_loss = mean_loss(model, dev_set);

    if (total_steps > 0) {
      AdamHyper hyper;
      hyper.lr0 = tc.lr;
      hyper.beta1 = tc.beta1;
      hyper.beta2 = tc.beta2;
      hyper.eps = tc.adam_eps;
      hyper.weight_decay = tc.weight_decay;
      hyper.warmup_ratio = tc.warmup_ratio;
      hyper.total_steps = total_steps;
      AdamState adam(params, hyper);

      std::mt19937_64 order_rng(seed ^ 0x9E3779B97F4A7C15ULL);
      std::vector<std::size_t> order(train_set.size());
      std::iota(order.begin(), order.end(), 0);
      for (std::size_t epoch = 0; epoch < tc.epochs && !result.failed; ++epoch) {
        std::shuffle(order.begin(), order.end(), order_rng);
        double epoch_loss = 0.0;
        for (std::size_t b = 0; b < batches; ++b) {
          const std::size_t lo = b * tc.batch_size;
          const std::size_t hi = std::min(lo + tc.batch_size, order.size());
          const std::span<const std::size_t> idx(order.data() + lo, hi - lo);
          zero_grads(params);
          Tape tape;
          const Var loss = batch_loss(tape, model, train_set, idx);
          const double value = tape.value(loss)(0, 0);
          if (!std::isfinite(value)) {
            result.failed = true;
            result.failure = "non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                             std::to_string(b);
            break;
          }
          tape.backward(loss);
          adam.step(params);
          epoch_loss += value * static_cast<double>(idx.size());
        }
        if (!result.failed) {
          result.loss_curve.push_back(epoch_loss / static_cast<double>(train_set.size()));
        }
      }
    }

    if (!result.failed) {
      for (const Parameter* p : params) {
        if (!all_finite(p->value)) {
          result.failed = true;
          result.failure = "non-finite parameter " + p->name;
          break;
        }
      }
    }
    if (!result.failed) {
      result.dev_accuracy = evaluate(model, dev_set);
      if (!test_set.empty()) result.test_accuracy = evaluate(model, test_set);
    }
    result.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    report.seeds.push_back(std::move(result));
    if (keep_models) keep_models->push_back(TrainedModel{seed, std::move(model)});
  }

  std::vector<double> dev, test;
  for (const auto& s : report.seeds) {
    if (s.failed) continue;
    dev.push_back(s.dev_accuracy);
    if (s.test_accuracy) test.push_back(*s.test_accuracy);
  }
  std::tie(report.mean_dev_accuracy, report.std_dev_accuracy) = mean_std(dev);
  if (!test.empty()) {
    const auto [m, s] = mean_std(test);
    report.mean_test_accuracy = m;
    report.std_test_accuracy = s;
  }
  return report;
}

std::vector<RunReport> ablation_matrix(const Experiment& exp) {
  std::vector<RunReport> out;
  for (const Variant& v : exp.config.variants) out.push_back(train(v, exp));
  return out;
}

std::string format_ablation_table(const std::vector<RunReport>& reports) {
  std::ostringstream os;
  os << std::left << std::setw(16) << "variant" << std::setw(22) << "dev acc (mean+-std)"
     << "test acc (mean+-std)" << "\n";
  os << std::fixed << std::setprecision(4);
  for (const auto& r : reports) {
    std::ostringstream dev;
    dev << std::fixed << std::setprecision(4) << r.mean_dev_accuracy << " +- " << r.std_dev_accuracy;
    os << std::setw(16) << r.variant << std::setw(22) << dev.str();
    if (r.mean_test_accuracy) {
      os << *r.mean_test_accuracy << " +- " << *r.std_test_accuracy;
    } else {
      os << "-";
    }
    std::size_t failed = 0;
    for (const auto& s : r.seeds) failed += s.failed ? 1 : 0;
    if (failed > 0) os << "  (" << failed << " failed)";
    os << "\n";
  }
  return os.str();
}

ModelGradCheck gradcheck_model(const Experiment& exp, std::uint64_t seed, double eps,
                               std::size_t batch, double tie_margin) {
  if (exp.data.train.empty()) throw InputError("gradcheck: no training examples");
  const Variant variant = exp.sources.empty() ? Variant{Variant::Kind::kBaseline, 0}
                                              : Variant{Variant::Kind::kMwaMulti, 0};
  SequenceClassifier model =
      SequenceClassifier::init(exp.config.model, source_labels(variant, exp), seed);
  auto params = model.parameters();

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, exp.data.train.size() - 1);
  ModelGradCheck out;
  constexpr std::size_t kMaxRedraws = 100;
  for (std::size_t attempt = 0; attempt <= kMaxRedraws; ++attempt) {
    std::vector<Example> chosen;
    for (std::size_t i = 0; i < batch; ++i) chosen.push_back(exp.data.train[pick(rng)]);
    const auto prepared = prepare_split(variant, exp, chosen);
    std::vector<std::size_t> idx(prepared.size());
    std::iota(idx.begin(), idx.end(), 0);
    const Objective objective = [&](Tape& tape) { return batch_loss(tape, model, prepared, idx, true); };

    Tape probe;
    objective(probe);
    if (probe.max_pool_margin() < tie_margin) {
      ++out.redraws;
      continue;
    }
    out.max_pool_margin = probe.max_pool_margin();
    out.report = finite_diff_check(objective, params, eps);
    return out;
  }
  throw InputError("gradcheck: could not draw a tie-free batch");
}

}  // namespace mwa::harness
