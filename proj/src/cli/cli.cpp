#include "mwa/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "mwa/errors.hpp"
#include "mwa/harness/experiment.hpp"
#include "mwa/utf8.hpp"

namespace mwa::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr double kGradTolerance = 1e-4;

std::string fmt17(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_matrix(std::ostream& os, const Matrix& m) {
  os << "[";
  for (std::size_t i = 0; i < m.rows(); ++i) {
    os << (i ? ",\n      [" : "\n      [");
    for (std::size_t j = 0; j < m.cols(); ++j) os << (j ? ", " : "") << fmt17(m(i, j));
    os << "]";
  }
  os << "\n    ]";
}

std::string file_stem(const harness::Variant& v) {
  std::string s = v.name();
  for (char& c : s)
    if (c == ':') c = '_';
  return s;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

int cmd_segment(const std::string& text, const std::vector<std::string>& sources,
                std::ostream& out) {
  seg::Vocabulary vocab;
  const auto seq = seg::sequence_from_text(text, vocab);
  std::vector<std::string> lines;
  for (const auto& spec : sources) {
    const auto segmenter = seg::Segmenter::from_spec(seg::SourceSpec::parse(spec));
    const auto words = seg::words_of(seq, segmenter.segment(seq));
    std::string line;
    for (std::size_t i = 0; i < words.size(); ++i) line += (i ? "|" : "") + words[i];
    lines.push_back(std::move(line));
  }
  for (const auto& l : lines) out << l << "\n";
  return kOk;
}

struct AlignOptions {
  std::string text;
  std::string source;
  std::uint64_t seed = 0;
  std::optional<double> lambda;
  std::string out;
  std::size_t d = 8;
  std::size_t heads = 2;
};

int cmd_align(const AlignOptions& o, std::ostream& out, std::ostream& err) {
  if (o.lambda && !(*o.lambda >= 0.0 && *o.lambda <= 1.0)) {
    err << "error: --lambda must lie in [0, 1]\n";
    return kUsageError;
  }
  seg::Vocabulary vocab;
  const auto seq = seg::sequence_from_text(o.text, vocab);
  const auto segmenter = seg::Segmenter::from_spec(seg::SourceSpec::parse(o.source));
  const auto partition = segmenter.segment(seq);

  attn::LayerConfig layer;
  layer.d = o.d;
  layer.heads = o.heads;
  layer.validate();
  std::mt19937_64 rng(o.seed);
  const auto encoder = harness::ToyEncoder::init(vocab.size(), seq.size(), o.d, rng);
  auto params = attn::MWALayerParams::init(layer, rng);
  const Matrix H = encoder.encode(seq);

  std::vector<double> lambdas;
  std::vector<Matrix> scores, aligned;
  for (std::size_t k = 0; k < params.heads.size(); ++k) {
    const auto& head = params.heads[k];
    const double lambda = o.lambda ? *o.lambda : params.lambda(k);
    Matrix A = attn::char_attention_scores(H, head.W_k.value, head.W_q.value, layer.orientation);
    Matrix A_hat = attn::align(A, partition, lambda).matrix;
    for (const auto& [s, l] : partition.blocks) {
      for (std::size_t r = 1; r < l; ++r) {
        if (!std::equal(A_hat.row(s).begin(), A_hat.row(s).end(), A_hat.row(s + r).begin())) {
          err << "internal error: aligned rows differ inside block starting at " << s << "\n";
          return kInvariantViolation;
        }
      }
    }
    if (lambda == 0.0) {
      for (std::size_t i = 0; i < A_hat.rows(); ++i) {
        double total = 0.0;
        for (double x : A_hat.row(i)) total += x;
        if (std::abs(total - 1.0) > 1e-12) {
          err << "internal error: aligned row " << i << " sums to " << fmt17(total) << "\n";
          return kInvariantViolation;
        }
      }
    }
    lambdas.push_back(lambda);
    scores.push_back(std::move(A));
    aligned.push_back(std::move(A_hat));
  }

  std::ostringstream os;
  os << "{\n  \"dump_version\": 1,\n";
  os << "  \"text\": " << json(o.text).dump() << ",\n";
  os << "  \"source\": " << json(segmenter.label()).dump() << ",\n";
  os << "  \"seed\": " << o.seed << ",\n  \"d\": " << o.d << ",\n  \"heads\": " << o.heads << ",\n";
  os << "  \"partition\": [";
  for (std::size_t b = 0; b < partition.blocks.size(); ++b) {
    os << (b ? ", " : "") << "[" << partition.blocks[b].start << ", " << partition.blocks[b].len << "]";
  }
  os << "],\n  \"words\": " << json(seg::words_of(seq, partition)).dump() << ",\n";
  os << "  \"attention\": [";
  for (std::size_t k = 0; k < scores.size(); ++k) {
    os << (k ? ",\n" : "\n") << "  {\n    \"head\": " << k << ",\n    \"lambda\": " << fmt17(lambdas[k])
       << ",\n    \"A_c\": ";
    write_matrix(os, scores[k]);
    os << ",\n    \"A_hat\": ";
    write_matrix(os, aligned[k]);
    os << "\n  }";
  }
  os << "\n  ]\n}\n";

  std::ofstream file(o.out, std::ios::binary);
  if (!file) throw IoError("cannot write " + o.out);
  file << os.str();
  out << "wrote " << o.out << " (n=" << seq.size() << ", words=" << partition.word_count() << ")\n";
  return kOk;
}

int cmd_gradcheck(const std::string& config_path, std::uint64_t seed, double eps, bool corrupt,
                  std::ostream& out, std::ostream& err) {
  const auto exp = harness::prepare_experiment(harness::load_config(config_path));
  testing::set_corrupt_backward(corrupt);
  harness::ModelGradCheck result;
  try {
    result = harness::gradcheck_model(exp, seed, eps);
  } catch (...) {
    testing::set_corrupt_backward(false);
    throw;
  }
  testing::set_corrupt_backward(false);

  bool ok = true;
  for (const auto& p : result.report.parameters) {
    const bool pass = p.max_relative_error < kGradTolerance;
    ok = ok && pass;
    out << (pass ? "ok   " : "FAIL ") << p.name << "  max_rel_err=" << fmt17(p.max_relative_error)
        << "  (entry " << p.worst_index << ": analytic " << fmt17(p.analytic) << ", numeric "
        << fmt17(p.numeric) << ")\n";
  }
  out << "max_relative_error=" << fmt17(result.report.max_relative_error)
      << " worst=" << result.report.worst_parameter << " redraws=" << result.redraws << "\n";
  if (!ok) {
    err << "gradient check failed: worst parameter " << result.report.worst_parameter << " ("
        << fmt17(result.report.max_relative_error) << ")\n";
    return kCheckFailed;
  }
  return kOk;
}

int cmd_train(const std::string& config_path, const std::string& out_dir, bool keep_checkpoints,
              std::ostream& out) {
  const auto exp = harness::prepare_experiment(harness::load_config(config_path));
  fs::create_directories(out_dir);
  std::vector<harness::RunReport> reports;
  json summary = json::array();
  for (const auto& variant : exp.config.variants) {
    std::vector<harness::TrainedModel> models;
    auto report = harness::train(variant, exp, keep_checkpoints ? &models : nullptr);
    const fs::path report_path = fs::path(out_dir) / (file_stem(variant) + ".report.json");
    write_json(report_path, report.to_json());
    for (auto& m : models) {
      harness::write_checkpoint(
          fs::path(out_dir) / (file_stem(variant) + ".seed" + std::to_string(m.seed) + ".ckpt.json"),
          m.model, variant, m.seed);
    }
    summary.push_back(report.to_json());
    reports.push_back(std::move(report));
  }
  if (!keep_checkpoints) {
    write_json(fs::path(out_dir) / "ablation.json", json{{"report_version", 1}, {"reports", summary}});
  }
  out << harness::format_ablation_table(reports);
  return kOk;
}

int cmd_eval(const std::string& config_path, const std::string& out_dir, std::ostream& out) {
  const auto exp = harness::prepare_experiment(harness::load_config(config_path));
  std::vector<harness::RunReport> reports;
  for (const auto& variant : exp.config.variants) {
    const auto dev = harness::prepare_split(variant, exp, exp.data.dev);
    const auto test = harness::prepare_split(variant, exp, exp.data.test);
    harness::RunReport report;
    report.variant = variant.name();
    report.fingerprint = harness::config_fingerprint(exp.config);
    std::vector<double> dev_acc, test_acc;
    for (std::uint64_t seed : exp.config.train.seeds) {
      const fs::path ckpt =
          fs::path(out_dir) / (file_stem(variant) + ".seed" + std::to_string(seed) + ".ckpt.json");
      auto model = harness::read_checkpoint(ckpt);
      if (model.source_count() != harness::source_count(variant, exp)) {
        throw ConfigError("checkpoint " + ckpt.string() + " has the wrong number of sources");
      }
      harness::SeedResult r;
      r.seed = seed;
      r.initial_dev_loss = harness::mean_loss(model, dev);
      r.dev_accuracy = harness::evaluate(model, dev);
      dev_acc.push_back(r.dev_accuracy);
      if (!test.empty()) {
        r.test_accuracy = harness::evaluate(model, test);
        test_acc.push_back(*r.test_accuracy);
      }
      report.seeds.push_back(std::move(r));
    }
    std::tie(report.mean_dev_accuracy, report.std_dev_accuracy) = harness::mean_std(dev_acc);
    if (!test_acc.empty()) {
      const auto [m, s] = harness::mean_std(test_acc);
      report.mean_test_accuracy = m;
      report.std_test_accuracy = s;
    }
    write_json(fs::path(out_dir) / (file_stem(variant) + ".eval.json"), report.to_json());
    reports.push_back(std::move(report));
  }
  out << harness::format_ablation_table(reports);
  return kOk;
}

int cmd_synth(const std::string& config_path, const std::string& out_dir, std::ostream& out) {
  const auto exp = harness::prepare_experiment(harness::load_config(config_path));
  fs::create_directories(out_dir);
  harness::write_dataset(fs::path(out_dir) / "train.jsonl", exp.data.train);
  harness::write_dataset(fs::path(out_dir) / "dev.jsonl", exp.data.dev);
  harness::write_dataset(fs::path(out_dir) / "test.jsonl", exp.data.test);
  out << "wrote " << exp.data.train.size() << "/" << exp.data.dev.size() << "/"
      << exp.data.test.size() << " examples to " << out_dir << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Word-aligned attention toolkit", "mwa"};
  app.require_subcommand(1);

  std::string text, config, out_dir, out_path;
  std::vector<std::string> sources;
  std::uint64_t seed = 0;
  bool corrupt = false;
  double eps = 1e-5;
  AlignOptions align;

  auto* segment = app.add_subcommand("segment", "Print the partition produced by each source");
  segment->add_option("--text", text, "Input text")->required();
  segment->add_option("--source", sources, "fmm:<dict> | bmm:<dict> | ext:<jsonl> | rand:<seed>:<mean>")
      ->required();

  auto* align_cmd = app.add_subcommand("align", "Dump character and aligned attention as JSON");
  align_cmd->add_option("--text", align.text, "Input text")->required();
  align_cmd->add_option("--source", align.source, "Segmentation source")->required();
  align_cmd->add_option("--seed", align.seed, "Initialization seed")->required();
  align_cmd->add_option("--lambda", align.lambda, "Override the pooling weight, in [0, 1]");
  align_cmd->add_option("--out", align.out, "Output JSON path")->required();
  align_cmd->add_option("--d", align.d, "Model width")->capture_default_str();
  align_cmd->add_option("--heads", align.heads, "Attention heads")->capture_default_str();

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the full model");
  gradcheck->add_option("--config", config, "Experiment config")->required();
  gradcheck->add_option("--seed", seed, "Model and batch seed")->required();
  gradcheck->add_option("--eps", eps, "Central-difference step, in (0, 1e-3]")->capture_default_str();
  gradcheck->add_flag("--corrupt-backward", corrupt, "Negative control: perturb matmul backward")
      ->group("");

  auto add_run = [&](const char* name, const char* help) {
    auto* c = app.add_subcommand(name, help);
    c->add_option("--config", config, "Experiment config")->required();
    c->add_option("--out-dir", out_dir, "Output directory")->required();
    return c;
  };
  auto* train = add_run("train", "Train configured variants; write reports and checkpoints");
  auto* eval = add_run("eval", "Evaluate checkpoints written by train");
  auto* ablation = add_run("ablation", "Train every variant and print the ablation table");
  auto* synth = add_run("synth", "Write the configured synthetic dataset as JSON Lines");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    const std::string msg = e.what();
    err << "error: " << msg << "\n";
    return kUsageError;
  }

  try {
    if (segment->parsed()) return cmd_segment(text, sources, out);
    if (align_cmd->parsed()) return cmd_align(align, out, err);
    if (gradcheck->parsed()) return cmd_gradcheck(config, seed, eps, corrupt, out, err);
    if (train->parsed()) return cmd_train(config, out_dir, /*keep_checkpoints=*/true, out);
    if (eval->parsed()) return cmd_eval(config, out_dir, out);
    if (ablation->parsed()) return cmd_train(config, out_dir, /*keep_checkpoints=*/false, out);
    if (synth->parsed()) return cmd_synth(config, out_dir, out);
  } catch (const AlignmentError& e) {
    err << "error: " << e.what() << " (index " << e.index() << ")\n";
    return kUsageError;
  } catch (const InvariantViolation& e) {
    err << "internal error: " << e.what() << "\n";
    return kInvariantViolation;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  }
  return kUsageError;
}

}  // namespace mwa::cli
