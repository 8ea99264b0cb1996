#include <fstream>

#include "mwa/errors.hpp"
#include "mwa/harness/experiment.hpp"
#include "mwa/utf8.hpp"

namespace mwa::harness {

namespace {

using nlohmann::json;

json optional_number(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

std::optional<double> read_optional(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("error while writing " + path.string());
}

}  // namespace

std::vector<Example> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read dataset " + path.string());
  std::vector<Example> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
    try {
      const json j = json::parse(line);
      auto ids = j.at("ids").get<std::vector<std::size_t>>();
      auto chars = utf8::decode(j.at("text").get<std::string>());
      const auto label = j.at("label").get<std::size_t>();
      out.push_back(Example{seg::make_sequence(std::move(chars), std::move(ids)), label});
    } catch (const json::exception& e) {
      throw IoError(where + e.what());
    } catch (const InputError& e) {
      throw IoError(where + e.what());
    }
  }
  return out;
}

void write_dataset(const std::filesystem::path& path, const std::vector<Example>& examples) {
  std::string text;
  for (const auto& ex : examples) {
    text += json{{"ids", ex.seq.ids}, {"text", ex.seq.text()}, {"label", ex.label}}.dump();
    text += '\n';
  }
  write_text(path, text);
}

nlohmann::json RunReport::to_json() const {
  json seeds_json = json::array();
  for (const auto& s : seeds) {
    seeds_json.push_back({{"seed", s.seed},
                          {"failed", s.failed},
                          {"failure", s.failure},
                          {"initial_dev_loss", s.initial_dev_loss},
                          {"dev_accuracy", s.dev_accuracy},
                          {"test_accuracy", optional_number(s.test_accuracy)},
                          {"loss_curve", s.loss_curve},
                          {"wall_clock_seconds", s.wall_clock_seconds}});
  }
  return json{{"report_version", 1},
              {"variant", variant},
              {"config_fingerprint", fingerprint},
              {"seeds", seeds_json},
              {"mean_dev_accuracy", mean_dev_accuracy},
              {"std_dev_accuracy", std_dev_accuracy},
              {"mean_test_accuracy", optional_number(mean_test_accuracy)},
              {"std_test_accuracy", optional_number(std_test_accuracy)}};
}

RunReport RunReport::from_json(const nlohmann::json& j) {
  try {
    if (j.at("report_version").get<int>() != 1) throw IoError("unsupported report_version");
    RunReport r;
    r.variant = j.at("variant").get<std::string>();
    r.fingerprint = j.at("config_fingerprint").get<std::string>();
    for (const auto& s : j.at("seeds")) {
      SeedResult sr;
      sr.seed = s.at("seed").get<std::uint64_t>();
      sr.failed = s.at("failed").get<bool>();
      sr.failure = s.at("failure").get<std::string>();
      sr.initial_dev_loss = s.at("initial_dev_loss").get<double>();
      sr.dev_accuracy = s.at("dev_accuracy").get<double>();
      sr.test_accuracy = read_optional(s, "test_accuracy");
      sr.loss_curve = s.at("loss_curve").get<std::vector<double>>();
      sr.wall_clock_seconds = s.at("wall_clock_seconds").get<double>();
      r.seeds.push_back(std::move(sr));
    }
    r.mean_dev_accuracy = j.at("mean_dev_accuracy").get<double>();
    r.std_dev_accuracy = j.at("std_dev_accuracy").get<double>();
    r.mean_test_accuracy = read_optional(j, "mean_test_accuracy");
    r.std_test_accuracy = read_optional(j, "std_test_accuracy");
    return r;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed run report: ") + e.what());
  }
}

bool RunReport::same_metrics(const RunReport& o) const {
  if (variant != o.variant || fingerprint != o.fingerprint || seeds.size() != o.seeds.size() ||
      mean_dev_accuracy != o.mean_dev_accuracy || std_dev_accuracy != o.std_dev_accuracy ||
      mean_test_accuracy != o.mean_test_accuracy || std_test_accuracy != o.std_test_accuracy) {
    return false;
  }
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const auto& a = seeds[i];
    const auto& b = o.seeds[i];
    if (a.seed != b.seed || a.failed != b.failed || a.failure != b.failure ||
        a.initial_dev_loss != b.initial_dev_loss || a.dev_accuracy != b.dev_accuracy ||
        a.test_accuracy != b.test_accuracy || a.loss_curve != b.loss_curve) {
      return false;
    }
  }
  return true;
}

nlohmann::json checkpoint_json(SequenceClassifier& model, const Variant& variant,
                               std::uint64_t seed) {
  json tensors = json::array();
  for (const Parameter* p : model.parameters()) {
    tensors.push_back({{"name", p->name},
                       {"rows", p->value.rows()},
                       {"cols", p->value.cols()},
                       {"data", p->value.storage()}});
  }
  return json{{"ckpt_version", 1},
              {"variant", variant.name()},
              {"seed", seed},
              {"model_config", model_config_json(model.config())},
              {"sources", model.mwa().sources},
              {"tensors", tensors}};
}

void write_checkpoint(const std::filesystem::path& path, SequenceClassifier& model,
                      const Variant& variant, std::uint64_t seed) {
  write_text(path, checkpoint_json(model, variant, seed).dump());
}

SequenceClassifier checkpoint_from_json(const nlohmann::json& j, Variant* variant,
                                        std::uint64_t* seed) {
  try {
    if (j.at("ckpt_version").get<int>() != 1) throw IoError("unsupported ckpt_version");
    const ModelConfig config = model_config_from_json(j.at("model_config"));
    auto sources = j.at("sources").get<std::vector<std::string>>();
    SequenceClassifier model = SequenceClassifier::init(config, std::move(sources), 0);
    auto params = model.parameters();
    const auto& tensors = j.at("tensors");
    if (tensors.size() != params.size()) {
      throw IoError("checkpoint holds " + std::to_string(tensors.size()) + " tensors, model has " +
                    std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& t = tensors[i];
      Parameter& p = *params[i];
      const auto name = t.at("name").get<std::string>();
      const auto rows = t.at("rows").get<std::size_t>();
      const auto cols = t.at("cols").get<std::size_t>();
      if (name != p.name || rows != p.value.rows() || cols != p.value.cols()) {
        throw IoError("checkpoint tensor " + name + " (" + std::to_string(rows) + "x" +
                      std::to_string(cols) + ") does not match " + p.name + " (" +
                      p.value.shape_string() + ")");
      }
      p.value = Matrix(rows, cols, t.at("data").get<std::vector<double>>());
      p.zero_grad();
    }
    if (variant) *variant = Variant::parse(j.at("variant").get<std::string>());
    if (seed) *seed = j.at("seed").get<std::uint64_t>();
    return model;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ShapeError& e) {
    throw IoError(std::string("malformed checkpoint: ") + e.what());
  }
}

SequenceClassifier read_checkpoint(const std::filesystem::path& path, Variant* variant,
                                   std::uint64_t* seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("checkpoint " + path.string() + ": " + e.what());
  }
  return checkpoint_from_json(j, variant, seed);
}

}  // namespace mwa::harness
