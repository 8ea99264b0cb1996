#include <cstdio>
#include <fstream>
#include <set>

#include "mwa/errors.hpp"
#include "mwa/harness/experiment.hpp"
#include "mwa/utf8.hpp"

namespace mwa::harness {

namespace {

using nlohmann::json;

const std::set<std::string> kTopLevelKeys = {
    "d", "heads", "vocab_size", "max_length", "classes", "orientation", "pool_mode",
    "share_source_params", "M", "sources", "random_source", "variants", "lr", "beta1", "beta2",
    "adam_eps", "weight_decay", "warmup_ratio", "epoch", "batch_size", "seeds", "train_file",
    "dev_file", "test_file", "synthetic"};

const std::set<std::string> kSyntheticKeys = {
    "alphabet_size", "lexicon", "lexicon_file", "min_len", "max_len", "positive_fraction",
    "near_miss_rate", "train", "dev", "test", "seed"};

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_relative() ? base / path : path;
}

void require_file(const std::filesystem::path& p, const std::string& what) {
  if (!std::filesystem::is_regular_file(p)) {
    throw ConfigError(what + " not found: " + p.string());
  }
}

std::string resolve_source(const std::string& spec, const std::filesystem::path& base) {
  seg::SourceSpec s = seg::SourceSpec::parse(spec);
  if (s.kind != seg::SourceSpec::Kind::kRandom) {
    s.path = resolve(base, s.path.string());
    require_file(s.path, "source file");
  }
  return s.to_string();
}

attn::ScoreOrientation parse_orientation(const std::string& s) {
  if (s == "as_written") return attn::ScoreOrientation::kAsWritten;
  if (s == "conventional") return attn::ScoreOrientation::kConventional;
  throw ConfigError("orientation must be 'as_written' or 'conventional'");
}

attn::PoolMode parse_pool(const std::string& s) {
  if (s == "mixed") return attn::PoolMode::kMixed;
  if (s == "mean") return attn::PoolMode::kMean;
  if (s == "max") return attn::PoolMode::kMax;
  throw ConfigError("pool_mode must be 'mixed', 'mean' or 'max'");
}

}  // namespace

nlohmann::json model_config_json(const ModelConfig& c) {
  return json{{"d", c.layer.d},
              {"heads", c.layer.heads},
              {"vocab_size", c.vocab_size},
              {"max_length", c.max_len},
              {"classes", c.classes},
              {"orientation", c.layer.orientation == attn::ScoreOrientation::kAsWritten
                                  ? "as_written"
                                  : "conventional"},
              {"pool_mode", c.layer.pool == attn::PoolMode::kMixed  ? "mixed"
                            : c.layer.pool == attn::PoolMode::kMean ? "mean"
                                                                    : "max"},
              {"share_source_params", c.share_attention}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.layer.d = get_or<std::size_t>(j, "d", c.layer.d);
  c.layer.heads = get_or<std::size_t>(j, "heads", c.layer.heads);
  c.layer.orientation = parse_orientation(get_or<std::string>(j, "orientation", "as_written"));
  c.layer.pool = parse_pool(get_or<std::string>(j, "pool_mode", "mixed"));
  c.vocab_size = get_or<std::size_t>(j, "vocab_size", c.vocab_size);
  c.max_len = get_or<std::size_t>(j, "max_length", c.max_len);
  c.classes = get_or<std::size_t>(j, "classes", c.classes);
  c.share_attention = get_or<bool>(j, "share_source_params", c.share_attention);
  return c;
}

void ExperimentConfig::validate() const {
  model.validate();
  if (train.seeds.empty()) throw ConfigError("seeds must be nonempty");
  if (train.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (variants.empty()) throw ConfigError("no variants to run");
  for (const Variant& v : variants) {
    if (v.kind == Variant::Kind::kWaSingle && v.source >= sources.size()) {
      throw ConfigError("variant " + v.name() + " refers to a missing source");
    }
    if (v.kind == Variant::Kind::kMwaMulti && sources.empty()) {
      throw ConfigError("mwa_multi needs at least one source");
    }
  }
}

ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!kTopLevelKeys.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  ExperimentConfig c;
  c.raw = j;
  c.model = model_config_from_json(j);

  c.train.lr = get_or<double>(j, "lr", c.train.lr);
  c.train.beta1 = get_or<double>(j, "beta1", c.train.beta1);
  c.train.beta2 = get_or<double>(j, "beta2", c.train.beta2);
  c.train.adam_eps = get_or<double>(j, "adam_eps", c.train.adam_eps);
  c.train.weight_decay = get_or<double>(j, "weight_decay", c.train.weight_decay);
  c.train.warmup_ratio = get_or<double>(j, "warmup_ratio", c.train.warmup_ratio);
  c.train.epochs = get_or<std::size_t>(j, "epoch", c.train.epochs);
  c.train.batch_size = get_or<std::size_t>(j, "batch_size", c.train.batch_size);
  c.train.seeds = get_or<std::vector<std::uint64_t>>(j, "seeds", c.train.seeds);

  for (const auto& s : get_or<std::vector<std::string>>(j, "sources", {})) {
    c.sources.push_back(resolve_source(s, base_dir));
  }
  if (j.contains("M") && get_or<std::size_t>(j, "M", 0) != c.sources.size()) {
    throw ConfigError("M does not equal the number of sources");
  }
  c.random_source = resolve_source(get_or<std::string>(j, "random_source", c.random_source), base_dir);

  if (j.contains("variants")) {
    for (const auto& v : get_or<std::vector<std::string>>(j, "variants", {})) {
      c.variants.push_back(Variant::parse(v));
    }
  } else {
    c.variants.push_back({Variant::Kind::kBaseline, 0});
    for (std::size_t i = 0; i < c.sources.size(); ++i) c.variants.push_back({Variant::Kind::kWaSingle, i});
    c.variants.push_back({Variant::Kind::kWaRandom, 0});
    if (!c.sources.empty()) c.variants.push_back({Variant::Kind::kMwaMulti, 0});
  }

  if (j.contains("synthetic")) {
    const json& s = j.at("synthetic");
    if (!s.is_object()) throw ConfigError("synthetic must be an object");
    for (const auto& [key, _] : s.items()) {
      if (!kSyntheticKeys.contains(key)) throw ConfigError("unknown synthetic key '" + key + "'");
    }
    SyntheticTaskSpec spec;
    spec.alphabet_size = get_or<std::size_t>(s, "alphabet_size", spec.alphabet_size);
    spec.min_len = get_or<std::size_t>(s, "min_len", spec.min_len);
    spec.max_len = get_or<std::size_t>(s, "max_len", spec.max_len);
    spec.positive_fraction = get_or<double>(s, "positive_fraction", spec.positive_fraction);
    spec.near_miss_rate = get_or<double>(s, "near_miss_rate", spec.near_miss_rate);
    spec.train = get_or<std::size_t>(s, "train", spec.train);
    spec.dev = get_or<std::size_t>(s, "dev", spec.dev);
    spec.test = get_or<std::size_t>(s, "test", spec.test);
    std::vector<std::u32string> words;
    if (s.contains("lexicon_file")) {
      const auto path = resolve(base_dir, get_or<std::string>(s, "lexicon_file", ""));
      require_file(path, "lexicon file");
      std::ifstream in(path, std::ios::binary);
      std::string line;
      while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) words.push_back(utf8::decode(line));
      }
    }
    for (const auto& w : get_or<std::vector<std::string>>(s, "lexicon", {})) {
      words.push_back(utf8::decode(w));
    }
    spec.lexicon = lexicon_from_words(words, spec.alphabet_size);
    c.data.synthetic = spec;
    c.data.synthetic_seed = get_or<std::uint64_t>(s, "seed", 1);
  } else {
    if (!j.contains("train_file") || !j.contains("dev_file")) {
      throw ConfigError("config needs either 'synthetic' or 'train_file' and 'dev_file'");
    }
    c.data.train_file = resolve(base_dir, get_or<std::string>(j, "train_file", ""));
    c.data.dev_file = resolve(base_dir, get_or<std::string>(j, "dev_file", ""));
    require_file(c.data.train_file, "train_file");
    require_file(c.data.dev_file, "dev_file");
    if (j.contains("test_file")) {
      c.data.test_file = resolve(base_dir, get_or<std::string>(j, "test_file", ""));
      require_file(c.data.test_file, "test_file");
    }
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path());
}

std::string config_fingerprint(const ExperimentConfig& config) {
  const std::string text = config.raw.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace mwa::harness
