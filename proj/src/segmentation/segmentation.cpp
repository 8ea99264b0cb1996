#include "mwa/segmentation.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"

#include "mwa/errors.hpp"
#include "mwa/utf8.hpp"

namespace mwa::seg {

std::string CharSequence::text() const { return utf8::encode(chars); }

CharSequence make_sequence(std::u32string chars, std::vector<std::size_t> ids) {
  if (chars.empty()) throw InputError("character sequence must be nonempty");
  if (chars.size() != ids.size()) {
    throw InputError("character sequence has " + std::to_string(chars.size()) + " chars but " +
                     std::to_string(ids.size()) + " ids");
  }
  return CharSequence{std::move(chars), std::move(ids)};
}

std::size_t Vocabulary::id_of(char32_t c) {
  auto [it, inserted] = ids_.try_emplace(c, next_);
  if (inserted) ++next_;
  return it->second;
}

CharSequence sequence_from_text(std::string_view utf8_text, Vocabulary& vocab) {
  std::u32string chars = utf8::decode(utf8_text);
  std::vector<std::size_t> ids;
  ids.reserve(chars.size());
  for (char32_t c : chars) ids.push_back(vocab.id_of(c));
  return make_sequence(std::move(chars), std::move(ids));
}

std::vector<std::size_t> WordPartition::lengths() const {
  std::vector<std::size_t> out;
  out.reserve(blocks.size());
  for (const Block& b : blocks) out.push_back(b.len);
  return out;
}

std::vector<std::size_t> WordPartition::block_length_per_position() const {
  std::vector<std::size_t> out(n, 0);
  for (const Block& b : blocks)
    for (std::size_t i = b.start; i < b.start + b.len && i < n; ++i) out[i] = b.len;
  return out;
}

WordPartition partition_from_lengths(const std::vector<std::size_t>& lengths) {
  WordPartition p;
  for (std::size_t len : lengths) {
    p.blocks.push_back({p.n, len});
    p.n += len;
  }
  return p;
}

WordPartition singleton_partition(std::size_t n) {
  return partition_from_lengths(std::vector<std::size_t>(n, 1));
}

std::optional<Violation> validate_partition(const WordPartition& p, std::size_t n) {
  if (p.blocks.empty()) return Violation{ViolationKind::kEmpty, 0, "partition has no blocks"};
  if (p.blocks.front().start != 0) {
    return Violation{ViolationKind::kBadStart, 0,
                     "first block starts at " + std::to_string(p.blocks.front().start)};
  }
  std::size_t expected = 0;
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    const Block& b = p.blocks[i];
    if (b.start > expected) {
      return Violation{ViolationKind::kGap, expected,
                       "gap at index " + std::to_string(expected) + " (block " +
                           std::to_string(i) + " starts at " + std::to_string(b.start) + ")"};
    }
    if (b.start < expected) {
      return Violation{ViolationKind::kOverlap, b.start,
                       "overlap at index " + std::to_string(b.start) + " (block " +
                           std::to_string(i) + ")"};
    }
    if (b.len == 0) {
      return Violation{ViolationKind::kZeroLength, b.start,
                       "block " + std::to_string(i) + " has zero length"};
    }
    expected += b.len;
  }
  if (expected != n) {
    return Violation{ViolationKind::kCoverage, expected,
                     "coverage: blocks cover " + std::to_string(expected) + " of " +
                         std::to_string(n) + " characters"};
  }
  if (p.n != n) {
    return Violation{ViolationKind::kLengthMismatch, p.n,
                     "partition records n=" + std::to_string(p.n) + " but sequence has " +
                         std::to_string(n)};
  }
  return std::nullopt;
}

Dictionary::Dictionary(const std::vector<std::u32string>& words) {
  for (const auto& w : words) insert(w);
}

Dictionary Dictionary::from_utf8(const std::vector<std::string>& words) {
  Dictionary d;
  for (const auto& w : words) d.insert(utf8::decode(w));
  return d;
}

void Dictionary::insert(std::u32string word) {
  if (word.empty()) return;
  max_len_ = std::max(max_len_, word.size());
  entries_.insert(std::move(word));
}

bool Dictionary::contains(std::u32string_view word) const {
  return entries_.contains(std::u32string(word));
}

Dictionary load_dictionary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read dictionary " + path.string());
  Dictionary dict;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      dict.insert(utf8::decode(line));
    } catch (const InputError& e) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (in.bad()) throw IoError("error while reading " + path.string());
  return dict;
}

WordPartition fmm_segment(const CharSequence& seq, const Dictionary& dict) {
  const std::u32string_view text = seq.chars;
  const std::size_t n = text.size();
  std::vector<std::size_t> lengths;
  std::size_t i = 0;
  while (i < n) {
    std::size_t take = 1;
    for (std::size_t len = std::min(dict.max_len(), n - i); len >= 2; --len) {
      if (dict.contains(text.substr(i, len))) {
        take = len;
        break;
      }
    }
    lengths.push_back(take);
    i += take;
  }
  return partition_from_lengths(lengths);
}

WordPartition bmm_segment(const CharSequence& seq, const Dictionary& dict) {
  const std::u32string_view text = seq.chars;
  std::vector<std::size_t> lengths;
  std::size_t end = text.size();
  while (end > 0) {
    std::size_t take = 1;
    for (std::size_t len = std::min(dict.max_len(), end); len >= 2; --len) {
      if (dict.contains(text.substr(end - len, len))) {
        take = len;
        break;
      }
    }
    lengths.push_back(take);
    end -= take;
  }
  std::reverse(lengths.begin(), lengths.end());
  return partition_from_lengths(lengths);
}

WordPartition random_segment(const CharSequence& seq, std::uint64_t seed, double mean_word_len) {
  if (!(mean_word_len >= 1.0)) throw ConfigError("random_segment: mean_word_len must be >= 1");
  const std::size_t n = seq.size();
  if (mean_word_len == 1.0) return singleton_partition(n);

  // FNV-1a over the code points ties the draw to the sequence content.
  std::uint64_t h = 1469598103934665603ULL;
  for (char32_t c : seq.chars) {
    h ^= static_cast<std::uint64_t>(c);
    h *= 1099511628211ULL;
  }
  std::seed_seq seeds{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  std::mt19937_64 rng(seeds);
  std::geometric_distribution<std::size_t> extra(1.0 / mean_word_len);

  std::vector<std::size_t> lengths;
  std::size_t covered = 0;
  while (covered < n) {
    const std::size_t len = std::min<std::size_t>(1 + extra(rng), n - covered);
    lengths.push_back(len);
    covered += len;
  }
  return partition_from_lengths(lengths);
}

WordPartition partition_from_words(const CharSequence& seq, const std::vector<std::string>& words) {
  if (words.empty()) throw AlignmentError("external segmentation has no words", 0);
  std::vector<std::size_t> lengths;
  std::size_t pos = 0;
  for (const std::string& word : words) {
    const std::u32string w = utf8::decode(word);
    if (w.empty()) throw AlignmentError("empty word at index " + std::to_string(pos), pos);
    for (char32_t c : w) {
      if (pos >= seq.size() || seq.chars[pos] != c) {
        throw AlignmentError("words diverge from text at character index " + std::to_string(pos),
                             pos);
      }
      ++pos;
    }
    lengths.push_back(w.size());
  }
  if (pos != seq.size()) {
    throw AlignmentError("words end at character index " + std::to_string(pos) + " of " +
                             std::to_string(seq.size()),
                         pos);
  }
  return partition_from_lengths(lengths);
}

std::vector<std::string> words_of(const CharSequence& seq, const WordPartition& p) {
  std::vector<std::string> out;
  out.reserve(p.blocks.size());
  for (const Block& b : p.blocks) {
    out.push_back(utf8::encode(std::u32string_view(seq.chars).substr(b.start, b.len)));
  }
  return out;
}

void ExternalSegmentations::add(const std::string& text, std::vector<std::string> words) {
  entries_[text] = std::move(words);
}

const std::vector<std::string>* ExternalSegmentations::find(const std::string& text) const {
  auto it = entries_.find(text);
  return it == entries_.end() ? nullptr : &it->second;
}

ExternalSegmentations load_external_segmentations(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read segmentation file " + path.string());
  ExternalSegmentations table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw IoError(where + e.what());
    }
    if (!j.is_object() || !j.contains("text") || !j["text"].is_string() || !j.contains("words") ||
        !j["words"].is_array()) {
      throw IoError(where + "expected {\"text\": string, \"words\": [string, ...]}");
    }
    const auto text = j["text"].get<std::string>();
    std::vector<std::string> words;
    for (const auto& w : j["words"]) {
      if (!w.is_string()) throw IoError(where + "words must be strings");
      words.push_back(w.get<std::string>());
    }
    std::u32string chars;
    try {
      chars = utf8::decode(text);
    } catch (const InputError& e) {
      throw IoError(where + e.what());
    }
    if (chars.empty()) throw IoError(where + "empty text");
    CharSequence seq{chars, std::vector<std::size_t>(chars.size(), 0)};
    partition_from_words(seq, words);
    table.add(text, std::move(words));
  }
  return table;
}

SourceSpec SourceSpec::parse(std::string_view spec) {
  const auto colon = spec.find(':');
  if (colon == std::string_view::npos) {
    throw ConfigError("source spec '" + std::string(spec) + "' lacks a kind prefix");
  }
  const std::string_view kind = spec.substr(0, colon);
  const std::string_view rest = spec.substr(colon + 1);
  SourceSpec out;
  if (kind == "fmm" || kind == "bmm" || kind == "ext") {
    if (rest.empty()) throw ConfigError("source spec '" + std::string(spec) + "' lacks a path");
    out.kind = kind == "fmm" ? Kind::kFmm : kind == "bmm" ? Kind::kBmm : Kind::kExternal;
    out.path = std::string(rest);
    return out;
  }
  if (kind == "rand") {
    const auto sep = rest.find(':');
    if (sep == std::string_view::npos) {
      throw ConfigError("random source spec must be rand:<seed>:<mean-len>");
    }
    const std::string_view seed_s = rest.substr(0, sep);
    const std::string mean_s(rest.substr(sep + 1));
    auto [ptr, ec] = std::from_chars(seed_s.data(), seed_s.data() + seed_s.size(), out.seed);
    if (ec != std::errc() || ptr != seed_s.data() + seed_s.size()) {
      throw ConfigError("invalid seed in source spec '" + std::string(spec) + "'");
    }
    std::size_t used = 0;
    try {
      out.mean_len = std::stod(mean_s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != mean_s.size() || !(out.mean_len >= 1.0)) {
      throw ConfigError("invalid mean length in source spec '" + std::string(spec) + "'");
    }
    out.kind = Kind::kRandom;
    return out;
  }
  throw ConfigError("unknown source kind '" + std::string(kind) + "'");
}

std::string SourceSpec::to_string() const {
  switch (kind) {
    case Kind::kFmm:
      return "fmm:" + path.string();
    case Kind::kBmm:
      return "bmm:" + path.string();
    case Kind::kExternal:
      return "ext:" + path.string();
    case Kind::kRandom: {
      std::ostringstream os;
      os << "rand:" << seed << ":" << mean_len;
      return os.str();
    }
  }
  return {};
}

Segmenter Segmenter::from_spec(const SourceSpec& spec) {
  Segmenter s;
  s.spec_ = spec;
  s.label_ = spec.to_string();
  switch (spec.kind) {
    case SourceSpec::Kind::kFmm:
    case SourceSpec::Kind::kBmm:
      s.dict_ = load_dictionary(spec.path);
      break;
    case SourceSpec::Kind::kExternal:
      s.external_ = load_external_segmentations(spec.path);
      break;
    case SourceSpec::Kind::kRandom:
      if (!(spec.mean_len >= 1.0)) throw ConfigError("random source mean length must be >= 1");
      break;
  }
  return s;
}

Segmenter Segmenter::fmm(Dictionary dict, std::string label) {
  Segmenter s;
  s.spec_.kind = SourceSpec::Kind::kFmm;
  s.label_ = std::move(label);
  s.dict_ = std::move(dict);
  return s;
}

Segmenter Segmenter::bmm(Dictionary dict, std::string label) {
  Segmenter s;
  s.spec_.kind = SourceSpec::Kind::kBmm;
  s.label_ = std::move(label);
  s.dict_ = std::move(dict);
  return s;
}

Segmenter Segmenter::random(std::uint64_t seed, double mean_len) {
  SourceSpec spec;
  spec.kind = SourceSpec::Kind::kRandom;
  spec.seed = seed;
  spec.mean_len = mean_len;
  return from_spec(spec);
}

Segmenter Segmenter::external(ExternalSegmentations table, std::string label) {
  Segmenter s;
  s.spec_.kind = SourceSpec::Kind::kExternal;
  s.label_ = std::move(label);
  s.external_ = std::move(table);
  return s;
}

WordPartition Segmenter::segment(const CharSequence& seq) const {
  switch (spec_.kind) {
    case SourceSpec::Kind::kFmm:
      return fmm_segment(seq, dict_);
    case SourceSpec::Kind::kBmm:
      return bmm_segment(seq, dict_);
    case SourceSpec::Kind::kRandom:
      return random_segment(seq, spec_.seed, spec_.mean_len);
    case SourceSpec::Kind::kExternal: {
      const std::string text = seq.text();
      const auto* words = external_.find(text);
      if (words == nullptr) {
        throw InputError("external source " + label_ + " has no segmentation for '" + text + "'");
      }
      return partition_from_words(seq, *words);
    }
  }
  throw InputError("unknown segmenter kind");
}

}  // namespace mwa::seg
