#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

namespace mwa::seg {

/// Characters of one input sequence with their vocabulary ids.
struct CharSequence {
  std::u32string chars;
  std::vector<std::size_t> ids;

  std::size_t size() const noexcept { return chars.size(); }
  std::string text() const;
};

/// Builds a sequence and checks that chars and ids are parallel and nonempty.
CharSequence make_sequence(std::u32string chars, std::vector<std::size_t> ids);

/// Assigns ids to characters in first-seen order, starting from `first_id`.
class Vocabulary {
 public:
  explicit Vocabulary(std::size_t first_id = 0) : next_(first_id) {}
  std::size_t id_of(char32_t c);
  std::size_t size() const noexcept { return ids_.size(); }

 private:
  std::unordered_map<char32_t, std::size_t> ids_;
  std::size_t next_;
};

CharSequence sequence_from_text(std::string_view utf8_text, Vocabulary& vocab);

struct Block {
  std::size_t start = 0;
  std::size_t len = 0;
  friend bool operator==(const Block&, const Block&) = default;
};

/// Contiguous, non-overlapping blocks covering [0, n). Segmenters always
/// return valid partitions; hand-built ones can be checked with
/// validate_partition.
struct WordPartition {
  std::vector<Block> blocks;
  std::size_t n = 0;

  std::size_t word_count() const noexcept { return blocks.size(); }
  std::vector<std::size_t> lengths() const;
  /// Block length of the word that contains each character.
  std::vector<std::size_t> block_length_per_position() const;
  friend bool operator==(const WordPartition&, const WordPartition&) = default;
};

WordPartition partition_from_lengths(const std::vector<std::size_t>& lengths);
WordPartition singleton_partition(std::size_t n);

enum class ViolationKind { kEmpty, kBadStart, kZeroLength, kGap, kOverlap, kCoverage, kLengthMismatch };

struct Violation {
  ViolationKind kind;
  /// Block index for structural violations, covered length for coverage.
  std::size_t index;
  std::string message;
};

/// Returns the first violated invariant, or nullopt when `p` is a valid
/// partition of n characters.
std::optional<Violation> validate_partition(const WordPartition& p, std::size_t n);

class Dictionary {
 public:
  Dictionary() = default;
  explicit Dictionary(const std::vector<std::u32string>& words);
  static Dictionary from_utf8(const std::vector<std::string>& words);

  void insert(std::u32string word);
  bool contains(std::u32string_view word) const;
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t max_len() const noexcept { return max_len_; }

 private:
  std::unordered_set<std::u32string> entries_;
  std::size_t max_len_ = 0;
};

/// One word per line, UTF-8; whitespace-only lines and trailing CR are
/// ignored.
Dictionary load_dictionary(const std::filesystem::path& path);

/// Forward maximum matching: longest entry starting at each position,
/// singleton fallback.
WordPartition fmm_segment(const CharSequence& seq, const Dictionary& dict);
/// Backward maximum matching: longest entry ending at each position,
/// scanning right to left.
WordPartition bmm_segment(const CharSequence& seq, const Dictionary& dict);
/// Random segmenter. Block lengths are 1 + Geometric(1 / mean_word_len),
/// truncated to the remaining characters. The generator is seeded from both
/// `seed` and the characters, so the result is a pure function of
/// (seq, seed, mean_word_len) that still varies across sequences.
WordPartition random_segment(const CharSequence& seq, std::uint64_t seed, double mean_word_len);
/// Converts an external segmenter's word list. Throws AlignmentError at the
/// first character index where the words stop matching the sequence.
WordPartition partition_from_words(const CharSequence& seq, const std::vector<std::string>& words);
std::vector<std::string> words_of(const CharSequence& seq, const WordPartition& p);

/// Externally produced segmentations keyed by text, from JSON Lines
/// {"text": ..., "words": [...]}. Every line is validated on load.
class ExternalSegmentations {
 public:
  void add(const std::string& text, std::vector<std::string> words);
  const std::vector<std::string>* find(const std::string& text) const;
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::unordered_map<std::string, std::vector<std::string>> entries_;
};

ExternalSegmentations load_external_segmentations(const std::filesystem::path& path);

/// Parsed form of `fmm:<dict>` | `bmm:<dict>` | `ext:<jsonl>` | `rand:<seed>:<mean>`.
struct SourceSpec {
  enum class Kind { kFmm, kBmm, kExternal, kRandom };
  Kind kind = Kind::kFmm;
  std::filesystem::path path;
  std::uint64_t seed = 0;
  double mean_len = 1.0;

  static SourceSpec parse(std::string_view spec);
  std::string to_string() const;
};

/// A resolved source: the spec plus whatever it loaded from disk.
class Segmenter {
 public:
  static Segmenter from_spec(const SourceSpec& spec);
  static Segmenter fmm(Dictionary dict, std::string label = "fmm");
  static Segmenter bmm(Dictionary dict, std::string label = "bmm");
  static Segmenter random(std::uint64_t seed, double mean_len);
  static Segmenter external(ExternalSegmentations table, std::string label = "ext");

  /// Throws InputError for external sources that do not know the text.
  WordPartition segment(const CharSequence& seq) const;
  const std::string& label() const noexcept { return label_; }
  SourceSpec::Kind kind() const noexcept { return spec_.kind; }

 private:
  SourceSpec spec_;
  std::string label_;
  Dictionary dict_;
  ExternalSegmentations external_;
};

}  // namespace mwa::seg
