#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mwa/segmentation.hpp"

namespace mwa::harness {

using Word = std::vector<std::size_t>;

/// Binary task: label 1 iff some lexicon word occurs as a contiguous run.
struct SyntheticTaskSpec {
  std::size_t alphabet_size = 12;
  std::vector<Word> lexicon;
  std::size_t min_len = 10;
  std::size_t max_len = 20;
  /// Fraction of positives per split; counts are rounded to the nearest
  /// integer, so splits are balanced within one example.
  double positive_fraction = 0.5;
  /// Probability that a negative carries a lexicon word with one symbol
  /// replaced, so partial matches are not sufficient evidence.
  double near_miss_rate = 0.5;
  std::size_t train = 2000;
  std::size_t dev = 500;
  std::size_t test = 500;
};

struct Example {
  seg::CharSequence seq;
  std::size_t label = 0;
};

struct Dataset {
  std::vector<Example> train;
  std::vector<Example> dev;
  std::vector<Example> test;
};

/// Printable symbol for an alphabet id: 'a'.. for ids < 26, CJK otherwise.
char32_t symbol_for(std::size_t id);
std::size_t id_for(char32_t symbol);
seg::CharSequence sequence_from_ids(const Word& ids);

/// Exhaustive scan over every start position and word; the label oracle.
bool contains_lexicon_word(const Word& ids, const std::vector<Word>& lexicon);

/// Distinct random words of the given length over the alphabet.
std::vector<Word> random_lexicon(std::size_t alphabet_size, std::size_t count,
                                 std::size_t word_len, std::uint64_t seed);
seg::Dictionary lexicon_dictionary(const std::vector<Word>& lexicon);
/// Reads lexicon words back from a dictionary file's symbols.
std::vector<Word> lexicon_from_words(const std::vector<std::u32string>& words,
                                     std::size_t alphabet_size);

/// Deterministic for a fixed seed; sequences are unique across all splits.
/// Throws ConfigError when the requested balance cannot be produced.
Dataset synth_dataset(const SyntheticTaskSpec& spec, std::uint64_t seed);

}  // namespace mwa::harness
