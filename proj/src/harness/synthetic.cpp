#include "mwa/harness/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "mwa/errors.hpp"

namespace mwa::harness {

namespace {

constexpr std::size_t kMaxAttempts = 10000;

}  // namespace

char32_t symbol_for(std::size_t id) {
  return id < 26 ? static_cast<char32_t>(U'a' + id) : static_cast<char32_t>(0x4E00 + id);
}

std::size_t id_for(char32_t symbol) {
  if (symbol >= U'a' && symbol <= U'z') return symbol - U'a';
  if (symbol >= 0x4E00 + 26) return symbol - 0x4E00;
  throw InputError("symbol outside the synthetic alphabet");
}

seg::CharSequence sequence_from_ids(const Word& ids) {
  std::u32string chars;
  for (std::size_t id : ids) chars.push_back(symbol_for(id));
  return seg::make_sequence(std::move(chars), ids);
}

bool contains_lexicon_word(const Word& ids, const std::vector<Word>& lexicon) {
  for (std::size_t start = 0; start < ids.size(); ++start) {
    for (const Word& w : lexicon) {
      if (w.empty() || start + w.size() > ids.size()) continue;
      bool match = true;
      for (std::size_t k = 0; k < w.size() && match; ++k) match = ids[start + k] == w[k];
      if (match) return true;
    }
  }
  return false;
}

std::vector<Word> random_lexicon(std::size_t alphabet_size, std::size_t count,
                                 std::size_t word_len, std::uint64_t seed) {
  if (alphabet_size == 0 || word_len == 0) throw ConfigError("random_lexicon: empty alphabet or word");
  const double possible = std::pow(static_cast<double>(alphabet_size), static_cast<double>(word_len));
  if (static_cast<double>(count) > possible) throw ConfigError("random_lexicon: not enough distinct words");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> sym(0, alphabet_size - 1);
  std::set<Word> seen;
  std::vector<Word> out;
  while (out.size() < count) {
    Word w(word_len);
    for (auto& s : w) s = sym(rng);
    if (seen.insert(w).second) out.push_back(std::move(w));
  }
  return out;
}

seg::Dictionary lexicon_dictionary(const std::vector<Word>& lexicon) {
  seg::Dictionary dict;
  for (const Word& w : lexicon) {
    std::u32string s;
    for (std::size_t id : w) s.push_back(symbol_for(id));
    dict.insert(std::move(s));
  }
  return dict;
}

std::vector<Word> lexicon_from_words(const std::vector<std::u32string>& words,
                                     std::size_t alphabet_size) {
  std::vector<Word> out;
  for (const auto& w : words) {
    Word ids;
    for (char32_t c : w) {
      const std::size_t id = id_for(c);
      if (id >= alphabet_size) throw ConfigError("lexicon symbol outside the alphabet");
      ids.push_back(id);
    }
    if (!ids.empty()) out.push_back(std::move(ids));
  }
  return out;
}

Dataset synth_dataset(const SyntheticTaskSpec& spec, std::uint64_t seed) {
  if (spec.alphabet_size == 0) throw ConfigError("synthetic task needs a nonempty alphabet");
  if (spec.min_len == 0 || spec.min_len > spec.max_len) throw ConfigError("invalid length range");
  if (!(spec.positive_fraction >= 0.0 && spec.positive_fraction <= 1.0)) {
    throw ConfigError("positive_fraction must lie in [0, 1]");
  }
  for (const Word& w : spec.lexicon) {
    if (w.empty() || w.size() > spec.min_len) {
      throw ConfigError("lexicon words must be nonempty and fit the shortest sequence");
    }
    for (std::size_t id : w)
      if (id >= spec.alphabet_size) throw ConfigError("lexicon symbol outside the alphabet");
  }
  if (spec.lexicon.empty() && spec.positive_fraction > 0.0) {
    throw ConfigError("positive labels requested but the lexicon is empty");
  }

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> length(spec.min_len, spec.max_len);
  std::uniform_int_distribution<std::size_t> sym(0, spec.alphabet_size - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::set<Word> seen;

  auto random_ids = [&] {
    Word ids(length(rng));
    for (auto& s : ids) s = sym(rng);
    return ids;
  };
  auto plant = [&](Word& ids, const Word& w) {
    std::uniform_int_distribution<std::size_t> at(0, ids.size() - w.size());
    std::copy(w.begin(), w.end(), ids.begin() + static_cast<std::ptrdiff_t>(at(rng)));
  };
  auto pick_word = [&]() -> const Word& {
    std::uniform_int_distribution<std::size_t> pick(0, spec.lexicon.size() - 1);
    return spec.lexicon[pick(rng)];
  };

  auto draw = [&](std::size_t target) {
    for (std::size_t attempt = 0; attempt < kMaxAttempts; ++attempt) {
      Word ids = random_ids();
      if (target == 1) {
        plant(ids, pick_word());
      } else if (!spec.lexicon.empty() && spec.alphabet_size > 1 && unit(rng) < spec.near_miss_rate) {
        Word near = pick_word();
        std::uniform_int_distribution<std::size_t> pos(0, near.size() - 1);
        std::uniform_int_distribution<std::size_t> shift(1, spec.alphabet_size - 1);
        const std::size_t k = pos(rng);
        near[k] = (near[k] + shift(rng)) % spec.alphabet_size;
        plant(ids, near);
      }
      const std::size_t label = contains_lexicon_word(ids, spec.lexicon) ? 1 : 0;
      if (label != target || seen.contains(ids)) continue;
      seen.insert(ids);
      return Example{sequence_from_ids(ids), label};
    }
    throw ConfigError("synthetic task cannot produce label " + std::to_string(target) +
                      " under the requested balance");
  };

  auto make_split = [&](std::size_t size) {
    const auto positives =
        static_cast<std::size_t>(std::llround(spec.positive_fraction * static_cast<double>(size)));
    std::vector<std::size_t> targets(size, 0);
    std::fill(targets.begin(), targets.begin() + static_cast<std::ptrdiff_t>(positives), 1);
    std::shuffle(targets.begin(), targets.end(), rng);
    std::vector<Example> out;
    out.reserve(size);
    for (std::size_t t : targets) out.push_back(draw(t));
    return out;
  };

  Dataset ds;
  ds.train = make_split(spec.train);
  ds.dev = make_split(spec.dev);
  ds.test = make_split(spec.test);
  return ds;
}

}  // namespace mwa::harness
