#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "mwa/errors.hpp"
#include "mwa/segmentation.hpp"
#include "mwa/utf8.hpp"

namespace seg = mwa::seg;

namespace {

seg::CharSequence text(const std::string& s) {
  seg::Vocabulary vocab;
  return seg::sequence_from_text(s, vocab);
}

std::string joined(const seg::CharSequence& seq, const seg::WordPartition& p) {
  std::string out;
  for (const auto& w : seg::words_of(seq, p)) out += (out.empty() ? "" : "|") + w;
  return out;
}

std::filesystem::path scratch_file(const std::string& name, const std::string& contents) {
  const auto path = std::filesystem::temp_directory_path() / ("mwa_unit_" + name);
  std::ofstream(path, std::ios::binary) << contents;
  return path;
}

const std::string kXishan = "北京西山森林公园";

}  // namespace

TEST_SUITE("utf8") {
  TEST_CASE("round trip") {
    const std::string s = "a北京é𝄞";
    CHECK(mwa::utf8::encode(mwa::utf8::decode(s)) == s);
    CHECK(mwa::utf8::decode(s).size() == 5);
  }

  TEST_CASE("malformed input names the byte offset") {
    CHECK_THROWS_AS(mwa::utf8::decode("ab\xC0\x80"), mwa::InputError);
    CHECK_THROWS_AS(mwa::utf8::decode("\xED\xA0\x80"), mwa::InputError);
    CHECK_THROWS_AS(mwa::utf8::decode("\xE5\x8C"), mwa::InputError);
    CHECK_FALSE(mwa::utf8::valid("\xFF"));
    try {
      mwa::utf8::decode("ab\xFF");
    } catch (const mwa::InputError& e) {
      CHECK(std::string(e.what()).find('2') != std::string::npos);
    }
  }
}

TEST_SUITE("max matching") {
  TEST_CASE("three granularities of one sentence") {
    const auto seq = text(kXishan);
    const auto coarse = seg::Dictionary::from_utf8({"北京", "西山", "森林", "公园", "森林公园"});
    const auto medium = seg::Dictionary::from_utf8({"北京", "西山", "森林", "公园"});
    CHECK(joined(seq, seg::fmm_segment(seq, coarse)) == "北京|西山|森林公园");
    CHECK(joined(seq, seg::fmm_segment(seq, medium)) == "北京|西山|森林|公园");
    const auto ext = seg::partition_from_words(seq, {"北京", "西", "山", "森林", "公园"});
    CHECK(ext.lengths() == std::vector<std::size_t>{2, 1, 1, 2, 2});
  }

  TEST_CASE("forward and backward diverge on ABAB") {
    const auto seq = text("ABAB");
    const auto dict = seg::Dictionary::from_utf8({"ABA", "AB"});
    CHECK(joined(seq, seg::fmm_segment(seq, dict)) == "ABA|B");
    CHECK(joined(seq, seg::bmm_segment(seq, dict)) == "AB|AB");
  }

  TEST_CASE("empty dictionary gives singletons") {
    const auto seq = text("xyzzy");
    const seg::Dictionary empty;
    CHECK(seg::fmm_segment(seq, empty) == seg::singleton_partition(5));
    CHECK(seg::bmm_segment(seq, empty) == seg::singleton_partition(5));
  }

  TEST_CASE("whole-text entry gives one block") {
    const auto seq = text(kXishan);
    const auto dict = seg::Dictionary::from_utf8({kXishan});
    CHECK(seg::fmm_segment(seq, dict).lengths() == std::vector<std::size_t>{8});
    CHECK(seg::bmm_segment(seq, dict).lengths() == std::vector<std::size_t>{8});
  }

  TEST_CASE("random dictionaries always yield valid partitions") {
    std::mt19937_64 rng(8);
    const std::u32string alphabet = U"abcd";
    auto word = [&](std::size_t len) {
      std::u32string w;
      for (std::size_t i = 0; i < len; ++i) w += alphabet[fixtures::between(rng, 0, 3)];
      return w;
    };
    for (int trial = 0; trial < 200; ++trial) {
      seg::Dictionary dict;
      const auto entries = fixtures::between(rng, 0, 6);
      for (std::size_t i = 0; i < entries; ++i) dict.insert(word(fixtures::between(rng, 1, 4)));
      const auto chars = word(fixtures::between(rng, 1, 20));
      const auto seq = seg::make_sequence(chars, std::vector<std::size_t>(chars.size(), 0));
      for (const auto& p : {seg::fmm_segment(seq, dict), seg::bmm_segment(seq, dict),
                            seg::random_segment(seq, trial, 2.5)}) {
        REQUIRE_FALSE(seg::validate_partition(p, seq.size()).has_value());
        REQUIRE(p.word_count() <= seq.size());
        REQUIRE(seg::partition_from_words(seq, seg::words_of(seq, p)) == p);
      }
    }
  }
}

TEST_SUITE("random segmenter") {
  TEST_CASE("mean one is all singletons") {
    const auto seq = text("abcdefgh");
    for (std::uint64_t s : {0ULL, 5ULL, 123456789ULL})
      CHECK(seg::random_segment(seq, s, 1.0) == seg::singleton_partition(8));
  }

  TEST_CASE("pure function of sequence and seed") {
    const auto seq = text("abcdefghijklmnop");
    CHECK(seg::random_segment(seq, 3, 2.0) == seg::random_segment(seq, 3, 2.0));
    bool differs = false;
    for (std::uint64_t s = 0; s < 10 && !differs; ++s)
      differs = seg::random_segment(seq, s, 2.0) != seg::random_segment(seq, s + 1, 2.0);
    CHECK(differs);
  }

  TEST_CASE("golden partition for n=8, seed 7, mean 2") {
    const auto seq = text("abcdefgh");
    const auto p = seg::random_segment(seq, 7, 2.0);
    CHECK_FALSE(seg::validate_partition(p, 8).has_value());
    CHECK(p.lengths() == std::vector<std::size_t>{2, 1, 2, 1, 2});
  }

  TEST_CASE("mean below one is rejected") {
    CHECK_THROWS_AS(seg::random_segment(text("ab"), 0, 0.5), mwa::ConfigError);
  }
}

TEST_SUITE("external words") {
  TEST_CASE("singleton words give the identity partition") {
    const auto seq = text("abc");
    CHECK(seg::partition_from_words(seq, {"a", "b", "c"}) == seg::singleton_partition(3));
  }

  TEST_CASE("divergence index") {
    auto index_of = [](const std::string& t, const std::vector<std::string>& words) {
      try {
        seg::partition_from_words(text(t), words);
      } catch (const mwa::AlignmentError& e) {
        return e.index();
      }
      return std::size_t{999};
    };
    CHECK(index_of("AB", {"AB", "C"}) == 2);
    CHECK(index_of("ABC", {"AB"}) == 2);
    CHECK(index_of("ABC", {"A", "CB"}) == 1);
    CHECK(index_of("ABC", {"ABC"}) == 999);
  }

  TEST_CASE("jsonl loading validates every line") {
    const auto good = scratch_file("ext_good.jsonl",
                                   "{\"text\": \"北京西山\", \"words\": [\"北京\", \"西山\"]}\n\n");
    const auto table = seg::load_external_segmentations(good);
    REQUIRE(table.find("北京西山") != nullptr);
    CHECK(table.find("北京") == nullptr);
    const auto bad = scratch_file("ext_bad.jsonl", "{\"text\": \"北京\", \"words\": [\"北\"]}\n");
    CHECK_THROWS_AS(seg::load_external_segmentations(bad), mwa::InputError);
  }
}

TEST_SUITE("partition validation") {
  TEST_CASE("examples") {
    seg::WordPartition ok{{{0, 2}, {2, 3}}, 5};
    CHECK_FALSE(seg::validate_partition(ok, 5).has_value());

    seg::WordPartition gap{{{0, 2}, {3, 2}}, 5};
    const auto g = seg::validate_partition(gap, 5);
    REQUIRE(g.has_value());
    CHECK(g->kind == seg::ViolationKind::kGap);
    CHECK(g->index == 2);

    seg::WordPartition short_cover{{{0, 2}, {2, 2}}, 5};
    const auto c = seg::validate_partition(short_cover, 5);
    REQUIRE(c.has_value());
    CHECK(c->kind == seg::ViolationKind::kCoverage);
    CHECK(c->index == 4);
  }

  TEST_CASE("other violations") {
    CHECK(seg::validate_partition({{}, 0}, 0)->kind == seg::ViolationKind::kEmpty);
    CHECK(seg::validate_partition({{{1, 2}}, 3}, 3)->kind == seg::ViolationKind::kBadStart);
    CHECK(seg::validate_partition({{{0, 2}, {1, 2}}, 3}, 3)->kind == seg::ViolationKind::kOverlap);
    CHECK(seg::validate_partition({{{0, 0}, {0, 2}}, 2}, 2)->kind ==
          seg::ViolationKind::kZeroLength);
    CHECK(seg::validate_partition({{{0, 2}}, 3}, 2)->kind == seg::ViolationKind::kLengthMismatch);
  }
}

TEST_SUITE("dictionary files") {
  TEST_CASE("entries and max length") {
    const auto d = seg::load_dictionary(scratch_file("dict.txt", "北京\n森林公园\n"));
    CHECK(d.size() == 2);
    CHECK(d.max_len() == 4);
  }

  TEST_CASE("duplicates, blanks and CR") {
    const auto d = seg::load_dictionary(scratch_file("dup.txt", "ab\r\n\nab\n  \ncd"));
    CHECK(d.size() == 2);
    CHECK(d.contains(U"ab"));
    CHECK(d.contains(U"cd"));
  }

  TEST_CASE("empty file degrades to singletons") {
    const auto d = seg::load_dictionary(scratch_file("empty.txt", ""));
    CHECK(d.empty());
    CHECK(seg::fmm_segment(text("abc"), d) == seg::singleton_partition(3));
  }

  TEST_CASE("unreadable or invalid files") {
    CHECK_THROWS_AS(seg::load_dictionary("/nonexistent/dict.txt"), mwa::IoError);
    CHECK_THROWS_AS(seg::load_dictionary(scratch_file("bad.txt", "ok\n\xFF\n")), mwa::IoError);
  }
}

TEST_SUITE("source specs") {
  TEST_CASE("grammar") {
    const auto r = seg::SourceSpec::parse("rand:13:2.5");
    CHECK(r.kind == seg::SourceSpec::Kind::kRandom);
    CHECK(r.seed == 13);
    CHECK(r.mean_len == 2.5);
    CHECK(seg::SourceSpec::parse("bmm:some/dict.txt").path == "some/dict.txt");
    CHECK(seg::SourceSpec::parse("ext:x.jsonl").kind == seg::SourceSpec::Kind::kExternal);
    for (const char* bad : {"", "fmm", "fmm:", "zzz:a", "rand:1", "rand:x:2", "rand:1:0.5"})
      CHECK_THROWS_AS(seg::SourceSpec::parse(bad), mwa::ConfigError);
  }

  TEST_CASE("external source without the text") {
    seg::ExternalSegmentations table;
    table.add("ab", {"ab"});
    const auto s = seg::Segmenter::external(table);
    CHECK(s.segment(text("ab")).lengths() == std::vector<std::size_t>{2});
    CHECK_THROWS_AS(s.segment(text("ba")), mwa::InputError);
  }
}
