#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "mwa/errors.hpp"
#include "mwa/gradcheck.hpp"
#include "mwa/harness/experiment.hpp"

using mwa::Matrix;
namespace harness = mwa::harness;
namespace seg = mwa::seg;
using nlohmann::json;

namespace {

std::filesystem::path scratch_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "mwa_unit_harness";
  std::filesystem::create_directories(dir);
  return dir;
}

// Small task over a 6-symbol alphabet with two fmm/bmm sources.
json small_config(std::size_t train = 60, std::size_t epochs = 1) {
  const auto dict = scratch_dir() / "dict.txt";
  std::ofstream(dict) << "abc\nde\nab\ncd\n";
  return json{{"d", 8},
              {"heads", 2},
              {"vocab_size", 6},
              {"max_length", 12},
              {"sources", {"fmm:" + dict.string(), "bmm:" + dict.string()}},
              {"variants", {"baseline", "mwa_multi"}},
              {"batch_size", 8},
              {"epoch", epochs},
              {"lr", 0.01},
              {"seeds", {1, 2}},
              {"synthetic",
               {{"alphabet_size", 6},
                {"lexicon", {"abc", "fed"}},
                {"min_len", 5},
                {"max_len", 10},
                {"train", train},
                {"dev", 20},
                {"test", 20},
                {"seed", 3}}}};
}

harness::Experiment small_experiment(const json& j) {
  return harness::prepare_experiment(harness::parse_config(j, scratch_dir()));
}

harness::SyntheticTaskSpec reference_task() {
  harness::SyntheticTaskSpec spec;
  spec.lexicon = harness::random_lexicon(12, 5, 3, 1);
  spec.dev = 0;
  spec.test = 0;
  return spec;
}

}  // namespace

TEST_SUITE("encoder") {
  TEST_CASE("zero embeddings give the positional rows") {
    std::mt19937_64 rng(1);
    auto enc = harness::ToyEncoder::init(5, 8, 6, rng);
    enc.embedding.value.fill(0.0);
    const auto seq = seg::make_sequence(U"abcab", {0, 1, 2, 0, 1});
    const Matrix H = enc.encode(seq);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 6; ++j) CHECK(H(i, j) == enc.positional(i, j));
  }

  TEST_CASE("single character") {
    std::mt19937_64 rng(2);
    const auto enc = harness::ToyEncoder::init(5, 8, 6, rng);
    const Matrix H = enc.encode(seg::make_sequence(U"a", {0}));
    for (std::size_t j = 0; j < 6; ++j)
      CHECK(H(0, j) == enc.embedding.value(0, j) + enc.positional(0, j));
  }

  TEST_CASE("positional table") {
    const Matrix P = harness::sinusoidal_positions(4, 4);
    CHECK(P(0, 0) == 0.0);
    CHECK(P(0, 1) == 1.0);
    CHECK(P(1, 0) == std::sin(1.0));
    CHECK(P(1, 3) == std::cos(1.0 / 100.0));
  }

  TEST_CASE("golden checksum") {
    std::mt19937_64 rng(2024);
    const auto enc = harness::ToyEncoder::init(12, 24, 32, rng);
    const Matrix H = enc.encode(harness::sequence_from_ids({3, 1, 4, 1, 5, 9, 2, 6}));
    double weighted = 0.0;
    for (std::size_t i = 0; i < H.size(); ++i) weighted += H[i] * static_cast<double>(i % 7 + 1);
    CHECK(weighted == doctest::Approx(482.75494761992701).epsilon(1e-12));
  }

  TEST_CASE("input errors") {
    std::mt19937_64 rng(3);
    const auto enc = harness::ToyEncoder::init(3, 4, 4, rng);
    CHECK_THROWS_AS(enc.encode(seg::make_sequence(U"ad", {0, 3})), mwa::InputError);
    CHECK_THROWS_AS(enc.encode(seg::make_sequence(U"aaaaa", {0, 0, 0, 0, 0})), mwa::InputError);
  }
}

TEST_SUITE("synthetic task") {
  TEST_CASE("reference task is exactly balanced") {
    const auto ds = harness::synth_dataset(reference_task(), 1);
    REQUIRE(ds.train.size() == 2000);
    std::size_t positives = 0;
    for (const auto& ex : ds.train) positives += ex.label;
    CHECK(positives == 1000);
  }

  TEST_CASE("labels follow the substring oracle and splits are disjoint") {
    auto spec = reference_task();
    spec.train = 300;
    spec.dev = 100;
    spec.test = 100;
    const auto ds = harness::synth_dataset(spec, 4);
    std::set<std::vector<std::size_t>> seen;
    for (const auto* split : {&ds.train, &ds.dev, &ds.test}) {
      std::size_t positives = 0;
      for (const auto& ex : *split) {
        REQUIRE(ex.label == (harness::contains_lexicon_word(ex.seq.ids, spec.lexicon) ? 1u : 0u));
        REQUIRE(seen.insert(ex.seq.ids).second);
        REQUIRE(ex.seq.size() >= spec.min_len);
        REQUIRE(ex.seq.size() <= spec.max_len);
        positives += ex.label;
      }
      CHECK(positives * 2 == split->size());
    }
  }

  TEST_CASE("fixed seed is reproducible") {
    auto spec = reference_task();
    spec.train = 50;
    const auto a = harness::synth_dataset(spec, 9), b = harness::synth_dataset(spec, 9);
    for (std::size_t i = 0; i < a.train.size(); ++i) CHECK(a.train[i].seq.ids == b.train[i].seq.ids);
  }

  TEST_CASE("empty lexicon") {
    harness::SyntheticTaskSpec spec;
    spec.train = 40;
    spec.dev = spec.test = 0;
    spec.positive_fraction = 0.0;
    for (const auto& ex : harness::synth_dataset(spec, 1).train) CHECK(ex.label == 0);
    spec.positive_fraction = 0.5;
    CHECK_THROWS_AS(harness::synth_dataset(spec, 1), mwa::ConfigError);
  }

  TEST_CASE("lexicon covering every symbol") {
    harness::SyntheticTaskSpec spec;
    spec.alphabet_size = 4;
    spec.lexicon = {{0}, {1}, {2}, {3}};
    spec.min_len = 3;
    spec.max_len = 5;
    spec.train = 40;
    spec.dev = spec.test = 0;
    spec.positive_fraction = 1.0;
    for (const auto& ex : harness::synth_dataset(spec, 1).train) CHECK(ex.label == 1);
    spec.positive_fraction = 0.5;
    CHECK_THROWS_AS(harness::synth_dataset(spec, 1), mwa::ConfigError);
  }

  TEST_CASE("symbols round trip") {
    for (std::size_t id : {0, 11, 25, 26, 40}) CHECK(harness::id_for(harness::symbol_for(id)) == id);
  }
}

TEST_SUITE("model") {
  TEST_CASE("singleton partition matches the unaligned baseline") {
    harness::ModelConfig cfg;
    cfg.layer.d = 8;
    cfg.layer.heads = 2;
    const auto model = harness::SequenceClassifier::init(cfg, {"src"}, 5);
    const auto seq = harness::sequence_from_ids({1, 2, 3, 4, 5, 6, 7});
    const auto singles = seg::singleton_partition(seq.size());
    const std::vector<const seg::WordPartition*> aligned{&singles}, plain{nullptr};
    CHECK(model.represent(seq, aligned) == model.represent(seq, plain));
  }

  TEST_CASE("full toy model gradient, n=6, d=8, K=2, M=2") {
    harness::ModelConfig cfg;
    cfg.layer.d = 8;
    cfg.layer.heads = 2;
    std::mt19937_64 rng(31);
    int checked = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      auto model = harness::SequenceClassifier::init(cfg, {"a", "b"}, seed);
      harness::Word ids(6);
      for (auto& id : ids) id = fixtures::between(rng, 0, 11);
      const auto seq = harness::sequence_from_ids(ids);
      const auto p1 = fixtures::random_partition(rng, 6), p2 = fixtures::random_partition(rng, 6);
      const std::vector<const seg::WordPartition*> parts{&p1, &p2};
      const std::size_t label = seed % 2;
      const mwa::Objective f = [&](mwa::Tape& t) { return model.loss(t, seq, parts, label); };
      mwa::Tape probe;
      f(probe);
      if (probe.max_pool_margin() < 1e-4) continue;
      ++checked;
      const auto params = model.parameters();
      CHECK(mwa::finite_diff_check(f, params, 1e-5).max_relative_error < 1e-4);
    }
    CHECK(checked >= 5);
  }

  TEST_CASE("initial loss is near ln C") {
    const auto exp = small_experiment(small_config());
    for (const auto& variant : exp.config.variants) {
      const auto report = harness::train(variant, [&] {
        auto e = exp;
        e.config.train.epochs = 0;
        return e;
      }());
      for (const auto& s : report.seeds) CHECK(std::fabs(s.initial_dev_loss - std::log(2.0)) < 0.2 * std::log(2.0));
    }
  }

  TEST_CASE("argmax ties pick the lowest class") {
    CHECK(harness::argmax_row(Matrix{{0.5, 0.5, 0.1}}) == 0);
    CHECK(harness::argmax_row(Matrix{{0.1, 0.5, 0.5}}) == 1);
  }
}

TEST_SUITE("training") {
  TEST_CASE("zero epochs leaves the model untrained") {
    auto exp = small_experiment(small_config());
    exp.config.train.epochs = 0;
    std::vector<harness::TrainedModel> kept;
    const auto variant = harness::Variant::parse("mwa_multi");
    const auto report = harness::train(variant, exp, &kept);
    REQUIRE(kept.size() == 2);
    const auto fresh = harness::SequenceClassifier::init(exp.config.model,
                                                         harness::source_labels(variant, exp), 1);
    const auto dev = harness::prepare_split(variant, exp, exp.data.dev);
    CHECK(report.seeds[0].dev_accuracy == harness::evaluate(fresh, dev));
    CHECK(report.seeds[0].loss_curve.empty());
    CHECK(report.seeds[0].dev_accuracy >= 0.2);
    CHECK(report.seeds[0].dev_accuracy <= 0.8);
  }

  TEST_CASE("duplicate seeds give identical metrics") {
    auto exp = small_experiment(small_config());
    exp.config.train.seeds = {4, 4};
    const auto report = harness::train(harness::Variant::parse("mwa_multi"), exp);
    REQUIRE(report.seeds.size() == 2);
    CHECK(report.seeds[0].dev_accuracy == report.seeds[1].dev_accuracy);
    CHECK(report.seeds[0].loss_curve == report.seeds[1].loss_curve);
    CHECK(report.std_dev_accuracy == 0.0);
  }

  TEST_CASE("reruns are bitwise identical and the stored mean is consistent") {
    const auto exp = small_experiment(small_config());
    const auto variant = harness::Variant::parse("baseline");
    const auto a = harness::train(variant, exp), b = harness::train(variant, exp);
    CHECK(a.same_metrics(b));
    std::vector<double> accs;
    for (const auto& s : a.seeds) accs.push_back(s.dev_accuracy);
    CHECK(std::fabs(std::accumulate(accs.begin(), accs.end(), 0.0) / accs.size() - a.mean_dev_accuracy) <
          1e-12);
    const auto round_trip = harness::RunReport::from_json(a.to_json());
    CHECK(round_trip.same_metrics(a));
    CHECK(a.to_json().at("report_version") == 1);
  }

  TEST_CASE("a tiny training set can be memorized") {
    auto j = small_config(10, 150);
    j["batch_size"] = 10;
    j["lr"] = 0.02;
    j["weight_decay"] = 0.0;
    j["seeds"] = {1};
    const auto exp = small_experiment(j);
    const auto variant = harness::Variant::parse("mwa_multi");
    std::vector<harness::TrainedModel> kept;
    harness::train(variant, exp, &kept);
    const auto train = harness::prepare_split(variant, exp, exp.data.train);
    CHECK(harness::evaluate(kept[0].model, train) == 1.0);
  }

  TEST_CASE("evaluate edge cases") {
    const auto exp = small_experiment(small_config());
    const auto variant = harness::Variant::parse("baseline");
    auto model = harness::SequenceClassifier::init(exp.config.model, {"singleton"}, 1);
    model.head().w.value.fill(0.0);
    const auto dev = harness::prepare_split(variant, exp, exp.data.dev);
    double zeros = 0.0;
    for (const auto& ex : exp.data.dev) zeros += ex.label == 0 ? 1.0 : 0.0;
    CHECK(harness::evaluate(model, dev) == zeros / static_cast<double>(dev.size()));

    const std::vector<harness::Example> one{exp.data.dev[0]};
    const double acc = harness::evaluate(model, harness::prepare_split(variant, exp, one));
    CHECK((acc == 0.0 || acc == 1.0));
    CHECK_THROWS_AS(harness::evaluate(model, {}), mwa::InputError);
  }

  TEST_CASE("mean and sample deviation") {
    const auto [m, s] = harness::mean_std({1.0, 2.0, 3.0});
    CHECK(m == 2.0);
    CHECK(s == 1.0);
    CHECK(harness::mean_std({4.0}).second == 0.0);
  }
}

TEST_SUITE("files") {
  TEST_CASE("checkpoint round trip") {
    const auto exp = small_experiment(small_config());
    const auto variant = harness::Variant::parse("mwa_multi");
    std::vector<harness::TrainedModel> kept;
    harness::train(variant, exp, &kept);
    const auto path = scratch_dir() / "model.ckpt.json";
    harness::write_checkpoint(path, kept[0].model, variant, kept[0].seed);
    harness::Variant v;
    std::uint64_t seed = 0;
    const auto loaded = harness::read_checkpoint(path, &v, &seed);
    CHECK(v == variant);
    CHECK(seed == kept[0].seed);
    for (const auto& ex : harness::prepare_split(variant, exp, exp.data.dev))
      REQUIRE(loaded.logits(ex.example->seq, ex.inputs) == kept[0].model.logits(ex.example->seq, ex.inputs));

    auto doc = harness::checkpoint_json(kept[0].model, variant, kept[0].seed);
    doc["ckpt_version"] = 2;
    CHECK_THROWS_AS(harness::checkpoint_from_json(doc), mwa::IoError);
  }

  TEST_CASE("dataset round trip") {
    const auto exp = small_experiment(small_config());
    const auto path = scratch_dir() / "dev.jsonl";
    harness::write_dataset(path, exp.data.dev);
    const auto back = harness::load_dataset(path);
    REQUIRE(back.size() == exp.data.dev.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
      CHECK(back[i].seq.ids == exp.data.dev[i].seq.ids);
      CHECK(back[i].label == exp.data.dev[i].label);
    }
    CHECK_THROWS_AS(harness::load_dataset(scratch_dir() / "missing.jsonl"), mwa::IoError);
  }

  TEST_CASE("config errors") {
    auto bad = small_config();
    bad["heads"] = 3;
    CHECK_THROWS_AS(harness::parse_config(bad, scratch_dir()).validate(), mwa::ConfigError);
    bad = small_config();
    bad["unknown_key"] = 1;
    CHECK_THROWS_AS(harness::parse_config(bad, scratch_dir()), mwa::ConfigError);
    bad = small_config();
    bad["sources"] = {"fmm:/nonexistent/dict.txt"};
    CHECK_THROWS_AS(harness::parse_config(bad, scratch_dir()), mwa::ConfigError);
    bad = small_config();
    bad["M"] = 3;
    CHECK_THROWS_AS(harness::parse_config(bad, scratch_dir()), mwa::ConfigError);
    bad = small_config();
    bad["d"] = "eight";
    CHECK_THROWS_AS(harness::parse_config(bad, scratch_dir()), mwa::ConfigError);
  }

  TEST_CASE("fingerprint tracks the config") {
    const auto a = harness::parse_config(small_config(), scratch_dir());
    auto j = small_config();
    j["lr"] = 0.02;
    const auto b = harness::parse_config(j, scratch_dir());
    CHECK(harness::config_fingerprint(a) == harness::config_fingerprint(a));
    CHECK(harness::config_fingerprint(a) != harness::config_fingerprint(b));
    CHECK(harness::config_fingerprint(a).size() == 16);
  }
}
