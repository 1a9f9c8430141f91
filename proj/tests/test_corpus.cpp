#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <set>

#include "metaenc/corpus.hpp"
#include "metaenc/errors.hpp"
#include "metaenc/selfcheck.hpp"
#include "metaenc/serialize.hpp"

using namespace metaenc;

namespace {

// 16 classes x 2 records of closed-form line AEs; no training needed.
Corpus synthetic_line_corpus() {
  Corpus c;
  c.arch = AeArchId::Line212;
  std::uint64_t seed = 0;
  for (const ClassSpec& spec : line_grid(16)) {
    for (int k = 0; k < 2; ++k) {
      AeRecord rec;
      rec.arch = AeArchId::Line212;
      rec.class_spec = spec;
      rec.model = analytic_line_model(std::get<LineClass>(spec).slope() * (1.0 + 0.1 * k));
      rec.train_stats.seed = seed++;
      rec.train_stats.final_test_rmse = 1.0 / 3.0;
      c.records.push_back(rec);
    }
  }
  c.provenance.family = "line";
  c.provenance.classes = 16;
  c.provenance.aes_per_class = 2;
  return c;
}

const Corpus& desk_lines() {
  static const Corpus c = [] {
    CorpusConfig cfg = CorpusConfig::desk(Family::Line);
    cfg.ae.epochs = 60;
    cfg.ae.line_threshold = 1e9;
    return build_corpus(cfg, 4);
  }();
  return c;
}

std::string label_of(const AeRecord& r) { return label(r.class_spec); }

}  // namespace

TEST_CASE("presets") {
  const CorpusConfig full = CorpusConfig::full(Family::Line);
  CHECK(full.classes.size() * full.aes_per_class == 1600);
  CHECK(full.points_per_ae == 1000);
  const CorpusConfig desk = CorpusConfig::desk(Family::Line);
  CHECK(desk.classes.size() * desk.aes_per_class == 32);
  const CorpusConfig arcs = CorpusConfig::desk(Family::Arc);
  CHECK(arcs.classes.size() == 10);
  CHECK(arcs.points_per_ae == 200);
}

TEST_CASE("desk line corpus has 32 records and rebuilds identically") {
  const Corpus& c = desk_lines();
  CHECK(c.records.size() == 32);
  CHECK_NOTHROW(check_corpus(c));
  CorpusConfig cfg = CorpusConfig::desk(Family::Line);
  cfg.ae.epochs = 60;
  cfg.ae.line_threshold = 1e9;
  const Corpus again = build_corpus(cfg, 1);
  CHECK(corpus_to_string(again) == corpus_to_string(c));
}

TEST_CASE("corpus checks reject duplicates and mixed architectures") {
  Corpus c = synthetic_line_corpus();
  c.records.push_back(c.records.front());
  CHECK_THROWS_AS(check_corpus(c), ContractError);
  c = synthetic_line_corpus();
  c.records[3].arch = AeArchId::Arc28122;
  CHECK_THROWS_AS(check_corpus(c), ContractError);
}

TEST_CASE("a class outside the family is rejected") {
  CorpusConfig cfg = CorpusConfig::desk(Family::Line);
  cfg.classes = {ArcClass{2.0}};
  CHECK_THROWS_AS(build_corpus(cfg), ContractError);
}

TEST_CASE("too many non-converging AEs fail the build") {
  CorpusConfig cfg = CorpusConfig::desk(Family::Line);
  cfg.classes = line_grid(16);
  cfg.classes.resize(2);
  cfg.ae.epochs = 1;
  cfg.ae.max_retries = 0;
  cfg.ae.line_threshold = 1e-12;
  CHECK_THROWS_AS(build_corpus(cfg), TrainingError);
}

TEST_CASE("holding out 25% of classes from 32 records") {
  const Corpus c = synthetic_line_corpus();
  const CorpusSplit s = split(c, 0.25, SplitMode::ByClass, 3);
  CHECK(distinct_classes(s.test).size() == 4);
  CHECK(s.test.size() == 8);
  CHECK(s.train.size() == 24);
}

TEST_CASE("splits are deterministic, disjoint and complete over 100 seeds") {
  const Corpus c = synthetic_line_corpus();
  for (SplitMode mode : {SplitMode::ByRecord, SplitMode::ByClass}) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const CorpusSplit a = split(c, 0.25, mode, seed);
      const CorpusSplit b = split(c, 0.25, mode, seed);
      CHECK(a.train == b.train);
      CHECK(a.test == b.test);
      std::set<std::uint64_t> train_seeds, test_seeds;
      for (const auto& r : a.train) train_seeds.insert(r.train_stats.seed);
      for (const auto& r : a.test) test_seeds.insert(r.train_stats.seed);
      std::vector<std::uint64_t> both;
      std::set_intersection(train_seeds.begin(), train_seeds.end(), test_seeds.begin(),
                            test_seeds.end(), std::back_inserter(both));
      CHECK(both.empty());
      CHECK(train_seeds.size() + test_seeds.size() == c.records.size());
      if (mode == SplitMode::ByClass) {
        std::set<std::string> train_labels, test_labels;
        for (const auto& r : a.train) train_labels.insert(label_of(r));
        for (const auto& r : a.test) CHECK(train_labels.count(label_of(r)) == 0);
      }
    }
  }
}

TEST_CASE("splits that leave a side empty are rejected") {
  const Corpus c = synthetic_line_corpus();
  CHECK_THROWS_AS(split(c, 0.0, SplitMode::ByRecord, 0), ContractError);
  CHECK_THROWS_AS(split(c, 0.01, SplitMode::ByClass, 0), ContractError);
  CHECK_THROWS_AS(split(c, 1.0, SplitMode::ByRecord, 0), ContractError);
  CHECK(split_mode_from_string("by_class") == SplitMode::ByClass);
  CHECK_THROWS_AS(split_mode_from_string("by_line"), ContractError);
}

TEST_CASE("save and load are bit-exact") {
  const Corpus& c = desk_lines();
  const auto path = std::filesystem::temp_directory_path() / "metaenc_test_corpus.json";
  save_corpus(c, path);
  const Corpus back = load_corpus(path);
  CHECK(back == c);
  for (std::size_t i = 0; i < c.records.size(); ++i) {
    const auto a = c.records[i].model.params();
    const auto b = back.records[i].model.params();
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
  }
  std::filesystem::remove(path);
}

TEST_CASE("arc corpus persistence and corrupt-byte detection") {
  const CheckResult r = check_persistence(2);
  INFO(r.detail);
  CHECK(r.pass);
}

TEST_CASE("every single-byte corruption of the parameters is rejected") {
  const std::string text = corpus_to_string(synthetic_line_corpus());
  const std::size_t start = text.find("\"records\"");
  for (std::size_t at = start; at < text.size(); at += 97) {
    std::string bad = text;
    bad[at] = static_cast<char>(bad[at] ^ 0x01);
    CHECK_THROWS_AS(corpus_from_string(bad), FormatError);
  }
}

TEST_CASE("documents from another schema version are rejected") {
  std::string text = corpus_to_string(synthetic_line_corpus());
  const std::string from = "\"schema_version\": " + std::to_string(kSchemaVersion);
  const std::size_t at = text.find(from);
  REQUIRE(at != std::string::npos);
  text.replace(at, from.size(), "\"schema_version\": 99");
  // Re-seal so only the version differs.
  const std::size_t sum = text.find("\"checksum\": \"") + 13;
  text.replace(sum, 16, std::string(16, '0'));
  text.replace(sum, 16, hex64(fnv1a64(text)));
  try {
    corpus_from_string(text);
    FAIL("accepted version 99");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("schema_version") != std::string::npos);
  }
}

TEST_CASE("the current version reads its own files") {
  const std::string text = corpus_to_string(synthetic_line_corpus());
  CHECK(corpus_from_string(text) == synthetic_line_corpus());
  CHECK_THROWS_AS(corpus_from_string("{}"), FormatError);
  CHECK_THROWS_AS(load_corpus("/nonexistent/metaenc.json"), IoError);
}

TEST_CASE("decimal encoding round-trips awkward doubles") {
  for (double v : {1.0 / 3.0, -0.0, 5e-324, 1.7976931348623157e308, 0.1 + 0.2}) {
    const double back = parse_double(format_double(v));
    CHECK(std::memcmp(&v, &back, sizeof v) == 0);
  }
  CHECK_THROWS_AS(parse_double("1.5x"), FormatError);
  CHECK_THROWS_AS(parse_double(""), FormatError);
}

TEST_CASE("config hash tracks settings") {
  CorpusConfig a = CorpusConfig::desk(Family::Line);
  CorpusConfig b = a;
  CHECK(config_hash(a) == config_hash(b));
  b.seed = 1;
  CHECK(config_hash(a) != config_hash(b));
}
