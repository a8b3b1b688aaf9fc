#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "cstk/fusion.hpp"
#include "cstk/rng.hpp"
#include "doctest.h"

using namespace cstk;
using corpus::Sentence;
using fusion::EmissionSequence;
using fusion::FusionConfig;
using fusion::Hypothesis;
using neural::Vec;

namespace {

lm::LMModel make_test_lm(bool zeroed, std::uint64_t seed = 1) {
  std::vector<Sentence> vc{corpus::tokenize("a b ab ba aa 好")};
  lm::LMConfig cfg;
  cfg.hiddenSize = 6;
  cfg.trainer.rngSeed = seed;
  auto m = lm::make_lm(cfg, corpus::build_vocab(vc, 64));
  if (zeroed) {
    auto reg = m.registry();
    for (auto* t : reg.items)
      for (double& v : t->w.v) v = 0.0;
  }
  return m;
}

// word segmentation + scoring written independently of the search
struct OracleScore {
  double trans = 0.0, lmScore = 0.0;
  std::size_t wordCount = 0;
};

OracleScore oracle_score(const EmissionSequence& e, const lm::LMModel& model,
                         const std::vector<std::size_t>& charIds) {
  OracleScore os;
  for (std::size_t t = 0; t < charIds.size(); ++t) os.trans += e.logProbs.at(t, charIds[t]);
  std::vector<std::string> words;
  std::string buf;
  for (std::size_t id : charIds) {
    const std::string& s = e.inventory[id];
    bool cjk = false;
    for (char32_t cp : corpus::utf8_decode(s)) cjk = cjk || corpus::is_cjk(cp);
    if (s == " " || cjk) {
      if (!buf.empty()) words.push_back(buf);
      buf.clear();
      if (cjk) words.push_back(s);
    } else {
      buf += s;
    }
  }
  if (!buf.empty()) words.push_back(buf);
  lm::LMState st = lm::lm_initial_state(model);
  for (const std::string& w : words) os.lmScore += lm::lm_score_next(model, st, model.vocab.id(w));
  os.wordCount = words.size();
  return os;
}

}  // namespace

TEST_CASE("fused_score hand cases") {
  CHECK(fusion::fused_score(-2.0, -4.0, 9, {1.0, 0.5, 0.1}) ==
        doctest::Approx(-3.7).epsilon(1e-12));
  CHECK(fusion::fused_score(-1.0, 0.0, 0, {1.0, 0.3, 0.1}) ==
        doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(fusion::fused_score(0.0, 0.0, 4, {1.0, 0.3, 0.5}) ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("emission validation") {
  CHECK_NOTHROW(fusion::make_emissions({"a", "b"}, {{0.5, 0.5}, {0.9, 0.1}}));
  CHECK_THROWS_AS(fusion::make_emissions({"a", "b"}, {{0.6, 0.6}}), DataError);
  CHECK_THROWS_AS(fusion::make_emissions({"a", "b"}, {{1.0}}), DataError);
  CHECK_THROWS_AS(fusion::make_emissions({"a", "b"}, {}), DataError);
  // tolerance boundary: 1e-10 off passes, 1e-8 off fails
  CHECK_NOTHROW(fusion::make_emissions({"a", "b"}, {{0.5, 0.5 + 1e-10}}));
  CHECK_THROWS_AS(fusion::make_emissions({"a", "b"}, {{0.5, 0.5 + 1e-8}}), DataError);
}

TEST_CASE("emission file round-trip and error cases") {
  const auto dir = std::filesystem::temp_directory_path();
  const std::string path = (dir / "cstk_test_emis.txt").string();
  const auto e = fusion::make_emissions({"a", " ", "好"},
                                        {{0.7, 0.2, 0.1}, {0.25, 0.25, 0.5}});
  fusion::write_emissions(path, e);
  const auto back = fusion::read_emissions(path);
  CHECK(back.inventory == e.inventory);
  REQUIRE(back.steps() == e.steps());
  for (std::size_t t = 0; t < e.steps(); ++t)
    for (std::size_t c = 0; c < e.chars(); ++c)
      CHECK(back.logProbs.at(t, c) == doctest::Approx(e.logProbs.at(t, c)).epsilon(1e-12));

  CHECK_THROWS_AS(fusion::read_emissions((dir / "cstk_no_such_file").string()), DataError);
  {
    std::ofstream f(path);
    f << "not json\n0.5 0.5\n";
  }
  CHECK_THROWS_AS(fusion::read_emissions(path), DataError);
  {
    std::ofstream f(path);
    f << "{\"inventory\":[\"a\",\"b\"],\"T\":2,\"C\":2}\n0.5 0.5\n";
  }
  CHECK_THROWS_AS(fusion::read_emissions(path), DataError);  // row count mismatch
  {
    std::ofstream f(path);
    f << "{\"inventory\":[\"a\",\"b\"],\"T\":1,\"C\":2}\n0.5 0.5 0.5\n";
  }
  CHECK_THROWS_AS(fusion::read_emissions(path), DataError);  // row width mismatch
  std::remove(path.c_str());
}

TEST_CASE("with lm and length weights off, decode follows the per-step argmax") {
  const auto m = make_test_lm(true);
  const auto e = fusion::make_emissions(
      {"a", "b", " "}, {{0.8, 0.1, 0.1}, {0.2, 0.7, 0.1}, {0.1, 0.2, 0.7}});
  FusionConfig cfg;
  cfg.beta = 0.0;
  cfg.gamma = 0.0;
  const auto hyps = fused_beam_decode(e, m, cfg);
  REQUIRE(hyps.size() == 1);
  CHECK(hyps[0].charIds == std::vector<std::size_t>{0, 1, 2});
  CHECK(hyps[0].transScore ==
        doctest::Approx(std::log(0.8) + std::log(0.7) + std::log(0.7)).epsilon(1e-9));
  CHECK(hyps[0].surface(e) == "ab ");
  CHECK(hyps[0].words(e) == std::vector<std::string>{"ab"});
}

TEST_CASE("word-count weight can prefer splitting into more words") {
  const auto m = make_test_lm(true);
  const auto e = fusion::make_emissions(
      {"a", " "}, {{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}});
  FusionConfig cfg;
  cfg.beta = 0.0;
  cfg.gamma = 1.0;
  const auto hyps = fused_beam_decode(e, m, cfg);
  REQUIRE(!hyps.empty());
  CHECK(hyps[0].charIds == std::vector<std::size_t>{0, 1, 0});  // "a a" -> two words
  CHECK(hyps[0].wordCount == 2);
}

TEST_CASE("a cjk character forms a word by itself") {
  const auto m = make_test_lm(true);
  const auto e = fusion::make_emissions(
      {"a", "好"}, {{1.0, 0.0}, {0.0, 1.0}, {1.0, 0.0}});
  const auto hyps = fused_beam_decode(e, m, FusionConfig{});
  REQUIRE(!hyps.empty());
  CHECK(hyps[0].words(e) == std::vector<std::string>{"a", "好", "a"});
  CHECK(hyps[0].wordCount == 3);
}

TEST_CASE("beam search equals exhaustive enumeration on small instances") {
  rng::Rng r(23);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = make_test_lm(false, 100 + std::uint64_t(trial));
    std::vector<std::vector<double>> rows(3, std::vector<double>(3));
    for (auto& row : rows) {
      double z = 0.0;
      for (auto& p : row) z += (p = r.uniform(0.05, 1.0));
      for (auto& p : row) p /= z;
    }
    const auto e = fusion::make_emissions({"a", "b", " "}, rows);
    FusionConfig cfg;
    cfg.beams = 27;
    cfg.nBest = 5;

    double bestScore = -1e300;
    std::vector<std::size_t> bestIds;
    for (std::size_t i = 0; i < 27; ++i) {
      const std::vector<std::size_t> ids{i / 9, (i / 3) % 3, i % 3};
      const OracleScore os = oracle_score(e, m, ids);
      const double sc = fusion::fused_score(os.trans, os.lmScore, os.wordCount, cfg);
      if (sc > bestScore + 1e-15 ||
          (std::abs(sc - bestScore) <= 1e-15 &&
           std::lexicographical_compare(ids.begin(), ids.end(), bestIds.begin(),
                                        bestIds.end()))) {
        bestScore = sc;
        bestIds = ids;
      }
    }

    const auto hyps = fused_beam_decode(e, m, cfg);
    REQUIRE(hyps.size() == 5);
    CHECK(hyps[0].charIds == bestIds);
    CHECK(hyps[0].fusedScore == doctest::Approx(bestScore).epsilon(1e-9));
    for (std::size_t i = 1; i < hyps.size(); ++i)
      CHECK(hyps[i].fusedScore <= hyps[i - 1].fusedScore + 1e-12);
    // the reported component scores recompose into the fused score
    for (const auto& h : hyps) {
      const OracleScore os = oracle_score(e, m, h.charIds);
      CHECK(h.transScore == doctest::Approx(os.trans).epsilon(1e-9));
      CHECK(h.lmScore == doctest::Approx(os.lmScore).epsilon(1e-9));
      CHECK(h.wordCount == os.wordCount);
    }
  }
}

TEST_CASE("wider beams never lower the best fused score") {
  rng::Rng r(29);
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = make_test_lm(false, 200 + std::uint64_t(trial));
    std::vector<std::vector<double>> rows(4, std::vector<double>(3));
    for (auto& row : rows) {
      double z = 0.0;
      for (auto& p : row) z += (p = r.uniform(0.05, 1.0));
      for (auto& p : row) p /= z;
    }
    const auto e = fusion::make_emissions({"a", "b", " "}, rows);
    double prev = -1e300;
    for (std::size_t beams : {1, 4, 16, 81}) {
      FusionConfig cfg;
      cfg.beams = beams;
      const auto hyps = fused_beam_decode(e, m, cfg);
      REQUIRE(!hyps.empty());
      CHECK(hyps[0].fusedScore >= prev - 1e-12);
      prev = hyps[0].fusedScore;
    }
  }
}

TEST_CASE("decode input validation") {
  const auto m = make_test_lm(true);
  EmissionSequence empty;
  CHECK_THROWS_AS(fused_beam_decode(empty, m, FusionConfig{}), DataError);
  const auto e = fusion::make_emissions({"a"}, {{1.0}});
  FusionConfig cfg;
  cfg.beams = 0;
  CHECK_THROWS_AS(fused_beam_decode(e, m, cfg), DataError);
}
