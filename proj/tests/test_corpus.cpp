#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "cstk/corpus.hpp"
#include "doctest.h"

using namespace cstk;
using corpus::Lang;
using corpus::Sentence;
using corpus::VocabularyTable;

namespace {

std::vector<std::string> surfaces(const Sentence& s) {
  std::vector<std::string> out;
  for (const auto& t : s.tokens) out.push_back(t.surface);
  return out;
}

std::string temp_file(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("tokenize splits whitespace and CJK characters") {
  CHECK(surfaces(corpus::tokenize("hello 你好")) ==
        std::vector<std::string>{"hello", "你", "好"});
  CHECK(corpus::tokenize("").empty());
  CHECK(surfaces(corpus::tokenize("i'm ok")) == std::vector<std::string>{"i'm", "ok"});
  CHECK(surfaces(corpus::tokenize("  a\t b \n")) == std::vector<std::string>{"a", "b"});
}

TEST_CASE("tokenize mixed-script segment splits into codepoints") {
  CHECK(surfaces(corpus::tokenize("ok的")) == std::vector<std::string>{"o", "k", "的"});
}

TEST_CASE("tokenize is idempotent on its own joined output") {
  for (const char* raw : {"hello 你好 world", "a 中b文 c", "一 二 三", "x"}) {
    const Sentence once = corpus::tokenize(raw);
    const Sentence twice = corpus::tokenize(once.joined());
    CHECK(once == twice);
  }
}

TEST_CASE("tag_language by CJK content") {
  CHECK(corpus::tag_language("你") == Lang::L2);
  CHECK(corpus::tag_language("hello") == Lang::L1);
  CHECK(corpus::tag_language("ok的") == Lang::L2);
  CHECK(corpus::tag_language("42") == Lang::L1);
  CHECK(corpus::tag_language("!?") == Lang::L1);
  CHECK_THROWS_AS(corpus::tag_language(""), DataError);
}

TEST_CASE("build_vocab keeps most frequent with first-occurrence ties") {
  const std::size_t R = VocabularyTable::kReserved;
  {
    auto v = corpus::build_vocab({corpus::tokenize("a a b")}, R + 1);
    CHECK(v.size() == R + 1);
    CHECK(v.contains("a"));
    CHECK(v.id("b") == VocabularyTable::kUnk);
  }
  {
    auto v = corpus::build_vocab({}, R);
    CHECK(v.size() == R);
  }
  {
    auto v = corpus::build_vocab({corpus::tokenize("x")}, R + 5);
    CHECK(v.size() == R + 1);
    CHECK(v.contains("x"));
  }
  {
    // equal counts: first occurrence wins the lower id
    auto v = corpus::build_vocab({corpus::tokenize("b a")}, R + 2);
    CHECK(v.id("b") == R);
    CHECK(v.id("a") == R + 1);
  }
  CHECK_THROWS_AS(corpus::build_vocab({}, 0), DataError);
}

TEST_CASE("vocabulary id round-trip") {
  auto v = corpus::build_vocab({corpus::tokenize("p q r q")}, 100);
  for (std::size_t id = 0; id < v.size(); ++id) CHECK(v.id(v.surface(id)) == id);
}

TEST_CASE("concat_pair inserts the separator") {
  corpus::ParallelPair p{corpus::tokenize("a b"), corpus::tokenize("c")};
  CHECK(surfaces(corpus::concat_pair(p)) == std::vector<std::string>{"a", "b", "<sep>", "c"});
  corpus::ParallelPair q{corpus::tokenize("x"), corpus::tokenize("x")};
  CHECK(surfaces(corpus::concat_pair(q)) == std::vector<std::string>{"x", "<sep>", "x"});
  CHECK(corpus::concat_pair(p).size() == p.l1.size() + p.l2.size() + 1);
}

TEST_CASE("utf8 round-trip and error handling") {
  const std::string s = "a中é\U0001F600";
  CHECK(corpus::utf8_encode(corpus::utf8_decode(s)) == s);
  CHECK_THROWS_AS(corpus::utf8_decode("\xff"), DataError);
  CHECK_THROWS_AS(corpus::utf8_decode("\xe4\xb8"), DataError);
}

TEST_CASE("parallel file round-trip and errors") {
  const std::string path = temp_file("cstk_test_parallel.tsv");
  std::vector<corpus::ParallelPair> pairs{
      {corpus::tokenize("a b"), corpus::tokenize("一 二")},
      {corpus::tokenize("c"), corpus::tokenize("三")}};
  corpus::write_parallel_file(path, pairs);
  const auto back = corpus::read_parallel_file(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].l1 == pairs[0].l1);
  CHECK(back[1].l2 == pairs[1].l2);

  {
    std::ofstream f(path);
    f << "no tab here\n";
  }
  CHECK_THROWS_AS(corpus::read_parallel_file(path), DataError);
  {
    std::ofstream f(path);
    f << "left\t\n";
  }
  CHECK_THROWS_AS(corpus::read_parallel_file(path), DataError);
  CHECK_THROWS_AS(corpus::read_parallel_file("/nonexistent/x"), DataError);
  std::remove(path.c_str());
}

TEST_CASE("corpus and vocab file round-trips") {
  const std::string cpath = temp_file("cstk_test_corpus.txt");
  std::vector<Sentence> sents{corpus::tokenize("a b"), corpus::tokenize("你 好")};
  corpus::write_corpus_file(cpath, sents);
  CHECK(corpus::read_corpus_file(cpath) == sents);
  std::remove(cpath.c_str());

  const std::string vpath = temp_file("cstk_test_vocab.txt");
  auto v = corpus::build_vocab(sents, 100);
  corpus::write_vocab_file(vpath, v);
  auto v2 = corpus::read_vocab_file(vpath);
  CHECK(v2.surfaces == v.surfaces);
  {
    std::ofstream f(vpath);
    f << "dup\ndup\n";
  }
  CHECK_THROWS_AS(corpus::read_vocab_file(vpath), DataError);
  std::remove(vpath.c_str());
}
