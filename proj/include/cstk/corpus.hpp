#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cstk/errors.hpp"

namespace cstk::corpus {

enum class Lang { L1, L2 };

struct Token {
  std::string surface;
  Lang lang = Lang::L1;

  bool operator==(const Token& o) const { return surface == o.surface && lang == o.lang; }
};

struct Sentence {
  std::vector<Token> tokens;

  bool empty() const { return tokens.empty(); }
  std::size_t size() const { return tokens.size(); }
  const Token& operator[](std::size_t i) const { return tokens[i]; }
  Token& operator[](std::size_t i) { return tokens[i]; }
  bool operator==(const Sentence& o) const { return tokens == o.tokens; }

  // surfaces joined by single spaces
  std::string joined() const;
};

struct ParallelPair {
  Sentence l1;  // matrix language
  Sentence l2;  // embedded language
};

// CJK Unified Ideograph ranges (plus extensions and compatibility block).
bool is_cjk(char32_t cp);

// Any CJK codepoint -> L2; everything else (digits, punctuation, Latin) -> L1.
Lang tag_language(std::string_view surface);

Token make_token(std::string surface);

struct TokenizePolicy {
  // Segments containing CJK codepoints are split into single-codepoint tokens.
  bool splitCjkSegments = true;
};

Sentence tokenize(std::string_view raw, const TokenizePolicy& policy = {});

struct VocabularyTable {
  // Fixed reserved block: 0 unknown, 1 separator, 2 begin, 3 end.
  static constexpr std::size_t kUnk = 0;
  static constexpr std::size_t kSep = 1;
  static constexpr std::size_t kBos = 2;
  static constexpr std::size_t kEos = 3;
  static constexpr std::size_t kReserved = 4;
  static const char* reservedSurface(std::size_t id);

  std::unordered_map<std::string, std::size_t> toId;
  std::vector<std::string> surfaces;  // index = id, reserved block first

  std::size_t size() const { return surfaces.size(); }
  std::size_t id(std::string_view s) const;
  bool contains(std::string_view s) const;
  const std::string& surface(std::size_t id) const;
};

// Most frequent (cap - reserved) surfaces; ties by first occurrence.
VocabularyTable build_vocab(const std::vector<Sentence>& corpus, std::size_t cap);

// l1 tokens, separator, l2 tokens.
Sentence concat_pair(const ParallelPair& pair);

// ---- UTF-8 ----
std::vector<char32_t> utf8_decode(std::string_view s);
void utf8_append(std::string& out, char32_t cp);
std::string utf8_encode(const std::vector<char32_t>& cps);

// ---- file formats ----
// parallel corpus: one pair per line, L1 <TAB> L2, both sides pre-tokenized
std::vector<ParallelPair> read_parallel_file(const std::string& path);
void write_parallel_file(const std::string& path, const std::vector<ParallelPair>& pairs);
// corpus: one pre-tokenized sentence per line, tokens space-separated
std::vector<Sentence> read_corpus_file(const std::string& path);
void write_corpus_file(const std::string& path, const std::vector<Sentence>& sents);
// vocabulary: one token per line, line number = id - reserved block size
void write_vocab_file(const std::string& path, const VocabularyTable& vocab);
VocabularyTable read_vocab_file(const std::string& path);

}  // namespace cstk::corpus
