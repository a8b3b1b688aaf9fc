#pragma once

#include <cstddef>
#include <vector>

#include "cstk/corpus.hpp"

namespace cstk::metrics {

using corpus::Sentence;

struct UtteranceStats {
  std::size_t tokenCount = 0;
  std::size_t perLang[2] = {0, 0};  // indexed by Lang
  std::size_t switchPoints = 0;
};

UtteranceStats utterance_stats(const Sentence& s);

std::size_t count_switch_points(const Sentence& s);

// (N - max_l t_l + P) / N
double cmi_utterance(const Sentence& s);
double cmi_corpus(const std::vector<Sentence>& c);

// total switch points / total word boundaries
double spf_corpus(const std::vector<Sentence>& c);

struct CorpusMetrics {
  double cmi = 0.0;
  double spf = 0.0;
};

struct NgramNoveltyRow {
  int n = 0;
  std::size_t newCount = 0;
  std::size_t refUniqueCount = 0;
  double ratio = 0.0;  // may exceed 1
};

NgramNoveltyRow ngram_novelty(const std::vector<Sentence>& generated,
                              const std::vector<Sentence>& reference, int n);

// Unit-cost Levenshtein distance over codepoints, divided by |reference|.
double cer(const std::vector<char32_t>& reference, const std::vector<char32_t>& hypothesis);
std::size_t edit_distance(const std::vector<char32_t>& a, const std::vector<char32_t>& b);

// Character sequence for CER: spaces kept only between adjacent L1 tokens.
std::vector<char32_t> cer_chars(const Sentence& s);

}  // namespace cstk::metrics
