#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "cstk/corpus.hpp"

namespace cstk::align {

using corpus::ParallelPair;

// Lexical translation probabilities t(e | q), q over the L1 vocabulary plus a
// NULL source, e over the L2 vocabulary.
struct TranslationTable {
  static constexpr const char* kNull = "<null>";
  static constexpr double kFloorProb = 1e-12;  // unknown-word floor

  std::unordered_map<std::string, std::unordered_map<std::string, double>> rows;

  double prob(const std::string& q, const std::string& e) const;
};

TranslationTable train_ibm1(const std::vector<ParallelPair>& pairs, std::size_t iterations,
                            double diagonalBias = 0.0);

// Corpus log-likelihood under the uniform-alignment lexical model.
double ibm1_log_likelihood(const std::vector<ParallelPair>& pairs, const TranslationTable& table);

// Uniform rows over the co-occurring L2 vocabulary; the EM starting point.
TranslationTable uniform_table(const std::vector<ParallelPair>& pairs);

struct Link {
  std::size_t i = 0;  // L1 index
  std::size_t j = 0;  // L2 index
  bool operator==(const Link& o) const { return i == o.i && j == o.j; }
};

struct SentenceAlignment {
  std::vector<Link> links;     // sorted by (i, j)
  std::vector<std::size_t> u;  // L1 indices, ascending
  std::vector<std::size_t> v;  // corresponding L2 indices
};

// Validates bounds, sorts by (i, j), builds u/v.
SentenceAlignment make_alignment(std::vector<Link> links, std::size_t l1Len, std::size_t l2Len);

// One argmax link per L1 token; the token stays unaligned when NULL explains
// its best target better.
SentenceAlignment viterbi_align(const ParallelPair& pair, const TranslationTable& table);

// "i-j i-j ..." zero-based
SentenceAlignment import_pharaoh(const std::string& line, const ParallelPair& pair);
std::string to_pharaoh(const SentenceAlignment& a);

// "q<TAB>e<TAB>prob", probabilities at 17 significant digits
void write_table_file(const std::string& path, const TranslationTable& table);
TranslationTable read_table_file(const std::string& path);

}  // namespace cstk::align
