#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cstk/align.hpp"
#include "cstk/corpus.hpp"

namespace cstk::ecgen {

using align::SentenceAlignment;
using corpus::ParallelPair;
using corpus::Sentence;

// Contiguous L1 interval (half-open) with its aligned L2 interval (half-open).
struct SwitchSpan {
  std::size_t l1Begin = 0, l1End = 0;
  std::size_t l2Begin = 0, l2End = 0;

  bool operator==(const SwitchSpan& o) const {
    return l1Begin == o.l1Begin && l1End == o.l1End && l2Begin == o.l2Begin && l2End == o.l2End;
  }
};

// True iff links i and j of (u, v) cross.
bool violates_ec(const SentenceAlignment& a, std::size_t i, std::size_t j);

// All contiguous L1 intervals holding at least one link such that no in-link
// crosses any out-link and the aligned L2 image is closed under the link set.
std::vector<SwitchSpan> permissible_spans(const SentenceAlignment& a, std::size_t l1Len,
                                          std::size_t l2Len);

struct EcGenConfig {
  std::size_t maxSwitches = 2;
  std::size_t samplesPerPair = 3;
  std::uint64_t rngSeed = 1;
};

std::vector<Sentence> generate_ec(const ParallelPair& pair, const SentenceAlignment& a,
                                  const EcGenConfig& cfg);

// Per-pair seeds derived from cfg.rngSeed and the pair index.
std::vector<Sentence> generate_ec_corpus(const std::vector<ParallelPair>& pairs,
                                         const std::vector<SentenceAlignment>& alignments,
                                         const EcGenConfig& cfg);

// Independent O(k^2) post-hoc check on a chosen span set: each span passes the
// in/out crossing test, spans are disjoint, and no link of one span crosses a
// link of another.
bool validate_span_set(const SentenceAlignment& a, const std::vector<SwitchSpan>& spans,
                       std::size_t l1Len, std::size_t l2Len);

}  // namespace cstk::ecgen
