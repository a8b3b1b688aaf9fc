#include "cstk/ecgen.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "cstk/rng.hpp"

namespace cstk::ecgen {

bool violates_ec(const SentenceAlignment& a, std::size_t i, std::size_t j) {
  const std::size_t ui = a.u[i], uj = a.u[j];
  const std::size_t vi = a.v[i], vj = a.v[j];
  return (ui < uj && vi > vj) || (ui > uj && vi < vj);
}

std::vector<SwitchSpan> permissible_spans(const SentenceAlignment& a, std::size_t l1Len,
                                          std::size_t l2Len) {
  std::vector<SwitchSpan> spans;
  const std::size_t nLinks = a.links.size();
  if (nLinks == 0) return spans;
  for (std::size_t b = 0; b < l1Len; ++b) {
    for (std::size_t e = b + 1; e <= l1Len; ++e) {
      std::vector<std::size_t> in, out;
      for (std::size_t k = 0; k < nLinks; ++k) {
        if (a.u[k] >= b && a.u[k] < e)
          in.push_back(k);
        else
          out.push_back(k);
      }
      if (in.empty()) continue;
      bool ok = true;
      for (std::size_t ki : in) {
        for (std::size_t ko : out)
          if (violates_ec(a, ki, ko)) {
            ok = false;
            break;
          }
        if (!ok) break;
      }
      if (!ok) continue;
      std::size_t lo = a.v[in[0]], hi = a.v[in[0]];
      for (std::size_t ki : in) {
        lo = std::min(lo, a.v[ki]);
        hi = std::max(hi, a.v[ki]);
      }
      // image closure: links landing inside [lo, hi] must come from [b, e)
      for (std::size_t ko : out)
        if (a.v[ko] >= lo && a.v[ko] <= hi) {
          ok = false;
          break;
        }
      if (!ok) continue;
      if (hi >= l2Len) continue;
      spans.push_back({b, e, lo, hi + 1});
    }
  }
  return spans;
}

namespace {

bool spans_disjoint(const SwitchSpan& a, const SwitchSpan& b) {
  const bool l1Ok = a.l1End <= b.l1Begin || b.l1End <= a.l1Begin;
  const bool l2Ok = a.l2End <= b.l2Begin || b.l2End <= a.l2Begin;
  return l1Ok && l2Ok;
}

Sentence substitute(const ParallelPair& pair, std::vector<SwitchSpan> chosen) {
  std::sort(chosen.begin(), chosen.end(),
            [](const SwitchSpan& x, const SwitchSpan& y) { return x.l1Begin < y.l1Begin; });
  Sentence out;
  std::size_t pos = 0;
  for (const SwitchSpan& sp : chosen) {
    for (; pos < sp.l1Begin; ++pos) out.tokens.push_back(pair.l1[pos]);
    for (std::size_t j = sp.l2Begin; j < sp.l2End; ++j) out.tokens.push_back(pair.l2[j]);
    pos = sp.l1End;
  }
  for (; pos < pair.l1.size(); ++pos) out.tokens.push_back(pair.l1[pos]);
  return out;
}

}  // namespace

bool validate_span_set(const SentenceAlignment& a, const std::vector<SwitchSpan>& spans,
                       std::size_t l1Len, std::size_t l2Len) {
  for (std::size_t s = 0; s < spans.size(); ++s) {
    const SwitchSpan& sp = spans[s];
    if (sp.l1Begin >= sp.l1End || sp.l2Begin >= sp.l2End) return false;
    if (sp.l1End > l1Len || sp.l2End > l2Len) return false;
    std::vector<std::size_t> in;
    for (std::size_t k = 0; k < a.links.size(); ++k)
      if (a.u[k] >= sp.l1Begin && a.u[k] < sp.l1End) in.push_back(k);
    if (in.empty()) return false;
    for (std::size_t ki : in)
      for (std::size_t ko = 0; ko < a.links.size(); ++ko) {
        if (a.u[ko] >= sp.l1Begin && a.u[ko] < sp.l1End) continue;
        if (violates_ec(a, ki, ko)) return false;
      }
    for (std::size_t t = s + 1; t < spans.size(); ++t) {
      if (!spans_disjoint(sp, spans[t])) return false;
      std::vector<std::size_t> inT;
      for (std::size_t k = 0; k < a.links.size(); ++k)
        if (a.u[k] >= spans[t].l1Begin && a.u[k] < spans[t].l1End) inT.push_back(k);
      for (std::size_t ki : in)
        for (std::size_t kt : inT)
          if (violates_ec(a, ki, kt)) return false;
    }
  }
  return true;
}

std::vector<Sentence> generate_ec(const ParallelPair& pair, const SentenceAlignment& a,
                                  const EcGenConfig& cfg) {
  std::vector<Sentence> out;
  if (cfg.maxSwitches == 0 || cfg.samplesPerPair == 0) return out;
  std::vector<SwitchSpan> spans = permissible_spans(a, pair.l1.size(), pair.l2.size());
  if (spans.empty()) return out;

  rng::Rng r(cfg.rngSeed);
  std::set<std::string> seen;
  const std::string pureL1 = pair.l1.joined();
  const std::size_t attempts = 16 * cfg.samplesPerPair;
  for (std::size_t att = 0; att < attempts && out.size() < cfg.samplesPerPair; ++att) {
    const std::size_t want = 1 + r.below(cfg.maxSwitches);
    std::vector<SwitchSpan> pool = spans;
    r.shuffle(pool);
    std::vector<SwitchSpan> chosen;
    for (const SwitchSpan& sp : pool) {
      bool ok = true;
      for (const SwitchSpan& c : chosen)
        if (!spans_disjoint(sp, c)) {
          ok = false;
          break;
        }
      if (ok) chosen.push_back(sp);
      if (chosen.size() == want) break;
    }
    if (chosen.empty()) continue;
    Sentence s = substitute(pair, chosen);
    const std::string key = s.joined();
    if (key == pureL1) continue;
    if (seen.insert(key).second) out.push_back(std::move(s));
  }
  return out;
}

std::vector<Sentence> generate_ec_corpus(const std::vector<ParallelPair>& pairs,
                                         const std::vector<SentenceAlignment>& alignments,
                                         const EcGenConfig& cfg) {
  if (pairs.size() != alignments.size())
    throw DataError("generate_ec_corpus: pair/alignment count mismatch");
  std::vector<Sentence> out;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    EcGenConfig local = cfg;
    local.rngSeed = rng::mix(cfg.rngSeed, k);
    std::vector<Sentence> gen = generate_ec(pairs[k], alignments[k], local);
    out.insert(out.end(), gen.begin(), gen.end());
  }
  return out;
}

}  // namespace cstk::ecgen
