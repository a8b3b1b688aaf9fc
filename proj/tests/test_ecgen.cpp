#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <set>
#include <string>

#include "cstk/ecgen.hpp"
#include "cstk/rng.hpp"
#include "doctest.h"

using namespace cstk;
using align::Link;
using align::SentenceAlignment;
using corpus::ParallelPair;
using ecgen::SwitchSpan;

namespace {

SentenceAlignment mk(std::vector<Link> links, std::size_t l1, std::size_t l2) {
  return align::make_alignment(std::move(links), l1, l2);
}

// Side-window formulation: an interval is permissible iff every outside link
// lies strictly left of the L2 image when its L1 index is left of the
// interval, and strictly right of it otherwise. Deliberately different from
// the pairwise crossing scan in the implementation.
std::vector<SwitchSpan> oracle_spans(const SentenceAlignment& a, std::size_t l1Len,
                                     std::size_t l2Len) {
  std::vector<SwitchSpan> out;
  for (std::size_t b = 0; b < l1Len; ++b) {
    for (std::size_t e = b + 1; e <= l1Len; ++e) {
      std::size_t lo = l2Len, hi = 0;
      bool any = false;
      for (std::size_t k = 0; k < a.u.size(); ++k)
        if (a.u[k] >= b && a.u[k] < e) {
          any = true;
          lo = std::min(lo, a.v[k]);
          hi = std::max(hi, a.v[k]);
        }
      if (!any) continue;
      bool ok = true;
      for (std::size_t k = 0; k < a.u.size(); ++k) {
        if (a.u[k] >= b && a.u[k] < e) continue;
        if (a.u[k] < b ? a.v[k] >= lo : a.v[k] <= hi) {
          ok = false;
          break;
        }
      }
      if (ok) out.push_back({b, e, lo, hi + 1});
    }
  }
  return out;
}

bool same_spans(std::vector<SwitchSpan> a, std::vector<SwitchSpan> b) {
  auto key = [](const SwitchSpan& s) {
    return std::make_tuple(s.l1Begin, s.l1End, s.l2Begin, s.l2End);
  };
  auto lt = [&](const SwitchSpan& x, const SwitchSpan& y) { return key(x) < key(y); };
  std::sort(a.begin(), a.end(), lt);
  std::sort(b.begin(), b.end(), lt);
  return a == b;
}

ParallelPair pair(const char* l1, const char* l2) {
  return {corpus::tokenize(l1), corpus::tokenize(l2)};
}

}  // namespace

TEST_CASE("violates_ec crossing test") {
  const auto mono = mk({{0, 0}, {1, 1}}, 2, 2);
  CHECK_FALSE(ecgen::violates_ec(mono, 0, 1));
  const auto cross = mk({{0, 1}, {1, 0}}, 2, 2);
  CHECK(ecgen::violates_ec(cross, 0, 1));
  CHECK(ecgen::violates_ec(cross, 1, 0));
  CHECK_FALSE(ecgen::violates_ec(cross, 0, 0));
}

TEST_CASE("monotone alignment admits every contiguous interval") {
  const auto a = mk({{0, 0}, {1, 1}, {2, 2}}, 3, 3);
  const auto spans = ecgen::permissible_spans(a, 3, 3);
  CHECK(spans.size() == 6);
  CHECK(same_spans(spans, oracle_spans(a, 3, 3)));
}

TEST_CASE("fully reversed alignment admits only the full span") {
  // Single-token intervals cross their outside links here, so the pairwise
  // in/out test leaves just the whole sentence.
  const auto a = mk({{0, 2}, {1, 1}, {2, 0}}, 3, 3);
  const auto spans = ecgen::permissible_spans(a, 3, 3);
  REQUIRE(spans.size() == 1);
  CHECK(spans[0] == SwitchSpan{0, 3, 0, 3});
  CHECK(same_spans(spans, oracle_spans(a, 3, 3)));
}

TEST_CASE("empty link set yields no spans") {
  SentenceAlignment a;
  CHECK(ecgen::permissible_spans(a, 4, 4).empty());
}

TEST_CASE("permissible_spans equals the side-window oracle on random alignments") {
  rng::Rng r(23);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t l1 = 1 + r.below(6), l2 = 1 + r.below(6);
    std::vector<Link> links;
    std::vector<std::size_t> perm(l2);
    for (std::size_t j = 0; j < l2; ++j) perm[j] = j;
    r.shuffle(perm);
    for (std::size_t i = 0; i < l1; ++i)
      if (r.below(4) != 0 && i < l2) links.push_back({i, perm[i]});
    const auto a = mk(links, l1, l2);
    CHECK(same_spans(ecgen::permissible_spans(a, l1, l2), oracle_spans(a, l1, l2)));
  }
}

TEST_CASE("generate_ec basics") {
  const auto p = pair("a", "x");
  const auto a = mk({{0, 0}}, 1, 1);
  ecgen::EcGenConfig cfg;
  cfg.samplesPerPair = 1;
  cfg.maxSwitches = 1;
  const auto out = ecgen::generate_ec(p, a, cfg);
  REQUIRE(out.size() == 1);
  CHECK(out[0].joined() == "x");

  ecgen::EcGenConfig off = cfg;
  off.maxSwitches = 0;
  CHECK(ecgen::generate_ec(p, a, off).empty());

  SentenceAlignment none;
  CHECK(ecgen::generate_ec(p, none, cfg).empty());
}

TEST_CASE("generate_ec is deterministic and distinct from the pure L1 side") {
  const auto p = pair("a b c d", "w x y z");
  const auto a = mk({{0, 0}, {1, 1}, {2, 2}, {3, 3}}, 4, 4);
  ecgen::EcGenConfig cfg;
  cfg.samplesPerPair = 4;
  cfg.rngSeed = 99;
  const auto out1 = ecgen::generate_ec(p, a, cfg);
  const auto out2 = ecgen::generate_ec(p, a, cfg);
  CHECK(out1 == out2);
  std::set<std::string> seen;
  for (const auto& s : out1) {
    CHECK(s.joined() != p.l1.joined());
    CHECK(seen.insert(s.joined()).second);
  }
}

TEST_CASE("every generated sentence is reachable by a validated span set") {
  rng::Rng r(31);
  for (int trial = 0; trial < 120; ++trial) {
    const std::size_t n = 2 + r.below(4);
    std::string l1, l2;
    for (std::size_t i = 0; i < n; ++i) {
      l1 += (i ? " a" : "a") + std::to_string(i);
      l2 += (i ? " x" : "x") + std::to_string(i);
    }
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    r.shuffle(perm);
    std::vector<Link> links;
    for (std::size_t i = 0; i < n; ++i)
      if (r.below(5) != 0) links.push_back({i, perm[i]});
    const auto p = pair(l1.c_str(), l2.c_str());
    const auto a = mk(links, n, n);

    ecgen::EcGenConfig cfg;
    cfg.rngSeed = 1000 + trial;
    const auto spans = ecgen::permissible_spans(a, n, n);

    // every output producible by substituting a validated span subset
    std::set<std::string> reachable;
    const std::size_t total = std::size_t(1) << spans.size();
    for (std::size_t mask = 1; mask < total; ++mask) {
      std::vector<SwitchSpan> chosen;
      for (std::size_t k = 0; k < spans.size(); ++k)
        if ((mask >> k) & 1) chosen.push_back(spans[k]);
      if (chosen.size() > cfg.maxSwitches) continue;
      if (!ecgen::validate_span_set(a, chosen, n, n)) continue;
      std::sort(chosen.begin(), chosen.end(), [](const SwitchSpan& x, const SwitchSpan& y) {
        return x.l1Begin < y.l1Begin;
      });
      corpus::Sentence s;
      std::size_t pos = 0;
      for (const auto& sp : chosen) {
        for (; pos < sp.l1Begin; ++pos) s.tokens.push_back(p.l1[pos]);
        for (std::size_t j = sp.l2Begin; j < sp.l2End; ++j) s.tokens.push_back(p.l2[j]);
        pos = sp.l1End;
      }
      for (; pos < n; ++pos) s.tokens.push_back(p.l1[pos]);
      reachable.insert(s.joined());
    }

    for (const auto& s : ecgen::generate_ec(p, a, cfg))
      CHECK(reachable.count(s.joined()) == 1);
  }
}

TEST_CASE("validate_span_set rejects bad span sets") {
  const auto a = mk({{0, 0}, {1, 1}, {2, 2}}, 3, 3);
  CHECK(ecgen::validate_span_set(a, {{0, 1, 0, 1}, {2, 3, 2, 3}}, 3, 3));
  CHECK_FALSE(ecgen::validate_span_set(a, {{0, 0, 0, 1}}, 3, 3));     // empty l1 range
  CHECK_FALSE(ecgen::validate_span_set(a, {{0, 4, 0, 3}}, 3, 3));     // out of bounds
  CHECK_FALSE(ecgen::validate_span_set(a, {{0, 2, 0, 2}, {1, 3, 1, 3}}, 3, 3));  // overlap
  const auto cross = mk({{0, 2}, {1, 1}, {2, 0}}, 3, 3);
  CHECK_FALSE(ecgen::validate_span_set(cross, {{0, 1, 2, 3}}, 3, 3));  // crosses outside links
}
