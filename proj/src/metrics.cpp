#include "cstk/metrics.hpp"

#include <algorithm>
#include <set>
#include <string>

namespace cstk::metrics {

using corpus::Lang;

UtteranceStats utterance_stats(const Sentence& s) {
  UtteranceStats st;
  st.tokenCount = s.size();
  for (const auto& t : s.tokens) ++st.perLang[static_cast<int>(t.lang)];
  st.switchPoints = count_switch_points(s);
  return st;
}

std::size_t count_switch_points(const Sentence& s) {
  std::size_t p = 0;
  for (std::size_t i = 1; i < s.size(); ++i)
    if (s[i].lang != s[i - 1].lang) ++p;
  return p;
}

double cmi_utterance(const Sentence& s) {
  if (s.empty()) throw DataError("cmi_utterance: empty sentence");
  const UtteranceStats st = utterance_stats(s);
  const std::size_t maxLang = std::max(st.perLang[0], st.perLang[1]);
  return static_cast<double>(st.tokenCount - maxLang + st.switchPoints) /
         static_cast<double>(st.tokenCount);
}

double cmi_corpus(const std::vector<Sentence>& c) {
  if (c.empty()) throw DataError("cmi_corpus: empty corpus");
  double sum = 0.0;
  for (const Sentence& s : c) sum += cmi_utterance(s);
  return sum / static_cast<double>(c.size());
}

double spf_corpus(const std::vector<Sentence>& c) {
  if (c.empty()) throw DataError("spf_corpus: empty corpus");
  std::size_t switches = 0, boundaries = 0;
  for (const Sentence& s : c) {
    if (s.empty()) throw DataError("spf_corpus: empty sentence in corpus");
    switches += count_switch_points(s);
    boundaries += s.size() - 1;
  }
  if (boundaries == 0) throw DataError("spf_corpus: corpus has no word boundaries");
  return static_cast<double>(switches) / static_cast<double>(boundaries);
}

namespace {

std::set<std::string> unique_ngrams(const std::vector<Sentence>& c, int n) {
  std::set<std::string> grams;
  for (const Sentence& s : c) {
    if (s.size() < static_cast<std::size_t>(n)) continue;
    for (std::size_t i = 0; i + n <= s.size(); ++i) {
      std::string key;
      for (int k = 0; k < n; ++k) {
        if (k) key += '\x1f';
        key += s[i + k].surface;
      }
      grams.insert(std::move(key));
    }
  }
  return grams;
}

}  // namespace

NgramNoveltyRow ngram_novelty(const std::vector<Sentence>& generated,
                              const std::vector<Sentence>& reference, int n) {
  if (n < 1) throw DataError("ngram_novelty: n must be >= 1");
  const std::set<std::string> ref = unique_ngrams(reference, n);
  if (ref.empty())
    throw DataError("ngram_novelty: reference has no n-grams of order " + std::to_string(n));
  const std::set<std::string> gen = unique_ngrams(generated, n);
  NgramNoveltyRow row;
  row.n = n;
  row.refUniqueCount = ref.size();
  for (const std::string& g : gen)
    if (!ref.count(g)) ++row.newCount;
  row.ratio = static_cast<double>(row.newCount) / static_cast<double>(row.refUniqueCount);
  return row;
}

std::size_t edit_distance(const std::vector<char32_t>& a, const std::vector<char32_t>& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

double cer(const std::vector<char32_t>& reference, const std::vector<char32_t>& hypothesis) {
  if (reference.empty()) throw DataError("cer: empty reference");
  return static_cast<double>(edit_distance(reference, hypothesis)) /
         static_cast<double>(reference.size());
}

std::vector<char32_t> cer_chars(const Sentence& s) {
  std::vector<char32_t> out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i > 0 && s[i - 1].lang == Lang::L1 && s[i].lang == Lang::L1) out.push_back(U' ');
    const std::vector<char32_t> cps = corpus::utf8_decode(s[i].surface);
    out.insert(out.end(), cps.begin(), cps.end());
  }
  return out;
}

}  // namespace cstk::metrics
