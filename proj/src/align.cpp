#include "cstk/align.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace cstk::align {

double TranslationTable::prob(const std::string& q, const std::string& e) const {
  auto it = rows.find(q);
  if (it == rows.end()) return kFloorProb;
  auto jt = it->second.find(e);
  if (jt == it->second.end()) return kFloorProb;
  return std::max(jt->second, kFloorProb);
}

TranslationTable uniform_table(const std::vector<ParallelPair>& pairs) {
  TranslationTable t;
  for (const ParallelPair& p : pairs) {
    for (const auto& e : p.l2.tokens) {
      t.rows[TranslationTable::kNull][e.surface] = 1.0;
      for (const auto& q : p.l1.tokens) t.rows[q.surface][e.surface] = 1.0;
    }
  }
  for (auto& [q, row] : t.rows) {
    const double z = static_cast<double>(row.size());
    for (auto& [e, pr] : row) pr = 1.0 / z;
  }
  return t;
}

TranslationTable train_ibm1(const std::vector<ParallelPair>& pairs, std::size_t iterations,
                            double diagonalBias) {
  if (pairs.empty()) throw DataError("train_ibm1: empty pair list");
  if (iterations < 1) throw DataError("train_ibm1: iterations must be >= 1");
  TranslationTable t = uniform_table(pairs);
  for (std::size_t iter = 0; iter < iterations; ++iter) {
    std::unordered_map<std::string, std::unordered_map<std::string, double>> counts;
    for (const ParallelPair& p : pairs) {
      const std::size_t m = p.l1.size(), n = p.l2.size();
      for (std::size_t j = 0; j < n; ++j) {
        const std::string& e = p.l2[j].surface;
        // posterior over sources, index 0 = NULL, 1..m = L1 tokens
        std::vector<double> post(m + 1);
        double z = 0.0;
        post[0] = t.prob(TranslationTable::kNull, e);
        z += post[0];
        for (std::size_t i = 0; i < m; ++i) {
          double w = t.prob(p.l1[i].surface, e);
          if (diagonalBias > 0.0) {
            const double di = static_cast<double>(i) / static_cast<double>(m);
            const double dj = static_cast<double>(j) / static_cast<double>(n);
            w *= std::exp(-diagonalBias * std::abs(di - dj));
          }
          post[i + 1] = w;
          z += w;
        }
        counts[TranslationTable::kNull][e] += post[0] / z;
        for (std::size_t i = 0; i < m; ++i) counts[p.l1[i].surface][e] += post[i + 1] / z;
      }
    }
    for (auto& [q, row] : counts) {
      double z = 0.0;
      for (const auto& [e, c] : row) z += c;
      auto& trow = t.rows[q];
      for (const auto& [e, c] : row) trow[e] = c / z;
    }
  }
  return t;
}

double ibm1_log_likelihood(const std::vector<ParallelPair>& pairs, const TranslationTable& table) {
  double ll = 0.0;
  for (const ParallelPair& p : pairs) {
    const std::size_t m = p.l1.size();
    for (const auto& e : p.l2.tokens) {
      double s = table.prob(TranslationTable::kNull, e.surface);
      for (const auto& q : p.l1.tokens) s += table.prob(q.surface, e.surface);
      ll += std::log(s / static_cast<double>(m + 1));
    }
  }
  return ll;
}

SentenceAlignment make_alignment(std::vector<Link> links, std::size_t l1Len, std::size_t l2Len) {
  for (const Link& l : links)
    if (l.i >= l1Len || l.j >= l2Len)
      throw DataError("alignment link " + std::to_string(l.i) + "-" + std::to_string(l.j) +
                      " out of range for lengths " + std::to_string(l1Len) + "/" +
                      std::to_string(l2Len));
  std::sort(links.begin(), links.end(), [](const Link& a, const Link& b) {
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  });
  links.erase(std::unique(links.begin(), links.end()), links.end());
  SentenceAlignment a;
  a.links = std::move(links);
  a.u.reserve(a.links.size());
  a.v.reserve(a.links.size());
  for (const Link& l : a.links) {
    a.u.push_back(l.i);
    a.v.push_back(l.j);
  }
  return a;
}

SentenceAlignment viterbi_align(const ParallelPair& pair, const TranslationTable& table) {
  std::vector<Link> links;
  const std::size_t n = pair.l2.size();
  for (std::size_t i = 0; i < pair.l1.size(); ++i) {
    const std::string& q = pair.l1[i].surface;
    std::size_t best = 0;
    double bestP = -1.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double p = table.prob(q, pair.l2[j].surface);
      if (p > bestP) {
        bestP = p;
        best = j;
      }
    }
    if (n == 0) continue;
    if (table.prob(TranslationTable::kNull, pair.l2[best].surface) > bestP) continue;
    links.push_back({i, best});
  }
  return make_alignment(std::move(links), pair.l1.size(), pair.l2.size());
}

SentenceAlignment import_pharaoh(const std::string& line, const ParallelPair& pair) {
  std::vector<Link> links;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && line[pos] == ' ') ++pos;
    std::size_t end = pos;
    while (end < line.size() && line[end] != ' ') ++end;
    if (end > pos) {
      const std::string tok = line.substr(pos, end - pos);
      const std::size_t dash = tok.find('-');
      if (dash == std::string::npos || dash == 0 || dash + 1 >= tok.size())
        throw DataError("import_pharaoh: malformed link \"" + tok + "\"");
      std::size_t i = 0, j = 0;
      try {
        std::size_t used1 = 0, used2 = 0;
        i = std::stoul(tok.substr(0, dash), &used1);
        j = std::stoul(tok.substr(dash + 1), &used2);
        if (used1 != dash || used2 != tok.size() - dash - 1)
          throw DataError("import_pharaoh: malformed link \"" + tok + "\"");
      } catch (const std::invalid_argument&) {
        throw DataError("import_pharaoh: malformed link \"" + tok + "\"");
      } catch (const std::out_of_range&) {
        throw DataError("import_pharaoh: malformed link \"" + tok + "\"");
      }
      if (i >= pair.l1.size() || j >= pair.l2.size())
        throw DataError("import_pharaoh: link \"" + tok + "\" out of range for lengths " +
                        std::to_string(pair.l1.size()) + "/" + std::to_string(pair.l2.size()));
      links.push_back({i, j});
    }
    pos = end;
  }
  return make_alignment(std::move(links), pair.l1.size(), pair.l2.size());
}

std::string to_pharaoh(const SentenceAlignment& a) {
  std::string out;
  for (std::size_t k = 0; k < a.links.size(); ++k) {
    if (k) out += ' ';
    out += std::to_string(a.links[k].i) + "-" + std::to_string(a.links[k].j);
  }
  return out;
}

void write_table_file(const std::string& path, const TranslationTable& table) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open file for writing: " + path);
  // stable output order for reproducibility
  std::vector<const std::string*> qs;
  for (const auto& [q, row] : table.rows) qs.push_back(&q);
  std::sort(qs.begin(), qs.end(), [](const auto* a, const auto* b) { return *a < *b; });
  char buf[64];
  for (const std::string* q : qs) {
    const auto& row = table.rows.at(*q);
    std::vector<const std::string*> es;
    for (const auto& [e, p] : row) es.push_back(&e);
    std::sort(es.begin(), es.end(), [](const auto* a, const auto* b) { return *a < *b; });
    for (const std::string* e : es) {
      std::snprintf(buf, sizeof(buf), "%.17g", row.at(*e));
      f << *q << '\t' << *e << '\t' << buf << '\n';
    }
  }
}

TranslationTable read_table_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open file: " + path);
  TranslationTable t;
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(f, line)) {
    ++lineNo;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t t1 = line.find('\t');
    const std::size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos)
      throw DataError("table file " + path + ": malformed line " + std::to_string(lineNo));
    const std::string q = line.substr(0, t1);
    const std::string e = line.substr(t1 + 1, t2 - t1 - 1);
    const double p = std::stod(line.substr(t2 + 1));
    t.rows[q][e] = p;
  }
  return t;
}

}  // namespace cstk::align
