#include "cstk/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace cstk::corpus {

std::string Sentence::joined() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i].surface;
  }
  return out;
}

bool is_cjk(char32_t cp) {
  return (cp >= 0x4E00 && cp <= 0x9FFF) ||     // unified ideographs
         (cp >= 0x3400 && cp <= 0x4DBF) ||     // extension A
         (cp >= 0xF900 && cp <= 0xFAFF) ||     // compatibility ideographs
         (cp >= 0x20000 && cp <= 0x2EBEF);     // extensions B..F
}

Lang tag_language(std::string_view surface) {
  if (surface.empty()) throw DataError("tag_language: empty surface");
  for (char32_t cp : utf8_decode(surface))
    if (is_cjk(cp)) return Lang::L2;
  return Lang::L1;
}

Token make_token(std::string surface) {
  Token t;
  t.lang = tag_language(surface);
  t.surface = std::move(surface);
  return t;
}

Sentence tokenize(std::string_view raw, const TokenizePolicy& policy) {
  Sentence out;
  std::size_t i = 0;
  const std::size_t n = raw.size();
  auto isSpace = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (i < n) {
    while (i < n && isSpace(raw[i])) ++i;
    std::size_t j = i;
    while (j < n && !isSpace(raw[j])) ++j;
    if (j > i) {
      std::string_view seg = raw.substr(i, j - i);
      std::vector<char32_t> cps = utf8_decode(seg);
      bool hasCjk = false;
      for (char32_t cp : cps)
        if (is_cjk(cp)) { hasCjk = true; break; }
      if (hasCjk && policy.splitCjkSegments) {
        for (char32_t cp : cps) {
          std::string s;
          utf8_append(s, cp);
          out.tokens.push_back(make_token(std::move(s)));
        }
      } else {
        out.tokens.push_back(make_token(std::string(seg)));
      }
    }
    i = j;
  }
  return out;
}

const char* VocabularyTable::reservedSurface(std::size_t id) {
  switch (id) {
    case kUnk: return "<unk>";
    case kSep: return "<sep>";
    case kBos: return "<s>";
    case kEos: return "</s>";
    default: throw DataError("reservedSurface: not a reserved id");
  }
}

std::size_t VocabularyTable::id(std::string_view s) const {
  auto it = toId.find(std::string(s));
  return it == toId.end() ? kUnk : it->second;
}

bool VocabularyTable::contains(std::string_view s) const {
  return toId.find(std::string(s)) != toId.end();
}

const std::string& VocabularyTable::surface(std::size_t id) const {
  if (id >= surfaces.size()) throw DataError("VocabularyTable::surface: id out of range");
  return surfaces[id];
}

namespace {

VocabularyTable empty_vocab() {
  VocabularyTable v;
  for (std::size_t i = 0; i < VocabularyTable::kReserved; ++i) {
    v.surfaces.emplace_back(VocabularyTable::reservedSurface(i));
    v.toId[v.surfaces.back()] = i;
  }
  return v;
}

}  // namespace

VocabularyTable build_vocab(const std::vector<Sentence>& corpus, std::size_t cap) {
  if (cap < VocabularyTable::kReserved)
    throw DataError("build_vocab: cap below reserved token count");
  struct Entry {
    std::size_t count = 0;
    std::size_t firstSeen = 0;
  };
  std::unordered_map<std::string, Entry> freq;
  std::size_t order = 0;
  for (const Sentence& s : corpus)
    for (const Token& t : s.tokens) {
      auto [it, fresh] = freq.try_emplace(t.surface);
      if (fresh) it->second.firstSeen = order++;
      ++it->second.count;
    }
  std::vector<const std::pair<const std::string, Entry>*> ranked;
  ranked.reserve(freq.size());
  for (const auto& kv : freq) ranked.push_back(&kv);
  std::sort(ranked.begin(), ranked.end(), [](const auto* a, const auto* b) {
    if (a->second.count != b->second.count) return a->second.count > b->second.count;
    return a->second.firstSeen < b->second.firstSeen;
  });
  VocabularyTable v = empty_vocab();
  const std::size_t keep = std::min(ranked.size(), cap - VocabularyTable::kReserved);
  for (std::size_t i = 0; i < keep; ++i) {
    v.toId[ranked[i]->first] = v.surfaces.size();
    v.surfaces.push_back(ranked[i]->first);
  }
  return v;
}

Sentence concat_pair(const ParallelPair& pair) {
  Sentence out;
  out.tokens = pair.l1.tokens;
  Token sep;
  sep.surface = VocabularyTable::reservedSurface(VocabularyTable::kSep);
  sep.lang = Lang::L1;
  out.tokens.push_back(sep);
  out.tokens.insert(out.tokens.end(), pair.l2.tokens.begin(), pair.l2.tokens.end());
  return out;
}

std::vector<char32_t> utf8_decode(std::string_view s) {
  std::vector<char32_t> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const unsigned char c = static_cast<unsigned char>(s[i]);
    char32_t cp = 0;
    std::size_t len = 0;
    if (c < 0x80) {
      cp = c;
      len = 1;
    } else if ((c & 0xE0) == 0xC0) {
      cp = c & 0x1F;
      len = 2;
    } else if ((c & 0xF0) == 0xE0) {
      cp = c & 0x0F;
      len = 3;
    } else if ((c & 0xF8) == 0xF0) {
      cp = c & 0x07;
      len = 4;
    } else {
      throw DataError("utf8_decode: invalid lead byte");
    }
    if (i + len > s.size()) throw DataError("utf8_decode: truncated sequence");
    for (std::size_t k = 1; k < len; ++k) {
      const unsigned char cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) throw DataError("utf8_decode: invalid continuation byte");
      cp = (cp << 6) | (cc & 0x3F);
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

void utf8_append(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

std::string utf8_encode(const std::vector<char32_t>& cps) {
  std::string out;
  for (char32_t cp : cps) utf8_append(out, cp);
  return out;
}

namespace {

Sentence parse_tokenized(std::string_view line) {
  Sentence s;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ') ++j;
    if (j > i) s.tokens.push_back(make_token(std::string(line.substr(i, j - i))));
    i = j;
  }
  return s;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

}  // namespace

std::vector<ParallelPair> read_parallel_file(const std::string& path) {
  std::vector<ParallelPair> pairs;
  std::size_t lineNo = 0;
  for (const std::string& line : read_lines(path)) {
    ++lineNo;
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw DataError("parallel file " + path + ": missing tab on line " + std::to_string(lineNo));
    ParallelPair p;
    p.l1 = parse_tokenized(std::string_view(line).substr(0, tab));
    p.l2 = parse_tokenized(std::string_view(line).substr(tab + 1));
    if (p.l1.empty() || p.l2.empty())
      throw DataError("parallel file " + path + ": empty side on line " + std::to_string(lineNo));
    pairs.push_back(std::move(p));
  }
  return pairs;
}

void write_parallel_file(const std::string& path, const std::vector<ParallelPair>& pairs) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open file for writing: " + path);
  for (const ParallelPair& p : pairs) f << p.l1.joined() << '\t' << p.l2.joined() << '\n';
}

std::vector<Sentence> read_corpus_file(const std::string& path) {
  std::vector<Sentence> sents;
  for (const std::string& line : read_lines(path)) {
    Sentence s = parse_tokenized(line);
    if (!s.empty()) sents.push_back(std::move(s));
  }
  return sents;
}

void write_corpus_file(const std::string& path, const std::vector<Sentence>& sents) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open file for writing: " + path);
  for (const Sentence& s : sents) f << s.joined() << '\n';
}

void write_vocab_file(const std::string& path, const VocabularyTable& vocab) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open file for writing: " + path);
  for (std::size_t i = VocabularyTable::kReserved; i < vocab.surfaces.size(); ++i)
    f << vocab.surfaces[i] << '\n';
}

VocabularyTable read_vocab_file(const std::string& path) {
  VocabularyTable v = empty_vocab();
  for (const std::string& line : read_lines(path)) {
    if (line.empty()) continue;
    if (v.toId.count(line)) throw DataError("vocabulary file " + path + ": duplicate token " + line);
    v.toId[line] = v.surfaces.size();
    v.surfaces.push_back(line);
  }
  return v;
}

}  // namespace cstk::corpus
