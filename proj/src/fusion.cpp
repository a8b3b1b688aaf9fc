#include "cstk/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace cstk::fusion {

void validate_emissions(const EmissionSequence& e) {
  if (e.steps() == 0) throw DataError("emission sequence is empty");
  if (e.inventory.size() != e.chars())
    throw DataError("emission inventory size does not match column count");
  for (std::size_t t = 0; t < e.steps(); ++t) {
    double mass = 0.0;
    for (std::size_t c = 0; c < e.chars(); ++c) mass += std::exp(e.logProbs.at(t, c));
    if (std::abs(mass - 1.0) > 1e-9)
      throw DataError("emission step " + std::to_string(t) + " mass " + std::to_string(mass) +
                      " is not 1");
  }
}

EmissionSequence make_emissions(std::vector<std::string> inventory,
                                const std::vector<std::vector<double>>& linearRows) {
  EmissionSequence e;
  e.inventory = std::move(inventory);
  e.logProbs = neural::Matrix(linearRows.size(), e.inventory.size());
  for (std::size_t t = 0; t < linearRows.size(); ++t) {
    if (linearRows[t].size() != e.inventory.size())
      throw DataError("emission row " + std::to_string(t) + " has wrong width");
    for (std::size_t c = 0; c < e.inventory.size(); ++c)
      e.logProbs.at(t, c) = std::log(std::max(linearRows[t][c], 1e-300));
  }
  validate_emissions(e);
  return e;
}

EmissionSequence read_emissions(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open emission file: " + path);
  std::string header;
  if (!std::getline(f, header)) throw DataError("emission file missing header: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& ex) {
    throw DataError("emission header is not valid JSON: " + std::string(ex.what()));
  }
  std::vector<std::string> inventory = j.at("inventory").get<std::vector<std::string>>();
  const std::size_t T = j.at("T").get<std::size_t>();
  const std::size_t C = j.at("C").get<std::size_t>();
  if (inventory.size() != C) throw DataError("emission header: inventory size != C");
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    std::vector<double> row;
    double p;
    while (is >> p) row.push_back(p);
    if (row.size() != C)
      throw DataError("emission row " + std::to_string(rows.size()) + " has " +
                      std::to_string(row.size()) + " values, expected " + std::to_string(C));
    rows.push_back(std::move(row));
  }
  if (rows.size() != T)
    throw DataError("emission file has " + std::to_string(rows.size()) + " rows, header says " +
                    std::to_string(T));
  return make_emissions(std::move(inventory), rows);
}

void write_emissions(const std::string& path, const EmissionSequence& e) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot open emission file for writing: " + path);
  nlohmann::json j;
  j["inventory"] = e.inventory;
  j["T"] = e.steps();
  j["C"] = e.chars();
  f << j.dump() << "\n";
  char buf[64];
  for (std::size_t t = 0; t < e.steps(); ++t) {
    for (std::size_t c = 0; c < e.chars(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", std::exp(e.logProbs.at(t, c)));
      f << (c ? " " : "") << buf;
    }
    f << "\n";
  }
  if (!f) throw DataError("emission write failed: " + path);
}

double fused_score(double transScore, double lmScore, std::size_t wordCount,
                   const FusionConfig& cfg) {
  return cfg.alpha * transScore + cfg.beta * lmScore +
         cfg.gamma * std::sqrt(static_cast<double>(wordCount));
}

namespace {

bool char_is_cjk(const std::string& surface) {
  for (char32_t cp : corpus::utf8_decode(surface))
    if (corpus::is_cjk(cp)) return true;
  return false;
}

struct SearchHyp {
  Hypothesis h;
  lm::LMState state;
  std::string buffer;  // partial word, no LM increment until completed
};

void complete_word(SearchHyp& sh, const lm::LMModel& model, const std::string& word) {
  sh.h.lmScore += lm::lm_score_next(model, sh.state, model.vocab.id(word));
  sh.h.wordCount += 1;
}

void append_char(SearchHyp& sh, const lm::LMModel& model, const std::string& surface) {
  if (surface == " ") {
    if (!sh.buffer.empty()) {
      complete_word(sh, model, sh.buffer);
      sh.buffer.clear();
    }
    return;
  }
  if (char_is_cjk(surface)) {
    if (!sh.buffer.empty()) {
      complete_word(sh, model, sh.buffer);
      sh.buffer.clear();
    }
    complete_word(sh, model, surface);
    return;
  }
  sh.buffer += surface;
}

bool hyp_order(const SearchHyp& a, const SearchHyp& b) {
  if (a.h.fusedScore != b.h.fusedScore) return a.h.fusedScore > b.h.fusedScore;
  return std::lexicographical_compare(a.h.charIds.begin(), a.h.charIds.end(),
                                      b.h.charIds.begin(), b.h.charIds.end());
}

}  // namespace

std::string Hypothesis::surface(const EmissionSequence& e) const {
  std::string out;
  for (std::size_t id : charIds) out += e.inventory[id];
  return out;
}

std::vector<std::string> Hypothesis::words(const EmissionSequence& e) const {
  std::vector<std::string> out;
  std::string buf;
  for (std::size_t id : charIds) {
    const std::string& s = e.inventory[id];
    if (s == " ") {
      if (!buf.empty()) out.push_back(buf);
      buf.clear();
    } else if (char_is_cjk(s)) {
      if (!buf.empty()) out.push_back(buf);
      buf.clear();
      out.push_back(s);
    } else {
      buf += s;
    }
  }
  if (!buf.empty()) out.push_back(buf);
  return out;
}

std::vector<Hypothesis> fused_beam_decode(const EmissionSequence& emissions,
                                          const lm::LMModel& model, const FusionConfig& cfg) {
  validate_emissions(emissions);
  if (cfg.beams < 1) throw DataError("fused_beam_decode: beams must be >= 1");

  std::vector<SearchHyp> beam;
  beam.push_back({Hypothesis{}, lm::lm_initial_state(model), ""});
  const std::size_t C = emissions.chars();

  for (std::size_t t = 0; t < emissions.steps(); ++t) {
    std::vector<SearchHyp> next;
    next.reserve(beam.size() * C);
    for (const SearchHyp& sh : beam) {
      for (std::size_t c = 0; c < C; ++c) {
        SearchHyp nh = sh;
        nh.h.charIds.push_back(c);
        nh.h.transScore += emissions.logProbs.at(t, c);
        append_char(nh, model, emissions.inventory[c]);
        nh.h.fusedScore = fused_score(nh.h.transScore, nh.h.lmScore, nh.h.wordCount, cfg);
        next.push_back(std::move(nh));
      }
    }
    std::sort(next.begin(), next.end(), hyp_order);
    if (next.size() > cfg.beams) next.resize(cfg.beams);
    beam = std::move(next);
  }

  for (SearchHyp& sh : beam) {
    if (!sh.buffer.empty()) {
      complete_word(sh, model, sh.buffer);
      sh.buffer.clear();
    }
    sh.h.fusedScore = fused_score(sh.h.transScore, sh.h.lmScore, sh.h.wordCount, cfg);
  }
  std::sort(beam.begin(), beam.end(), hyp_order);

  std::vector<Hypothesis> out;
  const std::size_t n = std::max<std::size_t>(cfg.nBest, 1);
  for (std::size_t i = 0; i < beam.size() && i < n; ++i) out.push_back(beam[i].h);
  return out;
}

}  // namespace cstk::fusion
