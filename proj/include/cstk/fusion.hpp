#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cstk/lm.hpp"

namespace cstk::fusion {

// Per-step character posteriors, the interface a decoder upstream would fill.
// Stored as log probabilities; each step must sum to 1 in the linear domain.
struct EmissionSequence {
  std::vector<std::string> inventory;  // C character surfaces
  neural::Matrix logProbs;             // T x C

  std::size_t steps() const { return logProbs.rows; }
  std::size_t chars() const { return logProbs.cols; }
};

// Throws DataError when a step's linear-domain mass is off by more than 1e-9.
void validate_emissions(const EmissionSequence& e);

EmissionSequence make_emissions(std::vector<std::string> inventory,
                                const std::vector<std::vector<double>>& linearRows);

// file format: JSON header line {"inventory": [...], "T": n, "C": m}, then T
// lines of C linear-domain probabilities.
EmissionSequence read_emissions(const std::string& path);
void write_emissions(const std::string& path, const EmissionSequence& e);

struct FusionConfig {
  double alpha = 1.0, beta = 0.3, gamma = 0.1;
  std::size_t beams = 8;
  std::size_t nBest = 1;
};

struct Hypothesis {
  std::vector<std::size_t> charIds;  // indices into the inventory
  double transScore = 0.0;
  double lmScore = 0.0;
  std::size_t wordCount = 0;
  double fusedScore = 0.0;

  std::string surface(const EmissionSequence& e) const;
  std::vector<std::string> words(const EmissionSequence& e) const;
};

double fused_score(double transScore, double lmScore, std::size_t wordCount,
                   const FusionConfig& cfg);

// Step-synchronous beam search over the emissions. Characters join into words
// at spaces; a CJK character is a word by itself. Completed words add LM
// log-probability increments and bump the word count; a trailing partial word
// is flushed after the last step.
std::vector<Hypothesis> fused_beam_decode(const EmissionSequence& emissions,
                                          const lm::LMModel& model, const FusionConfig& cfg);

}  // namespace cstk::fusion
