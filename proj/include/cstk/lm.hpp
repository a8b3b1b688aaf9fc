#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "cstk/corpus.hpp"
#include "cstk/neural.hpp"

namespace cstk::lm {

using corpus::Sentence;
using corpus::VocabularyTable;
using neural::Vec;

struct LMConfig {
  std::size_t hiddenSize = 200;  // embedding size equals this (tied weights)
  std::size_t unrollSteps = 35;
  double dropoutRate = 0.2;
  neural::TrainerConfig trainer{20.0, 0.75, 0.25, 1};
  std::size_t earlyStopPatience = 5;
  double fineTuneLr = 1.0;
  std::size_t maxEpochs = 100;
};

// Two-layer LSTM with tied input embedding / output projection: the embedding
// tensor doubles as the softmax weight matrix.
struct LMModel {
  LMConfig cfg;
  VocabularyTable vocab;
  neural::Tensor embed;  // V x H, shared storage for input and output
  neural::LstmCell layer1, layer2;
  neural::Tensor bOut;  // V x 1

  neural::ParamRegistry registry();
  std::size_t vocabSize() const { return vocab.size(); }
};

LMModel make_lm(const LMConfig& cfg, VocabularyTable vocab);

enum class Strategy { RealOnly, GenOnly, Concat, TwoStep };
const char* strategy_name(Strategy s);

enum Bucket { EnEn = 0, EnZh = 1, ZhEn = 2, ZhZh = 3 };
const char* bucket_name(int b);

struct BucketStat {
  std::size_t tokenCount = 0;
  double nllSum = 0.0;
  double ppl() const;
};

struct PerplexityReport {
  double overall = 0.0;
  std::size_t tokenCount = 0;
  std::array<BucketStat, 4> buckets;
};

struct TrainResult {
  std::vector<double> validPplHistory;  // one entry per epoch (per phase for TwoStep)
  std::vector<double> learningRates;
  std::size_t epochsRun = 0;
};

// Trains in place. `generated` is required for GenOnly / Concat / TwoStep.
TrainResult train_lm(LMModel& model, const std::vector<Sentence>& real,
                     const std::vector<Sentence>* generated, Strategy strategy,
                     const std::vector<Sentence>& valid);

PerplexityReport eval_ppl(const LMModel& model, const std::vector<Sentence>& corpus);

// PPL over the continuous training stream (state carried across sentences),
// the same quantity the training loss optimizes.
double stream_ppl(const LMModel& model, const std::vector<Sentence>& corpus);

struct LMState {
  Vec h1, c1, h2, c2;
};

// State after consuming the begin marker.
LMState lm_initial_state(const LMModel& model);
// log p(tokenId | state), then advances the state by consuming tokenId.
double lm_score_next(const LMModel& model, LMState& state, std::size_t tokenId);

// Sum of per-token log probabilities including the end-of-sentence token.
double score_sentence(const LMModel& model, const Sentence& s);

struct MatrixSplits {
  std::vector<Sentence> realTrain, valid, test;
};

struct MatrixRow {
  std::string strategy;
  PerplexityReport valid, test;
};

std::vector<MatrixRow> run_strategy_matrix(
    const MatrixSplits& splits,
    const std::vector<std::pair<std::string, std::vector<Sentence>>>& generated,
    const LMConfig& cfg, std::size_t vocabCap);

std::string lm_serialize(const LMModel& model);
LMModel lm_deserialize(const std::string& bytes);
void lm_save(const std::string& path, const LMModel& model);
LMModel lm_load(const std::string& path);

}  // namespace cstk::lm
