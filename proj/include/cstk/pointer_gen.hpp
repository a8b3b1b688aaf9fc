#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cstk/corpus.hpp"
#include "cstk/neural.hpp"

namespace cstk::pg {

using corpus::ParallelPair;
using corpus::Sentence;
using corpus::VocabularyTable;
using neural::Vec;

struct PointerGenConfig {
  std::size_t hiddenSize = 64;   // paper-scale: 500
  std::size_t embedSize = 64;
  std::size_t vocabCap = 2000;   // paper-scale: 50k
  std::size_t maxDecodeLen = 32;
  std::size_t beams = 5;
  std::size_t nBest = 3;
  neural::TrainerConfig trainer{1.0, 0.5, 2.0, 1};
  std::size_t maxEpochs = 50;
};

// Seq2seq with bidirectional encoder, bilinear attention and a copy gate.
// Encoder input is the concatenated parallel pair; the final distribution
// mixes the vocabulary softmax with the attention distribution over source
// positions, extended-vocabulary slots covering out-of-vocabulary source
// tokens.
struct PointerGenModel {
  PointerGenConfig cfg;
  VocabularyTable vocab;
  neural::Tensor embed;                    // V x E, shared by encoder and decoder
  neural::LstmCell encFwd, encBwd, dec;    // E->H each
  neural::Tensor bridgeH, bridgeHb;        // H x 2H, H x 1
  neural::Tensor bridgeC, bridgeCb;
  neural::Tensor attW;                     // H x 2H
  neural::Tensor outW, outB;               // V x 3H, V x 1
  neural::Tensor gateHStar, gateS, gateX, gateB;  // 1x2H, 1xH, 1xE, 1x1

  neural::ParamRegistry registry();
  std::size_t vocabSize() const { return vocab.size(); }
};

PointerGenModel make_pointer_gen(const PointerGenConfig& cfg, VocabularyTable vocab);

struct Example {
  ParallelPair pair;
  Sentence target;
};

// Source tokens with both embedding ids (OOV -> unk) and extended-vocabulary
// ids (OOV -> V + first-occurrence index).
struct EncodedSource {
  std::vector<std::string> tokens;
  std::vector<std::size_t> embedIds;
  std::vector<std::size_t> extIds;
  std::vector<std::string> oovList;

  std::size_t extVocabSize(std::size_t vocabSize) const { return vocabSize + oovList.size(); }
};

EncodedSource encode_source(const VocabularyTable& vocab, const ParallelPair& pair);

// ---- the three distribution-level operations ----

struct AttentionResult {
  Vec scores, weights, context;  // context = sum_i a_i h_i
};

// score_i = s^T W_a h_i ; weights = softmax(scores)
AttentionResult attention_general(const Vec& decoderState, const std::vector<Vec>& encoderStates,
                                  const neural::Matrix& attW);

struct CopyGateParams {
  Vec wHStar, wS, wX;
  double bias = 0.0;
};

// logistic(w_h*^T h* + w_s^T s + w_x^T x + b_ptr)
double copy_gate(const Vec& context, const Vec& decoderState, const Vec& inputEmbedding,
                 const CopyGateParams& p);

// P(w) = pGen * pVoc(w) + (1 - pGen) * sum_{i: ext_i = w} a_i over the
// extended vocabulary.
Vec final_dist(const Vec& pVoc, const Vec& attention, double pGen,
               const std::vector<std::size_t>& sourceExtIds, std::size_t extVocabSize);

// ---- training ----

// Teacher-forced mean per-token NLL; no gradient side effects.
double forward_loss(const PointerGenModel& model, const Example& ex);
// Same loss, accumulating analytic gradients into the model tensors.
double forward_backward(PointerGenModel& model, const Example& ex);

struct TrainResult {
  std::vector<double> lossCurve;       // mean training loss per epoch
  std::vector<double> validLossCurve;  // empty when no validation set
  std::vector<double> learningRates;
};

TrainResult train(PointerGenModel& model, const std::vector<Example>& examples,
                  const std::vector<Example>* validation = nullptr);

// ---- decoding ----

struct AttentionTrace {
  neural::Matrix weights;  // decode steps x source positions
  std::vector<std::string> sourceTokens, generatedTokens;
};

struct DecodeResult {
  Sentence sentence;
  double logScore = 0.0;
  AttentionTrace trace;
};

std::vector<DecodeResult> beam_decode(const PointerGenModel& model, const ParallelPair& pair,
                                      std::size_t beams, std::size_t nBest);
DecodeResult greedy_decode(const PointerGenModel& model, const ParallelPair& pair);

// Fraction of greedy-decoded tokens matching the target, over all examples.
double greedy_token_accuracy(const PointerGenModel& model, const std::vector<Example>& examples);

// CSV heatmap: generated tokens as rows, source tokens as columns.
std::string export_trace(const AttentionTrace& trace);

std::string pg_serialize(const PointerGenModel& model);
PointerGenModel pg_deserialize(const std::string& bytes);
void pg_save(const std::string& path, const PointerGenModel& model);
PointerGenModel pg_load(const std::string& path);

}  // namespace cstk::pg
