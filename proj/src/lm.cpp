#include "cstk/lm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "cstk/rng.hpp"
#include "json.hpp"

namespace cstk::lm {

using corpus::Lang;
using neural::LstmStepCache;
using neural::Matrix;

neural::ParamRegistry LMModel::registry() {
  neural::ParamRegistry reg;
  reg.add(embed);
  layer1.registerParams(reg);
  layer2.registerParams(reg);
  reg.add(bOut);
  return reg;
}

LMModel make_lm(const LMConfig& cfg, VocabularyTable vocab) {
  LMModel m;
  m.cfg = cfg;
  m.vocab = std::move(vocab);
  const std::size_t V = m.vocab.size();
  const std::size_t H = cfg.hiddenSize;
  rng::Rng r(cfg.trainer.rngSeed);
  m.embed = neural::Tensor("lm.embed", V, H);
  neural::init_uniform(m.embed.w, r);
  m.layer1.init("lm.layer1", H, H, r);
  m.layer2.init("lm.layer2", H, H, r);
  m.bOut = neural::Tensor("lm.b_out", V, 1);
  return m;
}

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::RealOnly: return "real-only";
    case Strategy::GenOnly: return "gen-only";
    case Strategy::Concat: return "concat";
    case Strategy::TwoStep: return "two-step";
  }
  return "?";
}

const char* bucket_name(int b) {
  switch (b) {
    case EnEn: return "en-en";
    case EnZh: return "en-zh";
    case ZhEn: return "zh-en";
    case ZhZh: return "zh-zh";
  }
  return "?";
}

double BucketStat::ppl() const {
  if (tokenCount == 0) return 0.0;
  return std::exp(nllSum / static_cast<double>(tokenCount));
}

namespace {

std::vector<std::size_t> corpus_stream(const LMModel& m, const std::vector<Sentence>& sents,
                                       const std::vector<std::size_t>& order) {
  std::vector<std::size_t> stream;
  for (std::size_t k : order) {
    for (const auto& t : sents[k].tokens) stream.push_back(m.vocab.id(t.surface));
    stream.push_back(VocabularyTable::kEos);
  }
  return stream;
}

Vec dropout_mask(std::size_t n, double rate, rng::Rng& r) {
  Vec mask(n, 1.0);
  if (rate <= 0.0) return mask;
  const double keep = 1.0 - rate;
  for (double& x : mask) x = (r.uniform() < keep) ? 1.0 / keep : 0.0;
  return mask;
}

struct StepCacheLM {
  Vec x, xd, maskEmb, maskMid, h1d;
  LstmStepCache c1, c2;
  Vec probs;
  std::size_t inId = 0, tgtId = 0;
};

// One TBPTT window: forward, backward, parameter step. Returns summed NLL.
double train_window(LMModel& m, neural::ParamRegistry& reg, const std::vector<std::size_t>& stream,
                    std::size_t begin, std::size_t end, Vec& h1, Vec& c1, Vec& h2, Vec& c2,
                    double lr, rng::Rng& dropRng) {
  const std::size_t H = m.cfg.hiddenSize;
  const std::size_t T = end - begin;
  std::vector<StepCacheLM> caches(T);
  double nll = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    StepCacheLM& cc = caches[t];
    cc.inId = (begin + t == 0) ? VocabularyTable::kBos : stream[begin + t - 1];
    cc.tgtId = stream[begin + t];
    cc.x = m.embed.w.row(cc.inId);
    cc.maskEmb = dropout_mask(H, m.cfg.dropoutRate, dropRng);
    cc.xd.resize(H);
    for (std::size_t k = 0; k < H; ++k) cc.xd[k] = cc.x[k] * cc.maskEmb[k];
    cc.c1 = neural::lstm_step(m.layer1, cc.xd, h1, c1);
    h1 = cc.c1.h;
    c1 = cc.c1.c;
    cc.maskMid = dropout_mask(H, m.cfg.dropoutRate, dropRng);
    cc.h1d.resize(H);
    for (std::size_t k = 0; k < H; ++k) cc.h1d[k] = cc.c1.h[k] * cc.maskMid[k];
    cc.c2 = neural::lstm_step(m.layer2, cc.h1d, h2, c2);
    h2 = cc.c2.h;
    c2 = cc.c2.c;
    Vec logits = m.embed.w.mul(cc.c2.h);
    for (std::size_t w = 0; w < logits.size(); ++w) logits[w] += m.bOut.w.v[w];
    auto sm = neural::softmax_xent(logits, cc.tgtId);
    nll += sm.loss;
    cc.probs = std::move(sm.probs);
  }

  reg.zeroGrad();
  const double invT = 1.0 / static_cast<double>(T);
  Vec dh1(H, 0.0), dc1(H, 0.0), dh2(H, 0.0), dc2(H, 0.0);
  for (std::size_t t = T; t-- > 0;) {
    StepCacheLM& cc = caches[t];
    Vec dlogits = cc.probs;
    dlogits[cc.tgtId] -= 1.0;
    for (double& g : dlogits) g *= invT;
    m.embed.g.addOuter(dlogits, cc.c2.h);
    Vec dh2Local = m.embed.w.mulT(dlogits);
    for (std::size_t k = 0; k < H; ++k) dh2[k] += dh2Local[k];
    for (std::size_t w = 0; w < dlogits.size(); ++w) m.bOut.g.v[w] += dlogits[w];

    Vec dh1d(H, 0.0), dh2Prev(H, 0.0), dc2Prev(H, 0.0);
    neural::lstm_backward(m.layer2, cc.c2, dh2, dc2, dh1d, dh2Prev, dc2Prev);
    for (std::size_t k = 0; k < H; ++k) dh1[k] += dh1d[k] * cc.maskMid[k];

    Vec dxd(H, 0.0), dh1Prev(H, 0.0), dc1Prev(H, 0.0);
    neural::lstm_backward(m.layer1, cc.c1, dh1, dc1, dxd, dh1Prev, dc1Prev);
    Vec dx(H);
    for (std::size_t k = 0; k < H; ++k) dx[k] = dxd[k] * cc.maskEmb[k];
    m.embed.g.addRow(cc.inId, dx);

    dh2 = dh2Prev;
    dc2 = dc2Prev;
    dh1 = dh1Prev;
    dc1 = dc1Prev;
  }
  neural::sgd_clip_step(reg, lr, m.cfg.trainer.clipNorm);
  return nll;
}

struct Snapshot {
  std::vector<Vec> weights;
};

Snapshot take_snapshot(neural::ParamRegistry& reg) {
  Snapshot s;
  for (auto* t : reg.items) s.weights.push_back(t->w.v);
  return s;
}

void restore_snapshot(neural::ParamRegistry& reg, const Snapshot& s) {
  for (std::size_t i = 0; i < reg.items.size(); ++i) reg.items[i]->w.v = s.weights[i];
}

void train_phase(LMModel& m, const std::vector<Sentence>& train,
                 const std::vector<Sentence>& valid, double initialLr, std::uint64_t seed,
                 TrainResult& result) {
  if (train.empty()) throw DataError("train_lm: empty training corpus");
  neural::ParamRegistry reg = m.registry();
  rng::Rng dropRng(rng::mix(seed, 0xD0));
  double lr = initialLr;
  double bestVal = std::numeric_limits<double>::infinity();
  std::size_t badEvals = 0;
  Snapshot best = take_snapshot(reg);
  const std::size_t H = m.cfg.hiddenSize;
  for (std::size_t epoch = 0; epoch < m.cfg.maxEpochs; ++epoch) {
    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng::Rng shuf(rng::mix(seed, epoch + 1));
    shuf.shuffle(order);
    const std::vector<std::size_t> stream = corpus_stream(m, train, order);
    Vec h1(H, 0.0), c1(H, 0.0), h2(H, 0.0), c2(H, 0.0);
    for (std::size_t begin = 0; begin < stream.size(); begin += m.cfg.unrollSteps) {
      const std::size_t end = std::min(begin + m.cfg.unrollSteps, stream.size());
      train_window(m, reg, stream, begin, end, h1, c1, h2, c2, lr, dropRng);
    }
    const double valPpl = eval_ppl(m, valid).overall;
    result.validPplHistory.push_back(valPpl);
    result.learningRates.push_back(lr);
    ++result.epochsRun;
    if (valPpl < bestVal - 1e-4) {
      bestVal = valPpl;
      badEvals = 0;
      best = take_snapshot(reg);
    } else {
      ++badEvals;
      lr *= m.cfg.trainer.decayFactor;
      if (badEvals >= m.cfg.earlyStopPatience) break;
    }
  }
  restore_snapshot(reg, best);
}

}  // namespace

TrainResult train_lm(LMModel& model, const std::vector<Sentence>& real,
                     const std::vector<Sentence>* generated, Strategy strategy,
                     const std::vector<Sentence>& valid) {
  const bool needsGen = strategy != Strategy::RealOnly;
  if (needsGen && generated == nullptr)
    throw DataError(std::string("train_lm: strategy ") + strategy_name(strategy) +
                    " requires a generated corpus");
  TrainResult result;
  const std::uint64_t seed = model.cfg.trainer.rngSeed;
  switch (strategy) {
    case Strategy::RealOnly:
      train_phase(model, real, valid, model.cfg.trainer.learningRate, seed, result);
      break;
    case Strategy::GenOnly:
      train_phase(model, *generated, valid, model.cfg.trainer.learningRate, seed, result);
      break;
    case Strategy::Concat: {
      std::vector<Sentence> both = real;
      both.insert(both.end(), generated->begin(), generated->end());
      train_phase(model, both, valid, model.cfg.trainer.learningRate, seed, result);
      break;
    }
    case Strategy::TwoStep: {
      train_phase(model, *generated, valid, model.cfg.trainer.learningRate, seed, result);
      // phase boundary goes through the checkpoint bytes: reload is bit-exact
      model = lm_deserialize(lm_serialize(model));
      train_phase(model, real, valid, model.cfg.fineTuneLr, rng::mix(seed, 0xF17E), result);
      break;
    }
  }
  return result;
}

namespace {

// Consume one token; returns the pre-consumption output logits.
Vec lm_logits(const LMModel& m, const LMState& st) {
  Vec logits = m.embed.w.mul(st.h2);
  for (std::size_t w = 0; w < logits.size(); ++w) logits[w] += m.bOut.w.v[w];
  return logits;
}

void lm_consume(const LMModel& m, LMState& st, std::size_t tokenId) {
  const Vec x = m.embed.w.row(tokenId);
  auto c1 = neural::lstm_step(m.layer1, x, st.h1, st.c1);
  st.h1 = c1.h;
  st.c1 = c1.c;
  auto c2 = neural::lstm_step(m.layer2, c1.h, st.h2, st.c2);
  st.h2 = c2.h;
  st.c2 = c2.c;
}

}  // namespace

LMState lm_initial_state(const LMModel& model) {
  LMState st;
  const std::size_t H = model.cfg.hiddenSize;
  st.h1.assign(H, 0.0);
  st.c1.assign(H, 0.0);
  st.h2.assign(H, 0.0);
  st.c2.assign(H, 0.0);
  lm_consume(model, st, VocabularyTable::kBos);
  return st;
}

double lm_score_next(const LMModel& model, LMState& state, std::size_t tokenId) {
  const Vec probs = neural::softmax(lm_logits(model, state));
  if (tokenId >= probs.size()) throw DataError("lm_score_next: token id out of range");
  const double lp = std::log(std::max(probs[tokenId], 1e-300));
  lm_consume(model, state, tokenId);
  return lp;
}

double score_sentence(const LMModel& model, const Sentence& s) {
  LMState st = lm_initial_state(model);
  double total = 0.0;
  for (const auto& t : s.tokens) total += lm_score_next(model, st, model.vocab.id(t.surface));
  const Vec probs = neural::softmax(lm_logits(model, st));
  total += std::log(std::max(probs[VocabularyTable::kEos], 1e-300));
  return total;
}

PerplexityReport eval_ppl(const LMModel& model, const std::vector<Sentence>& corpus) {
  if (corpus.empty()) throw DataError("eval_ppl: empty corpus");
  PerplexityReport rep;
  double nllSum = 0.0;
  for (const Sentence& s : corpus) {
    LMState st = lm_initial_state(model);
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double nll = -lm_score_next(model, st, model.vocab.id(s[i].surface));
      const Lang cur = s[i].lang;
      const Lang prev = i == 0 ? cur : s[i - 1].lang;
      int b;
      if (prev == Lang::L1)
        b = cur == Lang::L1 ? EnEn : EnZh;
      else
        b = cur == Lang::L2 ? ZhZh : ZhEn;
      rep.buckets[b].tokenCount += 1;
      rep.buckets[b].nllSum += nll;
      nllSum += nll;
      rep.tokenCount += 1;
    }
  }
  if (rep.tokenCount == 0) throw DataError("eval_ppl: no scorable tokens");
  rep.overall = std::exp(nllSum / static_cast<double>(rep.tokenCount));
  return rep;
}

double stream_ppl(const LMModel& model, const std::vector<Sentence>& corpus) {
  if (corpus.empty()) throw DataError("stream_ppl: empty corpus");
  std::vector<std::size_t> stream;
  for (const Sentence& s : corpus) {
    for (const auto& t : s.tokens) stream.push_back(model.vocab.id(t.surface));
    stream.push_back(VocabularyTable::kEos);
  }
  LMState st;
  const std::size_t H = model.cfg.hiddenSize;
  st.h1.assign(H, 0.0);
  st.c1.assign(H, 0.0);
  st.h2.assign(H, 0.0);
  st.c2.assign(H, 0.0);
  double nll = 0.0;
  std::size_t prev = VocabularyTable::kBos;
  for (std::size_t id : stream) {
    lm_consume(model, st, prev);
    const Vec probs = neural::softmax(lm_logits(model, st));
    nll -= std::log(std::max(probs[id], 1e-300));
    prev = id;
  }
  return std::exp(nll / static_cast<double>(stream.size()));
}

std::vector<MatrixRow> run_strategy_matrix(
    const MatrixSplits& splits,
    const std::vector<std::pair<std::string, std::vector<Sentence>>>& generated,
    const LMConfig& cfg, std::size_t vocabCap) {
  if (splits.valid.empty() || splits.test.empty())
    throw DataError("run_strategy_matrix: validation and test splits required");
  std::vector<Sentence> vocabSource = splits.realTrain;
  for (const auto& [tag, c] : generated) vocabSource.insert(vocabSource.end(), c.begin(), c.end());
  const VocabularyTable vocab = corpus::build_vocab(vocabSource, vocabCap);

  std::vector<MatrixRow> rows;
  auto runCell = [&](const std::string& name, Strategy strat,
                     const std::vector<Sentence>* gen) {
    try {
      LMModel m = make_lm(cfg, vocab);
      train_lm(m, splits.realTrain, gen, strat, splits.valid);
      MatrixRow row;
      row.strategy = name;
      row.valid = eval_ppl(m, splits.valid);
      row.test = eval_ppl(m, splits.test);
      rows.push_back(std::move(row));
    } catch (const std::exception& e) {
      throw DataError("strategy-matrix cell \"" + name + "\" failed: " + e.what());
    }
  };

  runCell("(1) rCS", Strategy::RealOnly, nullptr);
  for (const auto& [tag, gen] : generated) runCell("(2) " + tag, Strategy::GenOnly, &gen);
  for (const auto& [tag, gen] : generated) runCell("(3) " + tag + " & rCS", Strategy::Concat, &gen);
  for (const auto& [tag, gen] : generated) runCell("(4) " + tag + " -> rCS", Strategy::TwoStep, &gen);
  return rows;
}

std::string lm_serialize(const LMModel& model) {
  nlohmann::json j;
  j["type"] = "lm";
  j["hiddenSize"] = model.cfg.hiddenSize;
  j["unrollSteps"] = model.cfg.unrollSteps;
  j["dropoutRate"] = model.cfg.dropoutRate;
  j["earlyStopPatience"] = model.cfg.earlyStopPatience;
  j["fineTuneLr"] = model.cfg.fineTuneLr;
  j["maxEpochs"] = model.cfg.maxEpochs;
  j["trainer"] = {{"learningRate", model.cfg.trainer.learningRate},
                  {"decayFactor", model.cfg.trainer.decayFactor},
                  {"clipNorm", model.cfg.trainer.clipNorm},
                  {"rngSeed", model.cfg.trainer.rngSeed}};
  j["clipMode"] = "global-norm";
  std::vector<std::string> words(model.vocab.surfaces.begin() + VocabularyTable::kReserved,
                                 model.vocab.surfaces.end());
  j["vocab"] = words;
  LMModel& m = const_cast<LMModel&>(model);
  neural::ParamRegistry reg = m.registry();
  std::vector<const neural::Tensor*> tensors(reg.items.begin(), reg.items.end());
  return neural::serialize_checkpoint(j.dump(), tensors);
}

LMModel lm_deserialize(const std::string& bytes) {
  const neural::Checkpoint ck = neural::parse_checkpoint(bytes);
  nlohmann::json j = nlohmann::json::parse(ck.configJson);
  if (j.value("type", "") != "lm") throw DataError("lm_deserialize: not an lm checkpoint");
  LMConfig cfg;
  cfg.hiddenSize = j["hiddenSize"];
  cfg.unrollSteps = j["unrollSteps"];
  cfg.dropoutRate = j["dropoutRate"];
  cfg.earlyStopPatience = j["earlyStopPatience"];
  cfg.fineTuneLr = j["fineTuneLr"];
  cfg.maxEpochs = j["maxEpochs"];
  cfg.trainer.learningRate = j["trainer"]["learningRate"];
  cfg.trainer.decayFactor = j["trainer"]["decayFactor"];
  cfg.trainer.clipNorm = j["trainer"]["clipNorm"];
  cfg.trainer.rngSeed = j["trainer"]["rngSeed"];
  VocabularyTable vocab;
  for (std::size_t i = 0; i < VocabularyTable::kReserved; ++i) {
    vocab.surfaces.emplace_back(VocabularyTable::reservedSurface(i));
    vocab.toId[vocab.surfaces.back()] = i;
  }
  for (const auto& w : j["vocab"]) {
    vocab.toId[w.get<std::string>()] = vocab.surfaces.size();
    vocab.surfaces.push_back(w.get<std::string>());
  }
  LMModel m = make_lm(cfg, std::move(vocab));
  neural::ParamRegistry reg = m.registry();
  for (neural::Tensor* t : reg.items) {
    const Matrix* src = ck.find(t->name);
    if (!src) throw DataError("lm_deserialize: missing tensor " + t->name);
    if (src->rows != t->w.rows || src->cols != t->w.cols)
      throw DataError("lm_deserialize: shape mismatch for " + t->name);
    t->w = *src;
  }
  return m;
}

void lm_save(const std::string& path, const LMModel& model) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint for writing: " + path);
  const std::string bytes = lm_serialize(model);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("checkpoint write failed: " + path);
}

LMModel lm_load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint: " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return lm_deserialize(bytes);
}

}  // namespace cstk::lm
