#include "cstk/pointer_gen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "cstk/rng.hpp"
#include "json.hpp"

namespace cstk::pg {

using neural::LstmStepCache;
using neural::Matrix;

neural::ParamRegistry PointerGenModel::registry() {
  neural::ParamRegistry reg;
  reg.add(embed);
  encFwd.registerParams(reg);
  encBwd.registerParams(reg);
  dec.registerParams(reg);
  reg.add(bridgeH);
  reg.add(bridgeHb);
  reg.add(bridgeC);
  reg.add(bridgeCb);
  reg.add(attW);
  reg.add(outW);
  reg.add(outB);
  reg.add(gateHStar);
  reg.add(gateS);
  reg.add(gateX);
  reg.add(gateB);
  return reg;
}

PointerGenModel make_pointer_gen(const PointerGenConfig& cfg, VocabularyTable vocab) {
  PointerGenModel m;
  m.cfg = cfg;
  m.vocab = std::move(vocab);
  const std::size_t V = m.vocab.size();
  const std::size_t H = cfg.hiddenSize;
  const std::size_t E = cfg.embedSize;
  rng::Rng r(cfg.trainer.rngSeed);
  m.embed = neural::Tensor("pg.embed", V, E);
  neural::init_uniform(m.embed.w, r);
  m.encFwd.init("pg.enc_fwd", E, H, r);
  m.encBwd.init("pg.enc_bwd", E, H, r);
  m.dec.init("pg.dec", E, H, r);
  m.bridgeH = neural::Tensor("pg.bridge_h", H, 2 * H);
  m.bridgeHb = neural::Tensor("pg.bridge_h_b", H, 1);
  m.bridgeC = neural::Tensor("pg.bridge_c", H, 2 * H);
  m.bridgeCb = neural::Tensor("pg.bridge_c_b", H, 1);
  neural::init_uniform(m.bridgeH.w, r);
  neural::init_uniform(m.bridgeC.w, r);
  m.attW = neural::Tensor("pg.att_w", H, 2 * H);
  neural::init_uniform(m.attW.w, r);
  m.outW = neural::Tensor("pg.out_w", V, 3 * H);
  m.outB = neural::Tensor("pg.out_b", V, 1);
  neural::init_uniform(m.outW.w, r);
  m.gateHStar = neural::Tensor("pg.gate_hstar", 1, 2 * H);
  m.gateS = neural::Tensor("pg.gate_s", 1, H);
  m.gateX = neural::Tensor("pg.gate_x", 1, E);
  m.gateB = neural::Tensor("pg.gate_b", 1, 1);
  neural::init_uniform(m.gateHStar.w, r);
  neural::init_uniform(m.gateS.w, r);
  neural::init_uniform(m.gateX.w, r);
  return m;
}

EncodedSource encode_source(const VocabularyTable& vocab, const ParallelPair& pair) {
  EncodedSource src;
  const Sentence cat = corpus::concat_pair(pair);
  for (const auto& t : cat.tokens) {
    src.tokens.push_back(t.surface);
    if (vocab.contains(t.surface)) {
      src.embedIds.push_back(vocab.id(t.surface));
      src.extIds.push_back(src.embedIds.back());
    } else {
      src.embedIds.push_back(VocabularyTable::kUnk);
      auto it = std::find(src.oovList.begin(), src.oovList.end(), t.surface);
      std::size_t oovIdx;
      if (it == src.oovList.end()) {
        oovIdx = src.oovList.size();
        src.oovList.push_back(t.surface);
      } else {
        oovIdx = static_cast<std::size_t>(it - src.oovList.begin());
      }
      src.extIds.push_back(vocab.size() + oovIdx);
    }
  }
  return src;
}

AttentionResult attention_general(const Vec& decoderState, const std::vector<Vec>& encoderStates,
                                  const Matrix& attW) {
  if (encoderStates.empty()) throw DataError("attention_general: empty source");
  AttentionResult r;
  r.scores.resize(encoderStates.size());
  for (std::size_t i = 0; i < encoderStates.size(); ++i) {
    const Vec wh = attW.mul(encoderStates[i]);
    double s = 0.0;
    for (std::size_t k = 0; k < decoderState.size(); ++k) s += decoderState[k] * wh[k];
    r.scores[i] = s;
  }
  r.weights = neural::softmax(r.scores);
  r.context.assign(encoderStates[0].size(), 0.0);
  for (std::size_t i = 0; i < encoderStates.size(); ++i)
    for (std::size_t k = 0; k < r.context.size(); ++k)
      r.context[k] += r.weights[i] * encoderStates[i][k];
  return r;
}

double copy_gate(const Vec& context, const Vec& decoderState, const Vec& inputEmbedding,
                 const CopyGateParams& p) {
  double u = p.bias;
  for (std::size_t k = 0; k < context.size(); ++k) u += p.wHStar[k] * context[k];
  for (std::size_t k = 0; k < decoderState.size(); ++k) u += p.wS[k] * decoderState[k];
  for (std::size_t k = 0; k < inputEmbedding.size(); ++k) u += p.wX[k] * inputEmbedding[k];
  return 1.0 / (1.0 + std::exp(-u));
}

Vec final_dist(const Vec& pVoc, const Vec& attention, double pGen,
               const std::vector<std::size_t>& sourceExtIds, std::size_t extVocabSize) {
  Vec out(extVocabSize, 0.0);
  for (std::size_t w = 0; w < pVoc.size(); ++w) out[w] = pGen * pVoc[w];
  for (std::size_t i = 0; i < sourceExtIds.size(); ++i)
    out[sourceExtIds[i]] += (1.0 - pGen) * attention[i];
  return out;
}

namespace {

struct StepCache {
  std::size_t prevEmbedId = 0, targetExt = 0;
  Vec x;
  LstmStepCache dec;
  Vec a, hstar, concatSH, pvoc;
  double pGen = 0.0, finalP = 0.0, copyMass = 0.0;
};

struct ForwardCache {
  EncodedSource src;
  std::vector<LstmStepCache> fwd, bwd;  // bwd[i] = cache at source position i
  std::vector<Vec> H;                   // 2H concatenated encoder states
  std::vector<Vec> wh;                  // attW * H_i
  Vec encFinal, s0, c0;
  std::vector<StepCache> steps;
  double meanLoss = 0.0;
};

Vec concat2(const Vec& a, const Vec& b) {
  Vec out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

void encode(const PointerGenModel& m, const EncodedSource& src, ForwardCache& fc) {
  const std::size_t H = m.cfg.hiddenSize;
  const std::size_t S = src.tokens.size();
  if (S == 0) throw DataError("pointer-gen: empty source");
  fc.src = src;
  fc.fwd.resize(S);
  fc.bwd.resize(S);
  Vec h(H, 0.0), c(H, 0.0);
  for (std::size_t i = 0; i < S; ++i) {
    fc.fwd[i] = neural::lstm_step(m.encFwd, m.embed.w.row(src.embedIds[i]), h, c);
    h = fc.fwd[i].h;
    c = fc.fwd[i].c;
  }
  h.assign(H, 0.0);
  c.assign(H, 0.0);
  for (std::size_t i = S; i-- > 0;) {
    fc.bwd[i] = neural::lstm_step(m.encBwd, m.embed.w.row(src.embedIds[i]), h, c);
    h = fc.bwd[i].h;
    c = fc.bwd[i].c;
  }
  fc.H.resize(S);
  fc.wh.resize(S);
  for (std::size_t i = 0; i < S; ++i) {
    fc.H[i] = concat2(fc.fwd[i].h, fc.bwd[i].h);
    fc.wh[i] = m.attW.w.mul(fc.H[i]);
  }
  fc.encFinal = concat2(fc.fwd[S - 1].h, fc.bwd[0].h);
  Vec ph = m.bridgeH.w.mul(fc.encFinal);
  Vec pc = m.bridgeC.w.mul(fc.encFinal);
  fc.s0.resize(H);
  fc.c0.resize(H);
  for (std::size_t k = 0; k < H; ++k) {
    fc.s0[k] = std::tanh(ph[k] + m.bridgeHb.w.v[k]);
    fc.c0[k] = std::tanh(pc[k] + m.bridgeCb.w.v[k]);
  }
}

// One decode step against a prepared encoding; shared by training and search.
StepCache decode_step(const PointerGenModel& m, const ForwardCache& fc, std::size_t prevEmbedId,
                      const Vec& sPrev, const Vec& cPrev) {
  StepCache st;
  st.prevEmbedId = prevEmbedId;
  st.x = m.embed.w.row(prevEmbedId);
  st.dec = neural::lstm_step(m.dec, st.x, sPrev, cPrev);
  const Vec& s = st.dec.h;
  const std::size_t S = fc.H.size();
  Vec scores(S);
  for (std::size_t i = 0; i < S; ++i) {
    double z = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) z += s[k] * fc.wh[i][k];
    scores[i] = z;
  }
  st.a = neural::softmax(scores);
  st.hstar.assign(fc.H[0].size(), 0.0);
  for (std::size_t i = 0; i < S; ++i)
    for (std::size_t k = 0; k < st.hstar.size(); ++k) st.hstar[k] += st.a[i] * fc.H[i][k];
  st.concatSH = concat2(s, st.hstar);
  Vec logits = m.outW.w.mul(st.concatSH);
  for (std::size_t w = 0; w < logits.size(); ++w) logits[w] += m.outB.w.v[w];
  st.pvoc = neural::softmax(logits);
  CopyGateParams gp{m.gateHStar.w.row(0), m.gateS.w.row(0), m.gateX.w.row(0), m.gateB.w.v[0]};
  st.pGen = copy_gate(st.hstar, s, st.x, gp);
  return st;
}

Vec step_final_dist(const PointerGenModel& m, const ForwardCache& fc, const StepCache& st) {
  return final_dist(st.pvoc, st.a, st.pGen, fc.src.extIds, fc.src.extVocabSize(m.vocabSize()));
}

std::vector<std::size_t> target_ext_ids(const PointerGenModel& m, const EncodedSource& src,
                                        const Sentence& target) {
  std::vector<std::size_t> out;
  for (const auto& t : target.tokens) {
    if (m.vocab.contains(t.surface)) {
      out.push_back(m.vocab.id(t.surface));
      continue;
    }
    auto it = std::find(src.oovList.begin(), src.oovList.end(), t.surface);
    if (it == src.oovList.end())
      throw DataError("pointer-gen target token \"" + t.surface +
                      "\" is neither in the vocabulary nor copyable from the source");
    out.push_back(m.vocabSize() + static_cast<std::size_t>(it - src.oovList.begin()));
  }
  out.push_back(VocabularyTable::kEos);
  return out;
}

ForwardCache run_forward(const PointerGenModel& m, const Example& ex) {
  ForwardCache fc;
  encode(m, encode_source(m.vocab, ex.pair), fc);
  const std::vector<std::size_t> targets = target_ext_ids(m, fc.src, ex.target);
  const std::size_t V = m.vocabSize();
  Vec s = fc.s0, c = fc.c0;
  double nll = 0.0;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    std::size_t prevEmbed;
    if (t == 0)
      prevEmbed = VocabularyTable::kBos;
    else
      prevEmbed = targets[t - 1] < V ? targets[t - 1] : VocabularyTable::kUnk;
    StepCache st = decode_step(m, fc, prevEmbed, s, c);
    st.targetExt = targets[t];
    const Vec dist = step_final_dist(m, fc, st);
    st.finalP = dist[st.targetExt];
    st.copyMass = 0.0;
    for (std::size_t i = 0; i < fc.src.extIds.size(); ++i)
      if (fc.src.extIds[i] == st.targetExt) st.copyMass += st.a[i];
    nll += -std::log(std::max(st.finalP, 1e-300));
    s = st.dec.h;
    c = st.dec.c;
    fc.steps.push_back(std::move(st));
  }
  fc.meanLoss = nll / static_cast<double>(targets.size());
  return fc;
}

}  // namespace

double forward_loss(const PointerGenModel& model, const Example& ex) {
  return run_forward(model, ex).meanLoss;
}

double forward_backward(PointerGenModel& m, const Example& ex) {
  ForwardCache fc = run_forward(m, ex);
  const std::size_t H = m.cfg.hiddenSize;
  const std::size_t V = m.vocabSize();
  const std::size_t S = fc.H.size();
  const double invT = 1.0 / static_cast<double>(fc.steps.size());

  std::vector<Vec> dH(S, Vec(2 * H, 0.0));
  Vec dsNext(H, 0.0), dcNext(H, 0.0);

  for (std::size_t t = fc.steps.size(); t-- > 0;) {
    const StepCache& st = fc.steps[t];
    const Vec& s = st.dec.h;
    Vec ds(H, 0.0), dhstar(2 * H, 0.0), dx(m.cfg.embedSize, 0.0);

    const double g = -invT / std::max(st.finalP, 1e-300);
    const double pvocTgt = st.targetExt < V ? st.pvoc[st.targetExt] : 0.0;
    double dpGen = g * (pvocTgt - st.copyMass);
    Vec da(S, 0.0);
    for (std::size_t i = 0; i < S; ++i)
      if (fc.src.extIds[i] == st.targetExt) da[i] += g * (1.0 - st.pGen);

    // vocabulary softmax path (only the target coordinate has upstream grad)
    if (st.targetExt < V) {
      const double dpv = g * st.pGen;
      const double dot = dpv * st.pvoc[st.targetExt];
      Vec dlogits(V);
      for (std::size_t w = 0; w < V; ++w)
        dlogits[w] = st.pvoc[w] * ((w == st.targetExt ? dpv : 0.0) - dot);
      m.outW.g.addOuter(dlogits, st.concatSH);
      for (std::size_t w = 0; w < V; ++w) m.outB.g.v[w] += dlogits[w];
      const Vec dconcat = m.outW.w.mulT(dlogits);
      for (std::size_t k = 0; k < H; ++k) ds[k] += dconcat[k];
      for (std::size_t k = 0; k < 2 * H; ++k) dhstar[k] += dconcat[H + k];
    }

    // copy gate path
    const double du = dpGen * st.pGen * (1.0 - st.pGen);
    m.gateHStar.g.addRow(0, st.hstar, du);
    m.gateS.g.addRow(0, s, du);
    m.gateX.g.addRow(0, st.x, du);
    m.gateB.g.v[0] += du;
    for (std::size_t k = 0; k < 2 * H; ++k) dhstar[k] += du * m.gateHStar.w.v[k];
    for (std::size_t k = 0; k < H; ++k) ds[k] += du * m.gateS.w.v[k];
    for (std::size_t k = 0; k < m.cfg.embedSize; ++k) dx[k] += du * m.gateX.w.v[k];

    // context vector
    for (std::size_t i = 0; i < S; ++i) {
      double d = 0.0;
      for (std::size_t k = 0; k < 2 * H; ++k) d += dhstar[k] * fc.H[i][k];
      da[i] += d;
      for (std::size_t k = 0; k < 2 * H; ++k) dH[i][k] += st.a[i] * dhstar[k];
    }

    // attention softmax + bilinear scores
    double dot = 0.0;
    for (std::size_t i = 0; i < S; ++i) dot += da[i] * st.a[i];
    const Vec ats = m.attW.w.mulT(s);  // attW^T s, reused for every position
    for (std::size_t i = 0; i < S; ++i) {
      const double dscore = st.a[i] * (da[i] - dot);
      if (dscore == 0.0) continue;
      for (std::size_t k = 0; k < H; ++k) ds[k] += dscore * fc.wh[i][k];
      m.attW.g.addOuter(s, fc.H[i], dscore);
      for (std::size_t k = 0; k < 2 * H; ++k) dH[i][k] += dscore * ats[k];
    }

    // decoder cell
    for (std::size_t k = 0; k < H; ++k) ds[k] += dsNext[k];
    Vec dsPrev(H, 0.0), dcPrev(H, 0.0);
    neural::lstm_backward(m.dec, st.dec, ds, dcNext, dx, dsPrev, dcPrev);
    m.embed.g.addRow(st.prevEmbedId, dx);
    dsNext = dsPrev;
    dcNext = dcPrev;
  }

  // bridge
  Vec dEncFinal(2 * H, 0.0);
  {
    Vec dph(H), dpc(H);
    for (std::size_t k = 0; k < H; ++k) {
      dph[k] = dsNext[k] * (1.0 - fc.s0[k] * fc.s0[k]);
      dpc[k] = dcNext[k] * (1.0 - fc.c0[k] * fc.c0[k]);
    }
    m.bridgeH.g.addOuter(dph, fc.encFinal);
    m.bridgeC.g.addOuter(dpc, fc.encFinal);
    for (std::size_t k = 0; k < H; ++k) {
      m.bridgeHb.g.v[k] += dph[k];
      m.bridgeCb.g.v[k] += dpc[k];
    }
    const Vec d1 = m.bridgeH.w.mulT(dph);
    const Vec d2 = m.bridgeC.w.mulT(dpc);
    for (std::size_t k = 0; k < 2 * H; ++k) dEncFinal[k] = d1[k] + d2[k];
  }
  for (std::size_t k = 0; k < H; ++k) dH[S - 1][k] += dEncFinal[k];
  for (std::size_t k = 0; k < H; ++k) dH[0][H + k] += dEncFinal[H + k];

  // forward encoder direction
  {
    Vec dh(H, 0.0), dc(H, 0.0);
    for (std::size_t i = S; i-- > 0;) {
      for (std::size_t k = 0; k < H; ++k) dh[k] += dH[i][k];
      Vec dx(m.cfg.embedSize, 0.0), dhPrev(H, 0.0), dcPrev(H, 0.0);
      neural::lstm_backward(m.encFwd, fc.fwd[i], dh, dc, dx, dhPrev, dcPrev);
      m.embed.g.addRow(fc.src.embedIds[i], dx);
      dh = dhPrev;
      dc = dcPrev;
    }
  }
  // backward encoder direction (processed source right-to-left)
  {
    Vec dh(H, 0.0), dc(H, 0.0);
    for (std::size_t i = 0; i < S; ++i) {
      for (std::size_t k = 0; k < H; ++k) dh[k] += dH[i][H + k];
      Vec dx(m.cfg.embedSize, 0.0), dhPrev(H, 0.0), dcPrev(H, 0.0);
      neural::lstm_backward(m.encBwd, fc.bwd[i], dh, dc, dx, dhPrev, dcPrev);
      m.embed.g.addRow(fc.src.embedIds[i], dx);
      dh = dhPrev;
      dc = dcPrev;
    }
  }
  return fc.meanLoss;
}

TrainResult train(PointerGenModel& model, const std::vector<Example>& examples,
                  const std::vector<Example>* validation) {
  if (examples.empty()) throw DataError("pointer-gen train: no examples");
  TrainResult res;
  neural::ParamRegistry reg = model.registry();
  double lr = model.cfg.trainer.learningRate;
  double bestVal = std::numeric_limits<double>::infinity();
  for (std::size_t epoch = 0; epoch < model.cfg.maxEpochs; ++epoch) {
    std::vector<std::size_t> order(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng::Rng shuf(rng::mix(model.cfg.trainer.rngSeed, epoch + 1));
    shuf.shuffle(order);
    double lossSum = 0.0;
    for (std::size_t k : order) {
      reg.zeroGrad();
      lossSum += forward_backward(model, examples[k]);
      neural::sgd_clip_step(reg, lr, model.cfg.trainer.clipNorm);
    }
    res.lossCurve.push_back(lossSum / static_cast<double>(examples.size()));
    res.learningRates.push_back(lr);
    if (validation && !validation->empty()) {
      double valSum = 0.0;
      for (const Example& ex : *validation) valSum += forward_loss(model, ex);
      const double val = valSum / static_cast<double>(validation->size());
      res.validLossCurve.push_back(val);
      if (val < bestVal - 1e-4)
        bestVal = val;
      else
        lr *= model.cfg.trainer.decayFactor;
    }
  }
  return res;
}

namespace {

struct Hyp {
  Vec s, c;
  std::vector<std::size_t> seq;  // emitted extended ids, end marker excluded
  double score = 0.0;
  std::vector<Vec> attRows;
};

bool hyp_less(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

DecodeResult finish(const PointerGenModel& m, const ForwardCache& fc, const Hyp& h) {
  DecodeResult r;
  r.logScore = h.score;
  for (std::size_t id : h.seq) {
    const std::string& surf =
        id < m.vocabSize() ? m.vocab.surface(id) : fc.src.oovList[id - m.vocabSize()];
    r.sentence.tokens.push_back(corpus::make_token(surf));
  }
  const std::size_t S = fc.src.tokens.size();
  r.trace.sourceTokens = fc.src.tokens;
  r.trace.weights = Matrix(h.seq.size(), S);
  for (std::size_t t = 0; t < h.seq.size(); ++t)
    for (std::size_t i = 0; i < S; ++i) r.trace.weights.at(t, i) = h.attRows[t][i];
  for (std::size_t id : h.seq)
    r.trace.generatedTokens.push_back(
        id < m.vocabSize() ? m.vocab.surface(id) : fc.src.oovList[id - m.vocabSize()]);
  return r;
}

std::size_t embed_id_of(const PointerGenModel& m, const std::vector<std::size_t>& seq) {
  if (seq.empty()) return VocabularyTable::kBos;
  return seq.back() < m.vocabSize() ? seq.back() : VocabularyTable::kUnk;
}

}  // namespace

std::vector<DecodeResult> beam_decode(const PointerGenModel& model, const ParallelPair& pair,
                                      std::size_t beams, std::size_t nBest) {
  if (beams < nBest || nBest < 1) throw DataError("beam_decode: need beams >= nBest >= 1");
  ForwardCache fc;
  encode(model, encode_source(model.vocab, pair), fc);
  const std::size_t ext = fc.src.extVocabSize(model.vocabSize());

  std::vector<Hyp> live;
  live.push_back({fc.s0, fc.c0, {}, 0.0, {}});
  std::vector<Hyp> finished;

  for (std::size_t step = 0; step < model.cfg.maxDecodeLen && !live.empty(); ++step) {
    // end-marker candidates compete for beam slots like any other extension,
    // so beam 1 reduces exactly to greedy decoding
    struct Cand {
      Hyp h;
      bool done = false;
    };
    std::vector<Cand> candidates;
    for (const Hyp& h : live) {
      StepCache st = decode_step(model, fc, embed_id_of(model, h.seq), h.s, h.c);
      const Vec dist = step_final_dist(model, fc, st);
      for (std::size_t w = 0; w < ext; ++w) {
        const double lp = std::log(std::max(dist[w], 1e-300));
        if (w == VocabularyTable::kEos) {
          Cand done{h, true};
          done.h.score += lp;
          candidates.push_back(std::move(done));
          continue;
        }
        Cand nc;
        nc.h.s = st.dec.h;
        nc.h.c = st.dec.c;
        nc.h.seq = h.seq;
        nc.h.seq.push_back(w);
        nc.h.score = h.score + lp;
        nc.h.attRows = h.attRows;
        nc.h.attRows.push_back(st.a);
        candidates.push_back(std::move(nc));
      }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Cand& a, const Cand& b) {
      if (a.h.score != b.h.score) return a.h.score > b.h.score;
      return hyp_less(a.h.seq, b.h.seq);
    });
    if (candidates.size() > beams) candidates.resize(beams);
    live.clear();
    for (Cand& c : candidates)
      (c.done ? finished : live).push_back(std::move(c.h));
  }
  for (Hyp& h : live) finished.push_back(std::move(h));
  std::sort(finished.begin(), finished.end(), [](const Hyp& a, const Hyp& b) {
    if (a.score != b.score) return a.score > b.score;
    return hyp_less(a.seq, b.seq);
  });
  if (finished.size() > nBest) finished.resize(nBest);
  std::vector<DecodeResult> out;
  out.reserve(finished.size());
  for (const Hyp& h : finished) out.push_back(finish(model, fc, h));
  return out;
}

DecodeResult greedy_decode(const PointerGenModel& model, const ParallelPair& pair) {
  ForwardCache fc;
  encode(model, encode_source(model.vocab, pair), fc);
  const std::size_t ext = fc.src.extVocabSize(model.vocabSize());
  Hyp h{fc.s0, fc.c0, {}, 0.0, {}};
  for (std::size_t step = 0; step < model.cfg.maxDecodeLen; ++step) {
    StepCache st = decode_step(model, fc, embed_id_of(model, h.seq), h.s, h.c);
    const Vec dist = step_final_dist(model, fc, st);
    std::size_t best = 0;
    for (std::size_t w = 1; w < ext; ++w)
      if (dist[w] > dist[best]) best = w;
    h.score += std::log(std::max(dist[best], 1e-300));
    if (best == VocabularyTable::kEos) return finish(model, fc, h);
    h.seq.push_back(best);
    h.attRows.push_back(st.a);
    h.s = st.dec.h;
    h.c = st.dec.c;
  }
  return finish(model, fc, h);
}

double greedy_token_accuracy(const PointerGenModel& model, const std::vector<Example>& examples) {
  std::size_t match = 0, total = 0;
  for (const Example& ex : examples) {
    const DecodeResult r = greedy_decode(model, ex.pair);
    const std::size_t n = std::max(r.sentence.size(), ex.target.size());
    total += n;
    for (std::size_t i = 0; i < std::min(r.sentence.size(), ex.target.size()); ++i)
      if (r.sentence[i].surface == ex.target[i].surface) ++match;
  }
  return total == 0 ? 1.0 : static_cast<double>(match) / static_cast<double>(total);
}

std::string export_trace(const AttentionTrace& trace) {
  std::string out;
  for (const std::string& s : trace.sourceTokens) {
    out += ',';
    out += s;
  }
  out += '\n';
  char buf[64];
  for (std::size_t t = 0; t < trace.weights.rows; ++t) {
    out += trace.generatedTokens[t];
    for (std::size_t i = 0; i < trace.weights.cols; ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", trace.weights.at(t, i));
      out += ',';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

std::string pg_serialize(const PointerGenModel& model) {
  nlohmann::json j;
  j["type"] = "pointer-gen";
  j["hiddenSize"] = model.cfg.hiddenSize;
  j["embedSize"] = model.cfg.embedSize;
  j["vocabCap"] = model.cfg.vocabCap;
  j["maxDecodeLen"] = model.cfg.maxDecodeLen;
  j["beams"] = model.cfg.beams;
  j["nBest"] = model.cfg.nBest;
  j["maxEpochs"] = model.cfg.maxEpochs;
  j["trainer"] = {{"learningRate", model.cfg.trainer.learningRate},
                  {"decayFactor", model.cfg.trainer.decayFactor},
                  {"clipNorm", model.cfg.trainer.clipNorm},
                  {"rngSeed", model.cfg.trainer.rngSeed}};
  j["encoderOrder"] = "l1-sep-l2";
  j["clipMode"] = "global-norm";
  std::vector<std::string> words(model.vocab.surfaces.begin() + VocabularyTable::kReserved,
                                 model.vocab.surfaces.end());
  j["vocab"] = words;
  PointerGenModel& m = const_cast<PointerGenModel&>(model);
  neural::ParamRegistry reg = m.registry();
  std::vector<const neural::Tensor*> tensors(reg.items.begin(), reg.items.end());
  return neural::serialize_checkpoint(j.dump(), tensors);
}

PointerGenModel pg_deserialize(const std::string& bytes) {
  const neural::Checkpoint ck = neural::parse_checkpoint(bytes);
  nlohmann::json j = nlohmann::json::parse(ck.configJson);
  if (j.value("type", "") != "pointer-gen")
    throw DataError("pg_deserialize: not a pointer-gen checkpoint");
  PointerGenConfig cfg;
  cfg.hiddenSize = j["hiddenSize"];
  cfg.embedSize = j["embedSize"];
  cfg.vocabCap = j["vocabCap"];
  cfg.maxDecodeLen = j["maxDecodeLen"];
  cfg.beams = j["beams"];
  cfg.nBest = j["nBest"];
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
  PointerGenModel m = make_pointer_gen(cfg, std::move(vocab));
  neural::ParamRegistry reg = m.registry();
  for (neural::Tensor* t : reg.items) {
    const Matrix* src = ck.find(t->name);
    if (!src) throw DataError("pg_deserialize: missing tensor " + t->name);
    if (src->rows != t->w.rows || src->cols != t->w.cols)
      throw DataError("pg_deserialize: shape mismatch for " + t->name);
    t->w = *src;
  }
  return m;
}

void pg_save(const std::string& path, const PointerGenModel& model) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint for writing: " + path);
  const std::string bytes = pg_serialize(model);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("checkpoint write failed: " + path);
}

PointerGenModel pg_load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint: " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return pg_deserialize(bytes);
}

}  // namespace cstk::pg
