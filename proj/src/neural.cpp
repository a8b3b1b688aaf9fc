#include "cstk/neural.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace cstk::neural {

Vec Matrix::mul(const Vec& x) const {
  if (x.size() != cols) throw NumericalError("Matrix::mul: shape mismatch");
  Vec y(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* a = v.data() + r * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += a[c] * x[c];
    y[r] = acc;
  }
  return y;
}

Vec Matrix::mulT(const Vec& y) const {
  if (y.size() != rows) throw NumericalError("Matrix::mulT: shape mismatch");
  Vec x(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* a = v.data() + r * cols;
    const double yr = y[r];
    if (yr == 0.0) continue;
    for (std::size_t c = 0; c < cols; ++c) x[c] += a[c] * yr;
  }
  return x;
}

void Matrix::addOuter(const Vec& y, const Vec& x, double scale) {
  if (y.size() != rows || x.size() != cols) throw NumericalError("Matrix::addOuter: shape mismatch");
  for (std::size_t r = 0; r < rows; ++r) {
    double* a = v.data() + r * cols;
    const double yr = scale * y[r];
    if (yr == 0.0) continue;
    for (std::size_t c = 0; c < cols; ++c) a[c] += yr * x[c];
  }
}

void Matrix::addRow(std::size_t r, const Vec& x, double scale) {
  if (r >= rows || x.size() != cols) throw NumericalError("Matrix::addRow: shape mismatch");
  double* a = v.data() + r * cols;
  for (std::size_t c = 0; c < cols; ++c) a[c] += scale * x[c];
}

Vec Matrix::row(std::size_t r) const {
  if (r >= rows) throw NumericalError("Matrix::row: out of range");
  return Vec(v.begin() + r * cols, v.begin() + (r + 1) * cols);
}

std::size_t ParamRegistry::scalarCount() const {
  std::size_t n = 0;
  for (const Tensor* t : items) n += t->w.size();
  return n;
}

void ParamRegistry::zeroGrad() {
  for (Tensor* t : items) std::fill(t->g.v.begin(), t->g.v.end(), 0.0);
}

double ParamRegistry::gradNorm() const {
  double s = 0.0;
  for (const Tensor* t : items)
    for (double g : t->g.v) s += g * g;
  return std::sqrt(s);
}

double& ParamRegistry::weightAt(std::size_t flat) {
  for (Tensor* t : items) {
    if (flat < t->w.size()) return t->w.v[flat];
    flat -= t->w.size();
  }
  throw NumericalError("ParamRegistry::weightAt: index out of range");
}

double ParamRegistry::gradAt(std::size_t flat) const {
  for (const Tensor* t : items) {
    if (flat < t->g.size()) return t->g.v[flat];
    flat -= t->g.size();
  }
  throw NumericalError("ParamRegistry::gradAt: index out of range");
}

void sgd_clip_step(ParamRegistry& params, double learningRate, double clipNorm) {
  double norm2 = 0.0;
  for (const Tensor* t : params.items)
    for (double g : t->g.v) {
      if (!std::isfinite(g)) throw NumericalError("sgd_clip_step: non-finite gradient in " + t->name);
      norm2 += g * g;
    }
  const double norm = std::sqrt(norm2);
  const double scale = (norm > clipNorm && norm > 0.0) ? clipNorm / norm : 1.0;
  for (Tensor* t : params.items)
    for (std::size_t i = 0; i < t->w.size(); ++i) t->w.v[i] -= learningRate * scale * t->g.v[i];
}

Vec softmax(const Vec& logits) {
  if (logits.empty()) throw NumericalError("softmax: empty logits");
  double mx = logits[0];
  for (double z : logits) mx = std::max(mx, z);
  Vec p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (double& x : p) x /= sum;
  return p;
}

SoftmaxResult softmax_xent(const Vec& logits, std::size_t target) {
  if (target >= logits.size()) throw DataError("softmax_xent: target out of range");
  SoftmaxResult r;
  r.probs = softmax(logits);
  r.loss = -std::log(std::max(r.probs[target], 1e-300));
  return r;
}

void LstmCell::init(const std::string& prefix, std::size_t in, std::size_t hid, rng::Rng& r) {
  inputSize = in;
  hiddenSize = hid;
  wx = Tensor(prefix + ".wx", 4 * hid, in);
  wh = Tensor(prefix + ".wh", 4 * hid, hid);
  b = Tensor(prefix + ".b", 4 * hid, 1);
  init_uniform(wx.w, r);
  init_uniform(wh.w, r);
  // biases start at zero
}

void LstmCell::registerParams(ParamRegistry& reg) {
  reg.add(wx);
  reg.add(wh);
  reg.add(b);
}

static double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

LstmStepCache lstm_step(const LstmCell& cell, const Vec& x, const Vec& hPrev, const Vec& cPrev) {
  const std::size_t H = cell.hiddenSize;
  if (x.size() != cell.inputSize || hPrev.size() != H || cPrev.size() != H)
    throw NumericalError("lstm_step: shape mismatch");
  LstmStepCache cc;
  cc.x = x;
  cc.hPrev = hPrev;
  cc.cPrev = cPrev;
  Vec z = cell.wx.w.mul(x);
  Vec zh = cell.wh.w.mul(hPrev);
  for (std::size_t k = 0; k < 4 * H; ++k) z[k] += zh[k] + cell.b.w.v[k];
  cc.gates.resize(4 * H);
  cc.c.resize(H);
  cc.h.resize(H);
  cc.tanhC.resize(H);
  for (std::size_t k = 0; k < H; ++k) {
    const double gi = logistic(z[k]);
    const double gf = logistic(z[H + k]);
    const double go = logistic(z[2 * H + k]);
    const double gg = std::tanh(z[3 * H + k]);
    cc.gates[k] = gi;
    cc.gates[H + k] = gf;
    cc.gates[2 * H + k] = go;
    cc.gates[3 * H + k] = gg;
    cc.c[k] = gf * cPrev[k] + gi * gg;
    cc.tanhC[k] = std::tanh(cc.c[k]);
    cc.h[k] = go * cc.tanhC[k];
  }
  return cc;
}

void lstm_backward(LstmCell& cell, const LstmStepCache& cc, const Vec& dh, const Vec& dc,
                   Vec& dx, Vec& dhPrev, Vec& dcPrev) {
  const std::size_t H = cell.hiddenSize;
  Vec dz(4 * H);
  for (std::size_t k = 0; k < H; ++k) {
    const double gi = cc.gates[k];
    const double gf = cc.gates[H + k];
    const double go = cc.gates[2 * H + k];
    const double gg = cc.gates[3 * H + k];
    const double dck = dc[k] + dh[k] * go * (1.0 - cc.tanhC[k] * cc.tanhC[k]);
    const double dok = dh[k] * cc.tanhC[k];
    const double dik = dck * gg;
    const double dfk = dck * cc.cPrev[k];
    const double dgk = dck * gi;
    dcPrev[k] += dck * gf;
    dz[k] = dik * gi * (1.0 - gi);
    dz[H + k] = dfk * gf * (1.0 - gf);
    dz[2 * H + k] = dok * go * (1.0 - go);
    dz[3 * H + k] = dgk * (1.0 - gg * gg);
  }
  cell.wx.g.addOuter(dz, cc.x);
  cell.wh.g.addOuter(dz, cc.hPrev);
  for (std::size_t k = 0; k < 4 * H; ++k) cell.b.g.v[k] += dz[k];
  Vec dxLocal = cell.wx.w.mulT(dz);
  Vec dhLocal = cell.wh.w.mulT(dz);
  for (std::size_t k = 0; k < cell.inputSize; ++k) dx[k] += dxLocal[k];
  for (std::size_t k = 0; k < H; ++k) dhPrev[k] += dhLocal[k];
}

void init_uniform(Matrix& m, rng::Rng& r, double range) {
  for (double& x : m.v) x = r.uniform(-range, range);
}

double grad_check(ParamRegistry& params, const std::function<double()>& lossFn,
                  double epsilon, std::size_t sampleCoords, std::uint64_t seed) {
  const std::size_t n = params.scalarCount();
  std::vector<std::size_t> coords;
  if (n <= sampleCoords) {
    coords.resize(n);
    for (std::size_t i = 0; i < n; ++i) coords[i] = i;
  } else {
    rng::Rng r(seed);
    coords.resize(n);
    for (std::size_t i = 0; i < n; ++i) coords[i] = i;
    r.shuffle(coords);
    coords.resize(sampleCoords);
  }
  double maxRel = 0.0;
  for (std::size_t c : coords) {
    double& w = params.weightAt(c);
    const double orig = w;
    w = orig + epsilon;
    const double lp = lossFn();
    w = orig - epsilon;
    const double lm = lossFn();
    w = orig;
    const double fd = (lp - lm) / (2.0 * epsilon);
    const double an = params.gradAt(c);
    const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-4});
    maxRel = std::max(maxRel, rel);
  }
  return maxRel;
}

// ---- checkpoint I/O ----

namespace {

void putU32(std::string& out, std::uint32_t x) {
  char b[4];
  std::memcpy(b, &x, 4);
  out.append(b, 4);
}

void putU64(std::string& out, std::uint64_t x) {
  char b[8];
  std::memcpy(b, &x, 8);
  out.append(b, 8);
}

std::uint32_t getU32(const std::string& s, std::size_t& pos) {
  if (pos + 4 > s.size()) throw DataError("checkpoint: truncated");
  std::uint32_t x;
  std::memcpy(&x, s.data() + pos, 4);
  pos += 4;
  return x;
}

std::uint64_t getU64(const std::string& s, std::size_t& pos) {
  if (pos + 8 > s.size()) throw DataError("checkpoint: truncated");
  std::uint64_t x;
  std::memcpy(&x, s.data() + pos, 8);
  pos += 8;
  return x;
}

constexpr char kMagic[4] = {'C', 'S', 'T', 'K'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

const Matrix* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, m] : tensors)
    if (n == name) return &m;
  return nullptr;
}

std::string serialize_checkpoint(const std::string& configJson,
                                 const std::vector<const Tensor*>& tensors) {
  std::string out;
  out.append(kMagic, 4);
  putU32(out, kVersion);
  putU64(out, configJson.size());
  out.append(configJson);
  putU64(out, tensors.size());
  for (const Tensor* t : tensors) {
    for (double x : t->w.v)
      if (!std::isfinite(x)) throw NumericalError("checkpoint: non-finite value in " + t->name);
    putU32(out, static_cast<std::uint32_t>(t->name.size()));
    out.append(t->name);
    putU64(out, t->w.rows);
    putU64(out, t->w.cols);
    const char* raw = reinterpret_cast<const char*>(t->w.v.data());
    out.append(raw, t->w.v.size() * sizeof(double));
  }
  return out;
}

Checkpoint parse_checkpoint(const std::string& bytes) {
  std::size_t pos = 0;
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw DataError("checkpoint: bad magic");
  pos = 4;
  const std::uint32_t version = getU32(bytes, pos);
  if (version != kVersion) throw DataError("checkpoint: unsupported version");
  const std::uint64_t jsonLen = getU64(bytes, pos);
  if (pos + jsonLen > bytes.size()) throw DataError("checkpoint: truncated config");
  Checkpoint ck;
  ck.configJson = bytes.substr(pos, jsonLen);
  pos += jsonLen;
  const std::uint64_t count = getU64(bytes, pos);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint32_t nameLen = getU32(bytes, pos);
    if (pos + nameLen > bytes.size()) throw DataError("checkpoint: truncated name");
    std::string name = bytes.substr(pos, nameLen);
    pos += nameLen;
    const std::uint64_t rows = getU64(bytes, pos);
    const std::uint64_t cols = getU64(bytes, pos);
    Matrix m(rows, cols);
    const std::size_t nbytes = m.v.size() * sizeof(double);
    if (pos + nbytes > bytes.size()) throw DataError("checkpoint: truncated tensor " + name);
    std::memcpy(m.v.data(), bytes.data() + pos, nbytes);
    pos += nbytes;
    ck.tensors.emplace_back(std::move(name), std::move(m));
  }
  return ck;
}

void save_checkpoint(const std::string& path, const std::string& configJson,
                     const std::vector<const Tensor*>& tensors) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint for writing: " + path);
  const std::string bytes = serialize_checkpoint(configJson, tensors);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_checkpoint(ss.str());
}

}  // namespace cstk::neural
