#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "cstk/errors.hpp"
#include "cstk/rng.hpp"

namespace cstk::neural {

using Vec = std::vector<double>;

struct Matrix {
  std::size_t rows = 0, cols = 0;
  Vec v;  // row-major

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), v(r * c, fill) {}

  double& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
  std::size_t size() const { return v.size(); }

  Vec mul(const Vec& x) const;   // A x
  Vec mulT(const Vec& y) const;  // A^T y
  void addOuter(const Vec& y, const Vec& x, double scale = 1.0);  // A += scale * y x^T
  void addRow(std::size_t r, const Vec& x, double scale = 1.0);
  Vec row(std::size_t r) const;
};

// Parameter tensor paired with its gradient accumulator.
struct Tensor {
  std::string name;
  Matrix w, g;

  Tensor() = default;
  Tensor(std::string n, std::size_t r, std::size_t c) : name(std::move(n)), w(r, c), g(r, c) {}
  void resize(std::size_t r, std::size_t c) { w = Matrix(r, c); g = Matrix(r, c); }
};

struct ParamRegistry {
  std::vector<Tensor*> items;

  void add(Tensor& t) { items.push_back(&t); }
  std::size_t scalarCount() const;
  void zeroGrad();
  double gradNorm() const;
  double& weightAt(std::size_t flat);
  double gradAt(std::size_t flat) const;
};

struct TrainerConfig {
  double learningRate = 1.0;
  double decayFactor = 0.5;
  double clipNorm = 2.0;
  std::uint64_t rngSeed = 1;
};

// Global-norm clip over all registered grads, then params -= lr * grads.
// Throws NumericalError on any non-finite gradient.
void sgd_clip_step(ParamRegistry& params, double learningRate, double clipNorm);

Vec softmax(const Vec& logits);

struct SoftmaxResult {
  Vec probs;
  double loss;
};

// Max-subtracted softmax + negative log likelihood of `target`.
SoftmaxResult softmax_xent(const Vec& logits, std::size_t target);

struct LstmCell {
  std::size_t inputSize = 0, hiddenSize = 0;
  // Packed gate rows, order: input, forget, output, candidate.
  Tensor wx, wh, b;  // 4H x I, 4H x H, 4H x 1

  void init(const std::string& prefix, std::size_t in, std::size_t hid, rng::Rng& r);
  void registerParams(ParamRegistry& reg);
};

struct LstmStepCache {
  Vec x, hPrev, cPrev;
  Vec gates;  // activated i,f,o,g (4H)
  Vec c, h, tanhC;
};

LstmStepCache lstm_step(const LstmCell& cell, const Vec& x, const Vec& hPrev, const Vec& cPrev);

// Accumulates parameter grads into `cell`; adds into dx / dhPrev / dcPrev.
void lstm_backward(LstmCell& cell, const LstmStepCache& cc, const Vec& dh, const Vec& dc,
                   Vec& dx, Vec& dhPrev, Vec& dcPrev);

// Uniform [-range, range] init from the seeded generator.
void init_uniform(Matrix& m, rng::Rng& r, double range = 0.1);

// Central finite differences on a sampled coordinate subset. `lossFn` must be a
// pure function of the current weights; analytic grads must already be in the
// registry. Returns the max relative error, with a small-magnitude floor so
// near-zero coordinates do not dominate.
double grad_check(ParamRegistry& params, const std::function<double()>& lossFn,
                  double epsilon, std::size_t sampleCoords = 256, std::uint64_t seed = 0);

// ---- checkpoint format ----
// magic "CSTK", u32 version, u64 json length, json bytes, u64 tensor count,
// then per tensor: u32 name length, name, u64 rows, u64 cols, little-endian
// 64-bit floats. Byte-exact round-trip.

struct Checkpoint {
  std::string configJson;
  std::vector<std::pair<std::string, Matrix>> tensors;

  const Matrix* find(const std::string& name) const;
};

std::string serialize_checkpoint(const std::string& configJson,
                                 const std::vector<const Tensor*>& tensors);
Checkpoint parse_checkpoint(const std::string& bytes);
void save_checkpoint(const std::string& path, const std::string& configJson,
                     const std::vector<const Tensor*>& tensors);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace cstk::neural
