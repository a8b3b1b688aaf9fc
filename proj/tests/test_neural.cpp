#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "cstk/neural.hpp"
#include "doctest.h"

using namespace cstk;
using neural::LstmCell;
using neural::Matrix;
using neural::ParamRegistry;
using neural::Tensor;
using neural::Vec;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// independent recurrence straight from the packed tensors
void reference_lstm(const LstmCell& cell, const Vec& x, const Vec& hPrev, const Vec& cPrev,
                    Vec& hOut, Vec& cOut) {
  const std::size_t H = cell.hiddenSize;
  hOut.resize(H);
  cOut.resize(H);
  for (std::size_t k = 0; k < H; ++k) {
    double zi = cell.b.w.v[k], zf = cell.b.w.v[H + k], zo = cell.b.w.v[2 * H + k],
           zg = cell.b.w.v[3 * H + k];
    for (std::size_t j = 0; j < cell.inputSize; ++j) {
      zi += cell.wx.w.at(k, j) * x[j];
      zf += cell.wx.w.at(H + k, j) * x[j];
      zo += cell.wx.w.at(2 * H + k, j) * x[j];
      zg += cell.wx.w.at(3 * H + k, j) * x[j];
    }
    for (std::size_t j = 0; j < H; ++j) {
      zi += cell.wh.w.at(k, j) * hPrev[j];
      zf += cell.wh.w.at(H + k, j) * hPrev[j];
      zo += cell.wh.w.at(2 * H + k, j) * hPrev[j];
      zg += cell.wh.w.at(3 * H + k, j) * hPrev[j];
    }
    const double i = sigmoid(zi), f = sigmoid(zf), o = sigmoid(zo), g = std::tanh(zg);
    cOut[k] = f * cPrev[k] + i * g;
    hOut[k] = o * std::tanh(cOut[k]);
  }
}

}  // namespace

TEST_CASE("matrix primitives") {
  Matrix a(2, 3);
  double vals[] = {1, 2, 3, 4, 5, 6};
  for (int i = 0; i < 6; ++i) a.v[i] = vals[i];
  CHECK(a.mul({1, 0, -1}) == Vec{-2, -2});
  CHECK(a.mulT({1, 1}) == Vec{5, 7, 9});
  Matrix b(2, 2);
  b.addOuter({1, 2}, {3, 4}, 0.5);
  CHECK(b.at(0, 0) == doctest::Approx(1.5));
  CHECK(b.at(1, 1) == doctest::Approx(4.0));
  b.addRow(0, {1, 1}, 2.0);
  CHECK(b.at(0, 0) == doctest::Approx(3.5));
  CHECK(a.row(1) == Vec{4, 5, 6});
}

TEST_CASE("softmax normalization and shift invariance") {
  const Vec p = neural::softmax({1.0, 2.0, 3.0});
  double sum = 0.0;
  for (double x : p) sum += x;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  const Vec q = neural::softmax({101.0, 102.0, 103.0});
  for (std::size_t i = 0; i < 3; ++i) CHECK(p[i] == doctest::Approx(q[i]).epsilon(1e-12));
}

TEST_CASE("softmax cross entropy hand cases") {
  {
    const auto r = neural::softmax_xent({0.0, 0.0, 0.0, 0.0}, 1);
    CHECK(r.loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  }
  {
    const auto r = neural::softmax_xent({1e3, 0.0}, 0);
    CHECK(r.loss == doctest::Approx(0.0).epsilon(1e-9));
  }
  {
    const auto r = neural::softmax_xent({1.0, 2.0, 3.0}, 2);
    CHECK(r.loss ==
          doctest::Approx(std::log(1.0 + std::exp(-1.0) + std::exp(-2.0))).epsilon(1e-12));
  }
  CHECK_THROWS_AS(neural::softmax_xent({0.0, 0.0}, 5), DataError);
}

TEST_CASE("lstm_step zero-parameter cases") {
  LstmCell cell;
  rng::Rng r(1);
  cell.init("t", 2, 3, r);
  cell.wx.w = Matrix(12, 2);
  cell.wh.w = Matrix(12, 3);
  cell.b.w = Matrix(12, 1);
  {
    const auto st = neural::lstm_step(cell, {1.0, -1.0}, Vec(3, 0.0), Vec(3, 0.0));
    for (double h : st.h) CHECK(h == 0.0);
    for (double c : st.c) CHECK(c == 0.0);
  }
  {
    const auto st = neural::lstm_step(cell, {1.0, -1.0}, Vec(3, 0.0), {0.4, -0.8, 0.0});
    CHECK(st.c[0] == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(st.c[1] == doctest::Approx(-0.4).epsilon(1e-12));
  }
}

TEST_CASE("lstm_step matches an independent reference recurrence") {
  rng::Rng r(42);
  LstmCell cell;
  cell.init("t", 3, 4, r);
  Vec x{0.3, -0.2, 0.5}, h(4), c(4);
  for (auto& v : h) v = r.uniform(-1, 1);
  for (auto& v : c) v = r.uniform(-1, 1);
  const auto st = neural::lstm_step(cell, x, h, c);
  Vec rh, rc;
  reference_lstm(cell, x, h, c, rh, rc);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(st.h[k] == doctest::Approx(rh[k]).epsilon(1e-12));
    CHECK(st.c[k] == doctest::Approx(rc[k]).epsilon(1e-12));
    CHECK(std::abs(st.h[k]) < 1.0);
  }
}

TEST_CASE("sgd_clip_step behavior") {
  Tensor t("p", 1, 2);
  t.w.v = {1.0, 1.0};
  ParamRegistry reg;
  reg.add(t);
  SUBCASE("plain update under the clip") {
    t.g.v = {0.3, 0.4};  // norm 0.5
    neural::sgd_clip_step(reg, 1.0, 1.0);
    CHECK(t.w.v[0] == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(t.w.v[1] == doctest::Approx(0.6).epsilon(1e-12));
  }
  SUBCASE("gradients at twice the clip norm are halved") {
    t.g.v = {1.2, 1.6};  // norm 2.0, clip 1.0
    neural::sgd_clip_step(reg, 1.0, 1.0);
    CHECK(t.w.v[0] == doctest::Approx(1.0 - 0.6).epsilon(1e-12));
    CHECK(t.w.v[1] == doctest::Approx(1.0 - 0.8).epsilon(1e-12));
  }
  SUBCASE("zero learning rate leaves parameters unchanged") {
    t.g.v = {5.0, 5.0};
    neural::sgd_clip_step(reg, 0.0, 1.0);
    CHECK(t.w.v == Vec{1.0, 1.0});
  }
  SUBCASE("non-finite gradient aborts loudly") {
    t.g.v = {1.0, std::nan("")};
    CHECK_THROWS_AS(neural::sgd_clip_step(reg, 1.0, 1.0), NumericalError);
  }
}

TEST_CASE("grad_check on a quadratic loss") {
  Tensor t("p", 4, 4);
  rng::Rng r(3);
  neural::init_uniform(t.w, r, 1.0);
  ParamRegistry reg;
  reg.add(t);
  reg.zeroGrad();
  for (std::size_t i = 0; i < t.w.v.size(); ++i) t.g.v[i] = 2.0 * t.w.v[i];
  const double err = neural::grad_check(
      reg,
      [&] {
        double s = 0.0;
        for (double x : t.w.v) s += x * x;
        return s;
      },
      1e-5, 16, 7);
  CHECK(err < 1e-8);
}

TEST_CASE("grad_check on lstm_step + softmax_xent composite") {
  rng::Rng r(5);
  LstmCell cell;
  cell.init("t", 3, 4, r);
  Tensor proj("proj", 5, 4);
  neural::init_uniform(proj.w, r);
  ParamRegistry reg;
  cell.registerParams(reg);
  reg.add(proj);

  const Vec x{0.2, -0.1, 0.4};
  const Vec h0(4, 0.1), c0(4, -0.2);
  const std::size_t target = 3;
  auto loss = [&] {
    const auto st = neural::lstm_step(cell, x, h0, c0);
    return neural::softmax_xent(proj.w.mul(st.h), target).loss;
  };

  reg.zeroGrad();
  const auto st = neural::lstm_step(cell, x, h0, c0);
  const auto sm = neural::softmax_xent(proj.w.mul(st.h), target);
  Vec dlogits = sm.probs;
  dlogits[target] -= 1.0;
  proj.g.addOuter(dlogits, st.h);
  Vec dh = proj.w.mulT(dlogits);
  Vec dx(3, 0.0), dhPrev(4, 0.0), dcPrev(4, 0.0);
  neural::lstm_backward(cell, st, dh, Vec(4, 0.0), dx, dhPrev, dcPrev);

  CHECK(neural::grad_check(reg, loss, 1e-5, 64, 11) < 1e-4);
}

TEST_CASE("checkpoint round-trip is byte exact") {
  Tensor a("alpha", 2, 3), b("beta", 1, 4);
  rng::Rng r(9);
  neural::init_uniform(a.w, r, 5.0);
  neural::init_uniform(b.w, r, 5.0);
  const std::string cfg = "{\"k\":1}";
  const std::string bytes = neural::serialize_checkpoint(cfg, {&a, &b});
  const auto ck = neural::parse_checkpoint(bytes);
  CHECK(ck.configJson == cfg);
  REQUIRE(ck.find("alpha") != nullptr);
  CHECK(ck.find("alpha")->v == a.w.v);
  CHECK(ck.find("nothere") == nullptr);

  Tensor a2("alpha", 2, 3), b2("beta", 1, 4);
  a2.w = *ck.find("alpha");
  b2.w = *ck.find("beta");
  CHECK(neural::serialize_checkpoint(cfg, {&a2, &b2}) == bytes);

  const std::string path =
      (std::filesystem::temp_directory_path() / "cstk_test_ckpt.bin").string();
  neural::save_checkpoint(path, cfg, {&a, &b});
  const auto loaded = neural::load_checkpoint(path);
  CHECK(loaded.find("beta")->v == b.w.v);
  std::remove(path.c_str());

  CHECK_THROWS_AS(neural::parse_checkpoint("garbage"), DataError);
}

TEST_CASE("seeded rng is deterministic and mix decorrelates streams") {
  rng::Rng a(17), b(17), c(rng::mix(17, 1));
  for (int i = 0; i < 100; ++i) {
    const std::uint64_t x = a.next();
    CHECK(x == b.next());
  }
  CHECK(a.next() != c.next());
  std::vector<int> v{1, 2, 3, 4, 5, 6}, w = v;
  rng::Rng s1(4), s2(4);
  s1.shuffle(v);
  s2.shuffle(w);
  CHECK(v == w);
  for (int i = 0; i < 50; ++i) {
    const double u = rng::Rng(std::uint64_t(i)).uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}
