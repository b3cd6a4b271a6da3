#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "cmet/autodiff.hpp"
#include "cmet/model.hpp"
#include "cmet/nn.hpp"
#include "cmet/rng.hpp"
#include "testutil.hpp"

using namespace cmet;
using ad::Var;
using ad::make_const;
using ad::make_param;
using testutil::rand_tensor;

namespace {

Var<double> param(std::initializer_list<int> shape, std::initializer_list<double> vals,
                  const char* name = "p") {
  return make_param(Tensor<double>(Shape(shape), std::vector<double>(vals)), name);
}

}  // namespace

// ---------------------------------------------------------------- softmax

TEST_CASE("softmax of [1,2,3] matches the textbook values") {
  auto x = make_const(Tensor<double>(Shape{3}, {1, 2, 3}));
  auto y = ad::softmax(x, 0);
  CHECK(y->val.data[0] == doctest::Approx(0.09003057317038046).epsilon(1e-12));
  CHECK(y->val.data[1] == doctest::Approx(0.24472847105479767).epsilon(1e-12));
  CHECK(y->val.data[2] == doctest::Approx(0.66524095577482186).epsilon(1e-12));
}

TEST_CASE("softmax lines sum to one and shifting is a no-op") {
  Rng rng(3);
  auto t = rand_tensor<double>(Shape{4, 7}, rng, -3, 3);
  auto base = ad::softmax(make_const(t), 1);
  for (int r = 0; r < 4; ++r) {
    double s = 0;
    for (int c = 0; c < 7; ++c) s += base->val.at(r, c);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
  }
  Tensor<double> shifted = t;
  for (auto& v : shifted.data) v += 128.0;  // exactly representable shift
  auto moved = ad::softmax(make_const(shifted), 1);
  for (size_t i = 0; i < t.numel(); ++i)
    CHECK(moved->val.data[i] == doctest::Approx(base->val.data[i]).epsilon(1e-12));
}

TEST_CASE("softmax survives saturating inputs") {
  auto y = ad::softmax(make_const(Tensor<double>(Shape{2}, {0.0, 1000.0})), 0);
  CHECK(std::isfinite(y->val.data[0]));
  CHECK(y->val.data[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(y->val.data[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("softmax axis 0 normalizes columns") {
  Rng rng(4);
  auto t = rand_tensor<double>(Shape{3, 5}, rng);
  auto y = ad::softmax(make_const(t), 0);
  for (int c = 0; c < 5; ++c) {
    double s = 0;
    for (int r = 0; r < 3; ++r) s += y->val.at(r, c);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
  }
}

// --------------------------------------------------------------- layer norm

TEST_CASE("layer_norm pins a two-element row to +/-1 (population variance)") {
  auto x = make_const(Tensor<double>(Shape{1, 2}, {1, 3}));
  auto g = make_const(Tensor<double>::full(Shape{2}, 1.0));
  auto b = make_const(Tensor<double>::zeros(Shape{2}));
  auto y = ad::layer_norm(x, g, b, 1e-10);
  CHECK(y->val.data[0] == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(y->val.data[1] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("layer_norm on a constant row returns the bias; zero gain too") {
  auto x = make_const(Tensor<double>::full(Shape{2, 3}, 4.2));
  auto g = make_const(Tensor<double>::full(Shape{3}, 1.0));
  auto b = make_const(Tensor<double>(Shape{3}, {7, 8, 9}));
  auto y = ad::layer_norm(x, g, b, 1e-5);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 3; ++c) CHECK(y->val.at(r, c) == doctest::Approx(7.0 + c).epsilon(1e-12));

  Rng rng(5);
  auto xr = make_const(rand_tensor<double>(Shape{2, 3}, rng));
  auto g0 = make_const(Tensor<double>::zeros(Shape{3}));
  auto y0 = ad::layer_norm(xr, g0, b, 1e-5);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 3; ++c) CHECK(y0->val.at(r, c) == doctest::Approx(7.0 + c).epsilon(1e-12));
}

// ----------------------------------------------------- positional encoding

TEST_CASE("sinusoidal table: position 0 alternates 0,1 and position 1 matches sin/cos") {
  auto pe = sinusoidal_pe<double>(3, 4);
  CHECK(pe.at(0, 0) == 0.0);
  CHECK(pe.at(0, 1) == 1.0);
  CHECK(pe.at(0, 2) == 0.0);
  CHECK(pe.at(0, 3) == 1.0);
  CHECK(pe.at(1, 0) == doctest::Approx(0.8414709848078965).epsilon(1e-12));
  CHECK(pe.at(1, 1) == doctest::Approx(0.5403023058681398).epsilon(1e-12));
  CHECK(pe.at(1, 2) == doctest::Approx(0.00999983333416666).epsilon(1e-9));
  CHECK(pe.at(1, 3) == doctest::Approx(0.99995000041666528).epsilon(1e-12));
}

TEST_CASE("sinusoidal table rejects odd widths") {
  CHECK_THROWS_AS(sinusoidal_pe<double>(4, 5), Error);
  CHECK_THROWS_AS(sinusoidal_pe<double>(0, 4), Error);
}

// -------------------------------------------------------------------- conv

TEST_CASE("conv1d with a k=1 identity kernel reproduces the input") {
  Rng rng(6);
  auto x = make_const(rand_tensor<double>(Shape{5, 3}, rng));
  Tensor<double> w(Shape{1, 3, 3});
  for (int i = 0; i < 3; ++i) w.data[(size_t)i * 3 + i] = 1.0;
  auto y = ad::conv1d(x, make_const(w), Var<double>(), 1, 0);
  REQUIRE(y->val.shape == Shape{5, 3});
  for (size_t i = 0; i < x->val.numel(); ++i) CHECK(y->val.data[i] == x->val.data[i]);
}

TEST_CASE("conv1d moving average with zero padding") {
  auto x = make_const(Tensor<double>(Shape{5, 1}, {1, 2, 3, 4, 5}));
  auto w = make_const(Tensor<double>::full(Shape{3, 1, 1}, 1.0 / 3.0));
  auto y = ad::conv1d(x, w, Var<double>(), 1, 1);
  const double want[5] = {1, 2, 3, 4, 3};  // edge frames see one zero pad
  for (int t = 0; t < 5; ++t) CHECK(y->val.data[t] == doctest::Approx(want[t]).epsilon(1e-12));
}

TEST_CASE("conv1d rejects kernels longer than the padded input") {
  Rng rng(7);
  auto x = make_const(rand_tensor<double>(Shape{2, 1}, rng));
  auto w = make_const(Tensor<double>::full(Shape{3, 1, 1}, 1.0));
  CHECK_THROWS_AS(ad::conv1d(x, w, Var<double>(), 1, 0), Error);
}

// ------------------------------------------------------- backward semantics

TEST_CASE("backward demands a scalar") {
  Rng rng(8);
  auto p = make_param(rand_tensor<double>(Shape{2, 2}, rng), "p");
  auto y = ad::mul(p, p);
  CHECK_THROWS_AS(ad::backward(y), Error);
}

TEST_CASE("gradients accumulate across separate backward passes until reset") {
  auto p = param({1}, {3.0});
  auto run = [&] { ad::backward(ad::mul(p, p)); };
  run();
  CHECK(p->grad.data[0] == doctest::Approx(6.0));  // d(p^2)/dp = 2p
  run();
  CHECK(p->grad.data[0] == doctest::Approx(12.0));
  ad::zero_grad(p);
  run();
  CHECK(p->grad.data[0] == doctest::Approx(6.0));
}

TEST_CASE("constants collect no gradient and stop traversal") {
  auto p = param({1}, {2.0});
  auto c = make_const(Tensor<double>(Shape{1}, {5.0}));
  auto loss = ad::mul(p, c);
  ad::backward(loss);
  CHECK(p->grad.data[0] == doctest::Approx(5.0));
  CHECK(c->grad.data[0] == 0.0);
}

// ------------------------------------------------------------------- AdamW

TEST_CASE("one AdamW step on f = p^2 from p=1 lands near 0.9") {
  auto p = param({1}, {1.0});
  AdamW<double> opt;
  opt.lr = 0.1;
  opt.weight_decay = 0.0;
  opt.init({p});
  ad::backward(ad::mul(p, p));
  opt.step({p});
  // bias-corrected mhat/sqrt(vhat) = 1 for the first step, so p -= lr
  CHECK(p->val.data[0] == doctest::Approx(0.9).epsilon(1e-6));
}

TEST_CASE("AdamW with lr = 0 leaves parameters untouched") {
  Rng rng(9);
  auto p = make_param(rand_tensor<double>(Shape{3}, rng), "p");
  auto before = p->val.data;
  AdamW<double> opt;
  opt.lr = 0.0;
  opt.init({p});
  ad::backward(ad::sum_all(ad::mul(p, p)));
  opt.step({p});
  CHECK(p->val.data == before);
}

TEST_CASE("AdamW with zero gradients applies pure decoupled decay") {
  auto p = param({1}, {2.0});
  AdamW<double> opt;
  opt.lr = 0.1;
  opt.weight_decay = 0.5;
  opt.init({p});
  opt.step({p});  // grad is zero: update reduces to p -= lr * wd * p
  CHECK(p->val.data[0] == doctest::Approx(2.0 * (1.0 - 0.05)).epsilon(1e-12));
}

TEST_CASE("gradient clipping rescales to the requested global norm") {
  auto p = param({2}, {3.0, 4.0});
  p->grad.data = {3.0, 4.0};  // norm 5
  const double scale = clip_gradients<double>({p}, 1.0);
  CHECK(scale == doctest::Approx(0.2));
  CHECK(global_grad_norm<double>({p}) == doctest::Approx(1.0).epsilon(1e-12));
  // under the limit: untouched
  CHECK(clip_gradients<double>({p}, 10.0) == 1.0);
}

// ------------------------------------------------------------ per-op FD

TEST_CASE("finite differences agree with every op's backward rule") {
  const double tol = 1e-6;
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    auto a = make_param(rand_tensor<double>(Shape{3, 4}, rng), "a");
    auto b = make_param(rand_tensor<double>(Shape{3, 4}, rng), "b");
    auto w = make_param(rand_tensor<double>(Shape{4, 3}, rng), "w");
    auto v = make_param(rand_tensor<double>(Shape{4}, rng), "v");
    auto k3 = make_param(rand_tensor<double>(Shape{3, 4, 2}, rng), "k3");
    auto cb = make_param(rand_tensor<double>(Shape{2}, rng), "cb");
    auto g = make_param(rand_tensor<double>(Shape{4}, rng, 0.5, 1.5), "g");

    auto red = [](const Var<double>& t) { return ad::mean_all(t); };

    CHECK(testutil::max_rel_err_fd({a, b}, [&] { return red(ad::add(a, b)); }) < tol);
    CHECK(testutil::max_rel_err_fd({a, b}, [&] { return red(ad::sub(a, b)); }) < tol);
    CHECK(testutil::max_rel_err_fd({a, b}, [&] { return red(ad::mul(a, b)); }) < tol);
    CHECK(testutil::max_rel_err_fd({a}, [&] { return red(ad::affine(a, 1.7, -0.3)); }) < tol);
    CHECK(testutil::max_rel_err_fd({a, v}, [&] { return red(ad::add_rowvec(a, v)); }) < tol);
    CHECK(testutil::max_rel_err_fd({a, w}, [&] { return red(ad::matmul(a, w)); }) < tol);
    CHECK(testutil::max_rel_err_fd({a, b}, [&] { return red(ad::matmul_nt(a, b)); }) < tol);
    CHECK(testutil::max_rel_err_fd({a}, [&] { return red(ad::gelu(a)); }) < tol);
    CHECK(testutil::max_rel_err_fd({a}, [&] { return red(ad::softmax(a, 1)); }) < tol);
    CHECK(testutil::max_rel_err_fd({a}, [&] { return red(ad::softmax(a, 0)); }) < tol);
    CHECK(testutil::max_rel_err_fd({a, g, v}, [&] { return red(ad::layer_norm(a, g, v, 1e-5)); }) <
          tol);
    CHECK(testutil::max_rel_err_fd({a, k3, cb}, [&] {
            return red(ad::conv1d(a, k3, cb, 1, 1));
          }) < tol);
    CHECK(testutil::max_rel_err_fd({a, b}, [&] {
            return red(ad::concat_rows<double>({a, b}));
          }) < tol);
    CHECK(testutil::max_rel_err_fd({a}, [&] { return red(ad::slice_rows(a, 1, 3)); }) < tol);
    CHECK(testutil::max_rel_err_fd({a}, [&] { return red(ad::slice_cols(a, 1, 4)); }) < tol);
    CHECK(testutil::max_rel_err_fd({a, b}, [&] {
            return red(ad::concat_cols<double>({a, b}));
          }) < tol);
    CHECK(testutil::max_rel_err_fd({a}, [&] { return red(ad::mean_rows(a)); }) < tol);
    CHECK(testutil::max_rel_err_fd({a}, [&] { return ad::sum_all(a); }) < tol);
    CHECK(testutil::max_rel_err_fd({a}, [&] { return ad::mean_all(a); }) < tol);
    CHECK(testutil::max_rel_err_fd({a}, [&] { return ad::l2_rows_sum(a); }) < tol);
    CHECK(testutil::max_rel_err_fd({a, b}, [&] { return red(ad::cosine_rows(a, b)); }) < tol);
    CHECK(testutil::max_rel_err_fd({a, b}, [&] { return red(ad::cosine_matrix(a, b)); }) < tol);
    CHECK(testutil::max_rel_err_fd({a, b}, [&] {
            return ad::info_nce(ad::cosine_matrix(a, b), 0.2, false);
          }) < tol);
    CHECK(testutil::max_rel_err_fd({a, b}, [&] { return ad::mse(a, b); }) < tol);
  }
}

// --------------------------------------------------------------- attention

TEST_CASE("single-token attention reduces to the value/output projections") {
  // With one token the softmax over scores is the scalar 1, so the whole op
  // collapses to (x Wv + bv) Wo + bo.
  Rng rng(21);
  const int d = 6;
  auto x = make_const(rand_tensor<double>(Shape{1, d}, rng));
  std::vector<Var<double>> ws;
  for (int i = 0; i < 4; ++i) ws.push_back(make_const(rand_tensor<double>(Shape{d, d}, rng)));
  std::vector<Var<double>> bs;
  for (int i = 0; i < 4; ++i) bs.push_back(make_const(rand_tensor<double>(Shape{d}, rng)));

  auto out = multi_head_attention(x, ws[0], bs[0], ws[1], bs[1], ws[2], bs[2], ws[3], bs[3], 2);
  auto manual = ad::add_rowvec(ad::matmul(ad::add_rowvec(ad::matmul(x, ws[2]), bs[2]), ws[3]), bs[3]);
  REQUIRE(out->val.shape == Shape{1, d});
  for (int j = 0; j < d; ++j)
    CHECK(out->val.data[j] == doctest::Approx(manual->val.data[j]).epsilon(1e-12));
}

TEST_CASE("two-token single-head attention matches a straight-line oracle") {
  Rng rng(22);
  const int S = 2, d = 4;
  auto xt = rand_tensor<double>(Shape{S, d}, rng);
  Tensor<double> wq = rand_tensor<double>(Shape{d, d}, rng), wk = rand_tensor<double>(Shape{d, d}, rng),
                 wv = rand_tensor<double>(Shape{d, d}, rng), wo = rand_tensor<double>(Shape{d, d}, rng);
  Tensor<double> bq = rand_tensor<double>(Shape{d}, rng), bk = rand_tensor<double>(Shape{d}, rng),
                 bv = rand_tensor<double>(Shape{d}, rng), bo = rand_tensor<double>(Shape{d}, rng);

  auto out = multi_head_attention(make_const(xt), make_const(wq), make_const(bq), make_const(wk),
                                  make_const(bk), make_const(wv), make_const(bv), make_const(wo),
                                  make_const(bo), 1);

  // hand-rolled: q = x wq + bq, scores = q k^T / sqrt(d), row softmax, attn v, wo
  auto lin = [&](const Tensor<double>& m, const Tensor<double>& bias) {
    std::vector<std::vector<double>> r(S, std::vector<double>(d, 0));
    for (int i = 0; i < S; ++i)
      for (int j = 0; j < d; ++j) {
        double acc = bias.data[j];
        for (int t = 0; t < d; ++t) acc += xt.at(i, t) * m.at(t, j);
        r[i][j] = acc;
      }
    return r;
  };
  auto q = lin(wq, bq), k = lin(wk, bk), vv = lin(wv, bv);
  double scores[S][S];
  for (int i = 0; i < S; ++i)
    for (int j = 0; j < S; ++j) {
      double acc = 0;
      for (int t = 0; t < d; ++t) acc += q[i][t] * k[j][t];
      scores[i][j] = acc / std::sqrt((double)d);
    }
  double attn[S][S];
  for (int i = 0; i < S; ++i) {
    const double mx = std::max(scores[i][0], scores[i][1]);
    const double e0 = std::exp(scores[i][0] - mx), e1 = std::exp(scores[i][1] - mx);
    attn[i][0] = e0 / (e0 + e1);
    attn[i][1] = e1 / (e0 + e1);
  }
  for (int i = 0; i < S; ++i)
    for (int j = 0; j < d; ++j) {
      double mixed = 0;
      for (int s = 0; s < S; ++s) mixed += attn[i][s] * vv[s][j];
      double expect = bo.data[j];
      // mixed value row times wo
      (void)mixed;
      double row[4];
      for (int t = 0; t < d; ++t) {
        row[t] = 0;
        for (int s = 0; s < S; ++s) row[t] += attn[i][s] * vv[s][t];
      }
      for (int t = 0; t < d; ++t) expect += row[t] * wo.at(t, j);
      CHECK(out->val.at(i, j) == doctest::Approx(expect).epsilon(1e-10));
    }
}

TEST_CASE("full attention is equivariant to token order") {
  Rng rng(23);
  const int S = 5, d = 8;
  auto xt = rand_tensor<double>(Shape{S, d}, rng);
  std::vector<Tensor<double>> ws, bs;
  for (int i = 0; i < 4; ++i) ws.push_back(rand_tensor<double>(Shape{d, d}, rng));
  for (int i = 0; i < 4; ++i) bs.push_back(rand_tensor<double>(Shape{d}, rng));
  auto run = [&](const Tensor<double>& x) {
    return multi_head_attention(make_const(x), make_const(ws[0]), make_const(bs[0]),
                                make_const(ws[1]), make_const(bs[1]), make_const(ws[2]),
                                make_const(bs[2]), make_const(ws[3]), make_const(bs[3]), 2);
  };
  auto base = run(xt);

  const int perm[S] = {3, 0, 4, 1, 2};
  Tensor<double> shuffled(Shape{S, d});
  for (int i = 0; i < S; ++i)
    for (int j = 0; j < d; ++j) shuffled.at(i, j) = xt.at(perm[i], j);
  auto moved = run(shuffled);
  for (int i = 0; i < S; ++i)
    for (int j = 0; j < d; ++j)
      CHECK(moved->val.at(i, j) == doctest::Approx(base->val.at(perm[i], j)).epsilon(1e-9));
}

TEST_CASE("attention rejects head counts that do not divide the width") {
  Rng rng(24);
  auto x = make_const(rand_tensor<double>(Shape{2, 6}, rng));
  auto m = make_const(rand_tensor<double>(Shape{6, 6}, rng));
  auto b = make_const(rand_tensor<double>(Shape{6}, rng));
  CHECK_THROWS_AS(multi_head_attention(x, m, b, m, b, m, b, m, b, 4), Error);
}

// ------------------------------------------------------------- determinism

TEST_CASE("graph evaluation is bitwise deterministic") {
  auto build = [] {
    Rng rng(77);
    auto a = make_param(rand_tensor<double>(Shape{4, 4}, rng), "a");
    auto b = make_param(rand_tensor<double>(Shape{4, 4}, rng), "b");
    auto loss = ad::mse(ad::gelu(ad::matmul(a, ad::softmax(b, 1))), b);
    ad::backward(loss);
    return std::pair{loss->val.data[0], a->grad.data};
  };
  auto r1 = build();
  auto r2 = build();
  CHECK(r1.first == r2.first);
  CHECK(r1.second == r2.second);
}
