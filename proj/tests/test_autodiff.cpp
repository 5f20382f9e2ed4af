#include "gradcheck.hpp"
#include "isac/autodiff.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace isac;
using namespace isac::ad;
using isac::testing::gradcheck;

namespace {

Grid randn(Index r, Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  Grid g(r, c);
  for (Index i = 0; i < g.size(); ++i) g.data()[i] = d(rng);
  return g;
}

// Keeps values clear of the ReLU kink so central differences stay one-sided-free.
Grid away_from_zero(Grid g) {
  for (Index i = 0; i < g.size(); ++i)
    if (std::abs(g.data()[i]) < 0.1) g.data()[i] = g.data()[i] < 0 ? -0.3 : 0.3;
  return g;
}

// A fixed random weighting turns any grid-valued node into a scalar with nontrivial upstream grads.
NodePtr probe(const NodePtr& y, std::uint64_t seed) {
  return sum(mul_const(y, randn(y->rows(), y->cols(), seed)));
}

constexpr double kPerOpTol = 1e-5;

}  // namespace

TEST_CASE("linear forward matches hand values") {
  auto W = leaf(Grid::Identity(2, 2));
  auto b = leaf(Grid::Zero(2, 1));
  Grid xv(2, 1);
  xv << 3, 4;
  auto y = linear(W, b, leaf(xv));
  CHECK(y->value(0, 0) == 3);
  CHECK(y->value(1, 0) == 4);

  auto y2 = linear(leaf(Grid::Constant(1, 1, 2)), leaf(Grid::Constant(1, 1, 1)), leaf(Grid::Constant(1, 1, 3)));
  CHECK(y2->value(0, 0) == 7);
}

TEST_CASE("gradient of sum(linear) wrt W is x broadcast over rows") {
  auto W = leaf(Grid::Ones(2, 2));
  auto b = leaf(Grid::Zero(2, 1));
  Grid xv(2, 1);
  xv << 1, 2;
  auto x = leaf(xv);
  backward(sum(linear(W, b, x)));
  CHECK(W->grad(0, 0) == doctest::Approx(1));
  CHECK(W->grad(0, 1) == doctest::Approx(2));
  CHECK(W->grad(1, 0) == doctest::Approx(1));
  CHECK(W->grad(1, 1) == doctest::Approx(2));

  auto rep = gradcheck([&] { return sum(linear(W, b, x)); }, {W});
  CHECK(rep.max_rel < kPerOpTol);
}

TEST_CASE("shape mismatches name the operands") {
  auto W = leaf(Grid::Ones(2, 3));
  auto b = leaf(Grid::Zero(2, 1));
  auto x = leaf(Grid::Ones(2, 1));
  CHECK_THROWS_WITH_AS(linear(W, b, x), doctest::Contains("W is 2x3"), DimensionError);
  CHECK_THROWS_AS(add(leaf(Grid::Ones(2, 2)), leaf(Grid::Ones(2, 3))), DimensionError);
  CHECK_THROWS_AS(matmul(leaf(Grid::Ones(2, 2)), leaf(Grid::Ones(3, 1))), DimensionError);
}

TEST_CASE("activation values") {
  Grid v(2, 1);
  v << -1, 2;
  auto r = activation(Activation::Relu, leaf(v));
  CHECK(r->value(0, 0) == 0);
  CHECK(r->value(1, 0) == 2);
  CHECK(activation(Activation::Sigmoid, leaf(Grid::Zero(1, 1)))->value(0, 0) == 0.5);
  auto s = activation(Activation::SoftmaxCols, leaf(Grid::Zero(4, 1)));
  for (int i = 0; i < 4; ++i) CHECK(s->value(i, 0) == doctest::Approx(0.25));
  // Large logits must not overflow.
  auto big = activation(Activation::SoftmaxCols, leaf(Grid::Constant(3, 1, 1000.0)));
  CHECK(big->value.allFinite());
  CHECK(activation(Activation::Sigmoid, leaf(Grid::Constant(1, 1, -800.0)))->value.allFinite());
}

TEST_CASE("backward: seeds and accumulation") {
  SUBCASE("sum gives all-ones") {
    auto x = leaf(randn(3, 4, 1));
    backward(sum(x));
    CHECK(x->grad.isApproxToConstant(1.0));
  }
  SUBCASE("sum(x*x) gives 2x") {
    Grid v(2, 1);
    v << 1, 2;
    auto x = leaf(v);
    backward(sum(mul(x, x)));
    CHECK(x->grad(0, 0) == doctest::Approx(2));
    CHECK(x->grad(1, 0) == doctest::Approx(4));
  }
  SUBCASE("non-scalar root is rejected") {
    auto x = leaf(Grid::Ones(2, 1));
    CHECK_THROWS_AS(backward(x), DimensionError);
  }
  SUBCASE("shared subexpressions accumulate") {
    auto x = leaf(Grid::Constant(1, 1, 3.0));
    auto y = add(x, x);
    backward(sum(mul(y, x)));  // 2x^2 -> 4x
    CHECK(x->grad(0, 0) == doctest::Approx(12));
  }
}

TEST_CASE("per-op finite differences") {
  const Grid A = away_from_zero(randn(3, 4, 11));
  const Grid Bv = randn(3, 4, 12);

  SUBCASE("linear, all arguments") {
    auto W = leaf(randn(3, 5, 2));
    auto b = leaf(randn(3, 1, 3));
    auto x = leaf(randn(5, 4, 4));
    auto rep = gradcheck([&] { return probe(linear(W, b, x), 99); }, {W, b, x});
    CHECK(rep.max_rel < kPerOpTol);
  }
  SUBCASE("matmul / add / sub / mul") {
    auto a = leaf(randn(3, 2, 5));
    auto c = leaf(randn(2, 4, 6));
    auto d = leaf(randn(3, 4, 7));
    auto f = [&] { return probe(mul(sub(matmul(a, c), d), add(d, matmul(a, c))), 8); };
    CHECK(gradcheck(f, {a, c, d}).max_rel < kPerOpTol);
  }
  for (auto act : {Activation::Relu, Activation::Sigmoid, Activation::Tanh, Activation::SoftmaxCols,
                   Activation::Linear}) {
    CAPTURE(static_cast<int>(act));
    auto x = leaf(A);
    CHECK(gradcheck([&] { return probe(activation(act, x), 21); }, {x}).max_rel < kPerOpTol);
  }
  SUBCASE("log-softmax, col_sum, scale, add_const, mul_const") {
    auto x = leaf(Bv);
    auto f = [&] {
      auto y = add_const(scale(log_softmax_cols(x), 1.7), Grid::Constant(3, 4, 0.2));
      return probe(col_sum(mul_const(y, Bv)), 31);
    };
    CHECK(gradcheck(f, {x}).max_rel < kPerOpTol);
  }
  SUBCASE("normalization pieces: inv_sqrt, scalar_mul, mul_row_broadcast") {
    auto x = leaf(Bv);
    auto f = [&] {
      auto energy = sum(mul(x, x));
      auto g = inv_sqrt(energy, 10.0);
      return probe(scalar_mul(x, g), 41);
    };
    CHECK(gradcheck(f, {x}).max_rel < kPerOpTol);
    auto s = leaf(randn(1, 4, 42));
    CHECK(gradcheck([&] { return probe(mul_row_broadcast(Bv, s), 43); }, {s}).max_rel < kPerOpTol);
  }
  SUBCASE("gather / concat / slice") {
    auto x = leaf(Bv);
    auto y = leaf(randn(2, 4, 51));
    auto f = [&] {
      std::vector<NodePtr> parts{x, y};
      auto c = concat_rows(parts);
      auto s = slice_rows(c, 1, 3);
      // Transpose-like gather with a repeated index so accumulation is exercised.
      std::vector<Index> src{0, 3, 6, 9, 1, 1};
      return probe(mul(gather(s, 2, 3, src), gather(s, 2, 3, src)), 52);
    };
    CHECK(gradcheck(f, {x, y}).max_rel < kPerOpTol);
  }
  SUBCASE("losses") {
    Grid qv(1, 4);
    qv << 0.2, 0.7, 0.4, 0.9;
    Grid t(1, 4);
    t << 1, 0, 1, 0;
    auto q = leaf(qv);
    CHECK(gradcheck([&] { return bce(q, t); }, {q}).max_rel < kPerOpTol);

    auto p = leaf(randn(1, 4, 61));
    Grid target = randn(1, 4, 62);
    CHECK(gradcheck([&] { return masked_mse(p, target, t); }, {p}).max_rel < kPerOpTol);

    auto z = leaf(randn(4, 4, 63));
    std::vector<int> labels{0, 3, 2, 1};
    CHECK(gradcheck([&] { return nll(log_softmax_cols(z), labels); }, {z}).max_rel < kPerOpTol);
  }
}

TEST_CASE("masked_mse with an empty mask is zero with no gradient") {
  auto p = leaf(randn(1, 3, 1));
  auto L = masked_mse(p, Grid::Zero(1, 3), Grid::Zero(1, 3));
  CHECK(L->value(0, 0) == 0);
  backward(L);
  CHECK(p->grad.isZero());
}

TEST_CASE("Adam closed-form steps") {
  SUBCASE("first step with g = 1 moves by lr / (1 + eps)") {
    auto w = leaf(Grid::Zero(1, 1), "w");
    auto st = AdamState::for_shape(1, 1);
    w->grad(0, 0) = 1.0;
    adam_step(*w, st, 1e-3);
    CHECK(w->value(0, 0) == doctest::Approx(-1e-3 / (1.0 + 1e-8)).epsilon(1e-12));
    CHECK(st.t == 1);
  }
  SUBCASE("constant gradient: second step within 1% of the first") {
    auto w = leaf(Grid::Zero(1, 1), "w");
    auto st = AdamState::for_shape(1, 1);
    w->grad(0, 0) = 0.37;
    adam_step(*w, st, 1e-3);
    const double d1 = w->value(0, 0);
    adam_step(*w, st, 1e-3);
    const double d2 = w->value(0, 0) - d1;
    CHECK(std::abs(std::abs(d2) - std::abs(d1)) < 0.01 * std::abs(d1));
  }
  SUBCASE("zero gradient leaves the parameter but advances t") {
    auto w = leaf(randn(2, 2, 3), "w");
    const Grid before = w->value;
    auto st = AdamState::for_shape(2, 2);
    adam_step(*w, st, 1e-3);
    CHECK(w->value == before);
    CHECK(st.t == 1);
  }
  SUBCASE("non-finite gradient aborts and names the parameter") {
    auto a = leaf(Grid::Zero(1, 1), "enc.l0.W");
    auto b = leaf(Grid::Zero(1, 1), "enc.l0.b");
    Adam opt({a, b}, 1e-3);
    a->grad(0, 0) = 1.0;
    b->grad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_WITH_AS(opt.step(), doctest::Contains("enc.l0.b"), NumericalError);
    CHECK(a->value(0, 0) == 0.0);  // step is all-or-nothing
  }
}
