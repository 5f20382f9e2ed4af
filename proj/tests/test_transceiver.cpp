#include "gradcheck.hpp"
#include "isac/comm_receiver.hpp"
#include "isac/radar_receiver.hpp"
#include "isac/transmitter.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace isac;
using isac::testing::gradcheck;

namespace {

SystemConfig tiny_cfg() {
  auto cfg = desk_scale_config();
  cfg.Nt = 3;
  cfg.Nr = 2;
  cfg.N = 2;
  cfg.hidden = 5;
  return cfg;
}

// Zero every layer, then set the final bias: the network becomes a constant.
void make_constant(Mlp& net, const Eigen::VectorXd& out) {
  net.set_zero();
  net.layers.back().b->value = out;
}

}  // namespace

TEST_CASE("message helpers") {
  CHECK(one_hot(2, 4) == Eigen::Vector4d(0, 0, 1, 0));
  CHECK(one_hot(0, 2) == Eigen::Vector2d(1, 0));
  CHECK_THROWS_AS(one_hot(4, 4), std::out_of_range);
  CHECK_THROWS_AS(one_hot(-1, 4), std::out_of_range);
  CHECK(normalize_message(0, 4) == -1.0);
  CHECK(normalize_message(3, 4) == 1.0);
  CHECK(normalize_message(1, 4) == doctest::Approx(-1.0 / 3.0));
}

TEST_CASE("power normalization") {
  SUBCASE("single column of energy 4 at P = 1 is halved") {
    CTensor X(Grid::Constant(4, 1, 1.0), Grid::Zero(4, 1));
    const auto Y = power_normalize(X, 1.0);
    CHECK(Y.re(0, 0) == doctest::Approx(0.5));
  }
  SUBCASE("two columns with energies 1 and 3 at P = 10 scale by sqrt 5") {
    Grid re(2, 2);
    re << 1, 1, 0, std::sqrt(2.0);
    CTensor X(re, Grid::Zero(2, 2));
    const auto Y = power_normalize(X, 10.0);
    CHECK(Y.re(0, 0) == doctest::Approx(std::sqrt(5.0)));
    CHECK(Y.squared_norm() / 2.0 == doctest::Approx(10.0));
  }
  SUBCASE("fixed point") {
    Rng rng = make_stream(1, 1, 1);
    auto X = power_normalize(complex_gaussian(8, 16, 1.0, rng), 3.0);
    const auto Y = power_normalize(X, 3.0);
    CHECK((Y.re - X.re).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((Y.im - X.im).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("all-zero input") {
    CHECK_THROWS_AS(power_normalize(CTensor::zeros(3, 2), 1.0), NumericalError);
    CHECK_THROWS_AS(calibration_factor(CTensor::zeros(3, 2)), NumericalError);
  }
  SUBCASE("gradient through normalization") {
    Rng rng = make_stream(1, 1, 2);
    const auto X0 = complex_gaussian(3, 4, 1.0, rng);
    auto re = ad::leaf(X0.re), im = ad::leaf(X0.im);
    const Grid wr = complex_gaussian(3, 4, 1.0, rng).re, wi = complex_gaussian(3, 4, 1.0, rng).im;
    auto f = [&] {
      const auto y = power_normalize(CNode{re, im}, 10.0);
      return ad::add(ad::sum(ad::mul_const(y.re, wr)), ad::sum(ad::mul_const(y.im, wi)));
    };
    CHECK(gradcheck(f, {re, im}).max_rel < 1e-5);
  }
}

TEST_CASE("SLP transmitter") {
  const auto cfg = tiny_cfg();
  Rng rng = make_stream(2, 0, 0);
  auto p = SlpParams::make(cfg, rng);
  const auto pri = PrioriInfo::from_config(cfg);
  CHECK(p.net.widths() == std::vector<int>{2 + 2 * cfg.K + cfg.K, 2 * cfg.Nt, 4 * cfg.Nt, 8 * cfg.Nt, 4 * cfg.Nt,
                                           2 * cfg.Nt});
  const std::vector<int> msg{1, 3, 0, 2};  // two slots, K = 2
  const auto x1 = slp_forward(pri, msg, cfg.M_size, p).value();
  const auto x2 = slp_forward(pri, msg, cfg.M_size, p).value();
  CHECK(x1.rows() == cfg.Nt);
  CHECK(x1.cols() == 2);
  CHECK(x1.re == x2.re);
  CHECK(x1.im == x2.im);

  const std::vector<int> bad{1, 4};
  CHECK_THROWS_AS(slp_forward(pri, bad, cfg.M_size, p), std::domain_error);

  p.net.set_zero();
  CHECK(slp_forward(pri, msg, cfg.M_size, p).value().squared_norm() == 0.0);
}

TEST_CASE("BLP transmitter") {
  auto cfg = tiny_cfg();
  Rng rng = make_stream(3, 0, 0);

  SUBCASE("zero beamformer output gives x = 0") {
    auto p = BlpParams::make(cfg, rng);
    p.beamformer.set_zero();
    const std::vector<int> msg{1, 3};
    CHECK(blp_forward(PrioriInfo::from_config(cfg), msg, cfg.M_size, p).value().squared_norm() == 0.0);
  }
  SUBCASE("K = 1, W = e_1 places the symbol on antenna 0") {
    cfg.K = 1;
    cfg.user_bounds.resize(1);
    auto p = BlpParams::make(cfg, rng);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(2 * cfg.Nt);
    w(0) = 1.0;
    make_constant(p.beamformer, w);
    const std::vector<int> msg{2, 0};
    const auto x = blp_forward(PrioriInfo::from_config(cfg), msg, cfg.M_size, p).value();
    // Symbols straight from the encoder.
    Grid hot = Grid::Zero(cfg.M_size, 2);
    hot(2, 0) = hot(0, 1) = 1;
    const auto s = p.encoder.forward(ad::constant(hot))->value;
    for (int c = 0; c < 2; ++c) {
      CHECK(x.re(0, c) == doctest::Approx(s(0, c)));
      CHECK(x.im(0, c) == doctest::Approx(s(1, c)));
      CHECK(x.re.col(c).tail(cfg.Nt - 1).isZero());
      CHECK(x.im.col(c).tail(cfg.Nt - 1).isZero());
    }
  }
  SUBCASE("complex multiply: W = j, s = j gives -1") {
    cfg.K = 1;
    cfg.Nt = 1;
    cfg.user_bounds.resize(1);
    auto p = BlpParams::make(cfg, rng);
    make_constant(p.beamformer, Eigen::Vector2d(0, 1));
    make_constant(p.encoder, Eigen::Vector2d(0, 1));
    const std::vector<int> msg{3};
    const auto x = blp_forward(PrioriInfo::from_config(cfg), msg, cfg.M_size, p).value();
    CHECK(x.re(0, 0) == doctest::Approx(-1.0));
    CHECK(std::abs(x.im(0, 0)) < 1e-15);
  }
}

TEST_CASE("decoder") {
  CHECK(preprocess_rx({3, 4}) == Eigen::Vector2d(3, 4));
  CHECK(preprocess_rx({0, 0}) == Eigen::Vector2d(0, 0));
  CHECK(preprocess_rx({-1, -1}) == Eigen::Vector2d(-1, -1));

  const auto cfg = tiny_cfg();
  Rng rng = make_stream(4, 0, 0);
  auto d = DecoderParams::make(cfg, 0, rng);
  d.net.set_zero();
  const auto p = decode({0.3, -2.0}, d);
  for (int m = 0; m < cfg.M_size; ++m) CHECK(p(m) == doctest::Approx(1.0 / cfg.M_size));

  CHECK(decide(Eigen::Vector3d(0.1, 0.7, 0.2)) == 1);
  CHECK(decide(Eigen::Vector2d(0.5, 0.5)) == 0);
  for (int i = 0; i < 4; ++i) CHECK(decide(one_hot(i, 4)) == i);
}

TEST_CASE("detector input layout and threshold") {
  const int Nr = 2, N = 2;
  const AngleInterval th{-10, 10};
  const auto v0 = detector_input(CTensor::zeros(Nr, N), th, Nr, N);
  REQUIRE(v0.size() == 2 * Nr * N + 2);
  CHECK(v0.head(8).isZero());
  CHECK(v0(8) == doctest::Approx(-10.0 / 90));
  CHECK(v0(9) == doctest::Approx(10.0 / 90));

  CTensor Yi(Grid::Zero(Nr, N), Grid::Ones(Nr, N));
  const auto vi = detector_input(Yi, th, Nr, N);
  CHECK(vi.head(Nr * N).isZero());
  CHECK(vi.segment(Nr * N, Nr * N).isOnes());

  // Row-major: (r, n) -> r * N + n in the real half.
  Grid re(Nr, N);
  re << 1, 2, 3, 4;
  const auto vr = detector_input(CTensor(re, Grid::Zero(Nr, N)), th, Nr, N);
  CHECK(vr.head(4) == Eigen::Vector4d(1, 2, 3, 4));

  // Batched form agrees with the single-echo form.
  Rng rng = make_stream(5, 0, 0);
  const auto Yb = complex_gaussian(Nr, 3 * N, 1.0, rng);
  const auto batched = detector_input(CNode::constant(Yb), th, Nr, N)->value;
  for (Index b = 0; b < 3; ++b) {
    CTensor one(Yb.re.middleCols(b * N, N), Yb.im.middleCols(b * N, N));
    CHECK((batched.col(b) - detector_input(one, th, Nr, N)).cwiseAbs().maxCoeff() == 0.0);
  }

  const auto cfg = tiny_cfg();
  auto det = DetectorParams::make(cfg, rng);
  det.net.set_zero();
  const auto r = detect(v0, det, 0.5);
  CHECK(r.q == 0.5);
  CHECK(r.present);
  CHECK(threshold(0.0, 0.0));
  CHECK_FALSE(threshold(0.999, 1.0));
}

TEST_CASE("estimator input sequence") {
  const int Nr = 16, N = 8;
  Rng rng = make_stream(6, 0, 0);
  const auto Y = complex_gaussian(Nr, N, 1.0, rng);
  const auto seq = estimator_input(Y);
  CHECK(seq.rows() == 32);
  CHECK(seq.cols() == 8);
  const auto back = echo_from_sequence(seq);
  CHECK(back.re == Y.re);
  CHECK(back.im == Y.im);

  const auto real_seq = estimator_input(CTensor(Y.re, Grid::Zero(Nr, N)));
  CHECK(real_seq.bottomRows(Nr).isZero());
  const auto neg = estimator_input(CTensor(-Y.re, -Y.im));
  CHECK(neg == -seq);
}

TEST_CASE("LSTM cell") {
  const auto cfg = tiny_cfg();
  Rng rng = make_stream(7, 0, 0);
  auto p = LstmParams::make(cfg, rng);
  const Index H = p.hidden();

  SUBCASE("zero weights and state give zero output") {
    for (auto& w : p.params()) w->value.setZero();
    LstmState s{ad::constant(Grid::Zero(H, 2)), ad::constant(Grid::Zero(H, 2))};
    const auto out = lstm_cell(ad::constant(Grid::Ones(cfg.N, 2)), s, p);
    CHECK(out.c->value.isZero());
    CHECK(out.h->value.isZero());
    CHECK(estimate_angle(Grid::Ones(2 * cfg.Nr, cfg.N), p, 10.0) == 0.0);
  }
  SUBCASE("saturated forget gate with closed input gate keeps the memory") {
    for (auto& w : p.params()) w->value.setZero();
    p.bf->value.setConstant(50.0);
    p.bi->value.setConstant(-50.0);
    const Grid c0 = Grid::Constant(H, 1, 0.7);
    LstmState s{ad::constant(Grid::Zero(H, 1)), ad::constant(c0)};
    const auto out = lstm_cell(ad::constant(Grid::Ones(cfg.N, 1)), s, p);
    CHECK((out.c->value - c0).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("finite differences through the cell and the full estimator") {
    auto x = ad::leaf(complex_gaussian(cfg.N, 3, 1.0, rng).re);
    auto h0 = ad::leaf(complex_gaussian(H, 3, 0.5, rng).re);
    auto c0 = ad::leaf(complex_gaussian(H, 3, 0.5, rng).re);
    const Grid w = complex_gaussian(H, 3, 1.0, rng).re;
    auto leaves = p.params();
    leaves.insert(leaves.end(), {x, h0, c0});
    auto cell = [&] {
      const auto s = lstm_cell(x, {h0, c0}, p);
      return ad::add(ad::sum(ad::mul_const(s.h, w)), ad::sum(ad::mul_const(s.c, w)));
    };
    CHECK(gradcheck(cell, leaves).max_rel < 1e-5);

    const auto Y = complex_gaussian(cfg.Nr, 3 * cfg.N, 1.0, rng);
    auto yre = ad::leaf(Y.re), yim = ad::leaf(Y.im);
    auto est_leaves = p.params();
    est_leaves.insert(est_leaves.end(), {yre, yim});
    auto est = [&] { return ad::sum(estimate_angle(CNode{yre, yim}, cfg.Nr, cfg.N, p, 10.0)); };
    CHECK(gradcheck(est, est_leaves).max_rel < 1e-5);
  }
  SUBCASE("batched estimator matches per-sequence evaluation") {
    const auto Y = complex_gaussian(cfg.Nr, 2 * cfg.N, 1.0, rng);
    const auto batched = estimate_angle(CNode::constant(Y), cfg.Nr, cfg.N, p, 10.0)->value;
    for (Index b = 0; b < 2; ++b) {
      const CTensor one(Y.re.middleCols(b * cfg.N, cfg.N), Y.im.middleCols(b * cfg.N, cfg.N));
      CHECK(batched(0, b) == doctest::Approx(estimate_angle(estimator_input(one), p, 10.0)).epsilon(1e-14));
    }
    CHECK(batched.cwiseAbs().maxCoeff() <= 10.0);
  }
}

TEST_CASE("MLP estimator") {
  const auto cfg = tiny_cfg();
  Rng rng = make_stream(8, 0, 0);
  auto p = MlpEstimatorParams::make(cfg, rng);
  CHECK(p.net.widths() == std::vector<int>{2 * cfg.N * cfg.Nr, cfg.N * cfg.Nr, cfg.N, cfg.Nr, 1});
  p.net.set_zero();
  CHECK(mlp_estimate_angle(Eigen::VectorXd::Ones(2 * cfg.N * cfg.Nr), p, 10.0) == 0.0);
}
