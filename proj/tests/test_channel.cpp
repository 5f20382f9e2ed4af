#include "isac/channel.hpp"
#include "isac/config.hpp"

#include <doctest.h>

#include <Eigen/SVD>

#include <cmath>
#include <numbers>

using namespace isac;

namespace {

SystemConfig small_cfg() {
  auto cfg = desk_scale_config();
  cfg.Nt = 4;
  cfg.Nr = 3;
  cfg.N = 5;
  return cfg;
}

// Conjugate of a steering vector repeated over `cols` columns.
CTensor conj_repeated(const CTensor& a, Index cols) {
  CTensor x(a.re.replicate(1, cols), -a.im.replicate(1, cols));
  return x;
}

}  // namespace

TEST_CASE("steering vector hand values") {
  const auto a0 = steering_vector(0.0, 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(a0.re(i, 0) == doctest::Approx(0.5));
    CHECK(std::abs(a0.im(i, 0)) < 1e-15);
  }
  const auto a90 = steering_vector(90.0, 3);
  const double s = 1.0 / std::sqrt(3.0);
  CHECK(a90.re(0, 0) == doctest::Approx(s));
  CHECK(a90.re(1, 0) == doctest::Approx(-s));
  CHECK(a90.re(2, 0) == doctest::Approx(s));
  CHECK(a90.im.cwiseAbs().maxCoeff() < 1e-12);

  const auto a30 = steering_vector(30.0, 2);
  CHECK(a30.re(0, 0) == doctest::Approx(1 / std::sqrt(2.0)));
  CHECK(std::abs(a30.re(1, 0)) < 1e-12);
  CHECK(a30.im(1, 0) == doctest::Approx(-1 / std::sqrt(2.0)));

  for (double th : {-73.0, -10.0, 0.0, 4.5, 61.0, 89.9})
    for (int n : {1, 2, 8, 16, 20}) CHECK(std::abs(steering_vector(th, n).squared_norm() - 1.0) < 1e-12);
}

TEST_CASE("path loss closed forms") {
  CHECK(path_loss(-30, 1, 1, 2.2) == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(path_loss(-30, 10, 1, 2.2) == doctest::Approx(std::pow(10.0, -5.2)).epsilon(1e-12));
  CHECK(path_loss(-30, 10, 1, 2.2) == doctest::Approx(6.3096e-6).epsilon(1e-4));
  CHECK(path_loss(-17, 123.0, 1, 0.0) == doctest::Approx(std::pow(10.0, -1.7)).epsilon(1e-12));
  CHECK_THROWS_AS(path_loss(-30, 0.0, 1, 2.2), std::domain_error);
  CHECK_THROWS_AS(path_loss(-30, -1.0, 1, 2.2), std::domain_error);
}

TEST_CASE("array gains") {
  SystemConfig cfg;
  cfg.Nt = cfg.Nr = 16;
  CHECK(radar_array_gain(cfg) == 16.0);
  CHECK(comm_array_gain(cfg) == 4.0);
}

TEST_CASE("scenario sampling statistics") {
  auto cfg = desk_scale_config();
  Rng rng = make_stream(7, 1, 0);
  constexpr int kDraws = 100000;
  double t_mean = 0, th_mean = 0;
  bool in_bounds = true;
  for (int i = 0; i < kDraws; ++i) {
    const auto s = sample_scenario(cfg, rng);
    t_mean += s.target_present;
    th_mean += s.theta_deg;
    in_bounds &= s.theta_deg >= -10 && s.theta_deg <= 10 && s.d_r > 0;
    for (int k = 0; k < cfg.K; ++k) {
      const auto& ub = cfg.user_bounds[static_cast<std::size_t>(k)];
      in_bounds &= s.user_angles_deg[static_cast<std::size_t>(k)] >= ub.lo &&
                   s.user_angles_deg[static_cast<std::size_t>(k)] <= ub.hi;
    }
    for (int m : s.messages) in_bounds &= m >= 0 && m < cfg.M_size;
  }
  CHECK(in_bounds);
  CHECK(std::abs(t_mean / kDraws - 0.5) < 0.01);
  CHECK(std::abs(th_mean / kDraws) < 0.15);

  cfg.theta_bounds = {10, 10};
  for (int i = 0; i < 10; ++i) CHECK(sample_scenario(cfg, rng).theta_deg == 10.0);
}

TEST_CASE("scenario_at is order independent") {
  const auto cfg = desk_scale_config();
  const auto a = scenario_at(cfg, 5, 1);
  (void)scenario_at(cfg, 5, 0);
  CHECK(scenario_at(cfg, 5, 1) == a);
  CHECK_FALSE(scenario_at(cfg, 5, 2) == a);
}

TEST_CASE("complex Gaussian noise variance within 2% over 1e5 draws") {
  Rng rng = make_stream(3, 2, 0);
  const double var = 1e-7;
  const auto z = complex_gaussian(1, 100000, var, rng);
  const double emp = z.squared_norm() / 100000.0;
  CHECK(std::abs(emp / var - 1.0) < 0.02);
  // Circular: real and imaginary halves carry equal power.
  CHECK(std::abs(z.re.squaredNorm() / z.im.squaredNorm() - 1.0) < 0.03);
}

TEST_CASE("radar echo") {
  auto cfg = small_cfg();
  Scenario sc;
  sc.target_present = true;
  sc.theta_deg = 7.0;
  sc.d_r = 9.5;
  sc.user_angles_deg = {60, -65};
  sc.d_c = {150, 150};
  sc.messages.assign(static_cast<std::size_t>(cfg.N * cfg.K), 0);
  const std::vector<Scenario> batch{sc};
  const auto zero_noise = CTensor::zeros(cfg.Nr, cfg.N);

  SUBCASE("matched transmit gives column norm G_r alpha_t alpha_d") {
    const auto X = conj_repeated(steering_vector(sc.theta_deg, cfg.Nt), cfg.N);
    const auto Y = radar_echo(CNode::constant(X), batch, cfg, zero_noise).value();
    const double expect = radar_array_gain(cfg) * cfg.alpha_t * path_loss(cfg.alpha0_db, sc.d_r, cfg.d0, cfg.gamma);
    for (Index n = 0; n < cfg.N; ++n)
      CHECK(std::sqrt(Y.re.col(n).squaredNorm() + Y.im.col(n).squaredNorm()) ==
            doctest::Approx(expect).epsilon(1e-12));
  }
  SUBCASE("noiseless H1 echo is rank one for arbitrary X") {
    Rng rng = make_stream(1, 9, 0);
    const auto X = complex_gaussian(cfg.Nt, cfg.N, 1.0, rng);
    const auto Y = radar_echo(CNode::constant(X), batch, cfg, zero_noise).value();
    const Eigen::MatrixXcd Yc = Y.re.cast<cd>() + cd(0, 1) * Y.im.cast<cd>();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(Yc);
    const auto sv = svd.singularValues();
    CHECK(sv(0) > 0);
    CHECK(sv(1) / sv(0) < 1e-12);
  }
  SUBCASE("H0 with zero noise is zero; echo is linear in X") {
    Scenario h0 = sc;
    h0.target_present = false;
    Rng rng = make_stream(1, 9, 1);
    const auto X1 = complex_gaussian(cfg.Nt, cfg.N, 1.0, rng);
    const auto X2 = complex_gaussian(cfg.Nt, cfg.N, 1.0, rng);
    const std::vector<Scenario> b0{h0};
    CHECK(radar_echo(CNode::constant(X1), b0, cfg, zero_noise).value().squared_norm() == 0.0);

    const auto y1 = radar_echo(CNode::constant(X1), batch, cfg, zero_noise).value();
    const auto y2 = radar_echo(CNode::constant(X2), batch, cfg, zero_noise).value();
    const CTensor sum(X1.re * 2.0 + X2.re * -3.0, X1.im * 2.0 + X2.im * -3.0);
    const auto ys = radar_echo(CNode::constant(sum), batch, cfg, zero_noise).value();
    CHECK((ys.re - (2.0 * y1.re - 3.0 * y2.re)).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((ys.im - (2.0 * y1.im - 3.0 * y2.im)).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("shape mismatch") {
    const auto bad = CTensor::zeros(cfg.Nt + 1, cfg.N);
    CHECK_THROWS_AS(radar_echo(CNode::constant(bad), batch, cfg, zero_noise), DimensionError);
  }
}

TEST_CASE("downlink") {
  auto cfg = small_cfg();
  Scenario sc;
  sc.target_present = false;
  sc.theta_deg = 0;
  sc.d_r = 10;
  sc.user_angles_deg = {55.0, -62.0};
  sc.d_c = {149.0, 151.5};
  sc.messages.assign(static_cast<std::size_t>(cfg.N * cfg.K), 0);
  const std::vector<Scenario> batch{sc};
  const auto zero = CTensor::zeros(1, cfg.N);

  for (int k = 0; k < cfg.K; ++k) {
    const auto X = conj_repeated(steering_vector(sc.user_angles_deg[static_cast<std::size_t>(k)], cfg.Nt), cfg.N);
    const auto y = comm_receive(CNode::constant(X), batch, k, cfg, zero).value();
    const double expect =
        std::sqrt(double(cfg.Nt)) * std::sqrt(path_loss(cfg.beta0_db, sc.d_c[static_cast<std::size_t>(k)], cfg.d0, cfg.gamma));
    CHECK(y.re(0, 0) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(std::abs(y.im(0, 0)) < 1e-12 * expect);
  }
  CHECK(comm_receive(CNode::constant(CTensor::zeros(cfg.Nt, cfg.N)), batch, 0, cfg, zero).value().squared_norm() == 0);
  CHECK_THROWS_AS(comm_receive(CNode::constant(CTensor::zeros(cfg.Nt, cfg.N)), batch, cfg.K, cfg, zero),
                  std::out_of_range);
}
