#include "isac/channel.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace isac {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

// Domains keep the scenario, noise and shuffle streams of one seed apart.
constexpr std::uint64_t kScenarioDomain = 0x5343454e;  // "SCEN"

double positive_gaussian(double mean, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(mean, stddev);
  for (;;) {
    const double d = stddev > 0.0 ? dist(rng) : mean;
    if (d > 0.0) return d;
  }
}

double uniform_on(const AngleInterval& iv, Rng& rng) {
  if (iv.lo == iv.hi) return iv.lo;
  std::uniform_real_distribution<double> dist(iv.lo, iv.hi);
  return dist(rng);
}

// Columns of steering vectors a(theta_b) repeated over the N slots of each scenario.
CTensor steering_columns(std::span<const Scenario> batch, int n_elem, int slots, auto angle_of) {
  const Index cols = static_cast<Index>(batch.size()) * slots;
  CTensor out = CTensor::zeros(n_elem, cols);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const CTensor a = steering_vector(angle_of(batch[b]), n_elem);
    for (int n = 0; n < slots; ++n) {
      out.re.col(static_cast<Index>(b) * slots + n) = a.re.col(0);
      out.im.col(static_cast<Index>(b) * slots + n) = a.im.col(0);
    }
  }
  return out;
}

// a^T x per column for a constant steering grid A and graph signal x.
CNode steer_project(const CTensor& A, const CNode& x) {
  using namespace ad;
  auto re = col_sum(sub(mul_const(x.re, A.re), mul_const(x.im, A.im)));
  auto im = col_sum(add(mul_const(x.im, A.re), mul_const(x.re, A.im)));
  return {re, im};
}

void check_signal(const char* who, const CNode& x, Index rows, Index cols) {
  if (x.re->rows() != rows || x.re->cols() != cols || x.im->rows() != rows || x.im->cols() != cols)
    throw DimensionError(std::string(who) + ": signal is " + std::to_string(x.re->rows()) + "x" +
                         std::to_string(x.re->cols()) + ", expected " + std::to_string(rows) + "x" +
                         std::to_string(cols));
}

void check_noise(const char* who, const CTensor& z, Index rows, Index cols) {
  if (z.rows() != rows || z.cols() != cols)
    throw DimensionError(std::string(who) + ": noise is " + std::to_string(z.rows()) + "x" +
                         std::to_string(z.cols()) + ", expected " + std::to_string(rows) + "x" +
                         std::to_string(cols));
}

}  // namespace

Rng make_stream(std::uint64_t seed, std::uint64_t domain, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(domain), static_cast<std::uint32_t>(domain >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

CTensor::CTensor(Grid r, Grid i) : re(std::move(r)), im(std::move(i)) {
  if (re.rows() != im.rows() || re.cols() != im.cols())
    throw DimensionError("CTensor: real part " + std::to_string(re.rows()) + "x" +
                         std::to_string(re.cols()) + " vs imaginary part " + std::to_string(im.rows()) +
                         "x" + std::to_string(im.cols()));
}

CTensor CTensor::zeros(Index rows, Index cols) { return {Grid::Zero(rows, cols), Grid::Zero(rows, cols)}; }

CNode CNode::constant(const CTensor& t) { return {ad::constant(t.re), ad::constant(t.im)}; }

CTensor steering_vector(double theta_deg, int n) {
  if (n < 1) throw std::domain_error("steering_vector: element count must be >= 1");
  const double s = std::sin(theta_deg * kDegToRad);
  const double amp = 1.0 / std::sqrt(static_cast<double>(n));
  CTensor a = CTensor::zeros(n, 1);
  for (int i = 0; i < n; ++i) {
    const double phase = -std::numbers::pi * i * s;
    a.re(i, 0) = amp * std::cos(phase);
    a.im(i, 0) = amp * std::sin(phase);
  }
  return a;
}

double path_loss(double ref_db, double d, double d0, double gamma) {
  if (!(d > 0.0) || !(d0 > 0.0)) throw std::domain_error("path_loss: distances must be positive");
  return std::pow(10.0, ref_db / 10.0) * std::pow(d / d0, -gamma);
}

Scenario sample_scenario(const SystemConfig& cfg, Rng& rng) {
  Scenario sc;
  std::bernoulli_distribution coin(0.5);
  std::uniform_int_distribution<int> msg(0, cfg.M_size - 1);
  sc.target_present = coin(rng);
  sc.theta_deg = uniform_on(cfg.theta_bounds, rng);
  sc.d_r = positive_gaussian(cfg.d_r_mean, cfg.d_r_std, rng);
  sc.user_angles_deg.resize(static_cast<std::size_t>(cfg.K));
  sc.d_c.resize(static_cast<std::size_t>(cfg.K));
  for (int k = 0; k < cfg.K; ++k) {
    sc.user_angles_deg[k] = uniform_on(cfg.user_bounds[k], rng);
    sc.d_c[k] = positive_gaussian(cfg.d_c_mean, cfg.d_c_std, rng);
  }
  sc.messages.resize(static_cast<std::size_t>(cfg.N * cfg.K));
  for (auto& m : sc.messages) m = msg(rng);
  return sc;
}

Scenario scenario_at(const SystemConfig& cfg, std::uint64_t seed, std::uint64_t index) {
  Rng rng = make_stream(seed, kScenarioDomain, index);
  return sample_scenario(cfg, rng);
}

CTensor complex_gaussian(Index rows, Index cols, double variance, Rng& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(variance / 2.0));
  CTensor z = CTensor::zeros(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) {
      z.re(r, c) = dist(rng);
      z.im(r, c) = dist(rng);
    }
  return z;
}

double radar_array_gain(const SystemConfig& cfg) {
  return std::sqrt(static_cast<double>(cfg.Nt) * static_cast<double>(cfg.Nr));
}

double comm_array_gain(const SystemConfig& cfg) { return std::sqrt(static_cast<double>(cfg.Nt)); }

CNode radar_echo(const CNode& x, std::span<const Scenario> batch, const SystemConfig& cfg,
                 const CTensor& noise) {
  const Index cols = static_cast<Index>(batch.size()) * cfg.N;
  check_signal("radar_echo", x, cfg.Nt, cols);
  check_noise("radar_echo", noise, cfg.Nr, cols);

  const CTensor At = steering_columns(batch, cfg.Nt, cfg.N, [](const Scenario& s) { return s.theta_deg; });
  CTensor Kr = steering_columns(batch, cfg.Nr, cfg.N, [](const Scenario& s) { return s.theta_deg; });
  const double gr = radar_array_gain(cfg);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const double coef = batch[b].target_present
                            ? gr * cfg.alpha_t * path_loss(cfg.alpha0_db, batch[b].d_r, cfg.d0, cfg.gamma)
                            : 0.0;
    const auto block = Eigen::seqN(static_cast<Index>(b) * cfg.N, cfg.N);
    Kr.re(Eigen::all, block) *= coef;
    Kr.im(Eigen::all, block) *= coef;
  }

  using namespace ad;
  const CNode s = steer_project(At, x);
  auto yr = sub(mul_row_broadcast(Kr.re, s.re), mul_row_broadcast(Kr.im, s.im));
  auto yi = add(mul_row_broadcast(Kr.re, s.im), mul_row_broadcast(Kr.im, s.re));
  return {add_const(yr, noise.re), add_const(yi, noise.im)};
}

CNode comm_receive(const CNode& x, std::span<const Scenario> batch, int k, const SystemConfig& cfg,
                   const CTensor& noise) {
  if (k < 0 || k >= cfg.K)
    throw std::out_of_range("comm_receive: user index " + std::to_string(k) + " outside [0, " +
                            std::to_string(cfg.K) + ")");
  const Index cols = static_cast<Index>(batch.size()) * cfg.N;
  check_signal("comm_receive", x, cfg.Nt, cols);
  check_noise("comm_receive", noise, 1, cols);

  CTensor Au = steering_columns(batch, cfg.Nt, cfg.N,
                                [k](const Scenario& s) { return s.user_angles_deg[static_cast<std::size_t>(k)]; });
  const double gc = comm_array_gain(cfg);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const double coef =
        gc * std::sqrt(path_loss(cfg.beta0_db, batch[b].d_c[static_cast<std::size_t>(k)], cfg.d0, cfg.gamma));
    const auto block = Eigen::seqN(static_cast<Index>(b) * cfg.N, cfg.N);
    Au.re(Eigen::all, block) *= coef;
    Au.im(Eigen::all, block) *= coef;
  }
  const CNode y = steer_project(Au, x);
  return {ad::add_const(y.re, noise.re), ad::add_const(y.im, noise.im)};
}

CTensor radar_echo(const CTensor& x_block, const Scenario& sc, const SystemConfig& cfg, Rng& rng) {
  const CTensor z = complex_gaussian(cfg.Nr, cfg.N, cfg.sigma_r2_lin(), rng);
  return radar_echo(CNode::constant(x_block), std::span(&sc, 1), cfg, z).value();
}

cd comm_receive(const CTensor& x_slot, const Scenario& sc, int k, const SystemConfig& cfg, Rng& rng) {
  if (x_slot.rows() != cfg.Nt || x_slot.cols() != 1)
    throw DimensionError("comm_receive: x_slot must be Nt x 1");
  // Reuse the batched path with a single-slot configuration.
  SystemConfig one = cfg;
  one.N = 1;
  const CTensor z = complex_gaussian(1, 1, cfg.sigma_c2_lin(), rng);
  const CTensor y = comm_receive(CNode::constant(x_slot), std::span(&sc, 1), k, one, z).value();
  return y.at(0, 0);
}

}  // namespace isac
