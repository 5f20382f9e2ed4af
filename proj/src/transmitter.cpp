#include "isac/transmitter.hpp"

#include <string>

namespace isac {

namespace {

using ad::Activation;

int slot_count(std::span<const int> messages, int K) {
  if (K < 1 || messages.size() % static_cast<std::size_t>(K) != 0)
    throw DimensionError("transmitter: " + std::to_string(messages.size()) +
                         " message entries is not a multiple of K=" + std::to_string(K));
  return static_cast<int>(messages.size()) / K;
}

void check_messages(std::span<const int> messages, int M_size) {
  for (int m : messages)
    if (m < 0 || m >= M_size)
      throw std::domain_error("transmitter: message " + std::to_string(m) + " outside alphabet of size " +
                              std::to_string(M_size));
}

CNode split_halves(const ad::NodePtr& out, int Nt) {
  return {ad::slice_rows(out, 0, Nt), ad::slice_rows(out, Nt, Nt)};
}

}  // namespace

PrioriInfo PrioriInfo::from_config(const SystemConfig& cfg) {
  PrioriInfo p;
  p.theta = cfg.theta_bounds;
  p.users.assign(cfg.user_bounds.begin(), cfg.user_bounds.begin() + cfg.K);
  return p;
}

std::vector<double> PrioriInfo::flatten() const {
  std::vector<double> v{theta.lo, theta.hi};
  for (const auto& u : users) {
    v.push_back(u.lo);
    v.push_back(u.hi);
  }
  return v;
}

Eigen::VectorXd PrioriInfo::normalized() const {
  const auto v = flatten();
  Eigen::VectorXd out(static_cast<Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Index>(i)) = v[i] / 90.0;
  return out;
}

SlpParams SlpParams::make(const SystemConfig& cfg, Rng& rng) {
  const int Nt = cfg.Nt;
  const int K = cfg.K;
  return {Mlp::make("slp", {(2 + 2 * K) + K, 2 * Nt, 4 * Nt, 8 * Nt, 4 * Nt, 2 * Nt},
                    {Activation::Relu, Activation::Relu, Activation::Relu, Activation::Relu,
                     Activation::Linear},
                    rng)};
}

BlpParams BlpParams::make(const SystemConfig& cfg, Rng& rng) {
  const int Nt = cfg.Nt;
  const int K = cfg.K;
  BlpParams p;
  p.encoder = Mlp::make("blp_encoder", {cfg.M_size, Nt, Nt, 2 * Nt, 2},
                        {Activation::Relu, Activation::Relu, Activation::Relu, Activation::Linear}, rng);
  p.beamformer = Mlp::make("blp_beamformer", {2 + 2 * K, Nt, 4 * Nt, 8 * Nt, 2 * Nt * K},
                           {Activation::Relu, Activation::Relu, Activation::Relu, Activation::Linear}, rng);
  return p;
}

double normalize_message(int m, int M_size) {
  return (2.0 * m - (M_size - 1)) / static_cast<double>(M_size - 1);
}

Eigen::VectorXd one_hot(int m, int M_size) {
  if (m < 0 || m >= M_size)
    throw std::out_of_range("one_hot: index " + std::to_string(m) + " outside [0, " +
                            std::to_string(M_size) + ")");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(M_size);
  v(m) = 1.0;
  return v;
}

CNode slp_forward(const PrioriInfo& priori, std::span<const int> messages, int M_size,
                  const SlpParams& params) {
  const int K = static_cast<int>(priori.users.size());
  const int C = slot_count(messages, K);
  check_messages(messages, M_size);
  const Eigen::VectorXd pri = priori.normalized();
  const Index P = pri.size();
  if (params.net.widths().front() != P + K)
    throw DimensionError("slp_forward: network input width " + std::to_string(params.net.widths().front()) +
                         " != " + std::to_string(P + K));
  Grid in(P + K, C);
  for (int c = 0; c < C; ++c) {
    in.col(c).head(P) = pri;
    for (int k = 0; k < K; ++k) in(P + k, c) = normalize_message(messages[static_cast<std::size_t>(c * K + k)], M_size);
  }
  const auto out = params.net.forward(ad::constant(std::move(in)));
  return split_halves(out, static_cast<int>(out->rows()) / 2);
}

CNode blp_precoder(const PrioriInfo& priori, const BlpParams& params, int Nt) {
  const int K = static_cast<int>(priori.users.size());
  const auto w = params.beamformer.forward(ad::constant(priori.normalized()));
  if (w->rows() != 2 * Nt * K)
    throw DimensionError("blp_precoder: beamformer emits " + std::to_string(w->rows()) + " values, expected " +
                         std::to_string(2 * Nt * K));
  std::vector<Index> re(static_cast<std::size_t>(Nt * K));
  std::vector<Index> im(re.size());
  for (Index i = 0; i < static_cast<Index>(re.size()); ++i) {
    re[static_cast<std::size_t>(i)] = i;
    im[static_cast<std::size_t>(i)] = i + Nt * K;
  }
  return {ad::gather(w, Nt, K, std::move(re)), ad::gather(w, Nt, K, std::move(im))};
}

CNode blp_forward(const PrioriInfo& priori, std::span<const int> messages, int M_size,
                  const BlpParams& params) {
  const int K = static_cast<int>(priori.users.size());
  const int C = slot_count(messages, K);
  check_messages(messages, M_size);
  const int Nt = static_cast<int>(params.beamformer.widths().back()) / (2 * K);

  Grid hot = Grid::Zero(M_size, static_cast<Index>(C) * K);
  for (std::size_t i = 0; i < messages.size(); ++i) hot(messages[i], static_cast<Index>(i)) = 1.0;
  const auto sym = params.encoder.forward(ad::constant(std::move(hot)));  // 2 x (C*K)

  // s(k, c) lives at encoder column c*K + k.
  std::vector<Index> sr(static_cast<std::size_t>(K * C));
  std::vector<Index> si(sr.size());
  for (int c = 0; c < C; ++c)
    for (int k = 0; k < K; ++k) {
      const std::size_t dst = static_cast<std::size_t>(c * K + k);  // column-major K x C
      sr[dst] = static_cast<Index>(c * K + k) * 2;
      si[dst] = static_cast<Index>(c * K + k) * 2 + 1;
    }
  const auto s_re = ad::gather(sym, K, C, std::move(sr));
  const auto s_im = ad::gather(sym, K, C, std::move(si));

  const CNode W = blp_precoder(priori, params, Nt);
  return {ad::sub(ad::matmul(W.re, s_re), ad::matmul(W.im, s_im)),
          ad::add(ad::matmul(W.re, s_im), ad::matmul(W.im, s_re))};
}

CTensor slp_forward(const PrioriInfo& priori, std::span<const int> messages, int M_size,
                    const SlpParams& params, int Nt) {
  const CTensor x = slp_forward(priori, messages, M_size, params).value();
  if (x.rows() != Nt) throw DimensionError("slp_forward: network emits " + std::to_string(x.rows()) + " antennas");
  return x;
}

CTensor blp_forward(const PrioriInfo& priori, std::span<const int> messages, int M_size,
                    const BlpParams& params, int Nt) {
  const CTensor x = blp_forward(priori, messages, M_size, params).value();
  if (x.rows() != Nt) throw DimensionError("blp_forward: network emits " + std::to_string(x.rows()) + " antennas");
  return x;
}

CNode power_normalize(const CNode& X, double P_lin) {
  const double C = static_cast<double>(X.re->cols());
  if (C < 1) throw DimensionError("power_normalize: empty batch");
  const double energy = X.re->value.squaredNorm() + X.im->value.squaredNorm();
  if (!(energy > 0.0)) throw NumericalError("power_normalize: signal is identically zero, scale undefined");
  using namespace ad;
  const auto e = add(sum(mul(X.re, X.re)), sum(mul(X.im, X.im)));
  const auto factor = inv_sqrt(e, P_lin * C);
  return {scalar_mul(X.re, factor), scalar_mul(X.im, factor)};
}

CTensor power_normalize(const CTensor& X, double P_lin) {
  return power_normalize(CNode::constant(X), P_lin).value();
}

double calibration_factor(const CTensor& X) {
  const double energy = X.squared_norm();
  if (!(energy > 0.0)) throw NumericalError("calibration_factor: signal is identically zero");
  return std::sqrt(static_cast<double>(X.cols()) / energy);
}

}  // namespace isac
