#include "isac/comm_receiver.hpp"

#include <array>

namespace isac {

DecoderParams DecoderParams::make(const SystemConfig& cfg, int user, Rng& rng) {
  using ad::Activation;
  const int Nt = cfg.Nt;
  return {Mlp::make("decoder" + std::to_string(user), {2, Nt, 2 * Nt, 2 * Nt, 2 * Nt, cfg.M_size},
                    {Activation::Relu, Activation::Relu, Activation::Relu, Activation::Relu,
                     Activation::Linear},
                    rng)};
}

Eigen::Vector2d preprocess_rx(cd y) { return {y.real(), y.imag()}; }

ad::NodePtr decoder_logits(const CNode& y, const DecoderParams& params) {
  const std::array<ad::NodePtr, 2> parts{y.re, y.im};
  return params.net.forward(ad::concat_rows(parts));
}

Eigen::VectorXd decode(const Eigen::Vector2d& y2, const DecoderParams& params) {
  const auto p = ad::activation(ad::Activation::SoftmaxCols, params.net.forward(ad::constant(y2)));
  return p->value.col(0);
}

int decide(std::span<const double> p) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(p.size()); ++i)
    if (p[static_cast<std::size_t>(i)] > p[static_cast<std::size_t>(best)]) best = i;
  return best;
}

int decide(const Eigen::VectorXd& p) { return decide(std::span<const double>(p.data(), static_cast<std::size_t>(p.size()))); }

}  // namespace isac
