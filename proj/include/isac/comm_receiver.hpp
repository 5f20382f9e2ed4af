#pragma once

#include "isac/channel.hpp"
#include "isac/config.hpp"
#include "isac/nn.hpp"

#include <span>

namespace isac {

/// Per-user decoder, widths [2, Nt, 2Nt, 2Nt, 2Nt, |M|]; ReLU x4 then linear logits.
struct DecoderParams {
  Mlp net;
  static DecoderParams make(const SystemConfig& cfg, int user, Rng& rng);
};

Eigen::Vector2d preprocess_rx(cd y);

/// Logits (|M| x C) for a batch of received samples; rows [Re; Im] of y feed the network.
ad::NodePtr decoder_logits(const CNode& y, const DecoderParams& params);

/// Softmax probabilities for one sample.
Eigen::VectorXd decode(const Eigen::Vector2d& y2, const DecoderParams& params);

/// Argmax, lowest index wins ties.
int decide(std::span<const double> p);
int decide(const Eigen::VectorXd& p);

}  // namespace isac
