/**
 * @file    isac/transmitter.hpp
 * @brief   Learned symbol-level precoder (SLP), the block-level baseline (BLP) and
 *          batch power normalization.
 *
 * Messages for a batch of C slots are passed slot-major: messages[c * K + k].
 */
#pragma once

#include "isac/channel.hpp"
#include "isac/config.hpp"
#include "isac/nn.hpp"

#include <span>
#include <stdexcept>
#include <vector>

namespace isac {

struct PrioriInfo {
  AngleInterval theta;
  std::vector<AngleInterval> users;

  static PrioriInfo from_config(const SystemConfig& cfg);
  /// [theta_min, theta_max, u1_min, u1_max, ...] in degrees; length 2 + 2K.
  std::vector<double> flatten() const;
  /// flatten() scaled by 1/90 into [-1, 1].
  Eigen::VectorXd normalized() const;
};

/// Widths [(2+2K)+K, 2Nt, 4Nt, 8Nt, 4Nt, 2Nt]; ReLU x4 then linear.
struct SlpParams {
  Mlp net;
  static SlpParams make(const SystemConfig& cfg, Rng& rng);
};

/// Encoder [|M|, Nt, Nt, 2Nt, 2] shared by all users; beamformer [2+2K, Nt, 4Nt, 8Nt, 2NtK].
struct BlpParams {
  Mlp encoder;
  Mlp beamformer;
  static BlpParams make(const SystemConfig& cfg, Rng& rng);
};

/// Message index i -> (2i - (|M|-1)) / (|M|-1).
double normalize_message(int m, int M_size);

/// Throws std::out_of_range for m outside [0, M_size).
Eigen::VectorXd one_hot(int m, int M_size);

/// Un-normalized SLP output for C = messages.size() / K slots: Nt x C complex.
CNode slp_forward(const PrioriInfo& priori, std::span<const int> messages, int M_size,
                  const SlpParams& params);
/// Un-normalized BLP output x = W s for C slots.
CNode blp_forward(const PrioriInfo& priori, std::span<const int> messages, int M_size,
                  const BlpParams& params);

/// Beamformer output as a complex Nt x K matrix: entries [0, NtK) real, [NtK, 2NtK) imaginary,
/// each column-major.
CNode blp_precoder(const PrioriInfo& priori, const BlpParams& params, int Nt);

/// Single-slot conveniences returning values.
CTensor slp_forward(const PrioriInfo& priori, std::span<const int> messages, int M_size,
                    const SlpParams& params, int Nt);
CTensor blp_forward(const PrioriInfo& priori, std::span<const int> messages, int M_size,
                    const BlpParams& params, int Nt);

/// Scales X by sqrt(P_lin * C / ||X||_F^2) so the mean per-slot power is P_lin.
/// Throws NumericalError when X is identically zero.
CNode power_normalize(const CNode& X, double P_lin);
CTensor power_normalize(const CTensor& X, double P_lin);

/// Batch-independent scale so that X * factor * sqrt(P_lin) has mean power P_lin on the
/// calibration batch X.
double calibration_factor(const CTensor& X);

}  // namespace isac
