/**
 * @file    isac/training.hpp
 * @brief   Losses, the batched end-to-end forward pass, datasets and the joint training loop.
 */
#pragma once

#include "isac/channel.hpp"
#include "isac/config.hpp"
#include "isac/model.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace isac {

struct LossWeights {
  double omega1 = 0.05;
  double omega2 = 0.3;
};

// -- losses -----------------------------------------------------------------------

/// Detection BCE over a 1 x B probability row.
ad::NodePtr bce_loss(const ad::NodePtr& q, const Grid& t);
/// MSE over the samples with t = 1; zero with no gradient when none are present.
ad::NodePtr masked_mse_loss(const ad::NodePtr& theta_hat, const Grid& theta, const Grid& t);
/// Sum over users of the mean categorical cross-entropy; logits are |M| x C per user.
ad::NodePtr cce_loss(std::span<const ad::NodePtr> logits, std::span<const std::vector<int>> labels);
/// w2 [(1 - w1) L1 + w1 L2] + (1 - w2) L3.
ad::NodePtr isac_loss(const ad::NodePtr& L1, const ad::NodePtr& L2, const ad::NodePtr& L3, LossWeights w);
double isac_loss(double L1, double L2, double L3, LossWeights w);

// -- forward pass ----------------------------------------------------------------

struct ChannelNoise {
  CTensor radar;              // Nr x (B*N)
  std::vector<CTensor> comm;  // K of 1 x (B*N)

  static ChannelNoise draw(const SystemConfig& cfg, Index batch, Rng& rng);
  static ChannelNoise zero(const SystemConfig& cfg, Index batch);
};

/// How the raw transmitter output is brought to power P.
struct PowerScaling {
  /// Empty: normalize over the batch (training). Set: x * factor * sqrt(P) per slot (deployment).
  std::optional<double> frozen_factor;
};

struct Forward {
  CNode x;                              // normalized transmit signal, Nt x (B*N)
  CNode echo;                           // Nr x (B*N), receiver-scaled
  std::vector<CNode> rx;                // per user, 1 x (B*N), receiver-scaled
  ad::NodePtr q;                        // 1 x B
  ad::NodePtr theta_hat;                // 1 x B degrees
  std::vector<ad::NodePtr> logits;      // per user, |M| x (B*N)
  std::vector<std::vector<int>> labels; // per user, B*N messages
  Grid t;                               // 1 x B presence labels
  Grid theta;                           // 1 x B degrees
  ad::NodePtr L1, L2, L3, L;
};

/// Raw (un-normalized) transmitter output for a batch.
CNode transmit_raw(const IsacModel& model, const SystemConfig& cfg, std::span<const Scenario> batch);

/// Full end-to-end pass. Received signals are divided by the noise standard deviation before
/// they reach any network.
Forward forward_batch(const IsacModel& model, const SystemConfig& cfg, std::span<const Scenario> batch,
                      double P_lin, const ChannelNoise& noise, PowerScaling scaling = {});

// -- datasets ----------------------------------------------------------------------

enum class Split : std::uint64_t { Train = 0, Validation = 1, Test = 2, Calibration = 3 };

std::uint64_t split_seed(std::uint64_t seed, Split split);

/// count scenarios reproducible from (seed, index). Presence labels alternate by index so
/// the set holds an equal number of H1 and H0 cases (one extra H1 when count is odd).
std::vector<Scenario> generate_dataset(const SystemConfig& cfg, std::size_t count, std::uint64_t seed);

/// "ISACDS1", u64 config hash, u64 count, then per record: u8 t, f64 theta, f64 d_r,
/// K x (f64 angle, f64 d_c), N*K message bytes.
void write_dataset(std::ostream& out, const SystemConfig& cfg, std::span<const Scenario> data);
std::vector<Scenario> read_dataset(std::istream& in, const SystemConfig& cfg);
void save_dataset(const std::filesystem::path& path, const SystemConfig& cfg, std::span<const Scenario> data);
std::vector<Scenario> load_dataset(const std::filesystem::path& path, const SystemConfig& cfg);

// -- training --------------------------------------------------------------------------

struct EpochLoss {
  int epoch = 0;  // 0 is the untrained model
  double total = 0, bce = 0, mse = 0, cce = 0;

  bool operator==(const EpochLoss&) const = default;
};

struct TrainResult {
  IsacModel model;
  std::vector<EpochLoss> trace;  // validation losses on a fixed seed
  bool patience_ok = true;       // best validation loss improved at least every `patience` epochs
};

/// Validation loss of a model on fixed scenarios and fixed noise, in chunks of cfg.batch.
EpochLoss validation_loss(const IsacModel& model, const SystemConfig& cfg, std::span<const Scenario> data,
                          std::uint64_t noise_seed, double P_lin);

TrainResult train(const SystemConfig& cfg, TxMode mode, EstimatorKind estimator);

void write_loss_trace(std::ostream& out, std::span<const EpochLoss> trace);
std::vector<EpochLoss> read_loss_trace(std::istream& in);

}  // namespace isac
