/**
 * @file    isac/model.hpp
 * @brief   The trainable networks of one ISAC system and their checkpoint format.
 *
 * Checkpoint layout (little-endian):
 *   "ISACNET1"
 *   u32 network count
 *   per network: u32 name length, name bytes, u32 layer count,
 *                per layer: u32 rows, u32 cols, rows*cols f64 weight (row-major),
 *                           rows f64 bias
 */
#pragma once

#include "isac/comm_receiver.hpp"
#include "isac/config.hpp"
#include "isac/radar_receiver.hpp"
#include "isac/transmitter.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace isac {

struct IsacModel {
  TxMode mode = TxMode::Slp;
  EstimatorKind estimator = EstimatorKind::Lstm;
  std::optional<SlpParams> slp;
  std::optional<BlpParams> blp;
  std::vector<DecoderParams> decoders;  // one per user
  DetectorParams detector;
  std::optional<LstmParams> lstm;
  std::optional<MlpEstimatorParams> mlp_estimator;

  /// Fresh initialization drawn from the (seed, "init") stream.
  static IsacModel make(const SystemConfig& cfg, TxMode mode, EstimatorKind estimator, std::uint64_t seed);

  std::vector<ad::NodePtr> params() const;
  std::vector<ad::NodePtr> transmitter_params() const;
  std::vector<ad::NodePtr> decoder_params() const;
  std::vector<ad::NodePtr> radar_params() const;  // detector + estimator
};

struct NetworkBlob {
  std::string name;
  std::vector<std::pair<Grid, Grid>> layers;  // (weight, bias as a column)

  bool operator==(const NetworkBlob&) const = default;
};

std::vector<NetworkBlob> export_networks(const IsacModel& model);

void write_checkpoint(std::ostream& out, const std::vector<NetworkBlob>& nets);
std::vector<NetworkBlob> read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const IsacModel& model);

/// Rebuilds a model for cfg, inferring mode and estimator from the network names.
/// Any width that disagrees with cfg is a DimensionError.
IsacModel load_checkpoint(const std::filesystem::path& path, const SystemConfig& cfg);
IsacModel model_from_networks(const std::vector<NetworkBlob>& nets, const SystemConfig& cfg);

}  // namespace isac
