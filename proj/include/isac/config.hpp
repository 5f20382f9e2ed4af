/**
 * @file    isac/config.hpp
 * @brief   Run configuration: physics, network shapes and training hyper-parameters.
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace isac {

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct AngleInterval {
  double lo = 0.0;  // degrees
  double hi = 0.0;

  bool operator==(const AngleInterval&) const = default;
};

enum class TxMode { Slp, Blp };
enum class EstimatorKind { Lstm, Mlp };
enum class TrainPower { Fixed, Uniform };

std::string to_string(TxMode m);
std::string to_string(EstimatorKind e);
TxMode parse_tx_mode(const std::string& s);
EstimatorKind parse_estimator(const std::string& s);

struct SystemConfig {
  // array / network shape
  int Nt = 16;
  int Nr = 16;
  int K = 3;
  int N = 8;       // time slots per CPI
  int M_size = 4;  // message alphabet |M|

  // power and noise, dBmW
  double P_dbm = 10.0;
  double sigma_r2_dbm = -70.0;
  double sigma_c2_dbm = -70.0;

  // propagation
  double alpha0_db = -30.0;
  double beta0_db = -30.0;
  double gamma = 2.2;
  double d0 = 1.0;
  double d_r_mean = 10.0;
  double d_r_std = 1.0;
  double d_c_mean = 150.0;
  double d_c_std = 1.0;
  double alpha_t = 1.0;

  // priori angular information
  AngleInterval theta_bounds{-10.0, 10.0};
  std::vector<AngleInterval> user_bounds{{50.0, 70.0}, {-75.0, -60.0}, {-45.0, -30.0}};

  // loss and decision
  double omega1 = 0.05;
  double omega2 = 0.3;
  double q_bar = 0.5;

  // training
  double lr = 1e-3;
  int batch = 1000;
  int epochs = 30;
  std::uint64_t seed = 1;
  int hidden = 64;
  double theta_scale_deg = 0.0;  // 0: derived from theta_bounds
  int train_count = 20000;
  int test_count = 10000;
  TrainPower train_power = TrainPower::Fixed;
  double train_p_lo_dbm = 6.0;
  double train_p_hi_dbm = 14.0;
  int patience = 10;

  // derived
  double p_lin() const;
  double sigma_r2_lin() const;
  double sigma_c2_lin() const;
  double estimator_scale() const;

  /// Throws ConfigError describing the first violated invariant.
  void validate() const;
};

double dbm_to_linear(double dbm);

/// Parses `key = value` lines; `#` starts a comment. Unknown keys and malformed values are errors.
SystemConfig parse_config(const std::string& text, SystemConfig base = {});
SystemConfig load_config(const std::filesystem::path& path, SystemConfig base = {});
std::string format_config(const SystemConfig& cfg);

/// Stable 64-bit FNV-1a over the canonical text form; stamped into dataset files.
std::uint64_t config_hash(const SystemConfig& cfg);

/// Nt = Nr = 8, K = 2, N = 8, |M| = 4, 2e4 training scenarios.
SystemConfig desk_scale_config();

}  // namespace isac
