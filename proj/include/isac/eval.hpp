/**
 * @file    isac/eval.hpp
 * @brief   SER / detection / RMSE metrics, transmit beampattern and power sweeps.
 */
#pragma once

#include "isac/config.hpp"
#include "isac/model.hpp"
#include "isac/training.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace isac {

/// Mean mismatch rate over all entries (users x samples).
double compute_ser(std::span<const int> decisions, std::span<const int> truth);

struct DetectionRates {
  double p_d;
  double p_fa;
};

/// Needs at least one present and one absent label.
DetectionRates compute_detection(std::span<const int> t_hat, std::span<const int> t);

/// sqrt(mean((theta_hat - theta)^2)); NaN for empty input.
double compute_rmse(std::span<const double> theta_hat, std::span<const double> theta);

struct MetricsRow {
  double p_dbm = 0;
  double ser_avg = 0;
  double p_d = 0;
  double p_fa = 0;
  double rmse_deg = 0;  // over H1 samples detected present
  long n_samples = 0;
  TxMode mode = TxMode::Slp;
  EstimatorKind estimator = EstimatorKind::Lstm;

  // Not written to CSV; kept so the RMSE conditioning can be audited.
  long n_rmse = 0;
  long n_present = 0;
  double rmse_all_present = 0;
  double rmse_se = 0;  // delta-method standard error of rmse_deg

  bool operator==(const MetricsRow& o) const {
    return p_dbm == o.p_dbm && ser_avg == o.ser_avg && p_d == o.p_d && p_fa == o.p_fa &&
           (rmse_deg == o.rmse_deg || (rmse_deg != rmse_deg && o.rmse_deg != o.rmse_deg)) &&
           n_samples == o.n_samples && mode == o.mode && estimator == o.estimator;
  }
};

/// Mean power of the raw transmitter output over a fixed calibration set, returned as the
/// factor that brings it to unit mean power.
double calibrate(const IsacModel& model, const SystemConfig& cfg, std::size_t count = 1000);

/// Runs the test set at power P (frozen per-slot scaling) with noise drawn from
/// (noise_seed, P); the detector threshold is cfg.q_bar.
MetricsRow evaluate(const IsacModel& model, const SystemConfig& cfg, std::span<const Scenario> test,
                    double P_dbm, double factor, std::uint64_t noise_seed);

std::vector<MetricsRow> sweep_power(const IsacModel& model, const SystemConfig& cfg,
                                    std::span<const Scenario> test, std::span<const double> P_list_dbm,
                                    std::uint64_t noise_seed);

struct BeamPoint {
  double angle_deg;
  double power_db;
  bool operator==(const BeamPoint&) const = default;
};

/// 10 log10(p), floored at -120 dB.
double to_db_floor(double power);

/// Average |a_t(phi)^T x|^2 over the transmit signals of `scenarios`, x scaled to P.
std::vector<BeamPoint> beampattern(const IsacModel& model, const SystemConfig& cfg,
                                   std::span<const Scenario> scenarios, std::span<const double> grid_deg,
                                   double factor);
/// Same for an explicit Nt x C set of transmit columns.
std::vector<double> beampattern_linear(const CTensor& X, std::span<const double> grid_deg);

/// Mean power (dB of the linear mean) inside and outside the target and user intervals.
struct RegionContrast {
  double in_db;
  double out_db;
};
RegionContrast region_contrast(std::span<const BeamPoint> pattern, const SystemConfig& cfg);

inline constexpr const char* kMetricsHeader = "p_dbm,ser_avg,p_d,p_fa,rmse_deg,n_samples,mode,estimator";
inline constexpr const char* kBeamHeader = "angle_deg,power_db";

void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows);
std::vector<MetricsRow> read_metrics_csv(std::istream& in);
void write_beampattern_csv(std::ostream& out, std::span<const BeamPoint> pattern);
std::vector<BeamPoint> read_beampattern_csv(std::istream& in);

}  // namespace isac
