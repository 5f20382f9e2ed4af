/**
 * @file    isac/radar_receiver.hpp
 * @brief   Target-presence detector and DoA estimators.
 *
 * The LSTM estimator walks the receive antennas as its time axis: step i < Nr reads
 * Re(Y_r) of antenna i across the N slots, step Nr + i reads Im(Y_r) of antenna i.
 */
#pragma once

#include "isac/channel.hpp"
#include "isac/config.hpp"
#include "isac/nn.hpp"

#include <utility>

namespace isac {

/// Widths [2N*Nr+2, N*Nr, N, Nr, 1]; ReLU x3 then sigmoid.
struct DetectorParams {
  Mlp net;
  static DetectorParams make(const SystemConfig& cfg, Rng& rng);
};

struct LstmParams {
  ad::NodePtr Wi, Wf, Wo, Wg;  // H x (N + H), applied to [x_t ; h]
  ad::NodePtr bi, bf, bo, bg;  // H x 1
  Layer head;                  // H -> 1, linear

  static LstmParams make(const SystemConfig& cfg, Rng& rng);
  int input_width() const { return static_cast<int>(Wi->cols() - Wi->rows()); }
  int hidden() const { return static_cast<int>(Wi->rows()); }
  std::vector<ad::NodePtr> params() const;
};

/// Baseline estimator over the flattened echo, widths [2N*Nr, N*Nr, N, Nr, 1]; ReLU x3 then tanh.
struct MlpEstimatorParams {
  Mlp net;
  static MlpEstimatorParams make(const SystemConfig& cfg, Rng& rng);
};

// -- detector ---------------------------------------------------------------------

/// [vec_row(Re Y) ; vec_row(Im Y) ; theta_min/90 ; theta_max/90] for one Nr x N echo.
Eigen::VectorXd detector_input(const CTensor& Y, const AngleInterval& theta, int Nr, int N);
/// Batched form: Y is Nr x (B*N); output (2N*Nr + 2) x B.
ad::NodePtr detector_input(const CNode& Y, const AngleInterval& theta, int Nr, int N);
/// Flattened echo without the priori rows, (2N*Nr) x B.
ad::NodePtr flatten_echo(const CNode& Y, int Nr, int N);

ad::NodePtr detector_probability(const ad::NodePtr& input, const DetectorParams& params);

struct Detection {
  double q;
  bool present;
};

/// Presence declared when q >= q_bar.
Detection detect(const Eigen::VectorXd& v, const DetectorParams& params, double q_bar);
bool threshold(double q, double q_bar);

// -- estimators ---------------------------------------------------------------------

/// 2Nr x N real sequence; row i is LSTM step i.
Grid estimator_input(const CTensor& Y);
/// Inverse of estimator_input.
CTensor echo_from_sequence(const Grid& seq);

struct LstmState {
  ad::NodePtr h;
  ad::NodePtr c;
};

/// One gated update on a batch: x_t is N x B, state H x B.
LstmState lstm_cell(const ad::NodePtr& x_t, const LstmState& state, const LstmParams& params);

/// Runs the cell over the 2Nr antenna steps of a batched echo (Nr x (B*N)) from a zero state,
/// then theta_hat = scale * tanh(head(h_final)); output 1 x B degrees.
ad::NodePtr estimate_angle(const CNode& Y, int Nr, int N, const LstmParams& params, double scale_deg);
/// Same over one prepared sequence (2Nr x N).
double estimate_angle(const Grid& seq, const LstmParams& params, double scale_deg);

/// Baseline: scale * tanh(mlp(flattened echo)); input (2N*Nr) x B, output 1 x B degrees.
ad::NodePtr mlp_estimate_angle(const ad::NodePtr& flat, const MlpEstimatorParams& params, double scale_deg);
double mlp_estimate_angle(const Eigen::VectorXd& flat, const MlpEstimatorParams& params, double scale_deg);

}  // namespace isac
