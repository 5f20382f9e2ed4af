/**
 * @file    isac/channel.hpp
 * @brief   Complex-baseband physics: steering vectors, path loss, scenario sampling,
 *          the radar echo under H1/H0 and the downlink received signal.
 *
 * Batched signals put one time slot per column, ordered (scenario b, slot n) -> b * N + n.
 * Physics coefficients are constants of a batch; only the transmit signal carries gradient.
 */
#pragma once

#include "isac/autodiff.hpp"
#include "isac/config.hpp"

#include <complex>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace isac {

using Rng = std::mt19937_64;
using cd = std::complex<double>;

/// Independent stream for (seed, domain, index); identical inputs give identical streams.
Rng make_stream(std::uint64_t seed, std::uint64_t domain, std::uint64_t index);

/// Complex grid as paired real grids.
struct CTensor {
  Grid re;
  Grid im;

  CTensor() = default;
  CTensor(Grid r, Grid i);
  static CTensor zeros(Index rows, Index cols);

  Index rows() const { return re.rows(); }
  Index cols() const { return re.cols(); }
  cd at(Index r, Index c) const { return {re(r, c), im(r, c)}; }
  void set(Index r, Index c, cd v) {
    re(r, c) = v.real();
    im(r, c) = v.imag();
  }
  double squared_norm() const { return re.squaredNorm() + im.squaredNorm(); }
};

/// Complex value living in the autodiff graph.
struct CNode {
  ad::NodePtr re;
  ad::NodePtr im;

  static CNode constant(const CTensor& t);
  CTensor value() const { return {re->value, im->value}; }
};

struct Scenario {
  bool target_present = false;
  double theta_deg = 0.0;
  double d_r = 1.0;
  std::vector<double> user_angles_deg;  // K
  std::vector<double> d_c;              // K
  std::vector<int> messages;            // N * K, slot-major: messages[n * K + k]

  int message(int n, int k, int K) const { return messages[static_cast<std::size_t>(n * K + k)]; }
  bool operator==(const Scenario&) const = default;
};

/// Entry i = exp(-j*pi*i*sin(theta)) / sqrt(n); half-wavelength spacing.
CTensor steering_vector(double theta_deg, int n);

/// 10^(ref_db/10) * (d/d0)^(-gamma). Throws std::domain_error for non-positive distances.
double path_loss(double ref_db, double d, double d0, double gamma);

Scenario sample_scenario(const SystemConfig& cfg, Rng& rng);
/// Scenario `index` of the stream rooted at `seed`; independent of generation order.
Scenario scenario_at(const SystemConfig& cfg, std::uint64_t seed, std::uint64_t index);

/// Circular complex Gaussian with per-entry variance `variance`.
CTensor complex_gaussian(Index rows, Index cols, double variance, Rng& rng);

double radar_array_gain(const SystemConfig& cfg);  // sqrt(Nt * Nr)
double comm_array_gain(const SystemConfig& cfg);   // sqrt(Nt)

/// Batched echo: x is Nt x (B*N); noise is Nr x (B*N). Scenarios without a target see noise only.
CNode radar_echo(const CNode& x, std::span<const Scenario> batch, const SystemConfig& cfg,
                 const CTensor& noise);
/// Batched downlink for user k (0-based): x is Nt x (B*N); noise is 1 x (B*N).
CNode comm_receive(const CNode& x, std::span<const Scenario> batch, int k, const SystemConfig& cfg,
                   const CTensor& noise);

/// Single-scenario echo, drawing its own noise from rng. x_block is Nt x N.
CTensor radar_echo(const CTensor& x_block, const Scenario& sc, const SystemConfig& cfg, Rng& rng);
/// Single-slot downlink for user k (0-based); x_slot is Nt x 1.
cd comm_receive(const CTensor& x_slot, const Scenario& sc, int k, const SystemConfig& cfg, Rng& rng);

}  // namespace isac
