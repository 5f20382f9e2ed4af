#include "isac/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace isac {

namespace {

constexpr std::uint64_t kEvalDomain = 0x4556414c;  // "EVAL"

std::string num(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

double parse_num(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw std::runtime_error("csv: bad number '" + s + "'");
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string c;
  while (std::getline(ss, c, ',')) cells.push_back(c);
  return cells;
}

// Distinct noise stream per evaluation power; P is keyed at milli-dB resolution.
std::uint64_t power_key(double P_dbm) {
  return static_cast<std::uint64_t>(static_cast<std::int64_t>(std::llround(P_dbm * 1000.0)));
}

}  // namespace

double compute_ser(std::span<const int> decisions, std::span<const int> truth) {
  if (decisions.size() != truth.size() || truth.empty())
    throw DimensionError("compute_ser: " + std::to_string(decisions.size()) + " decisions for " +
                         std::to_string(truth.size()) + " labels");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) wrong += decisions[i] != truth[i];
  return static_cast<double>(wrong) / static_cast<double>(truth.size());
}

DetectionRates compute_detection(std::span<const int> t_hat, std::span<const int> t) {
  if (t_hat.size() != t.size()) throw DimensionError("compute_detection: length mismatch");
  std::size_t present = 0, hits = 0, absent = 0, alarms = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i]) {
      ++present;
      hits += t_hat[i] != 0;
    } else {
      ++absent;
      alarms += t_hat[i] != 0;
    }
  }
  if (present == 0 || absent == 0)
    throw std::invalid_argument("compute_detection: need at least one present and one absent label");
  return {static_cast<double>(hits) / static_cast<double>(present),
          static_cast<double>(alarms) / static_cast<double>(absent)};
}

double compute_rmse(std::span<const double> theta_hat, std::span<const double> theta) {
  if (theta_hat.size() != theta.size()) throw DimensionError("compute_rmse: length mismatch");
  if (theta.empty()) return std::numeric_limits<double>::quiet_NaN();
  double acc = 0;
  for (std::size_t i = 0; i < theta.size(); ++i) acc += (theta_hat[i] - theta[i]) * (theta_hat[i] - theta[i]);
  return std::sqrt(acc / static_cast<double>(theta.size()));
}

namespace {

// sd(e^2) / (2 RMSE sqrt(n)): first-order standard error of an RMSE estimate.
double rmse_standard_error(std::span<const double> theta_hat, std::span<const double> theta) {
  const std::size_t n = theta.size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  double mean = 0;
  for (std::size_t i = 0; i < n; ++i) mean += (theta_hat[i] - theta[i]) * (theta_hat[i] - theta[i]);
  mean /= static_cast<double>(n);
  double var = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e2 = (theta_hat[i] - theta[i]) * (theta_hat[i] - theta[i]);
    var += (e2 - mean) * (e2 - mean);
  }
  var /= static_cast<double>(n - 1);
  if (!(mean > 0)) return 0.0;
  return std::sqrt(var) / (2.0 * std::sqrt(mean) * std::sqrt(static_cast<double>(n)));
}

}  // namespace

double calibrate(const IsacModel& model, const SystemConfig& cfg, std::size_t count) {
  const auto cal = generate_dataset(cfg, count, split_seed(cfg.seed, Split::Calibration));
  double energy = 0;
  double cols = 0;
  for (std::size_t start = 0; start < cal.size(); start += static_cast<std::size_t>(cfg.batch)) {
    const auto part = std::span(cal).subspan(start, std::min<std::size_t>(cfg.batch, cal.size() - start));
    const CTensor x = transmit_raw(model, cfg, part).value();
    energy += x.squared_norm();
    cols += static_cast<double>(x.cols());
  }
  if (!(energy > 0)) throw NumericalError("calibrate: transmitter output is identically zero");
  return std::sqrt(cols / energy);
}

MetricsRow evaluate(const IsacModel& model, const SystemConfig& cfg, std::span<const Scenario> test,
                    double P_dbm, double factor, std::uint64_t noise_seed) {
  std::vector<int> decisions, truth, t_hat, t;
  std::vector<double> est_det, truth_det, est_all, truth_all;
  const double P_lin = dbm_to_linear(P_dbm);
  std::uint64_t chunk = 0;
  for (std::size_t start = 0; start < test.size(); start += static_cast<std::size_t>(cfg.batch), ++chunk) {
    const auto part = test.subspan(start, std::min<std::size_t>(cfg.batch, test.size() - start));
    Rng rng = make_stream(noise_seed ^ power_key(P_dbm), kEvalDomain, chunk);
    const auto noise = ChannelNoise::draw(cfg, static_cast<Index>(part.size()), rng);
    const Forward f = forward_batch(model, cfg, part, P_lin, noise, {factor});

    for (int k = 0; k < cfg.K; ++k) {
      const Grid& logits = f.logits[static_cast<std::size_t>(k)]->value;
      for (Index c = 0; c < logits.cols(); ++c) {
        Index best = 0;
        logits.col(c).maxCoeff(&best);  // first maximum on ties
        decisions.push_back(static_cast<int>(best));
        truth.push_back(f.labels[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)]);
      }
    }
    for (std::size_t b = 0; b < part.size(); ++b) {
      const bool present = part[b].target_present;
      const bool declared = f.q->value(0, static_cast<Index>(b)) >= cfg.q_bar;
      t.push_back(present);
      t_hat.push_back(declared);
      if (present) {
        est_all.push_back(f.theta_hat->value(0, static_cast<Index>(b)));
        truth_all.push_back(part[b].theta_deg);
        if (declared) {
          est_det.push_back(est_all.back());
          truth_det.push_back(truth_all.back());
        }
      }
    }
  }
  MetricsRow row;
  row.p_dbm = P_dbm;
  row.ser_avg = compute_ser(decisions, truth);
  const auto rates = compute_detection(t_hat, t);
  row.p_d = rates.p_d;
  row.p_fa = rates.p_fa;
  row.rmse_deg = compute_rmse(est_det, truth_det);
  row.rmse_all_present = compute_rmse(est_all, truth_all);
  row.rmse_se = rmse_standard_error(est_det, truth_det);
  row.n_samples = static_cast<long>(test.size());
  row.n_rmse = static_cast<long>(est_det.size());
  row.n_present = static_cast<long>(est_all.size());
  row.mode = model.mode;
  row.estimator = model.estimator;
  return row;
}

std::vector<MetricsRow> sweep_power(const IsacModel& model, const SystemConfig& cfg,
                                    std::span<const Scenario> test, std::span<const double> P_list_dbm,
                                    std::uint64_t noise_seed) {
  const double factor = calibrate(model, cfg);
  std::vector<MetricsRow> rows;
  for (double P : P_list_dbm) rows.push_back(evaluate(model, cfg, test, P, factor, noise_seed));
  return rows;
}

double to_db_floor(double power) {
  if (!(power > 0)) return -120.0;
  return std::max(10.0 * std::log10(power), -120.0);
}

std::vector<double> beampattern_linear(const CTensor& X, std::span<const double> grid_deg) {
  if (grid_deg.empty()) throw std::invalid_argument("beampattern: empty angle grid");
  const Eigen::MatrixXcd Xc = X.re.cast<cd>() + cd(0, 1) * X.im.cast<cd>();
  std::vector<double> out;
  out.reserve(grid_deg.size());
  for (double phi : grid_deg) {
    const CTensor a = steering_vector(phi, static_cast<int>(X.rows()));
    const Eigen::VectorXcd ac = a.re.col(0).cast<cd>() + cd(0, 1) * a.im.col(0).cast<cd>();
    const Eigen::RowVectorXcd s = ac.transpose() * Xc;
    out.push_back(s.squaredNorm() / static_cast<double>(X.cols()));
  }
  return out;
}

std::vector<BeamPoint> beampattern(const IsacModel& model, const SystemConfig& cfg,
                                   std::span<const Scenario> scenarios, std::span<const double> grid_deg,
                                   double factor) {
  if (grid_deg.empty()) throw std::invalid_argument("beampattern: empty angle grid");
  std::vector<double> acc(grid_deg.size(), 0.0);
  double cols = 0;
  const double g = factor * std::sqrt(cfg.p_lin());
  for (std::size_t start = 0; start < scenarios.size(); start += static_cast<std::size_t>(cfg.batch)) {
    const auto part = scenarios.subspan(start, std::min<std::size_t>(cfg.batch, scenarios.size() - start));
    CTensor x = transmit_raw(model, cfg, part).value();
    x.re *= g;
    x.im *= g;
    const auto p = beampattern_linear(x, grid_deg);
    for (std::size_t i = 0; i < p.size(); ++i) acc[i] += p[i] * static_cast<double>(x.cols());
    cols += static_cast<double>(x.cols());
  }
  std::vector<BeamPoint> out;
  for (std::size_t i = 0; i < grid_deg.size(); ++i) out.push_back({grid_deg[i], to_db_floor(acc[i] / cols)});
  return out;
}

RegionContrast region_contrast(std::span<const BeamPoint> pattern, const SystemConfig& cfg) {
  auto inside = [&](double a) {
    if (a >= cfg.theta_bounds.lo && a <= cfg.theta_bounds.hi) return true;
    for (int k = 0; k < cfg.K; ++k)
      if (a >= cfg.user_bounds[static_cast<std::size_t>(k)].lo && a <= cfg.user_bounds[static_cast<std::size_t>(k)].hi)
        return true;
    return false;
  };
  double in = 0, out = 0;
  int n_in = 0, n_out = 0;
  for (const auto& p : pattern) {
    const double lin = std::pow(10.0, p.power_db / 10.0);
    if (inside(p.angle_deg)) {
      in += lin;
      ++n_in;
    } else {
      out += lin;
      ++n_out;
    }
  }
  if (n_in == 0 || n_out == 0) throw std::invalid_argument("region_contrast: grid must cover both regions");
  return {to_db_floor(in / n_in), to_db_floor(out / n_out)};
}

void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows) {
  out << kMetricsHeader << '\n';
  for (const auto& r : rows)
    out << num(r.p_dbm) << ',' << num(r.ser_avg) << ',' << num(r.p_d) << ',' << num(r.p_fa) << ','
        << (std::isnan(r.rmse_deg) ? std::string("nan") : num(r.rmse_deg)) << ',' << r.n_samples << ','
        << to_string(r.mode) << ',' << to_string(r.estimator) << '\n';
}

std::vector<MetricsRow> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) throw std::runtime_error("metrics csv: bad header");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 8) throw std::runtime_error("metrics csv: expected 8 fields in '" + line + "'");
    MetricsRow r;
    r.p_dbm = parse_num(c[0]);
    r.ser_avg = parse_num(c[1]);
    r.p_d = parse_num(c[2]);
    r.p_fa = parse_num(c[3]);
    r.rmse_deg = parse_num(c[4]);
    r.n_samples = std::stol(c[5]);
    r.mode = parse_tx_mode(c[6]);
    r.estimator = parse_estimator(c[7]);
    rows.push_back(r);
  }
  return rows;
}

void write_beampattern_csv(std::ostream& out, std::span<const BeamPoint> pattern) {
  out << kBeamHeader << '\n';
  for (const auto& p : pattern) out << num(p.angle_deg) << ',' << num(p.power_db) << '\n';
}

std::vector<BeamPoint> read_beampattern_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kBeamHeader) throw std::runtime_error("beampattern csv: bad header");
  std::vector<BeamPoint> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 2) throw std::runtime_error("beampattern csv: expected 2 fields");
    out.push_back({parse_num(c[0]), parse_num(c[1])});
  }
  return out;
}

}  // namespace isac
