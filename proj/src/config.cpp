#include "isac/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace isac {

std::string to_string(TxMode m) { return m == TxMode::Slp ? "slp" : "blp"; }
std::string to_string(EstimatorKind e) { return e == EstimatorKind::Lstm ? "lstm" : "mlp"; }

TxMode parse_tx_mode(const std::string& s) {
  if (s == "slp") return TxMode::Slp;
  if (s == "blp") return TxMode::Blp;
  throw ConfigError("unknown transmitter mode '" + s + "' (expected slp|blp)");
}

EstimatorKind parse_estimator(const std::string& s) {
  if (s == "lstm") return EstimatorKind::Lstm;
  if (s == "mlp") return EstimatorKind::Mlp;
  throw ConfigError("unknown estimator '" + s + "' (expected lstm|mlp)");
}

double dbm_to_linear(double dbm) { return std::pow(10.0, dbm / 10.0); }

double SystemConfig::p_lin() const { return dbm_to_linear(P_dbm); }
double SystemConfig::sigma_r2_lin() const { return dbm_to_linear(sigma_r2_dbm); }
double SystemConfig::sigma_c2_lin() const { return dbm_to_linear(sigma_c2_dbm); }

double SystemConfig::estimator_scale() const {
  if (theta_scale_deg > 0.0) return theta_scale_deg;
  return std::max(std::abs(theta_bounds.lo), std::abs(theta_bounds.hi));
}

void SystemConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("invalid config: " + what); };
  if (Nt < 1 || Nr < 1 || K < 1 || N < 1 || M_size < 1) fail("Nt, Nr, K, N, M_size must be >= 1");
  if (M_size < 2) fail("M_size must be >= 2 for message index normalization");
  for (double w : {omega1, omega2, q_bar})
    if (!(w >= 0.0 && w <= 1.0)) fail("omega1, omega2 and q_bar must lie in [0, 1]");
  if (theta_bounds.lo > theta_bounds.hi) fail("theta_bounds is empty");
  if (static_cast<int>(user_bounds.size()) < K)
    fail("user_bounds has " + std::to_string(user_bounds.size()) + " intervals for K=" +
         std::to_string(K));
  for (const auto& u : user_bounds)
    if (u.lo > u.hi) fail("a user interval is empty");
  if (!(d0 > 0.0)) fail("d0 must be positive");
  if (!(d_r_mean > 0.0) || !(d_c_mean > 0.0)) fail("mean distances must be positive");
  if (d_r_std < 0.0 || d_c_std < 0.0) fail("distance deviations must be non-negative");
  if (batch < 1 || epochs < 0 || hidden < 1) fail("batch and hidden must be >= 1, epochs >= 0");
  if (train_count < 1 || test_count < 1) fail("train_count and test_count must be >= 1");
  if (!(lr >= 0.0)) fail("lr must be non-negative");
  if (theta_scale_deg < 0.0) fail("theta_scale_deg must be non-negative");
  if (estimator_scale() <= 0.0) fail("estimator scale resolves to zero");
  if (train_p_lo_dbm > train_p_hi_dbm) fail("train power range is empty");
  if (patience < 1) fail("patience must be >= 1");
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || p != end) throw ConfigError("key '" + key + "': not a number: '" + v + "'");
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || p != end) throw ConfigError("key '" + key + "': not an integer: '" + v + "'");
  return out;
}

AngleInterval to_interval(const std::string& key, const std::string& v) {
  const auto comma = v.find(',');
  if (comma == std::string::npos) throw ConfigError("key '" + key + "': expected 'lo,hi', got '" + v + "'");
  return {to_double(key, trim(v.substr(0, comma))), to_double(key, trim(v.substr(comma + 1)))};
}

std::string fmt(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

using Setter = std::function<void(SystemConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto int_field = [&t](const char* name, int SystemConfig::*f) {
      t[name] = [f](SystemConfig& c, const std::string& k, const std::string& v) {
        c.*f = static_cast<int>(to_int(k, v));
      };
    };
    auto dbl_field = [&t](const char* name, double SystemConfig::*f) {
      t[name] = [f](SystemConfig& c, const std::string& k, const std::string& v) { c.*f = to_double(k, v); };
    };
    int_field("Nt", &SystemConfig::Nt);
    int_field("Nr", &SystemConfig::Nr);
    int_field("K", &SystemConfig::K);
    int_field("N", &SystemConfig::N);
    int_field("M_size", &SystemConfig::M_size);
    dbl_field("P_dbm", &SystemConfig::P_dbm);
    dbl_field("sigma_r2_dbm", &SystemConfig::sigma_r2_dbm);
    dbl_field("sigma_c2_dbm", &SystemConfig::sigma_c2_dbm);
    dbl_field("alpha0_db", &SystemConfig::alpha0_db);
    dbl_field("beta0_db", &SystemConfig::beta0_db);
    dbl_field("gamma", &SystemConfig::gamma);
    dbl_field("d0", &SystemConfig::d0);
    dbl_field("d_r_mean", &SystemConfig::d_r_mean);
    dbl_field("d_r_std", &SystemConfig::d_r_std);
    dbl_field("d_c_mean", &SystemConfig::d_c_mean);
    dbl_field("d_c_std", &SystemConfig::d_c_std);
    dbl_field("alpha_t", &SystemConfig::alpha_t);
    dbl_field("omega1", &SystemConfig::omega1);
    dbl_field("omega2", &SystemConfig::omega2);
    dbl_field("q_bar", &SystemConfig::q_bar);
    dbl_field("lr", &SystemConfig::lr);
    int_field("batch", &SystemConfig::batch);
    int_field("epochs", &SystemConfig::epochs);
    int_field("hidden", &SystemConfig::hidden);
    dbl_field("theta_scale_deg", &SystemConfig::theta_scale_deg);
    int_field("train_count", &SystemConfig::train_count);
    int_field("test_count", &SystemConfig::test_count);
    dbl_field("train_p_lo_dbm", &SystemConfig::train_p_lo_dbm);
    dbl_field("train_p_hi_dbm", &SystemConfig::train_p_hi_dbm);
    int_field("patience", &SystemConfig::patience);
    t["seed"] = [](SystemConfig& c, const std::string& k, const std::string& v) {
      const auto s = to_int(k, v);
      if (s < 0) throw ConfigError("key 'seed': must be non-negative");
      c.seed = static_cast<std::uint64_t>(s);
    };
    t["theta_bounds"] = [](SystemConfig& c, const std::string& k, const std::string& v) {
      c.theta_bounds = to_interval(k, v);
    };
    t["user_bounds"] = [](SystemConfig& c, const std::string& k, const std::string& v) {
      c.user_bounds.clear();
      std::stringstream ss(v);
      std::string part;
      while (std::getline(ss, part, ';')) c.user_bounds.push_back(to_interval(k, trim(part)));
    };
    t["train_power"] = [](SystemConfig& c, const std::string& k, const std::string& v) {
      if (v == "fixed")
        c.train_power = TrainPower::Fixed;
      else if (v == "uniform")
        c.train_power = TrainPower::Uniform;
      else
        throw ConfigError("key '" + k + "': expected fixed|uniform, got '" + v + "'");
    };
    return t;
  }();
  return table;
}

}  // namespace

SystemConfig parse_config(const std::string& text, SystemConfig base) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end())
      throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    it->second(base, key, value);
  }
  base.validate();
  return base;
}

SystemConfig load_config(const std::filesystem::path& path, SystemConfig base) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string format_config(const SystemConfig& c) {
  std::ostringstream os;
  os << "Nt = " << c.Nt << "\nNr = " << c.Nr << "\nK = " << c.K << "\nN = " << c.N
     << "\nM_size = " << c.M_size << "\nP_dbm = " << fmt(c.P_dbm)
     << "\nsigma_r2_dbm = " << fmt(c.sigma_r2_dbm) << "\nsigma_c2_dbm = " << fmt(c.sigma_c2_dbm)
     << "\nalpha0_db = " << fmt(c.alpha0_db) << "\nbeta0_db = " << fmt(c.beta0_db)
     << "\ngamma = " << fmt(c.gamma) << "\nd0 = " << fmt(c.d0) << "\nd_r_mean = " << fmt(c.d_r_mean)
     << "\nd_r_std = " << fmt(c.d_r_std) << "\nd_c_mean = " << fmt(c.d_c_mean)
     << "\nd_c_std = " << fmt(c.d_c_std) << "\nalpha_t = " << fmt(c.alpha_t)
     << "\ntheta_bounds = " << fmt(c.theta_bounds.lo) << "," << fmt(c.theta_bounds.hi)
     << "\nuser_bounds = ";
  for (std::size_t i = 0; i < c.user_bounds.size(); ++i)
    os << (i ? ";" : "") << fmt(c.user_bounds[i].lo) << "," << fmt(c.user_bounds[i].hi);
  os << "\nomega1 = " << fmt(c.omega1) << "\nomega2 = " << fmt(c.omega2) << "\nq_bar = " << fmt(c.q_bar)
     << "\nlr = " << fmt(c.lr) << "\nbatch = " << c.batch << "\nepochs = " << c.epochs
     << "\nseed = " << c.seed << "\nhidden = " << c.hidden
     << "\ntheta_scale_deg = " << fmt(c.theta_scale_deg) << "\ntrain_count = " << c.train_count
     << "\ntest_count = " << c.test_count
     << "\ntrain_power = " << (c.train_power == TrainPower::Fixed ? "fixed" : "uniform")
     << "\ntrain_p_lo_dbm = " << fmt(c.train_p_lo_dbm) << "\ntrain_p_hi_dbm = " << fmt(c.train_p_hi_dbm)
     << "\npatience = " << c.patience << "\n";
  return os.str();
}

std::uint64_t config_hash(const SystemConfig& cfg) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : format_config(cfg)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

SystemConfig desk_scale_config() {
  SystemConfig c;
  c.Nt = 8;
  c.Nr = 8;
  c.K = 2;
  c.N = 8;
  c.M_size = 4;
  c.user_bounds.resize(2);
  c.train_count = 20000;
  c.test_count = 10000;
  c.batch = 100;
  c.epochs = 30;
  return c;
}

}  // namespace isac
