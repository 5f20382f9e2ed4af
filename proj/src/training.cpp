#include "isac/training.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace isac {

namespace {

constexpr std::uint64_t kShuffleDomain = 0x53485546;  // "SHUF"
constexpr std::uint64_t kNoiseDomain = 0x4e4f4953;    // "NOIS"
constexpr std::uint64_t kValNoiseDomain = 0x564e4f49; // "VNOI"
constexpr char kDatasetMagic[7] = {'I', 'S', 'A', 'C', 'D', 'S', '1'};

std::string num(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw std::runtime_error("dataset: truncated");
  return v;
}

}  // namespace

// -- losses -------------------------------------------------------------------------

ad::NodePtr bce_loss(const ad::NodePtr& q, const Grid& t) { return ad::bce(q, t); }

ad::NodePtr masked_mse_loss(const ad::NodePtr& theta_hat, const Grid& theta, const Grid& t) {
  return ad::masked_mse(theta_hat, theta, t);
}

ad::NodePtr cce_loss(std::span<const ad::NodePtr> logits, std::span<const std::vector<int>> labels) {
  if (logits.size() != labels.size() || logits.empty())
    throw DimensionError("cce_loss: " + std::to_string(logits.size()) + " logit sets for " +
                         std::to_string(labels.size()) + " label sets");
  ad::NodePtr total;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    const auto user = ad::nll(ad::log_softmax_cols(logits[k]), labels[k]);
    total = total ? ad::add(total, user) : user;
  }
  return total;
}

ad::NodePtr isac_loss(const ad::NodePtr& L1, const ad::NodePtr& L2, const ad::NodePtr& L3, LossWeights w) {
  using namespace ad;
  const auto radar = add(scale(L1, w.omega2 * (1.0 - w.omega1)), scale(L2, w.omega2 * w.omega1));
  return add(radar, scale(L3, 1.0 - w.omega2));
}

double isac_loss(double L1, double L2, double L3, LossWeights w) {
  return w.omega2 * ((1.0 - w.omega1) * L1 + w.omega1 * L2) + (1.0 - w.omega2) * L3;
}

// -- forward ------------------------------------------------------------------------

ChannelNoise ChannelNoise::draw(const SystemConfig& cfg, Index batch, Rng& rng) {
  ChannelNoise z;
  const Index cols = batch * cfg.N;
  z.radar = complex_gaussian(cfg.Nr, cols, cfg.sigma_r2_lin(), rng);
  for (int k = 0; k < cfg.K; ++k) z.comm.push_back(complex_gaussian(1, cols, cfg.sigma_c2_lin(), rng));
  return z;
}

ChannelNoise ChannelNoise::zero(const SystemConfig& cfg, Index batch) {
  ChannelNoise z;
  const Index cols = batch * cfg.N;
  z.radar = CTensor::zeros(cfg.Nr, cols);
  for (int k = 0; k < cfg.K; ++k) z.comm.push_back(CTensor::zeros(1, cols));
  return z;
}

CNode transmit_raw(const IsacModel& model, const SystemConfig& cfg, std::span<const Scenario> batch) {
  std::vector<int> messages;
  messages.reserve(batch.size() * static_cast<std::size_t>(cfg.N * cfg.K));
  for (const auto& sc : batch) {
    if (sc.messages.size() != static_cast<std::size_t>(cfg.N * cfg.K))
      throw DimensionError("transmit: scenario carries " + std::to_string(sc.messages.size()) +
                           " messages, expected N*K=" + std::to_string(cfg.N * cfg.K));
    messages.insert(messages.end(), sc.messages.begin(), sc.messages.end());
  }
  const PrioriInfo priori = PrioriInfo::from_config(cfg);
  return model.slp ? slp_forward(priori, messages, cfg.M_size, *model.slp)
                   : blp_forward(priori, messages, cfg.M_size, *model.blp);
}

Forward forward_batch(const IsacModel& model, const SystemConfig& cfg, std::span<const Scenario> batch,
                      double P_lin, const ChannelNoise& noise, PowerScaling scaling) {
  using namespace ad;
  const Index B = static_cast<Index>(batch.size());
  Forward f;

  const CNode raw = transmit_raw(model, cfg, batch);
  if (scaling.frozen_factor) {
    const double g = *scaling.frozen_factor * std::sqrt(P_lin);
    f.x = {scale(raw.re, g), scale(raw.im, g)};
  } else {
    f.x = power_normalize(raw, P_lin);
  }

  const double radar_gain = 1.0 / std::sqrt(cfg.sigma_r2_lin());
  const CNode echo = radar_echo(f.x, batch, cfg, noise.radar);
  f.echo = {scale(echo.re, radar_gain), scale(echo.im, radar_gain)};

  const double comm_gain = 1.0 / std::sqrt(cfg.sigma_c2_lin());
  for (int k = 0; k < cfg.K; ++k) {
    const CNode y = comm_receive(f.x, batch, k, cfg, noise.comm[static_cast<std::size_t>(k)]);
    f.rx.push_back({scale(y.re, comm_gain), scale(y.im, comm_gain)});
    f.logits.push_back(decoder_logits(f.rx.back(), model.decoders[static_cast<std::size_t>(k)]));
    std::vector<int> lab(static_cast<std::size_t>(B * cfg.N));
    for (Index b = 0; b < B; ++b)
      for (int n = 0; n < cfg.N; ++n)
        lab[static_cast<std::size_t>(b * cfg.N + n)] = batch[static_cast<std::size_t>(b)].message(n, k, cfg.K);
    f.labels.push_back(std::move(lab));
  }

  f.q = detector_probability(detector_input(f.echo, cfg.theta_bounds, cfg.Nr, cfg.N), model.detector);
  if (model.lstm)
    f.theta_hat = estimate_angle(f.echo, cfg.Nr, cfg.N, *model.lstm, cfg.estimator_scale());
  else
    f.theta_hat = mlp_estimate_angle(flatten_echo(f.echo, cfg.Nr, cfg.N), *model.mlp_estimator,
                                     cfg.estimator_scale());

  f.t.resize(1, B);
  f.theta.resize(1, B);
  for (Index b = 0; b < B; ++b) {
    f.t(0, b) = batch[static_cast<std::size_t>(b)].target_present ? 1.0 : 0.0;
    f.theta(0, b) = batch[static_cast<std::size_t>(b)].theta_deg;
  }

  f.L1 = bce_loss(f.q, f.t);
  f.L2 = masked_mse_loss(f.theta_hat, f.theta, f.t);
  f.L3 = cce_loss(f.logits, f.labels);
  f.L = isac_loss(f.L1, f.L2, f.L3, {cfg.omega1, cfg.omega2});
  return f;
}

// -- datasets ---------------------------------------------------------------------------

std::uint64_t split_seed(std::uint64_t seed, Split split) {
  // splitmix64 finalizer over (seed, split)
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (static_cast<std::uint64_t>(split) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::vector<Scenario> generate_dataset(const SystemConfig& cfg, std::size_t count, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("generate_dataset: count must be >= 1");
  std::vector<Scenario> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Scenario sc = scenario_at(cfg, seed, i);
    sc.target_present = (i % 2 == 0);
    out.push_back(std::move(sc));
  }
  return out;
}

void write_dataset(std::ostream& out, const SystemConfig& cfg, std::span<const Scenario> data) {
  static_assert(std::endian::native == std::endian::little, "dataset I/O assumes a little-endian host");
  out.write(kDatasetMagic, sizeof kDatasetMagic);
  put<std::uint64_t>(out, config_hash(cfg));
  put<std::uint64_t>(out, data.size());
  for (const auto& sc : data) {
    if (sc.user_angles_deg.size() != static_cast<std::size_t>(cfg.K) ||
        sc.messages.size() != static_cast<std::size_t>(cfg.N * cfg.K))
      throw DimensionError("write_dataset: scenario shape does not match config");
    put<std::uint8_t>(out, sc.target_present ? 1 : 0);
    put<double>(out, sc.theta_deg);
    put<double>(out, sc.d_r);
    for (int k = 0; k < cfg.K; ++k) {
      put<double>(out, sc.user_angles_deg[static_cast<std::size_t>(k)]);
      put<double>(out, sc.d_c[static_cast<std::size_t>(k)]);
    }
    for (int m : sc.messages) put<std::uint8_t>(out, static_cast<std::uint8_t>(m));
  }
  if (!out) throw std::runtime_error("dataset: write failed");
}

std::vector<Scenario> read_dataset(std::istream& in, const SystemConfig& cfg) {
  char magic[sizeof kDatasetMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kDatasetMagic, sizeof magic) != 0)
    throw std::runtime_error("dataset: bad magic (expected ISACDS1)");
  const auto hash = get<std::uint64_t>(in);
  if (hash != config_hash(cfg)) throw ConfigError("dataset: config hash does not match the supplied config");
  const auto count = get<std::uint64_t>(in);
  std::vector<Scenario> out(count);
  for (auto& sc : out) {
    sc.target_present = get<std::uint8_t>(in) != 0;
    sc.theta_deg = get<double>(in);
    sc.d_r = get<double>(in);
    for (int k = 0; k < cfg.K; ++k) {
      sc.user_angles_deg.push_back(get<double>(in));
      sc.d_c.push_back(get<double>(in));
    }
    sc.messages.resize(static_cast<std::size_t>(cfg.N * cfg.K));
    for (auto& m : sc.messages) m = get<std::uint8_t>(in);
  }
  return out;
}

void save_dataset(const std::filesystem::path& path, const SystemConfig& cfg, std::span<const Scenario> data) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write dataset '" + path.string() + "'");
  write_dataset(f, cfg, data);
}

std::vector<Scenario> load_dataset(const std::filesystem::path& path, const SystemConfig& cfg) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open dataset '" + path.string() + "'");
  return read_dataset(f, cfg);
}

// -- training ---------------------------------------------------------------------------

EpochLoss validation_loss(const IsacModel& model, const SystemConfig& cfg, std::span<const Scenario> data,
                          std::uint64_t noise_seed, double P_lin) {
  EpochLoss acc;
  double weight = 0.0;
  std::uint64_t chunk = 0;
  for (std::size_t start = 0; start < data.size(); start += static_cast<std::size_t>(cfg.batch), ++chunk) {
    const auto part = data.subspan(start, std::min<std::size_t>(cfg.batch, data.size() - start));
    Rng rng = make_stream(noise_seed, kValNoiseDomain, chunk);
    const auto noise = ChannelNoise::draw(cfg, static_cast<Index>(part.size()), rng);
    const Forward f = forward_batch(model, cfg, part, P_lin, noise);
    const double w = static_cast<double>(part.size());
    acc.total += w * f.L->value(0, 0);
    acc.bce += w * f.L1->value(0, 0);
    acc.mse += w * f.L2->value(0, 0);
    acc.cce += w * f.L3->value(0, 0);
    weight += w;
  }
  acc.total /= weight;
  acc.bce /= weight;
  acc.mse /= weight;
  acc.cce /= weight;
  return acc;
}

TrainResult train(const SystemConfig& cfg, TxMode mode, EstimatorKind estimator) {
  cfg.validate();
  TrainResult res{IsacModel::make(cfg, mode, estimator, cfg.seed), {}, true};
  const auto train_set = generate_dataset(cfg, static_cast<std::size_t>(cfg.train_count),
                                          split_seed(cfg.seed, Split::Train));
  const auto val_count = static_cast<std::size_t>(std::min(cfg.test_count, 2000));
  const auto val_set = generate_dataset(cfg, val_count, split_seed(cfg.seed, Split::Validation));
  const std::uint64_t val_noise = split_seed(cfg.seed, Split::Validation) ^ 0x5a5a5a5a;

  ad::Adam opt(res.model.params(), cfg.lr);

  EpochLoss initial = validation_loss(res.model, cfg, val_set, val_noise, cfg.p_lin());
  initial.epoch = 0;
  res.trace.push_back(initial);
  double best = initial.total;
  int stale = 0;

  std::vector<std::size_t> order(train_set.size());
  std::vector<Scenario> batch;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle = make_stream(cfg.seed, kShuffleDomain, static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), shuffle);

    std::uint64_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch), ++batch_index) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(train_set[order[i]]);

      Rng rng = make_stream(cfg.seed, kNoiseDomain, (static_cast<std::uint64_t>(epoch) << 32) | batch_index);
      double P_lin = cfg.p_lin();
      if (cfg.train_power == TrainPower::Uniform) {
        std::uniform_real_distribution<double> pd(cfg.train_p_lo_dbm, cfg.train_p_hi_dbm);
        P_lin = dbm_to_linear(pd(rng));
      }
      const auto noise = ChannelNoise::draw(cfg, static_cast<Index>(batch.size()), rng);
      const Forward f = forward_batch(res.model, cfg, batch, P_lin, noise);
      const double L = f.L->value(0, 0);
      if (!std::isfinite(L)) {
        std::ostringstream os;
        os << "training diverged at epoch " << epoch << ", batch " << batch_index << ": L=" << L
           << " bce=" << f.L1->value(0, 0) << " mse=" << f.L2->value(0, 0) << " cce=" << f.L3->value(0, 0);
        throw NumericalError(os.str());
      }
      opt.zero_grad();
      ad::backward(f.L);
      opt.step();
    }

    EpochLoss e = validation_loss(res.model, cfg, val_set, val_noise, cfg.p_lin());
    e.epoch = epoch;
    res.trace.push_back(e);
    if (e.total < best) {
      best = e.total;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      res.patience_ok = false;
    }
  }
  return res;
}

void write_loss_trace(std::ostream& out, std::span<const EpochLoss> trace) {
  out << "epoch,loss_total,loss_bce,loss_mse,loss_cce\n";
  for (const auto& e : trace)
    out << e.epoch << ',' << num(e.total) << ',' << num(e.bce) << ',' << num(e.mse) << ',' << num(e.cce) << '\n';
}

std::vector<EpochLoss> read_loss_trace(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "epoch,loss_total,loss_bce,loss_mse,loss_cce")
    throw std::runtime_error("loss trace: bad header");
  std::vector<EpochLoss> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) throw std::runtime_error("loss trace: expected 5 fields in '" + line + "'");
    EpochLoss e;
    e.epoch = std::stoi(cells[0]);
    double* fields[] = {&e.total, &e.bce, &e.mse, &e.cce};
    for (int i = 0; i < 4; ++i) {
      const auto& c = cells[static_cast<std::size_t>(i + 1)];
      auto [p, ec] = std::from_chars(c.data(), c.data() + c.size(), *fields[i]);
      if (ec != std::errc{}) throw std::runtime_error("loss trace: bad number '" + c + "'");
    }
    out.push_back(e);
  }
  return out;
}

}  // namespace isac
