// isac: command-line front end for dataset generation, training, evaluation and beampatterns.
//
// Exit codes: 0 success, 2 configuration or input error, 3 numerical abort, 1 anything else.

#include "isac/config.hpp"
#include "isac/eval.hpp"
#include "isac/model.hpp"
#include "isac/training.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace isac;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "key = value config file");
  app->add_option("--seed", c.seed, "overrides the config seed");
  app->add_option("--out", c.out_dir, "output directory");
}

SystemConfig resolve(const Common& c) {
  SystemConfig cfg;
  if (!c.config_path.empty()) {
    if (!fs::exists(c.config_path)) throw ConfigError("config file not found: " + c.config_path);
    cfg = load_config(c.config_path);
  }
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  fs::create_directories(c.out_dir);
  return cfg;
}

std::vector<double> parse_powers(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      out.push_back(std::stod(part));
    } catch (const std::exception&) {
      throw ConfigError("--powers: bad value '" + part + "'");
    }
  }
  if (out.empty()) throw ConfigError("--powers: empty list");
  return out;
}

IsacModel need_checkpoint(const std::string& path, const SystemConfig& cfg) {
  if (path.empty() || !fs::exists(path)) throw InputError("checkpoint not found: '" + path + "'");
  return load_checkpoint(path, cfg);
}

std::vector<Scenario> test_set(const SystemConfig& cfg, const std::string& dataset) {
  if (!dataset.empty()) {
    if (!fs::exists(dataset)) throw InputError("dataset not found: '" + dataset + "'");
    return load_dataset(dataset, cfg);
  }
  return generate_dataset(cfg, static_cast<std::size_t>(cfg.test_count), split_seed(cfg.seed, Split::Test));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned symbol-level-precoded ISAC transceiver simulator"};
  app.require_subcommand(1);

  Common gen_c, train_c, eval_c, beam_c;

  auto* gen = app.add_subcommand("gen", "generate a scenario dataset");
  add_common(gen, gen_c);
  std::optional<long> gen_count;
  std::string gen_split = "train";
  gen->add_option("--count", gen_count, "number of scenarios (default: train_count or test_count)");
  gen->add_option("--split", gen_split, "train|test")->check(CLI::IsMember({"train", "test"}));

  auto* tr = app.add_subcommand("train", "train all networks jointly");
  add_common(tr, train_c);
  std::string tr_mode = "slp", tr_est = "lstm";
  tr->add_option("--mode", tr_mode, "slp|blp")->check(CLI::IsMember({"slp", "blp"}));
  tr->add_option("--estimator", tr_est, "lstm|mlp")->check(CLI::IsMember({"lstm", "mlp"}));

  auto* ev = app.add_subcommand("eval", "power sweep on the test set");
  add_common(ev, eval_c);
  std::string ev_ckpt, ev_dataset, ev_powers = "6,8,10,12,14";
  ev->add_option("--checkpoint", ev_ckpt, "trained checkpoint");
  ev->add_option("--dataset", ev_dataset, "test dataset file (default: generated from the seed)");
  ev->add_option("--powers", ev_powers, "comma-separated transmit powers in dBmW");

  auto* bp = app.add_subcommand("beampattern", "transmit beampattern of a trained transmitter");
  add_common(bp, beam_c);
  std::string bp_ckpt;
  double bp_step = 1.0;
  long bp_samples = 1000;
  bp->add_option("--checkpoint", bp_ckpt, "trained checkpoint");
  bp->add_option("--step", bp_step, "angle grid step in degrees")->check(CLI::PositiveNumber);
  bp->add_option("--samples", bp_samples, "scenarios averaged")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen) {
      const auto cfg = resolve(gen_c);
      const bool train_split = gen_split == "train";
      const long count = gen_count.value_or(train_split ? cfg.train_count : cfg.test_count);
      if (count < 1) throw ConfigError("--count must be >= 1");
      const auto data = generate_dataset(cfg, static_cast<std::size_t>(count),
                                         split_seed(cfg.seed, train_split ? Split::Train : Split::Test));
      const auto path = fs::path(gen_c.out_dir) / (gen_split + ".isacds");
      save_dataset(path, cfg, data);
      std::cout << "wrote " << data.size() << " scenarios to " << path.string() << "\n";
    } else if (*tr) {
      const auto cfg = resolve(train_c);
      const auto res = train(cfg, parse_tx_mode(tr_mode), parse_estimator(tr_est));
      const fs::path out(train_c.out_dir);
      save_checkpoint(out / "checkpoint.bin", res.model);
      std::ofstream trace(out / "loss_trace.csv");
      write_loss_trace(trace, res.trace);
      std::ofstream(out / "config.cfg") << format_config(cfg);
      std::cout << "initial loss " << res.trace.front().total << ", final loss " << res.trace.back().total
                << (res.patience_ok ? "" : " (validation loss stalled beyond patience)") << "\n";
    } else if (*ev) {
      const auto cfg = resolve(eval_c);
      const auto ckpt = ev_ckpt.empty() ? (fs::path(eval_c.out_dir) / "checkpoint.bin").string() : ev_ckpt;
      const auto model = need_checkpoint(ckpt, cfg);
      const auto test = test_set(cfg, ev_dataset);
      const auto powers = parse_powers(ev_powers);
      const auto rows = sweep_power(model, cfg, test, powers, split_seed(cfg.seed, Split::Test));
      std::ofstream f(fs::path(eval_c.out_dir) / "metrics.csv");
      write_metrics_csv(f, rows);
      write_metrics_csv(std::cout, rows);
    } else if (*bp) {
      const auto cfg = resolve(beam_c);
      const auto ckpt = bp_ckpt.empty() ? (fs::path(beam_c.out_dir) / "checkpoint.bin").string() : bp_ckpt;
      const auto model = need_checkpoint(ckpt, cfg);
      std::vector<double> grid;
      for (double a = -90.0; a <= 90.0 + 1e-9; a += bp_step) grid.push_back(a);
      const auto scen = generate_dataset(cfg, static_cast<std::size_t>(bp_samples), split_seed(cfg.seed, Split::Test));
      const auto pattern = beampattern(model, cfg, scen, grid, calibrate(model, cfg));
      std::ofstream f(fs::path(beam_c.out_dir) / "beampattern.csv");
      write_beampattern_csv(f, pattern);
      const auto rc = region_contrast(pattern, cfg);
      std::cout << "in-region " << rc.in_db << " dB, out-of-region " << rc.out_db << " dB\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
