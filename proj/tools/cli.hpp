// SPDX-License-Identifier: Apache-2.0
//
// Subcommands of the `dmn` tool. Every run writes `<out>.config.json`, a
// complete echo of its options; `--config <echo>` replays it exactly.
#pragma once

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "dmn/dmn.hpp"
#include "dmn/serialize.hpp"

namespace dmn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binds CLI flags to variables whose defaults may come from a config echo,
/// and records the final values for the next echo.
class OptionSet {
 public:
  OptionSet(CLI::App& app, json loaded) : app_(app), loaded_(std::move(loaded)) {}

  template <class T>
  CLI::Option* add(const std::string& name, T& var, const std::string& help) {
    add_config_only(name, var);
    return app_.add_option("--" + name, var, help)->capture_default_str();
  }

  /// Settable through a config file only.
  template <class T>
  void add_config_only(const std::string& name, T& var) {
    if (loaded_.contains(name)) {
      try {
        var = loaded_.at(name).get<T>();
      } catch (const json::exception& e) {
        throw UsageError("config key '" + name + "': " + e.what());
      }
    }
    dumpers_.push_back([name, &var](json& j) { j[name] = var; });
  }

  json echo(const std::string& subcommand) const {
    json j{{"subcommand", subcommand}};
    for (const auto& dump : dumpers_) dump(j);
    return j;
  }

 private:
  CLI::App& app_;
  json loaded_;
  std::vector<std::function<void(json&)>> dumpers_;
};

inline void require(const std::string& value, const std::string& name) {
  if (value.empty()) throw UsageError("--" + name + " is required");
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  return os;
}

inline void write_echo(const json& echo, const std::string& out) { write_json(echo, out + ".config.json"); }

inline std::vector<std::size_t> parse_size_list(const std::string& s, const std::string& name) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t pos = 0;
      const long v = std::stol(item, &pos);
      if (pos != item.size() || v <= 0) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw UsageError("--" + name + ": expected positive integers, got '" + s + "'");
    }
  }
  return out;
}

/// "lo:hi:step" or a comma list; empty selects the default 0.75..0.95 grid.
inline std::vector<double> parse_levels(const std::string& s) {
  if (s.empty()) return default_levels();
  std::vector<double> out;
  try {
    if (s.find(':') != std::string::npos) {
      std::stringstream ss(s);
      std::string a, b, c;
      std::getline(ss, a, ':');
      std::getline(ss, b, ':');
      std::getline(ss, c, ':');
      const double lo = std::stod(a), hi = std::stod(b), step = std::stod(c);
      if (!(step > 0.0)) throw std::invalid_argument(s);
      const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
      for (long i = 0; i <= n; ++i) out.push_back(lo + double(i) * step);
    } else {
      std::stringstream ss(s);
      std::string item;
      while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    }
  } catch (const std::exception&) {
    throw UsageError("--levels: cannot parse '" + s + "'");
  }
  for (double l : out) {
    if (!(l > 0.0 && l < 1.0)) throw UsageError("--levels: every level must lie in (0, 1)");
  }
  return out;
}

inline std::size_t class_index(int cls, std::size_t d) {
  if (cls < 1 || static_cast<std::size_t>(cls) > d) {
    throw UsageError("--class must lie in 1.." + std::to_string(d));
  }
  return static_cast<std::size_t>(cls - 1);
}

inline void check_level(double level) {
  if (!(level > 0.0 && level < 1.0)) throw UsageError("--level must lie in (0, 1)");
}

// ---------------------------------------------------------------------------

struct GenCommand {
  std::size_t n = 0;
  std::size_t labels = 2;
  std::uint64_t seed = 0;
  double variance = 0.7;
  std::vector<std::vector<std::vector<double>>> means{{{-2.0, 2.0}, {2.0, -2.0}}, {{2.0, 2.0}, {-2.0, -2.0}}};
  std::string out;

  void bind(OptionSet& o) {
    o.add("n", n, "number of records");
    o.add("labels", labels, "labels per record (m)");
    o.add("seed", seed, "generator seed");
    o.add("variance", variance, "per-component Gaussian variance");
    o.add_config_only("means", means);
    o.add("out", out, "output dataset CSV");
  }

  int run(const json& echo) {
    require(out, "out");
    if (n == 0) throw UsageError("--n must be at least 1");
    if (labels == 0) throw UsageError("--labels must be at least 1");
    GaussianMixtureSpec spec;
    spec.variance = variance;
    if (means.size() != 2 || means[0].size() != 2 || means[1].size() != 2) {
      throw UsageError("means must be [[psi1 mean, psi1 mean], [psi2 mean, psi2 mean]]");
    }
    for (std::size_t g = 0; g < 2; ++g) {
      for (std::size_t c = 0; c < 2; ++c) {
        if (means[g][c].size() != 2) throw UsageError("each mean must be a 2-vector");
        auto& target = g == 0 ? spec.psi1_means[c] : spec.psi2_means[c];
        target = {means[g][c][0], means[g][c][1]};
      }
    }
    if (!(variance > 0.0)) throw UsageError("--variance must be positive");
    const Dataset data = gen_gaussian_beta(spec, n, labels, seed);
    write_dataset(data, out);
    write_echo(echo, out);
    std::cout << "wrote " << data.size() << " records to " << out << '\n';
    return kExitOk;
  }
};

struct TrainCommand {
  std::string data;
  std::string out;
  std::string trace;
  std::size_t K = 3;
  std::string hidden = "64,64";
  std::size_t epochs = 100;
  std::size_t batch = 64;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string init = "he";

  void bind(OptionSet& o) {
    o.add("data", data, "training dataset CSV");
    o.add("out", out, "output checkpoint JSON");
    o.add("trace", trace, "per-epoch NLL CSV (default <out>.trace.csv)");
    o.add("K", K, "mixture components");
    o.add("hidden", hidden, "hidden layer widths, comma separated");
    o.add("epochs", epochs, "training epochs");
    o.add("batch", batch, "mini-batch size");
    o.add("lr", lr, "learning rate");
    o.add("seed", seed, "initialization and shuffling seed");
    o.add("threads", threads, "worker threads for per-example gradients");
    o.add("init", init, "he | zero");
  }

  int run(const json& echo) {
    require(data, "data");
    require(out, "out");
    if (K == 0) throw UsageError("--K must be at least 1");
    if (batch == 0) throw UsageError("--batch must be at least 1");
    if (!(lr >= 0.0)) throw UsageError("--lr must be nonnegative");
    if (init != "he" && init != "zero") throw UsageError("--init must be 'he' or 'zero'");
    const auto widths = parse_size_list(hidden, "hidden");
    const Dataset ds = read_dataset(data);
    if (ds.empty()) throw UsageError("training dataset is empty");

    MlpModel model = init == "zero" ? MlpModel::zeros(ds.features(), widths, K, ds.d)
                                    : MlpModel::create(ds.features(), widths, K, ds.d, seed);
    TrainConfig cfg;
    cfg.batch_size = batch;
    cfg.epochs = epochs;
    cfg.learning_rate = lr;
    cfg.seed = seed;
    cfg.threads = threads;
    TrainResult result = train(std::move(model), ds, cfg);

    save_checkpoint({std::move(result.model), seed, echo}, out);
    const std::string trace_path = trace.empty() ? out + ".trace.csv" : trace;
    auto os = open_out(trace_path);
    os << "epoch,nll\n";
    for (std::size_t e = 0; e < result.epoch_nll.size(); ++e) {
      os << (e + 1) << ',' << format_double(result.epoch_nll[e]) << '\n';
    }
    write_echo(echo, out);
    if (!result.epoch_nll.empty()) {
      std::cout << "final epoch NLL " << format_double(result.epoch_nll.back()) << '\n';
    }
    return kExitOk;
  }
};

struct PredictCommand {
  std::string model;
  std::string data;
  int cls = 1;
  double level = 0.95;
  std::string out;

  void bind(OptionSet& o) {
    o.add("model", model, "checkpoint JSON");
    o.add("data", data, "dataset CSV whose features are evaluated");
    o.add("class", cls, "class number (1-based) for the one-vs-all probability");
    o.add("level", level, "credible level 1 - alpha");
    o.add("out", out, "predictions CSV");
  }

  int run(const json& echo) {
    require(model, "model");
    require(data, "data");
    require(out, "out");
    check_level(level);
    const Checkpoint ckpt = load_checkpoint(model);
    const Dataset ds = read_dataset(data, ckpt.model.classes());
    const std::size_t ci = class_index(cls, ckpt.model.classes());
    auto os = open_out(out);
    for (std::size_t i = 1; i <= ckpt.model.input_size(); ++i) os << 'x' << i << ',';
    os << "class,mean,variance,lower,upper,level\n";
    for (const auto& r : ds.records) {
      const Prediction p = predict(ckpt.model, r.x, ci, 1.0 - level);
      for (double v : r.x) os << format_double(v) << ',';
      os << cls << ',' << format_double(p.mean) << ',' << format_double(p.variance) << ','
         << format_double(p.interval.lower) << ',' << format_double(p.interval.upper) << ',' << format_double(level)
         << '\n';
    }
    write_echo(echo, out);
    return kExitOk;
  }
};

struct CoverageCommand {
  std::string model;
  std::string data;
  int cls = 1;
  std::string levels;
  std::string out;

  void bind(OptionSet& o) {
    o.add("model", model, "checkpoint JSON");
    o.add("data", data, "test dataset CSV with p columns");
    o.add("class", cls, "class number (1-based)");
    o.add("levels", levels, "lo:hi:step or comma list (default 0.75:0.95:0.01)");
    o.add("out", out, "coverage CSV");
  }

  int run(const json& echo) {
    require(model, "model");
    require(data, "data");
    require(out, "out");
    const auto grid = parse_levels(levels);
    const Checkpoint ckpt = load_checkpoint(model);
    const Dataset ds = read_dataset(data, ckpt.model.classes());
    const CoverageCurve curve = coverage(ckpt.model, ds, class_index(cls, ckpt.model.classes()), grid);
    auto os = open_out(out);
    os << "level,empirical_coverage,n\n";
    for (std::size_t l = 0; l < curve.levels.size(); ++l) {
      os << format_double(curve.levels[l]) << ',' << format_double(curve.coverage[l]) << ',' << curve.n_eval << '\n';
    }
    write_echo(echo, out);
    return kExitOk;
  }
};

struct VarmapCommand {
  std::string model;
  GridSpec grid;
  int cls = 1;
  std::string out;

  void bind(OptionSet& o) {
    o.add("model", model, "checkpoint JSON");
    o.add("xmin", grid.x_min, "grid lower x1");
    o.add("xmax", grid.x_max, "grid upper x1");
    o.add("ymin", grid.y_min, "grid lower x2");
    o.add("ymax", grid.y_max, "grid upper x2");
    o.add("res", grid.resolution, "nodes per axis");
    o.add("class", cls, "class number (1-based)");
    o.add("out", out, "variance map CSV");
  }

  int run(const json& echo) {
    require(model, "model");
    require(out, "out");
    if (grid.resolution == 0) throw UsageError("--res must be at least 1");
    if (!(grid.x_max >= grid.x_min && grid.y_max >= grid.y_min)) throw UsageError("empty grid rectangle");
    const Checkpoint ckpt = load_checkpoint(model);
    const VarianceMap map = variance_map(ckpt.model, grid, class_index(cls, ckpt.model.classes()));
    auto os = open_out(out);
    os << "x1,x2,variance\n";
    for (std::size_t i = 0; i < map.variance.size(); ++i) {
      os << format_double(map.x1[i]) << ',' << format_double(map.x2[i]) << ',' << format_double(map.variance[i])
         << '\n';
    }
    write_echo(echo, out);
    return kExitOk;
  }
};

struct ApproxCommand {
  std::string target = "linear";
  std::string degrees = "2,5,10,25,50";
  std::size_t grid = kKlDefaultGrid;
  std::string out;

  void bind(OptionSet& o) {
    o.add("target", target, "uniform | linear | beta25 | bimodal | step");
    o.add("degrees", degrees, "Bernstein degrees, comma separated");
    o.add("grid", grid, "Simpson grid nodes");
    o.add("out", out, "KL convergence CSV");
  }

  int run(const json& echo) {
    require(out, "out");
    const auto ms = parse_size_list(degrees, "degrees");
    TargetDensity t;
    try {
      t = targets::by_name(target);
    } catch (const DomainError& e) {
      throw UsageError(e.what());
    }
    auto os = open_out(out);
    os << "m,kl,tv\n";
    for (std::size_t m : ms) {
      const auto terms = divergence(t, bernstein_mixture(t, m), grid);
      os << m << ',' << format_double(terms.kl) << ',' << format_double(terms.tv) << '\n';
    }
    write_echo(echo, out);
    return kExitOk;
  }
};

inline std::string find_config_arg(int argc, const char* const* argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) return argv[i + 1];
    if (a.rfind("--config=", 0) == 0) return a.substr(9);
  }
  return {};
}

template <class Command>
void add_subcommand(CLI::App& app, const std::string& name, const std::string& help, const json& loaded,
                    std::function<int()>& action, std::vector<std::unique_ptr<OptionSet>>& sets,
                    std::shared_ptr<Command> cmd) {
  auto* sub = app.add_subcommand(name, help);
  sub->add_option("--config", "replay the options recorded in a config echo");
  const bool matches = loaded.value("subcommand", std::string()) == name;
  auto set = std::make_unique<OptionSet>(*sub, matches ? loaded : json::object());
  cmd->bind(*set);
  OptionSet* raw = set.get();
  sets.push_back(std::move(set));
  sub->callback([&action, cmd, raw, name] { action = [cmd, raw, name] { return cmd->run(raw->echo(name)); }; });
}

/// Entry point; returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& err = std::cerr) {
  json loaded = json::object();
  try {
    const std::string config = find_config_arg(argc, argv);
    if (!config.empty()) loaded = read_json(config);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  CLI::App app{"Dirichlet mixture networks: multi-label uncertainty quantification"};
  app.require_subcommand(1);
  std::function<int()> action;
  std::vector<std::unique_ptr<OptionSet>> sets;
  try {
    add_subcommand(app, "gen", "generate the two-dimensional Gaussian-mixture dataset", loaded, action, sets,
                   std::make_shared<GenCommand>());
    add_subcommand(app, "train", "train a mixture network on a dataset", loaded, action, sets,
                   std::make_shared<TrainCommand>());
    add_subcommand(app, "predict", "predict means, variances and credible intervals", loaded, action, sets,
                   std::make_shared<PredictCommand>());
    add_subcommand(app, "coverage", "empirical coverage of credible intervals", loaded, action, sets,
                   std::make_shared<CoverageCommand>());
    add_subcommand(app, "varmap", "predicted variance over a grid", loaded, action, sets,
                   std::make_shared<VarmapCommand>());
    add_subcommand(app, "approx", "Bernstein Beta-mixture approximation of a density", loaded, action, sets,
                   std::make_shared<ApproxCommand>());
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  // `dmn --config echo.json` takes the subcommand from the echo.
  std::vector<std::string> args(argv + 1, argv + argc);
  const auto subs = app.get_subcommands({});
  const bool named = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
    return std::any_of(subs.begin(), subs.end(), [&](const CLI::App* s) { return s->get_name() == a; });
  });
  if (!named && loaded.contains("subcommand") && loaded["subcommand"].is_string()) {
    args.insert(args.begin(), loaded["subcommand"].get<std::string>());
  }
  std::reverse(args.begin(), args.end());  // CLI11 consumes the vector from the back
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      std::cout << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  try {
    return action ? action() : kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace dmn::cli
