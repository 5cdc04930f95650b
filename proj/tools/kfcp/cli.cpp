#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "kfcp/error.hpp"

namespace kfcp::cli {
namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& message) {
  throw Error(ErrorCode::ConfigError, message);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string current;
  for (char c : text) {
    if (c == ',') {
      if (!current.empty()) out.push_back(current);
      current.clear();
    } else if (c != ' ') {
      current += c;
    }
  }
  if (!current.empty()) out.push_back(current);
  return out;
}

// Wraps library parse errors so the message names the field.
template <typename F>
auto field(const std::string& name, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    config_error(name + ": " + e.what());
  } catch (const json::exception& e) {
    config_error(name + ": " + e.what());
  }
}

std::vector<Method> parse_methods(const std::vector<std::string>& items) {
  std::vector<Method> methods;
  for (const auto& item : items) {
    for (const auto& token : split_list(item)) {
      const Method m = field("methods", [&] { return Method::parse(token); });
      if (std::find(methods.begin(), methods.end(), m) == methods.end()) methods.push_back(m);
    }
  }
  return methods;
}

std::vector<std::size_t> parse_widths(const std::string& text) {
  std::vector<std::size_t> widths;
  for (const auto& token : split_list(text)) {
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(token, &pos);
      if (pos != token.size() || v <= 0) throw std::invalid_argument(token);
      widths.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      config_error("hidden: invalid layer width '" + token + "'");
    }
  }
  return widths;
}

CenterMode parse_center(const std::string& text) {
  if (text == "refit") return CenterMode::refit;
  if (text == "average") return CenterMode::average;
  config_error("kfold_center: expected refit or average, got '" + text + "'");
}

SplitCenter parse_split_center(const std::string& text) {
  if (text == "first-half" || text == "first_half") return SplitCenter::first_half;
  if (text == "refit") return SplitCenter::refit;
  config_error("sc_center: expected first-half or refit, got '" + text + "'");
}

std::size_t default_workers() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

// Raw flag values for one subcommand; nullopt / count()==0 means "not given".
struct RawFlags {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::string> out_dir;
  std::vector<std::string> methods;
  std::optional<double> alpha;
  bool paper_defaults = false;
  bool signed_quantiles = false;
  std::optional<std::string> kfold_center;
  std::optional<std::string> sc_center;
  bool record_runtime = false;
  bool ratios = false;
  std::optional<std::string> hidden;
  std::optional<std::string> activation;
  std::optional<double> learning_rate;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> iterations;
  std::optional<double> adam_beta1;
  std::optional<double> adam_beta2;
  std::optional<double> adam_epsilon;
  // simulate
  std::vector<std::string> scenarios;
  std::optional<long long> replicates;
  std::optional<std::size_t> n_test;
  bool het_as_sd = false;
  // analyze
  std::optional<std::string> manifest;
  std::optional<std::size_t> outer_folds;
  std::optional<std::size_t> repeats;
};

void add_common_flags(CLI::App* app, RawFlags& raw) {
  app->add_option("--config", raw.config_path, "JSON config file (flags override it)");
  app->add_option("--seed", raw.seed, "Master seed (default 42)");
  app->add_option("--workers", raw.workers, "Worker threads (default: all cores)");
  app->add_option("--out-dir", raw.out_dir, "Output directory");
  app->add_option("--methods", raw.methods, "Comma-separated methods, e.g. sc,k2,k5,k10");
  app->add_option("--alpha", raw.alpha, "Miscoverage level (default 0.1)");
  app->add_flag("--paper-defaults", raw.paper_defaults, "Reset network and alpha to the published recipe");
  app->add_flag("--signed-quantiles", raw.signed_quantiles, "Two-sided signed residual quantiles");
  app->add_option("--kfold-center", raw.kfold_center, "k-fold centers: refit | average");
  app->add_option("--sc-center", raw.sc_center, "Split centers: first-half | refit");
  app->add_flag("--record-runtime", raw.record_runtime, "Record wall time per cell (breaks byte-reproducibility)");
  app->add_flag("--ratios", raw.ratios, "Require SC baselines for width ratios");
  app->add_option("--hidden", raw.hidden, "Hidden layer widths, e.g. 15,15");
  app->add_option("--activation", raw.activation, "relu | tanh");
  app->add_option("--learning-rate", raw.learning_rate, "Adam learning rate");
  app->add_option("--batch-size", raw.batch_size, "Mini-batch size");
  app->add_option("--iterations", raw.iterations, "Adam steps per fit");
  app->add_option("--adam-beta1", raw.adam_beta1);
  app->add_option("--adam-beta2", raw.adam_beta2);
  app->add_option("--adam-epsilon", raw.adam_epsilon);
}

void apply_nn_json(MlpConfig& nn, const json& j) {
  if (!j.is_object()) config_error("nn: expected an object");
  for (const auto& [key, value] : j.items()) {
    const std::string name = "nn." + key;
    field(name, [&] {
      if (key == "hidden_layers") nn.hidden_layers = value.get<std::vector<std::size_t>>();
      else if (key == "activation") nn.activation = parse_activation(value.get<std::string>());
      else if (key == "learning_rate") nn.learning_rate = value.get<double>();
      else if (key == "batch_size") nn.batch_size = value.get<std::size_t>();
      else if (key == "iterations") nn.iterations = value.get<std::size_t>();
      else if (key == "adam_beta1") nn.adam_beta1 = value.get<double>();
      else if (key == "adam_beta2") nn.adam_beta2 = value.get<double>();
      else if (key == "adam_epsilon") nn.adam_epsilon = value.get<double>();
      else config_error("unknown config key '" + name + "'");
      return 0;
    });
  }
}

// Applies recognized common keys; returns the keys it consumed.
std::set<std::string> apply_common_json(CommonConfig& c, const json& j) {
  std::set<std::string> used;
  auto take = [&](const char* key, auto&& fn) {
    if (j.contains(key)) {
      used.insert(key);
      field(key, [&] {
        fn(j.at(key));
        return 0;
      });
    }
  };
  take("seed", [&](const json& v) { c.seed = v.get<std::uint64_t>(); });
  take("workers", [&](const json& v) { c.workers = v.get<std::size_t>(); });
  take("out_dir", [&](const json& v) { c.out_dir = v.get<std::string>(); });
  take("methods", [&](const json& v) { c.methods = parse_methods(v.get<std::vector<std::string>>()); });
  take("alpha", [&](const json& v) { c.conformal.alpha = v.get<double>(); });
  take("signed_quantiles", [&](const json& v) {
    c.conformal.quantile_mode = v.get<bool>() ? QuantileMode::signed_two_sided : QuantileMode::absolute;
  });
  take("kfold_center", [&](const json& v) { c.conformal.kfold_center = parse_center(v.get<std::string>()); });
  take("sc_center", [&](const json& v) { c.conformal.split_center = parse_split_center(v.get<std::string>()); });
  take("record_runtime", [&](const json& v) { c.record_runtime = v.get<bool>(); });
  take("ratios", [&](const json& v) { c.require_ratios = v.get<bool>(); });
  take("nn", [&](const json& v) { apply_nn_json(c.nn, v); });
  return used;
}

json read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open config file " + path);
  try {
    json j = json::parse(in);
    if (!j.is_object()) config_error(path + ": config must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    config_error(path + ": " + e.what());
  }
}

void reject_unknown(const json& j, const std::set<std::string>& used) {
  for (const auto& [key, value] : j.items()) {
    if (!used.count(key)) config_error("unknown config key '" + key + "'");
  }
}

void apply_common_flags(CommonConfig& c, const RawFlags& raw) {
  if (raw.seed) c.seed = *raw.seed;
  if (raw.workers) c.workers = *raw.workers;
  if (raw.out_dir) c.out_dir = *raw.out_dir;
  if (!raw.methods.empty()) c.methods = parse_methods(raw.methods);
  if (raw.alpha) c.conformal.alpha = *raw.alpha;
  if (raw.signed_quantiles) c.conformal.quantile_mode = QuantileMode::signed_two_sided;
  if (raw.kfold_center) c.conformal.kfold_center = parse_center(*raw.kfold_center);
  if (raw.sc_center) c.conformal.split_center = parse_split_center(*raw.sc_center);
  if (raw.record_runtime) c.record_runtime = true;
  if (raw.ratios) c.require_ratios = true;
  if (raw.hidden) c.nn.hidden_layers = parse_widths(*raw.hidden);
  if (raw.activation) c.nn.activation = field("activation", [&] { return parse_activation(*raw.activation); });
  if (raw.learning_rate) c.nn.learning_rate = *raw.learning_rate;
  if (raw.batch_size) c.nn.batch_size = *raw.batch_size;
  if (raw.iterations) c.nn.iterations = *raw.iterations;
  if (raw.adam_beta1) c.nn.adam_beta1 = *raw.adam_beta1;
  if (raw.adam_beta2) c.nn.adam_beta2 = *raw.adam_beta2;
  if (raw.adam_epsilon) c.nn.adam_epsilon = *raw.adam_epsilon;
}

SimulateConfig resolve_simulate(const RawFlags& raw) {
  SimulateConfig cfg = SimulateConfig::paper_defaults();
  cfg.common.workers = default_workers();
  if (raw.config_path) {
    const json j = read_config_file(*raw.config_path);
    auto used = apply_common_json(cfg.common, j);
    auto take = [&](const char* key, auto&& fn) {
      if (j.contains(key)) {
        used.insert(key);
        field(key, [&] {
          fn(j.at(key));
          return 0;
        });
      }
    };
    take("scenarios", [&](const json& v) {
      cfg.scenarios.clear();
      for (const auto& s : v.get<std::vector<std::string>>()) cfg.scenarios.push_back(ScenarioSpec::parse(s));
    });
    take("replicates", [&](const json& v) {
      if (v.get<long long>() <= 0) config_error("replicates must be positive");
      cfg.replicates = v.get<std::size_t>();
    });
    take("n_test", [&](const json& v) { cfg.n_test = v.get<std::size_t>(); });
    take("het_as_sd", [&](const json& v) { cfg.het_as_sd = v.get<bool>(); });
    reject_unknown(j, used);
  }
  if (raw.paper_defaults) {
    const SimulateConfig paper = SimulateConfig::paper_defaults();
    cfg.common.nn = paper.common.nn;
    cfg.common.conformal.alpha = paper.common.conformal.alpha;
  }
  apply_common_flags(cfg.common, raw);
  if (!raw.scenarios.empty()) {
    cfg.scenarios.clear();
    for (const auto& item : raw.scenarios) {
      for (const auto& token : split_list(item)) {
        cfg.scenarios.push_back(field("scenarios", [&] { return ScenarioSpec::parse(token); }));
      }
    }
  }
  if (raw.replicates) {
    if (*raw.replicates <= 0) config_error("replicates must be positive, got " + std::to_string(*raw.replicates));
    cfg.replicates = static_cast<std::size_t>(*raw.replicates);
  }
  if (raw.n_test) cfg.n_test = *raw.n_test;
  if (raw.het_as_sd) cfg.het_as_sd = true;
  cfg.validate();
  return cfg;
}

AnalyzeConfig resolve_analyze(const RawFlags& raw) {
  AnalyzeConfig cfg = AnalyzeConfig::paper_defaults();
  cfg.common.workers = default_workers();
  if (raw.config_path) {
    const json j = read_config_file(*raw.config_path);
    auto used = apply_common_json(cfg.common, j);
    auto take = [&](const char* key, auto&& fn) {
      if (j.contains(key)) {
        used.insert(key);
        field(key, [&] {
          fn(j.at(key));
          return 0;
        });
      }
    };
    take("manifest", [&](const json& v) { cfg.manifest = v.get<std::string>(); });
    take("outer_folds", [&](const json& v) { cfg.outer_folds = v.get<std::size_t>(); });
    take("repeats", [&](const json& v) { cfg.repeats = v.get<std::size_t>(); });
    reject_unknown(j, used);
  }
  if (raw.paper_defaults) {
    const AnalyzeConfig paper = AnalyzeConfig::paper_defaults();
    cfg.common.nn = paper.common.nn;
    cfg.common.conformal.alpha = paper.common.conformal.alpha;
  }
  apply_common_flags(cfg.common, raw);
  if (raw.manifest) cfg.manifest = *raw.manifest;
  if (raw.outer_folds) cfg.outer_folds = *raw.outer_folds;
  if (raw.repeats) cfg.repeats = *raw.repeats;
  cfg.validate();
  return cfg;
}

struct Parser {
  CLI::App app{"k-fold and split conformal prediction intervals for neural-network regression"};
  RawFlags sim_raw;
  RawFlags ana_raw;
  CLI::App* simulate = nullptr;
  CLI::App* analyze = nullptr;
  CLI::App* selftest = nullptr;

  Parser() {
    app.require_subcommand(1);
    simulate = app.add_subcommand("simulate", "Run the simulation study");
    add_common_flags(simulate, sim_raw);
    simulate->add_option("--scenarios", sim_raw.scenarios,
                         "Comma-separated mean:error:n cells (default: full 27-cell grid)");
    simulate->add_option("--replicates", sim_raw.replicates, "Datasets per scenario (default 50)");
    simulate->add_option("--n-test", sim_raw.n_test, "Test points per dataset (default 500)");
    simulate->add_flag("--het-as-sd", sim_raw.het_as_sd,
                       "Read the heteroscedastic parameter as a standard deviation");

    analyze = app.add_subcommand("analyze", "Repeated cross validation on CSV datasets");
    add_common_flags(analyze, ana_raw);
    analyze->add_option("--manifest", ana_raw.manifest, "JSON manifest of datasets");
    analyze->add_option("--outer-folds", ana_raw.outer_folds, "Outer CV folds (default 5)");
    analyze->add_option("--repeats", ana_raw.repeats, "CV repetitions (default 20)");

    selftest = app.add_subcommand("selftest", "Run the fast oracle suites");
  }

  Invocation resolve() const {
    Invocation inv;
    if (simulate->parsed()) {
      inv.command = Invocation::Command::simulate;
      inv.simulate = resolve_simulate(sim_raw);
    } else if (analyze->parsed()) {
      inv.command = Invocation::Command::analyze;
      inv.analyze = resolve_analyze(ana_raw);
    } else if (selftest->parsed()) {
      inv.command = Invocation::Command::selftest;
    }
    return inv;
  }
};

}  // namespace

Invocation parse_command_line(const std::vector<std::string>& args) {
  Parser parser;
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    parser.app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    config_error(e.what());
  }
  return parser.resolve();
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Parser parser;
  try {
    parser.app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return parser.app.exit(e, out, err);
  }
  try {
    const Invocation inv = parser.resolve();
    switch (inv.command) {
      case Invocation::Command::simulate: return cmd_simulate(inv.simulate, err);
      case Invocation::Command::analyze: return cmd_analyze(inv.analyze, err);
      case Invocation::Command::selftest: return cmd_selftest(out);
      case Invocation::Command::none: break;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}

}  // namespace kfcp::cli
