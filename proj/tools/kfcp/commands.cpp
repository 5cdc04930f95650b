#include "commands.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kfcp/dataio.hpp"
#include "kfcp/error.hpp"
#include "kfcp/evalharness.hpp"
#include "kfcp/report.hpp"

namespace kfcp::cli {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr const char* kToolVersion = "0.1.0";

[[noreturn]] void config_error(const std::string& message) {
  throw Error(ErrorCode::ConfigError, message);
}

bool has_split(const std::vector<Method>& methods) {
  for (const auto& m : methods) {
    if (m.kind == Method::Kind::split) return true;
  }
  return false;
}

void validate_common(const CommonConfig& c) {
  if (c.methods.empty()) config_error("methods: at least one method is required");
  if (c.workers == 0) config_error("workers must be at least 1");
  try {
    c.conformal.validate();
  } catch (const Error& e) {
    config_error(std::string("alpha: ") + e.what());
  }
  MlpConfig nn = c.nn;
  nn.input_dim = 1;
  try {
    nn.validate();
  } catch (const Error& e) {
    config_error(std::string("nn: ") + e.what());
  }
}

std::string file_safe(const std::string& name) {
  std::string out;
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '_' || c == '-' || c == '.';
    out += ok ? c : '_';
  }
  return out;
}

ordered_json nn_json(const MlpConfig& nn) {
  ordered_json j;
  j["hidden_layers"] = nn.hidden_layers;
  j["activation"] = std::string(to_string(nn.activation));
  j["learning_rate"] = nn.learning_rate;
  j["batch_size"] = nn.batch_size;
  j["iterations"] = nn.iterations;
  j["adam_beta1"] = nn.adam_beta1;
  j["adam_beta2"] = nn.adam_beta2;
  j["adam_epsilon"] = nn.adam_epsilon;
  return j;
}

ordered_json common_json(const CommonConfig& c) {
  ordered_json j;
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["out_dir"] = c.out_dir.string();
  std::vector<std::string> methods;
  for (const auto& m : c.methods) methods.push_back(m.name());
  j["methods"] = methods;
  j["alpha"] = c.conformal.alpha;
  j["signed_quantiles"] = c.conformal.quantile_mode == QuantileMode::signed_two_sided;
  j["kfold_center"] = c.conformal.kfold_center == CenterMode::refit ? "refit" : "average";
  j["sc_center"] = c.conformal.split_center == SplitCenter::refit ? "refit" : "first-half";
  j["record_runtime"] = c.record_runtime;
  j["ratios"] = c.require_ratios;
  j["nn"] = nn_json(c.nn);
  return j;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
}

ordered_json failures_json(const std::vector<CellFailure>& failures) {
  ordered_json arr = ordered_json::array();
  for (const auto& f : failures) {
    arr.push_back({{"scenario", f.scenario},
                   {"replicate", f.replicate},
                   {"method", f.method.name()},
                   {"message", f.message}});
  }
  return arr;
}

// records.csv, summary.txt and the SVGs for a finished run.
void write_bundle(const std::filesystem::path& dir, const std::vector<EvalRecord>& records,
                  const std::vector<std::string>& scenario_ids, bool with_ratios, double alpha,
                  std::ostream& log) {
  write_records(records, dir / "records.csv");
  if (records.empty()) {
    write_text(dir / "summary.txt", "no records\n");
    return;
  }
  const auto summaries = aggregate(records, with_ratios);
  write_text(dir / "summary.txt", summary_table(summaries));
  log << summary_table(summaries);

  std::vector<PairedRatio> ratios;
  if (with_ratios) ratios = paired_log2_ratios(records);
  for (const auto& id : scenario_ids) {
    const auto cov = coverage_groups(records, id);
    if (!cov.empty()) {
      emit_boxplot_svg(cov, BoxMetric::coverage, 1.0 - alpha, "Coverage: " + id,
                       dir / ("coverage_" + file_safe(id) + ".svg"));
    }
    if (with_ratios) {
      const auto rg = ratio_groups(ratios, id);
      if (!rg.empty()) {
        emit_boxplot_svg(rg, BoxMetric::log2_ratio, std::nullopt, "log2 width ratio vs SC: " + id,
                         dir / ("ratio_" + file_safe(id) + ".svg"));
      }
    }
  }
}

void write_meta(const std::filesystem::path& dir, const std::string& command, ordered_json config,
                const std::vector<CellFailure>& failures, ordered_json extra) {
  ordered_json meta;
  meta["schema_version"] = kSchemaVersion;
  meta["tool"] = "kfcp";
  meta["tool_version"] = kToolVersion;
  meta["command"] = command;
  meta["seed"] = config["seed"];
  meta["config"] = std::move(config);
  meta["records_columns"] = {"method", "scenario", "replicate", "coverage", "mean_width", "runtime_seconds"};
  meta["failures"] = failures_json(failures);
  for (auto& [k, v] : extra.items()) meta[k] = v;
  meta["generated_at"] = utc_timestamp();
  write_text(dir / "meta.json", meta.dump(2) + "\n");
}

// One line per data row: the outer fold that held it out in each repeat.
void write_folds(const std::filesystem::path& path, std::size_t n,
                 const std::vector<std::vector<std::vector<std::size_t>>>& partitions) {
  std::vector<std::vector<std::size_t>> fold_of(n, std::vector<std::size_t>(partitions.size()));
  for (std::size_t r = 0; r < partitions.size(); ++r) {
    for (std::size_t f = 0; f < partitions[r].size(); ++f) {
      for (std::size_t i : partitions[r][f]) fold_of[i][r] = f;
    }
  }
  std::ostringstream out;
  out << "row";
  for (std::size_t r = 0; r < partitions.size(); ++r) out << ",repeat_" << r;
  out << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    out << i;
    for (std::size_t f : fold_of[i]) out << ',' << f;
    out << '\n';
  }
  write_text(path, out.str());
}

void prepare_out_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
}

}  // namespace

SimulateConfig SimulateConfig::paper_defaults() {
  SimulateConfig c;
  c.common.methods = {Method::split(), Method::kfold(2), Method::kfold(5), Method::kfold(10)};
  c.common.nn = MlpConfig::simulation_defaults(10);
  c.scenarios = ScenarioSpec::paper_grid();
  return c;
}

void SimulateConfig::validate() const {
  validate_common(common);
  if (scenarios.empty()) config_error("scenarios: at least one scenario is required");
  if (replicates == 0) config_error("replicates must be positive");
  if (n_test == 0) config_error("n_test must be positive");
}

AnalyzeConfig AnalyzeConfig::paper_defaults() {
  AnalyzeConfig c;
  c.common.methods = {Method::split(), Method::kfold(5)};
  c.common.nn = MlpConfig::real_data_defaults(1);
  return c;
}

void AnalyzeConfig::validate() const {
  validate_common(common);
  if (manifest.empty()) config_error("manifest: a manifest file is required");
  if (outer_folds < 2) config_error("outer_folds must be at least 2");
  if (repeats == 0) config_error("repeats must be positive");
}

int cmd_simulate(const SimulateConfig& config, std::ostream& log) {
  try {
    config.validate();
    if (config.common.require_ratios && !has_split(config.common.methods)) {
      throw Error(ErrorCode::MissingBaseline, "--ratios needs SC among the methods");
    }
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return 2;
  }
  const bool with_ratios = has_split(config.common.methods);
  try {
    prepare_out_dir(config.common.out_dir);
    HarnessOptions options;
    options.conformal = config.common.conformal;
    options.workers = config.common.workers;
    options.record_runtime = config.common.record_runtime;
    const Trainer trainer = make_mlp_trainer(config.common.nn);
    AbsMeanCache cache;

    std::vector<EvalRecord> records;
    std::vector<CellFailure> failures;
    std::vector<std::string> ids;
    for (ScenarioSpec spec : config.scenarios) {
      spec.replicates = config.replicates;
      spec.n_test = config.n_test;
      spec.het_reading = config.het_as_sd ? HeteroscedasticReading::standard_deviation
                                          : HeteroscedasticReading::variance;
      log << "scenario " << spec.id() << ": " << spec.replicates << " replicates x "
          << config.common.methods.size() << " methods\n";
      ScenarioRun run = run_scenario(spec, config.common.methods, trainer, config.common.seed,
                                     options, &cache);
      for (const auto& f : run.failures) {
        log << "  failed: " << f.scenario << " replicate " << f.replicate << " " << f.method.name()
            << ": " << f.message << '\n';
      }
      records.insert(records.end(), run.records.begin(), run.records.end());
      failures.insert(failures.end(), run.failures.begin(), run.failures.end());
      ids.push_back(spec.id());
    }

    write_bundle(config.common.out_dir, records, ids, with_ratios, config.common.conformal.alpha, log);
    ordered_json cfg = common_json(config.common);
    std::vector<std::string> scenario_text;
    for (const auto& s : config.scenarios) {
      scenario_text.push_back(std::string(to_string(s.mean_fn)) + ":" +
                              std::string(to_string(s.error_dist)) + ":" + std::to_string(s.n_train));
    }
    cfg["scenarios"] = scenario_text;
    cfg["replicates"] = config.replicates;
    cfg["n_test"] = config.n_test;
    cfg["het_as_sd"] = config.het_as_sd;
    write_meta(config.common.out_dir, "simulate", std::move(cfg), failures, ordered_json::object());
    if (!failures.empty()) {
      log << failures.size() << " cell(s) failed; partial results written to "
          << config.common.out_dir.string() << '\n';
      return 1;
    }
    return 0;
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::ConfigError || e.code() == ErrorCode::MissingBaseline ? 2 : 1;
  }
}

int cmd_analyze(const AnalyzeConfig& config, std::ostream& log) {
  std::vector<DatasetManifestEntry> entries;
  try {
    config.validate();
    if (config.common.require_ratios && !has_split(config.common.methods)) {
      throw Error(ErrorCode::MissingBaseline, "--ratios needs SC among the methods");
    }
    entries = load_manifest(config.manifest);
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return 2;
  }
  const bool with_ratios = has_split(config.common.methods);
  try {
    prepare_out_dir(config.common.out_dir);
    HarnessOptions options;
    options.conformal = config.common.conformal;
    options.workers = config.common.workers;
    options.record_runtime = config.common.record_runtime;
    const Trainer trainer = make_mlp_trainer(config.common.nn);

    std::vector<EvalRecord> records;
    std::vector<CellFailure> failures;
    std::vector<std::string> ids;
    ordered_json datasets = ordered_json::array();
    bool dataset_errors = false;
    for (const auto& entry : entries) {
      ordered_json info;
      info["name"] = entry.name;
      info["path"] = entry.path.string();
      try {
        const LoadedDataset loaded = load_csv(entry);
        info["rows"] = loaded.data.size();
        info["predictors"] = loaded.data.dim();
        info["dropped_rows"] = loaded.dropped_rows;
        info["response"] = loaded.response_name;
        log << "dataset " << entry.name << ": n=" << loaded.data.size() << " p=" << loaded.data.dim()
            << " (dropped " << loaded.dropped_rows << " rows)\n";
        RealDataRun run = run_real_dataset(loaded.data, entry.name, config.common.methods, trainer,
                                           config.outer_folds, config.repeats, config.common.seed,
                                           options);
        for (const auto& f : run.failures) {
          log << "  failed: " << f.scenario << " repeat " << f.replicate << " " << f.method.name()
              << ": " << f.message << '\n';
        }
        write_folds(config.common.out_dir / ("folds_" + file_safe(entry.name) + ".csv"), loaded.data.size(),
                    run.partitions);
        records.insert(records.end(), run.records.begin(), run.records.end());
        failures.insert(failures.end(), run.failures.begin(), run.failures.end());
        ids.push_back(entry.name);
        info["status"] = "ok";
      } catch (const Error& e) {
        dataset_errors = true;
        info["status"] = "error";
        info["error"] = e.what();
        log << "dataset " << entry.name << " skipped: " << e.what() << '\n';
      }
      datasets.push_back(std::move(info));
    }

    write_bundle(config.common.out_dir, records, ids, with_ratios, config.common.conformal.alpha, log);
    ordered_json cfg = common_json(config.common);
    cfg["manifest"] = config.manifest.string();
    cfg["outer_folds"] = config.outer_folds;
    cfg["repeats"] = config.repeats;
    ordered_json extra;
    extra["datasets"] = std::move(datasets);
    write_meta(config.common.out_dir, "analyze", std::move(cfg), failures, std::move(extra));
    return (dataset_errors || !failures.empty()) ? 1 : 0;
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace kfcp::cli
