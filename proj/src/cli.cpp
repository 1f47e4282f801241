#include "entropyclust/cli.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "entropyclust/error.hpp"
#include "entropyclust/log.hpp"
#include "entropyclust/parallel.hpp"
#include "entropyclust/rng.hpp"

namespace entropyclust::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Raised for bad paths and flag combinations; maps to exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path.string() + "'");
  out << content;
  out.flush();
  if (!out) throw Error(ErrorKind::Io, "failed writing '" + path.string() + "'");
}

template <class Fn>
std::string render(Fn&& fn) {
  std::ostringstream ss;
  fn(ss);
  return ss.str();
}

FeatureMatrix load_matrix(const std::string& path, bool allow_negative) {
  std::istringstream in(read_file(path));
  return read_wide_csv(in, allow_negative);
}

// Collects CLI values and writes only those the user actually passed, after
// the JSON config has been applied.
class Overrides {
 public:
  template <class T, class Setter>
  CLI::Option* add(CLI::App* app, const std::string& name, const std::string& desc, Setter set) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(name, *value, desc);
    appliers_.push_back([opt, value, set] {
      if (opt->count() > 0) set(*value);
    });
    return opt;
  }

  CLI::Option* flag(CLI::App* app, const std::string& name, const std::string& desc,
                    std::function<void()> set) {
    CLI::Option* opt = app->add_flag(name, desc);
    appliers_.push_back([opt, set] {
      if (opt->count() > 0) set();
    });
    return opt;
  }

  void apply() const {
    for (const auto& fn : appliers_) fn();
  }

 private:
  std::vector<std::function<void()>> appliers_;
};

template <class T>
void read_key(const json& obj, const char* key, T& target) {
  if (obj.contains(key)) target = obj.at(key).get<T>();
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw Error(ErrorKind::InvalidConfig, where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw Error(ErrorKind::InvalidConfig, "unknown key '" + key + "' in " + where);
  }
}

FillPolicy parse_fill(const std::string& s) {
  if (s == "strict") return FillPolicy::Strict;
  if (s == "hold") return FillPolicy::Hold;
  throw Error(ErrorKind::InvalidConfig, "fill must be 'strict' or 'hold', got '" + s + "'");
}

void add_ga_flags(CLI::App* app, Overrides& ov, PipelineConfig& cfg) {
  GaConfig& ga = cfg.sweep.ga;
  ov.add<int>(app, "--population", "GA population size", [&ga](int v) { ga.population_size = v; });
  ov.add<int>(app, "--generations", "GA generations", [&ga](int v) { ga.generations = v; });
  ov.add<double>(app, "--crossover", "GA crossover probability", [&ga](double v) { ga.crossover_prob = v; });
  ov.add<double>(app, "--mutation", "GA mutation probability", [&ga](double v) { ga.mutation_prob = v; });
  ov.add<int>(app, "--features", "number of selected time instants", [&ga](int v) { ga.chromosome_length = v; });
  ov.add<int>(app, "--elitism", "individuals copied unchanged per generation", [&ga](int v) { ga.elitism_count = v; });
  ov.add<int>(app, "--k-ref", "clusters of the reference SOM that labels consumers for the GA",
              [&cfg](int v) { cfg.sweep.k_ref = v; });
  ov.add<int>(app, "--label-epochs", "epochs of the reference SOM", [&cfg](int v) { cfg.sweep.label_epochs = v; });
}

void add_som_flags(CLI::App* app, Overrides& ov, PipelineConfig& cfg) {
  SomConfig& som = cfg.sweep.som;
  ov.add<int>(app, "--epochs", "SOM training epochs", [&som](int v) { som.epochs = v; });
  ov.add<double>(app, "--rate", "initial SOM learning rate", [&som](double v) { som.initial_rate = v; });
  ov.add<double>(app, "--final-rate", "final SOM learning rate", [&som](double v) { som.final_rate = v; });
  ov.add<double>(app, "--final-radius", "final neighbourhood radius", [&som](double v) { som.final_radius = v; });
  ov.flag(app, "--standardize", "z-score selected features before training", [&som] { som.standardize = true; });
}

void add_matrix_flag(CLI::App* app, Overrides& ov, PipelineConfig& cfg) {
  ov.add<std::string>(app, "--matrix", "wide matrix CSV", [&cfg](const std::string& v) { cfg.input = v; });
  ov.flag(app, "--allow-negative", "accept negative readings (net metering)", [&cfg] { cfg.allow_negative = true; });
}

FeatureMatrix matrix_from_config(const PipelineConfig& cfg) {
  if (cfg.input.has_value() == cfg.synth.has_value())
    throw UsageError("exactly one of a matrix input or a synth spec is required");
  if (cfg.synth) return generate_planted(*cfg.synth).matrix;
  return load_matrix(*cfg.input, cfg.allow_negative);
}

void write_report(const fs::path& dir, const SweepResult& result, const FeatureMatrix& fm,
                  const ReportOptions& options) {
  const ClusterAssignment assignment(static_cast<std::size_t>(result.optimal_A), result.optimal_labels);
  const ReportBundle report = build_report(result, fm, assignment, options);
  const std::string k = std::to_string(result.optimal_A);
  write_file(dir / "c_curve.csv", render([&](std::ostream& o) { write_c_curve_csv(o, report.c_curve); }));
  write_file(dir / ("profiles_A" + k + ".csv"), render([&](std::ostream& o) { write_profiles_csv(o, report); }));
  write_file(dir / ("membership_A" + k + ".csv"), render([&](std::ostream& o) { write_membership_csv(o, report); }));
}

std::string require_out(const PipelineConfig& cfg) {
  if (cfg.out.empty()) throw UsageError("--out is required");
  return cfg.out;
}

int cmd_ingest(const PipelineConfig& cfg, std::ostream& out) {
  if (!cfg.input) throw UsageError("--input is required");
  const std::string target = require_out(cfg);
  std::istringstream in(read_file(*cfg.input));
  ParseOptions opts;
  opts.allow_negative = cfg.allow_negative;
  const RawReadings raw = parse_long_csv(in, opts);
  const FeatureMatrix fm = align_and_pivot(raw, cfg.period, cfg.fill);
  write_file(target, render([&](std::ostream& o) { write_wide_csv(o, fm); }));
  out << "M=" << fm.time_points() << " N=" << fm.consumers() << " window="
      << format_timestamp(fm.time_index.front()) << ".." << format_timestamp(fm.time_index.back())
      << " readings=" << raw.records.size()
      << " dropped=" << static_cast<long long>(raw.records.size()) - static_cast<long long>(fm.values.data().size())
      << '\n';
  return kOk;
}

int cmd_synth(const PipelineConfig& cfg, const std::string& labels_path, std::ostream& out) {
  const std::string target = require_out(cfg);
  PlantedSpec spec;
  if (cfg.synth) spec = *cfg.synth;
  else spec.seed = cfg.seed;
  const PlantedData data = generate_planted(spec);
  write_file(target, render([&](std::ostream& o) { write_wide_csv(o, data.matrix); }));
  fs::path labels = labels_path;
  if (labels.empty()) labels = fs::path(target).replace_extension(".labels.json");
  write_file(labels, labels_json(data.matrix, data.labels));
  out << "M=" << data.matrix.time_points() << " N=" << data.matrix.consumers() << '\n';
  return kOk;
}

int cmd_select(const PipelineConfig& cfg, const std::string& history_path, std::ostream& out) {
  const std::string target = require_out(cfg);
  const FeatureMatrix fm = matrix_from_config(cfg);
  const auto N = static_cast<int>(fm.consumers());
  SomConfig label_som = cfg.sweep.som;
  label_som.epochs = cfg.sweep.label_epochs;
  const PseudoLabels labels = make_pseudo_labels(fm, std::min(cfg.sweep.k_ref, N), hash64(cfg.seed, 0, 1), label_som);
  GaConfig ga = cfg.sweep.ga;
  ga.seed = hash64(cfg.seed, 0, 0);
  const GaResult result = run_ga(fm, ga, labels);
  write_file(target, subset_json(result.best));
  if (!history_path.empty())
    write_file(history_path, render([&](std::ostream& o) { write_history_csv(o, result.history); }));
  out << "fitness=" << format_double(result.best.fitness) << " features=" << result.best.indices.size() << '\n';
  return kOk;
}

int cmd_cluster(const PipelineConfig& cfg, const std::string& subset_path, int clusters, std::ostream& out) {
  const fs::path dir = require_out(cfg);
  const FeatureMatrix fm = matrix_from_config(cfg);
  FeatureSubset subset;
  if (!subset_path.empty()) subset = parse_subset_json(read_file(subset_path));
  SomConfig som = cfg.sweep.som;
  som.cluster_count = clusters;
  som.seed = hash64(cfg.seed, static_cast<std::uint64_t>(clusters), 0);
  if (clusters < 2) throw Error(ErrorKind::InvalidConfig, "--clusters must be >= 2");
  const ClusterRun run = cluster_consumers(fm, subset.indices, som);
  write_file(dir / "model.json", model_json(run.model));
  write_file(dir / "assignment.csv", render([&](std::ostream& o) { write_assignment_csv(o, fm, run.assignment); }));
  write_file(dir / "quality.json", quality_json(run.score));
  out << "A=" << clusters << " C=" << format_double(run.score.C)
      << (run.score.degenerate ? " degenerate" : "") << '\n';
  return kOk;
}

int cmd_sweep(const PipelineConfig& cfg, const std::string& subset_path, bool dry_run, std::ostream& out) {
  SweepConfig sweep = cfg.sweep;
  sweep.seed = cfg.seed;
  validate(sweep);
  if (cfg.input.has_value() == cfg.synth.has_value())
    throw UsageError("exactly one of a matrix input or a synth spec is required");
  if (cfg.synth) validate(*cfg.synth);
  if (dry_run) {
    if (cfg.input && !fs::exists(*cfg.input)) throw UsageError("cannot read '" + *cfg.input + "'");
    if (!subset_path.empty() && !fs::exists(subset_path)) throw UsageError("cannot read '" + subset_path + "'");
    out << "dry-run: configuration is valid\n";
    return kOk;
  }

  const fs::path dir = require_out(cfg);
  const FeatureMatrix fm = matrix_from_config(cfg);
  validate(sweep.ga, fm.time_points());
  const SweepResult result = subset_path.empty()
                                 ? run_sweep(fm, sweep)
                                 : run_sweep(fm, sweep, parse_subset_json(read_file(subset_path)));

  write_file(dir / "sweep.json", sweep_json(result, fm, sweep));
  write_file(dir / "feature_subset.json", subset_json(result.feature_subset));
  if (!result.ga_history.empty())
    write_file(dir / "ga_history.csv", render([&](std::ostream& o) { write_history_csv(o, result.ga_history); }));
  write_report(dir, result, fm, cfg.report);
  out << "optimal_A=" << result.optimal_A << " C=" << format_double(result.optimal_C) << '\n';
  return kOk;
}

int cmd_report(const PipelineConfig& cfg, const std::string& sweep_path, std::ostream& out) {
  const fs::path dir = require_out(cfg);
  if (sweep_path.empty()) throw UsageError("--sweep is required");
  const FeatureMatrix fm = matrix_from_config(cfg);
  const SweepResult result = parse_sweep_json(read_file(sweep_path), fm);
  write_report(dir, result, fm, cfg.report);
  out << "optimal_A=" << result.optimal_A << '\n';
  return kOk;
}

}  // namespace

void apply_json(PipelineConfig& cfg, const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  try {
    check_keys(doc, {"input", "synth", "period", "fill", "allow_negative", "ga", "som", "sweep", "report", "out",
                     "seed", "threads"},
               "config");
    if (doc.contains("input") && !doc["input"].is_null()) cfg.input = doc["input"].get<std::string>();
    read_key(doc, "period", cfg.period);
    if (doc.contains("fill")) cfg.fill = parse_fill(doc["fill"].get<std::string>());
    read_key(doc, "allow_negative", cfg.allow_negative);
    read_key(doc, "out", cfg.out);
    read_key(doc, "seed", cfg.seed);
    read_key(doc, "threads", cfg.threads);

    if (doc.contains("synth") && !doc["synth"].is_null()) {
      const json& s = doc["synth"];
      check_keys(s, {"groups", "per_group", "points", "sigma", "seed", "shared_fraction"}, "synth");
      PlantedSpec spec;
      spec.seed = cfg.seed;
      read_key(s, "groups", spec.group_count);
      read_key(s, "per_group", spec.consumers_per_group);
      read_key(s, "points", spec.time_points);
      read_key(s, "sigma", spec.noise_sigma);
      read_key(s, "seed", spec.seed);
      read_key(s, "shared_fraction", spec.shared_fraction);
      cfg.synth = spec;
    }
    if (doc.contains("ga")) {
      const json& g = doc["ga"];
      check_keys(g, {"population_size", "generations", "crossover_prob", "mutation_prob", "chromosome_length",
                     "elitism_count"},
                 "ga");
      GaConfig& ga = cfg.sweep.ga;
      read_key(g, "population_size", ga.population_size);
      read_key(g, "generations", ga.generations);
      read_key(g, "crossover_prob", ga.crossover_prob);
      read_key(g, "mutation_prob", ga.mutation_prob);
      read_key(g, "chromosome_length", ga.chromosome_length);
      read_key(g, "elitism_count", ga.elitism_count);
    }
    if (doc.contains("som")) {
      const json& s = doc["som"];
      check_keys(s, {"epochs", "initial_rate", "final_rate", "final_radius", "standardize"}, "som");
      SomConfig& som = cfg.sweep.som;
      read_key(s, "epochs", som.epochs);
      read_key(s, "initial_rate", som.initial_rate);
      read_key(s, "final_rate", som.final_rate);
      read_key(s, "final_radius", som.final_radius);
      read_key(s, "standardize", som.standardize);
    }
    if (doc.contains("sweep")) {
      const json& s = doc["sweep"];
      check_keys(s, {"start_A", "patience", "max_A", "restarts_per_A", "k_ref", "label_epochs"}, "sweep");
      read_key(s, "start_A", cfg.sweep.start_A);
      read_key(s, "patience", cfg.sweep.patience);
      read_key(s, "max_A", cfg.sweep.max_A);
      read_key(s, "restarts_per_A", cfg.sweep.restarts_per_A);
      read_key(s, "k_ref", cfg.sweep.k_ref);
      read_key(s, "label_epochs", cfg.sweep.label_epochs);
    }
    if (doc.contains("report")) {
      const json& r = doc["report"];
      check_keys(r, {"window", "low_band_kwh", "high_band_kwh"}, "report");
      read_key(r, "window", cfg.report.smoothing_window);
      read_key(r, "low_band_kwh", cfg.report.low_band_kwh);
      read_key(r, "high_band_kwh", cfg.report.high_band_kwh);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, std::string("config: ") + e.what());
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Entropy-guided clustering of energy consumer load profiles", "entropyclust"};
  app.require_subcommand(1);

  PipelineConfig cfg;
  Overrides ov;
  std::string config_path;
  std::string labels_path, history_path, subset_path, sweep_path;
  int clusters = 4;
  bool dry_run = false;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    ov.add<std::uint64_t>(sub, "--seed", "master seed", [&cfg](std::uint64_t v) {
      cfg.seed = v;
      if (cfg.synth) cfg.synth->seed = v;
    });
    ov.add<int>(sub, "--threads", "worker thread cap (0 = all cores)", [&cfg](int v) { cfg.threads = v; });
    ov.add<std::string>(sub, "--out", "output path", [&cfg](const std::string& v) { cfg.out = v; });
  };
  auto synth_flags = [&](CLI::App* sub) {
    auto spec = [&cfg]() -> PlantedSpec& {
      if (!cfg.synth) {
        cfg.synth.emplace();
        cfg.synth->seed = cfg.seed;
      }
      return *cfg.synth;
    };
    ov.add<int>(sub, "--groups", "planted groups", [spec](int v) { spec().group_count = v; });
    ov.add<int>(sub, "--per-group", "consumers per group", [spec](int v) { spec().consumers_per_group = v; });
    ov.add<int>(sub, "--points", "time points", [spec](int v) { spec().time_points = v; });
    ov.add<double>(sub, "--sigma", "Gaussian noise standard deviation", [spec](double v) { spec().noise_sigma = v; });
  };

  CLI::App* ingest = app.add_subcommand("ingest", "pivot long readings into a wide matrix");
  common(ingest);
  ov.add<std::string>(ingest, "--input", "long CSV consumer_id,timestamp,kwh",
                      [&cfg](const std::string& v) { cfg.input = v; });
  ov.add<EpochSeconds>(ingest, "--period", "grid step in seconds", [&cfg](EpochSeconds v) { cfg.period = v; });
  ov.add<std::string>(ingest, "--fill", "strict | hold", [&cfg](const std::string& v) { cfg.fill = parse_fill(v); });
  ov.flag(ingest, "--allow-negative", "accept negative readings (net metering)", [&cfg] { cfg.allow_negative = true; });

  CLI::App* synth = app.add_subcommand("synth", "generate a planted-cluster matrix");
  common(synth);
  synth_flags(synth);
  synth->add_option("--labels", labels_path, "labels JSON path (default <out>.labels.json)");

  CLI::App* select = app.add_subcommand("select", "GA feature selection");
  common(select);
  add_matrix_flag(select, ov, cfg);
  add_ga_flags(select, ov, cfg);
  add_som_flags(select, ov, cfg);
  select->add_option("--history", history_path, "GA history CSV path");

  CLI::App* cluster = app.add_subcommand("cluster", "train one SOM and score it");
  common(cluster);
  add_matrix_flag(cluster, ov, cfg);
  add_som_flags(cluster, ov, cfg);
  cluster->add_option("--subset", subset_path, "feature subset JSON (default: all rows)");
  cluster->add_option("--clusters", clusters, "number of clusters")->required();

  CLI::App* sweep = app.add_subcommand("sweep", "select features, search the cluster count, write the report");
  common(sweep);
  add_matrix_flag(sweep, ov, cfg);
  add_ga_flags(sweep, ov, cfg);
  add_som_flags(sweep, ov, cfg);
  sweep->add_option("--subset", subset_path, "reuse a feature subset JSON instead of running the GA");
  ov.add<int>(sweep, "--start-a", "first cluster count", [&cfg](int v) { cfg.sweep.start_A = v; });
  ov.add<int>(sweep, "--patience", "non-improving sizes before stopping", [&cfg](int v) { cfg.sweep.patience = v; });
  ov.add<int>(sweep, "--max-a", "largest cluster count", [&cfg](int v) { cfg.sweep.max_A = v; });
  ov.add<int>(sweep, "--restarts", "SOM restarts per cluster count", [&cfg](int v) { cfg.sweep.restarts_per_A = v; });
  ov.add<std::size_t>(sweep, "--window", "moving-average window", [&cfg](std::size_t v) { cfg.report.smoothing_window = v; });
  sweep->add_flag("--dry-run", dry_run, "validate the configuration and exit");

  CLI::App* report = app.add_subcommand("report", "rebuild report tables from sweep.json");
  common(report);
  add_matrix_flag(report, ov, cfg);
  report->add_option("--sweep", sweep_path, "sweep.json")->required();
  ov.add<std::size_t>(report, "--window", "moving-average window", [&cfg](std::size_t v) { cfg.report.smoothing_window = v; });
  ov.add<double>(report, "--low-band", "low consumption threshold (kWh)", [&cfg](double v) { cfg.report.low_band_kwh = v; });
  ov.add<double>(report, "--high-band", "high consumption threshold (kWh)", [&cfg](double v) { cfg.report.high_band_kwh = v; });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (!config_path.empty()) apply_json(cfg, read_file(config_path));
    ov.apply();
    set_thread_limit(static_cast<std::size_t>(std::max(0, cfg.threads)));

    if (*ingest) return cmd_ingest(cfg, out);
    if (*synth) return cmd_synth(cfg, labels_path, out);
    if (*select) return cmd_select(cfg, history_path, out);
    if (*cluster) return cmd_cluster(cfg, subset_path, clusters, out);
    if (*sweep) return cmd_sweep(cfg, subset_path, dry_run, out);
    if (*report) return cmd_report(cfg, sweep_path, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    switch (e.kind()) {
      case ErrorKind::AllDegenerate:
      case ErrorKind::DegenerateClustering:
        return kDegenerate;
      case ErrorKind::Io:
        return kIo;
      default:
        return kUsage;
    }
  }
  return kUsage;
}

}  // namespace entropyclust::cli
