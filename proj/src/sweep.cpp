#include "entropyclust/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "entropyclust/error.hpp"
#include "entropyclust/log.hpp"
#include "entropyclust/parallel.hpp"
#include "entropyclust/rng.hpp"

namespace entropyclust {

namespace {

// Stream tags under A = 0, which no cluster count uses.
constexpr std::uint64_t kGaStream = 0;
constexpr std::uint64_t kLabelStream = 1;

}  // namespace

void validate(const SweepConfig& config) {
  if (config.start_A < 2) throw Error(ErrorKind::InvalidConfig, "start_A must be >= 2");
  if (config.patience < 1) throw Error(ErrorKind::InvalidConfig, "patience must be >= 1");
  if (config.max_A < config.start_A) throw Error(ErrorKind::InvalidConfig, "max_A must be >= start_A");
  if (config.restarts_per_A < 1) throw Error(ErrorKind::InvalidConfig, "restarts_per_A must be >= 1");
  if (config.k_ref < 2) throw Error(ErrorKind::InvalidConfig, "k_ref must be >= 2");
  if (config.label_epochs < 1) throw Error(ErrorKind::InvalidConfig, "label_epochs must be >= 1");
  SomConfig som = config.som;
  som.cluster_count = config.start_A;
  som.initial_radius.reset();
  validate(som);
}

ClusterRun cluster_consumers(const FeatureMatrix& fm, std::span<const std::size_t> rows,
                             const SomConfig& config) {
  Matrix samples = rows.empty() ? all_samples(fm) : select_samples(fm, rows);
  if (config.standardize) samples = standardize_columns(samples);
  SomModel model = fit_som(samples, config);
  ClusterAssignment assignment = assign(model, samples);
  ClusterProfiles profiles = cluster_profiles(assignment, fm);
  QualityScore score;
  if (assignment.cluster_count() >= 2) score = score_profiles(profiles);
  return {std::move(model), std::move(assignment), std::move(profiles), std::move(score)};
}

SizeRecord summarize_restarts(int A, const std::vector<QualityScore>& scores) {
  SizeRecord rec;
  rec.A = A;
  rec.degenerate = true;
  rec.best_C = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < scores.size(); ++r) {
    rec.restart_C.push_back(scores[r].C);
    rec.restart_degenerate.push_back(scores[r].degenerate);
  }
  // Non-degenerate restarts win; within a class the lowest C, then the lowest restart.
  for (std::size_t r = 0; r < scores.size(); ++r) {
    const bool better_class = rec.degenerate && !scores[r].degenerate;
    const bool same_class = rec.degenerate == scores[r].degenerate;
    if (better_class || (same_class && scores[r].C < rec.best_C)) {
      rec.best_C = scores[r].C;
      rec.best_restart = static_cast<int>(r);
      rec.degenerate = scores[r].degenerate;
    }
  }
  return rec;
}

SearchOutcome search_cluster_count(const SweepConfig& config,
                                   const std::function<SizeRecord(int)>& evaluate) {
  SearchOutcome out;
  double lowest = std::numeric_limits<double>::infinity();
  int since_improvement = 0;
  for (int A = config.start_A; A <= config.max_A; ++A) {
    SizeRecord rec = evaluate(A);
    log::info("A=" + std::to_string(A) + " C=" + std::to_string(rec.best_C) +
              (rec.degenerate ? " (degenerate)" : ""));
    if (!rec.degenerate && rec.best_C < lowest) {
      lowest = rec.best_C;
      out.optimal_A = A;
      since_improvement = 0;
    } else if (out.optimal_A) {
      ++since_improvement;
    }
    out.records.push_back(std::move(rec));
    if (out.optimal_A && since_improvement >= config.patience) break;
  }
  return out;
}

SweepResult run_sweep(const FeatureMatrix& fm, const SweepConfig& config) {
  validate(config);
  const auto N = static_cast<int>(fm.consumers());
  if (N < config.start_A)
    throw Error(ErrorKind::InvalidConfig, "need at least start_A consumers, have " + std::to_string(N));

  SomConfig label_som = config.som;
  label_som.epochs = config.label_epochs;
  const PseudoLabels labels =
      make_pseudo_labels(fm, std::min(config.k_ref, N), hash64(config.seed, 0, kLabelStream), label_som);
  log::info("pseudo-labels: " + std::to_string(labels.classes) + " classes");

  GaConfig ga = config.ga;
  ga.seed = hash64(config.seed, 0, kGaStream);
  GaResult selected = run_ga(fm, ga, labels);
  log::info("GA best fitness " + std::to_string(selected.best.fitness));

  SweepResult result = run_sweep(fm, config, selected.best);
  result.ga_history = std::move(selected.history);
  return result;
}

SweepResult run_sweep(const FeatureMatrix& fm, const SweepConfig& config, const FeatureSubset& subset) {
  validate(config);
  const auto N = static_cast<int>(fm.consumers());
  if (N < config.start_A)
    throw Error(ErrorKind::InvalidConfig, "need at least start_A consumers, have " + std::to_string(N));
  for (std::size_t i : subset.indices)
    if (i >= fm.time_points()) throw Error(ErrorKind::InvalidInput, "feature index out of range");

  SweepConfig bounded = config;
  bounded.max_A = std::min(config.max_A, N);

  std::map<int, std::vector<std::size_t>> best_labels;
  auto evaluate = [&](int A) {
    const auto R = static_cast<std::size_t>(config.restarts_per_A);
    std::vector<QualityScore> scores(R);
    std::vector<std::vector<std::size_t>> labels(R);
    parallel_for(R, [&](std::size_t r) {
      SomConfig som = config.som;
      som.cluster_count = A;
      som.seed = hash64(config.seed, static_cast<std::uint64_t>(A), r);
      som.initial_radius.reset();
      ClusterRun run = cluster_consumers(fm, subset.indices, som);
      scores[r] = std::move(run.score);
      labels[r] = run.assignment.labels();
    });
    SizeRecord rec = summarize_restarts(A, scores);
    best_labels[A] = std::move(labels[static_cast<std::size_t>(rec.best_restart)]);
    return rec;
  };

  SearchOutcome outcome = search_cluster_count(bounded, evaluate);
  if (!outcome.optimal_A)
    throw Error(ErrorKind::AllDegenerate, "every evaluated cluster count had an empty or constant cluster");

  SweepResult result;
  result.records = std::move(outcome.records);
  result.optimal_A = *outcome.optimal_A;
  result.feature_subset = subset;
  if (result.feature_subset.timestamps.size() != subset.indices.size()) {
    result.feature_subset.timestamps.clear();
    for (std::size_t i : subset.indices) result.feature_subset.timestamps.push_back(fm.time_index[i]);
  }
  for (const auto& rec : result.records)
    if (rec.A == result.optimal_A) result.optimal_C = rec.best_C;
  result.optimal_labels = std::move(best_labels[result.optimal_A]);
  return result;
}

std::string sweep_json(const SweepResult& result, const FeatureMatrix& fm, const SweepConfig& config) {
  using nlohmann::json;
  json doc;
  doc["config"] = {{"start_A", config.start_A},
                   {"patience", config.patience},
                   {"max_A", config.max_A},
                   {"restarts_per_A", config.restarts_per_A},
                   {"seed", config.seed},
                   {"k_ref", config.k_ref}};
  json records = json::array();
  for (const auto& rec : result.records) {
    records.push_back({{"A", rec.A},
                       {"best_C", rec.best_C},
                       {"degenerate", rec.degenerate},
                       {"best_restart", rec.best_restart},
                       {"restart_C", rec.restart_C},
                       {"restart_degenerate", rec.restart_degenerate}});
  }
  doc["records"] = std::move(records);
  doc["optimal_A"] = result.optimal_A;
  doc["optimal_C"] = result.optimal_C;

  std::vector<std::string> ts;
  for (EpochSeconds t : result.feature_subset.timestamps) ts.push_back(format_timestamp(t));
  doc["feature_subset"] = {{"indices", result.feature_subset.indices},
                           {"timestamps", ts},
                           {"fitness", result.feature_subset.fitness}};

  json labels = json::object();
  for (std::size_t j = 0; j < result.optimal_labels.size(); ++j)
    labels[fm.consumer_ids.at(j)] = result.optimal_labels[j] + 1;
  doc["optimal_labels"] = std::move(labels);
  return doc.dump(2) + "\n";
}

SweepResult parse_sweep_json(const std::string& text, const FeatureMatrix& fm) {
  SweepResult out;
  try {
    const auto doc = nlohmann::json::parse(text);
    for (const auto& r : doc.at("records")) {
      SizeRecord rec;
      rec.A = r.at("A").get<int>();
      rec.best_C = r.at("best_C").get<double>();
      rec.degenerate = r.at("degenerate").get<bool>();
      rec.best_restart = r.value("best_restart", 0);
      rec.restart_C = r.value("restart_C", std::vector<double>{});
      rec.restart_degenerate = r.value("restart_degenerate", std::vector<bool>{});
      out.records.push_back(std::move(rec));
    }
    out.optimal_A = doc.at("optimal_A").get<int>();
    out.optimal_C = doc.value("optimal_C", 0.0);
    const auto& fs = doc.at("feature_subset");
    out.feature_subset.indices = fs.at("indices").get<std::vector<std::size_t>>();
    for (const auto& t : fs.value("timestamps", nlohmann::json::array()))
      out.feature_subset.timestamps.push_back(parse_timestamp(t.get<std::string>()));
    out.feature_subset.fitness = fs.value("fitness", 0.0);

    const auto& labels = doc.at("optimal_labels");
    out.optimal_labels.reserve(fm.consumers());
    for (const auto& id : fm.consumer_ids) {
      const int cluster = labels.at(id).get<int>();
      if (cluster < 1 || cluster > out.optimal_A)
        throw Error(ErrorKind::InvalidInput, "cluster of " + id + " out of range");
      out.optimal_labels.push_back(static_cast<std::size_t>(cluster - 1));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidInput, std::string("sweep JSON: ") + e.what());
  }
  return out;
}

ReportBundle build_report(const SweepResult& result, const FeatureMatrix& fm,
                          const ClusterAssignment& assignment, const ReportOptions& options) {
  const ClusterProfiles profiles = cluster_profiles(assignment, fm);
  const std::size_t A = assignment.cluster_count();
  const std::size_t M = fm.time_points();
  const auto N = static_cast<double>(assignment.consumers());

  ReportBundle report;
  report.A = static_cast<int>(A);
  report.c_curve = result.records;
  report.time_index = fm.time_index;
  report.smoothed_profiles = Matrix(M, A);
  for (std::size_t i = 0; i < A; ++i) {
    const auto smooth = moving_average(profiles.profiles.row(i), options.smoothing_window);
    for (std::size_t t = 0; t < M; ++t) report.smoothed_profiles(t, i) = smooth[t];
  }

  for (std::size_t i = 0; i < A; ++i) {
    MembershipRow row;
    row.cluster = static_cast<int>(i) + 1;
    row.count = profiles.sizes[i];
    row.percent = N > 0 ? 100.0 * static_cast<double>(row.count) / N : 0.0;
    if (row.count == 0) {
      row.band = "empty";
    } else {
      const auto p = profiles.profiles.row(i);
      row.annual_mean_kwh = std::accumulate(p.begin(), p.end(), 0.0) / static_cast<double>(M);
      row.band = row.annual_mean_kwh < options.low_band_kwh    ? "low"
                 : row.annual_mean_kwh < options.high_band_kwh ? "moderate"
                                                               : "high";
    }
    report.membership.push_back(std::move(row));
  }
  return report;
}

void write_c_curve_csv(std::ostream& out, const std::vector<SizeRecord>& records) {
  out << "A,best_C,degenerate\n";
  for (const auto& r : records)
    out << r.A << ',' << format_double(r.best_C) << ',' << (r.degenerate ? "true" : "false") << '\n';
}

void write_profiles_csv(std::ostream& out, const ReportBundle& report) {
  out << "timestamp";
  for (int i = 1; i <= report.A; ++i) out << ",cluster_" << i;
  out << '\n';
  for (std::size_t t = 0; t < report.time_index.size(); ++t) {
    out << format_timestamp(report.time_index[t]);
    for (double v : report.smoothed_profiles.row(t)) out << ',' << format_double(v);
    out << '\n';
  }
}

void write_membership_csv(std::ostream& out, const ReportBundle& report) {
  out << "cluster,count,percent,annual_mean_kwh,band\n";
  for (const auto& row : report.membership)
    out << row.cluster << ',' << row.count << ',' << format_double(row.percent) << ','
        << format_double(row.annual_mean_kwh) << ',' << row.band << '\n';
}

}  // namespace entropyclust
