#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gaselect.hpp"
#include "ingest.hpp"
#include "quality.hpp"
#include "som.hpp"

namespace entropyclust {

struct SweepConfig {
  int start_A = 3;
  int patience = 5;
  int max_A = 50;
  int restarts_per_A = 5;
  std::uint64_t seed = 0;
  int k_ref = 4;           // neurons of the full-feature SOM that yields GA pseudo-labels
  int label_epochs = 50;   // epochs for that SOM
  GaConfig ga;
  SomConfig som;  // cluster_count and seed are set per run
};

void validate(const SweepConfig& config);

struct SizeRecord {
  int A = 0;
  double best_C = 0.0;
  bool degenerate = false;  // every restart produced an empty or constant cluster
  int best_restart = 0;
  std::vector<double> restart_C;
  std::vector<bool> restart_degenerate;
};

// Result of one clustering run at a fixed cluster count.
struct ClusterRun {
  SomModel model;
  ClusterAssignment assignment{0, {}};
  ClusterProfiles profiles;
  QualityScore score;
};

ClusterRun cluster_consumers(const FeatureMatrix& fm, std::span<const std::size_t> rows,
                             const SomConfig& config);

// Picks the minimum C over restarts, preferring non-degenerate restarts.
SizeRecord summarize_restarts(int A, const std::vector<QualityScore>& scores);

struct SearchOutcome {
  std::vector<SizeRecord> records;
  std::optional<int> optimal_A;
};

// Evaluates A = start_A, start_A + 1, ... until the lowest non-degenerate C has
// not improved for `patience` consecutive sizes, or max_A is reached.
SearchOutcome search_cluster_count(const SweepConfig& config,
                                   const std::function<SizeRecord(int)>& evaluate);

struct SweepResult {
  std::vector<SizeRecord> records;
  int optimal_A = 0;
  double optimal_C = 0.0;
  FeatureSubset feature_subset;
  std::vector<GenerationStats> ga_history;
  std::vector<std::size_t> optimal_labels;  // best restart at optimal_A
};

// Runs the GA once, then the cluster-count search. Throws AllDegenerate.
SweepResult run_sweep(const FeatureMatrix& fm, const SweepConfig& config);
// Same, with a precomputed feature subset.
SweepResult run_sweep(const FeatureMatrix& fm, const SweepConfig& config,
                      const FeatureSubset& subset);

std::string sweep_json(const SweepResult& result, const FeatureMatrix& fm,
                       const SweepConfig& config);
SweepResult parse_sweep_json(const std::string& text, const FeatureMatrix& fm);

struct ReportOptions {
  std::size_t smoothing_window = 700;
  double low_band_kwh = 0.7;
  double high_band_kwh = 3.0;
};

struct MembershipRow {
  int cluster = 0;  // 1-based
  std::size_t count = 0;
  double percent = 0.0;
  double annual_mean_kwh = 0.0;
  std::string band;  // low | moderate | high | empty
};

struct ReportBundle {
  int A = 0;
  std::vector<SizeRecord> c_curve;
  Matrix smoothed_profiles;  // M by A
  std::vector<EpochSeconds> time_index;
  std::vector<MembershipRow> membership;
};

ReportBundle build_report(const SweepResult& result, const FeatureMatrix& fm,
                          const ClusterAssignment& assignment, const ReportOptions& options = {});

void write_c_curve_csv(std::ostream& out, const std::vector<SizeRecord>& records);
void write_profiles_csv(std::ostream& out, const ReportBundle& report);
void write_membership_csv(std::ostream& out, const ReportBundle& report);

}  // namespace entropyclust
