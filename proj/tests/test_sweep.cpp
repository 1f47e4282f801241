#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "entropyclust/error.hpp"
#include "entropyclust/parallel.hpp"
#include "entropyclust/sweep.hpp"
#include "oracles.hpp"

using namespace entropyclust;

namespace {

std::function<SizeRecord(int)> scripted(const std::vector<double>& c, int start, std::vector<int>* seen) {
  return [=](int A) {
    seen->push_back(A);
    SizeRecord r;
    r.A = A;
    r.best_C = c.at(static_cast<std::size_t>(A - start));
    return r;
  };
}

SweepConfig small_config(std::uint64_t seed) {
  SweepConfig cfg;
  cfg.seed = seed;
  cfg.max_A = 8;
  cfg.restarts_per_A = 3;
  cfg.ga.population_size = 20;
  cfg.ga.generations = 10;
  cfg.ga.chromosome_length = 12;
  cfg.som.epochs = 40;
  cfg.label_epochs = 20;
  return cfg;
}

PlantedData planted(int groups, int per_group, int points, double sigma, std::uint64_t seed) {
  PlantedSpec spec;
  spec.group_count = groups;
  spec.consumers_per_group = per_group;
  spec.time_points = points;
  spec.noise_sigma = sigma;
  spec.seed = seed;
  return generate_planted(spec);
}

}  // namespace

TEST_CASE("stopping rule on the scripted C sequence") {
  SweepConfig cfg;
  std::vector<int> seen;
  const SearchOutcome out =
      search_cluster_count(cfg, scripted({0.5, 0.4, 0.3, 0.35, 0.33, 0.4, 0.31, 0.36, 0.1, 0.1}, 3, &seen));
  CHECK(seen == std::vector<int>{3, 4, 5, 6, 7, 8, 9, 10});
  REQUIRE(out.optimal_A);
  CHECK(*out.optimal_A == 5);
  CHECK(out.records.size() == 8);
}

TEST_CASE("forced extension above the minimum leaves the optimum unchanged") {
  SweepConfig cfg;
  cfg.patience = 100;
  cfg.max_A = 14;
  std::vector<int> seen;
  const auto out = search_cluster_count(
      cfg, scripted({0.5, 0.4, 0.3, 0.35, 0.33, 0.4, 0.31, 0.36, 0.9, 0.8, 0.7, 0.6}, 3, &seen));
  CHECK(seen.back() == 14);
  CHECK(*out.optimal_A == 5);
}

TEST_CASE("search evaluates at least patience + 1 sizes and respects max_A") {
  SweepConfig cfg;
  cfg.patience = 3;
  std::vector<int> seen;
  // Monotone increasing C: the first size is the minimum.
  search_cluster_count(cfg, scripted({0.1, 0.2, 0.3, 0.4, 0.5, 0.6}, 3, &seen));
  CHECK(seen.size() == 4);

  cfg.max_A = 4;
  seen.clear();
  const auto out = search_cluster_count(cfg, scripted({0.4, 0.2}, 3, &seen));
  CHECK(seen == std::vector<int>{3, 4});
  CHECK(*out.optimal_A == 4);
}

TEST_CASE("ties on C go to the smaller size; degenerate sizes are skipped") {
  SweepConfig cfg;
  cfg.patience = 2;
  std::vector<int> seen;
  const auto tie = search_cluster_count(cfg, scripted({0.3, 0.3, 0.3, 0.3}, 3, &seen));
  CHECK(*tie.optimal_A == 3);

  auto with_degenerate = [](int A) {
    SizeRecord r;
    r.A = A;
    r.best_C = A == 4 ? 0.01 : 0.2 + 0.01 * A;
    r.degenerate = A == 4 || A == 3;
    return r;
  };
  const auto out = search_cluster_count(cfg, with_degenerate);
  CHECK(*out.optimal_A == 5);
  CHECK(out.records.size() == 5);  // patience counts only after the first usable size

  auto all_bad = [](int A) {
    SizeRecord r;
    r.A = A;
    r.degenerate = true;
    return r;
  };
  cfg.max_A = 7;
  const auto none = search_cluster_count(cfg, all_bad);
  CHECK_FALSE(none.optimal_A);
  CHECK(none.records.size() == 5);
}

TEST_CASE("summarize_restarts prefers non-degenerate runs") {
  QualityScore a, b, c;
  a.C = 0.1;
  a.degenerate = true;
  b.C = 0.4;
  c.C = 0.3;
  const SizeRecord rec = summarize_restarts(4, {a, b, c});
  CHECK(rec.best_C == 0.3);
  CHECK(rec.best_restart == 2);
  CHECK_FALSE(rec.degenerate);
  CHECK(rec.restart_C == std::vector<double>{0.1, 0.4, 0.3});

  const SizeRecord bad = summarize_restarts(4, {a, a});
  CHECK(bad.degenerate);
  CHECK(bad.best_restart == 0);
}

TEST_CASE("run_sweep recovers a planted cluster count") {
  const auto data = planted(4, 20, 300, 0.1, 2);
  const SweepResult r = run_sweep(data.matrix, small_config(2));
  CHECK(r.optimal_A == 4);
  REQUIRE(r.optimal_labels.size() == data.labels.size());
  const std::vector<int> found(r.optimal_labels.begin(), r.optimal_labels.end());
  CHECK(oracle::adjusted_rand_index(found, data.labels) > 0.95);
  CHECK(r.feature_subset.indices.size() == 12);
  CHECK(r.ga_history.size() == 11);
}

TEST_CASE("run_sweep is deterministic and thread-count independent") {
  const auto data = planted(3, 10, 150, 0.2, 5);
  const SweepConfig cfg = small_config(9);
  set_thread_limit(1);
  const SweepResult one = run_sweep(data.matrix, cfg);
  set_thread_limit(4);
  const SweepResult four = run_sweep(data.matrix, cfg);
  set_thread_limit(0);
  CHECK(sweep_json(one, data.matrix, cfg) == sweep_json(four, data.matrix, cfg));
}

TEST_CASE("sweep JSON round trip") {
  const auto data = planted(3, 6, 80, 0.1, 1);
  const SweepConfig cfg = small_config(4);
  const SweepResult r = run_sweep(data.matrix, cfg);
  const SweepResult back = parse_sweep_json(sweep_json(r, data.matrix, cfg), data.matrix);
  CHECK(back.optimal_A == r.optimal_A);
  CHECK(back.optimal_C == r.optimal_C);
  CHECK(back.optimal_labels == r.optimal_labels);
  CHECK(back.feature_subset.indices == r.feature_subset.indices);
  REQUIRE(back.records.size() == r.records.size());
  for (std::size_t i = 0; i < r.records.size(); ++i) {
    CHECK(back.records[i].A == r.records[i].A);
    CHECK(back.records[i].best_C == r.records[i].best_C);
    CHECK(back.records[i].degenerate == r.records[i].degenerate);
  }
}

TEST_CASE("run_sweep validation") {
  const auto data = planted(2, 2, 30, 0.1, 1);
  SweepConfig cfg = small_config(1);
  cfg.start_A = 5;
  CHECK_THROWS_AS(run_sweep(data.matrix, cfg), Error);
  cfg = small_config(1);
  cfg.patience = 0;
  CHECK_THROWS_AS(validate(cfg), Error);
  cfg = small_config(1);
  cfg.max_A = 2;
  CHECK_THROWS_AS(validate(cfg), Error);

  FeatureSubset out_of_range;
  out_of_range.indices = {0, 99};
  CHECK_THROWS_AS(run_sweep(data.matrix, small_config(1), out_of_range), Error);
}

TEST_CASE("constant consumers leave every size degenerate") {
  FeatureMatrix fm;
  fm.values = Matrix(20, 6, 1.0);
  for (std::size_t t = 0; t < 20; ++t) fm.time_index.push_back(static_cast<EpochSeconds>(t) * kHalfHour);
  for (int j = 0; j < 6; ++j) fm.consumer_ids.push_back("c" + std::to_string(j));
  FeatureSubset subset;
  subset.indices = {1, 2, 3};
  try {
    run_sweep(fm, small_config(1), subset);
    FAIL("expected AllDegenerate");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::AllDegenerate);
  }
}

TEST_CASE("report membership and bands") {
  FeatureMatrix fm;
  fm.values = Matrix(4, 5);
  for (std::size_t t = 0; t < 4; ++t) {
    fm.time_index.push_back(static_cast<EpochSeconds>(t) * kHalfHour);
    fm.values(t, 0) = 0.2 + 0.1 * static_cast<double>(t);
    fm.values(t, 1) = 0.4;
    fm.values(t, 2) = 1.0 + static_cast<double>(t);
    fm.values(t, 3) = 4.0;
    fm.values(t, 4) = 5.0 + static_cast<double>(t);
  }
  fm.consumer_ids = {"a", "b", "c", "d", "e"};
  const ClusterAssignment assignment(4, {0, 0, 1, 2, 2});
  SweepResult result;
  result.optimal_A = 4;
  ReportOptions options;
  options.smoothing_window = 3;
  const ReportBundle report = build_report(result, fm, assignment, options);

  REQUIRE(report.membership.size() == 4);
  double total = 0;
  for (const auto& row : report.membership) total += row.percent;
  CHECK(std::abs(total - 100.0) < 0.01);
  CHECK(report.membership[0].band == "low");
  CHECK(report.membership[1].band == "moderate");
  CHECK(report.membership[2].band == "high");
  CHECK(report.membership[3].band == "empty");
  CHECK(report.membership[0].percent == 40.0);
  CHECK(report.membership[1].annual_mean_kwh == 2.5);

  // Most populous cluster has the largest share.
  std::size_t largest = 0;
  for (std::size_t i = 0; i < 4; ++i)
    if (report.membership[i].count > report.membership[largest].count) largest = i;
  for (const auto& row : report.membership) CHECK(row.percent <= report.membership[largest].percent);

  CHECK(report.smoothed_profiles.rows() == 4);
  CHECK(report.smoothed_profiles(0, 1) == 1.5);

  std::ostringstream curve, profiles, membership;
  SizeRecord rec;
  rec.A = 3;
  rec.best_C = 0.25;
  write_c_curve_csv(curve, {rec});
  CHECK(curve.str() == "A,best_C,degenerate\n3,0.25,false\n");
  write_profiles_csv(profiles, report);
  CHECK(profiles.str().rfind("timestamp,cluster_1,cluster_2,cluster_3,cluster_4\n", 0) == 0);
  write_membership_csv(membership, report);
  CHECK(membership.str().find("2,1,20,2.5,moderate\n") != std::string::npos);
}

TEST_CASE("percentages sum to 100 for uneven splits") {
  FeatureMatrix fm;
  fm.values = Matrix(2, 7, 1.0);
  fm.time_index = {0, kHalfHour};
  for (int j = 0; j < 7; ++j) fm.consumer_ids.push_back(std::to_string(j));
  const ClusterAssignment assignment(3, {0, 1, 1, 2, 2, 2, 0});
  const ReportBundle report = build_report({}, fm, assignment);
  double total = 0;
  for (const auto& row : report.membership) total += row.percent;
  CHECK(std::abs(total - 100.0) < 0.01);
}

TEST_CASE("exhaustive scan over cluster counts agrees with the sweep") {
  const auto data = planted(4, 20, 300, 0.1, 12);
  SweepConfig cfg = small_config(12);
  cfg.max_A = 10;
  cfg.patience = 10;
  const SweepResult swept = run_sweep(data.matrix, cfg);

  // Independent scan: many restarts per size on the same features, keeping
  // the lowest C among runs without empty or constant clusters.
  int best_A = -1;
  double best_C = std::numeric_limits<double>::infinity();
  for (int A = 2; A <= 10; ++A) {
    for (std::uint64_t r = 0; r < 12; ++r) {
      SomConfig som = cfg.som;
      som.cluster_count = A;
      som.seed = 1000 * static_cast<std::uint64_t>(A) + r;
      const ClusterRun run = cluster_consumers(data.matrix, swept.feature_subset.indices, som);
      if (!run.score.degenerate && run.score.C < best_C) {
        best_C = run.score.C;
        best_A = A;
      }
    }
  }
  CHECK(best_A == 4);
  CHECK(swept.optimal_A == best_A);
}
