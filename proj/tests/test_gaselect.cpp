#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "entropyclust/error.hpp"
#include "entropyclust/gaselect.hpp"
#include "oracles.hpp"

using namespace entropyclust;

namespace {

PlantedData planted(int groups, int per_group, int points, double sigma, std::uint64_t seed) {
  PlantedSpec spec;
  spec.group_count = groups;
  spec.consumers_per_group = per_group;
  spec.time_points = points;
  spec.noise_sigma = sigma;
  spec.seed = seed;
  return generate_planted(spec);
}

std::vector<std::vector<double>> consumer_features(const FeatureMatrix& fm,
                                                   const std::vector<std::size_t>& rows) {
  std::vector<std::vector<double>> out(fm.consumers());
  for (std::size_t j = 0; j < fm.consumers(); ++j)
    for (std::size_t r : rows) out[j].push_back(fm.values(r, j));
  return out;
}

bool well_formed(const Individual& ind, std::size_t M) {
  if (!std::is_sorted(ind.begin(), ind.end())) return false;
  if (std::adjacent_find(ind.begin(), ind.end()) != ind.end()) return false;
  return std::all_of(ind.begin(), ind.end(), [&](std::size_t g) { return g < M; });
}

PseudoLabels true_labels(const PlantedData& data, int groups) {
  PseudoLabels out;
  out.labels = data.labels;
  out.classes = groups;
  return out;
}

}  // namespace

TEST_CASE("zero-noise pseudo-labels match the planted groups") {
  const auto data = planted(4, 10, 200, 0.0, 5);
  int perfect = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const PseudoLabels labels = make_pseudo_labels(data.matrix, 4, seed);
    if (oracle::adjusted_rand_index(labels.labels, data.labels) == 1.0) ++perfect;
  }
  CHECK(perfect >= 3);
}

TEST_CASE("pseudo-labels are compacted and deterministic") {
  const auto data = planted(3, 4, 60, 0.2, 1);
  const auto N = static_cast<int>(data.matrix.consumers());
  const PseudoLabels all = make_pseudo_labels(data.matrix, N, 3);
  CHECK(all.classes + all.empty_clusters == N);
  std::set<int> seen(all.labels.begin(), all.labels.end());
  CHECK(static_cast<int>(seen.size()) == all.classes);
  CHECK(*seen.rbegin() == all.classes - 1);

  CHECK(make_pseudo_labels(data.matrix, 3, 8).labels == make_pseudo_labels(data.matrix, 3, 8).labels);
  CHECK_THROWS_AS(make_pseudo_labels(data.matrix, 1, 0), Error);
  CHECK_THROWS_AS(make_pseudo_labels(data.matrix, N + 1, 0), Error);
}

TEST_CASE("init_population shapes") {
  GaConfig cfg;
  cfg.population_size = 2;
  cfg.chromosome_length = 3;
  Rng rng(1);
  const Population small = init_population(cfg, 10, rng);
  REQUIRE(small.individuals.size() == 2);
  for (const auto& ind : small.individuals) {
    CHECK(ind.size() == 3);
    CHECK(well_formed(ind, 10));
  }

  cfg.chromosome_length = 10;
  for (const auto& ind : init_population(cfg, 10, rng).individuals)
    CHECK(ind == Individual{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});

  cfg = {};
  const Population full = init_population(cfg, 17498, rng);
  CHECK(full.individuals.size() == 200);
  for (const auto& ind : full.individuals) {
    CHECK(ind.size() == 12);
    CHECK(well_formed(ind, 17498));
  }
}

TEST_CASE("fitness matches the brute-force nearest centroid oracle") {
  const auto data = planted(3, 6, 80, 0.8, 4);
  const PseudoLabels labels = true_labels(data, 3);
  Rng rng(2);
  GaConfig cfg;
  cfg.population_size = 30;
  cfg.chromosome_length = 4;
  for (const auto& ind : init_population(cfg, 80, rng).individuals) {
    const double expected =
        oracle::loo_nearest_centroid_accuracy(consumer_features(data.matrix, ind), labels.labels, 3);
    CHECK(fitness(ind, data.matrix, labels) == doctest::Approx(expected).epsilon(1e-15));
  }
}

TEST_CASE("zero-noise planted data: any separating step gives fitness 1") {
  const auto data = planted(4, 5, 100, 0.0, 8);
  const PseudoLabels labels = true_labels(data, 4);
  int separating = 0;
  for (std::size_t t = 0; t < 100; ++t) {
    std::set<double> values;
    for (std::size_t j = 0; j < data.matrix.consumers(); ++j) values.insert(data.matrix.values(t, j));
    if (values.size() != 4) continue;
    ++separating;
    const std::vector<std::size_t> one{t};
    CHECK(oracle::loo_nearest_centroid_accuracy(consumer_features(data.matrix, one), labels.labels, 4) == 1.0);
    CHECK(fitness(one, data.matrix, labels) == 1.0);
  }
  CHECK(separating > 0);
}

TEST_CASE("random labels give chance-level fitness") {
  const auto data = planted(4, 25, 60, 0.1, 3);
  Rng rng(17);
  double total = 0;
  const std::vector<std::size_t> rows{3, 17, 29, 44, 51};
  for (int trial = 0; trial < 100; ++trial) {
    PseudoLabels labels;
    labels.classes = 4;
    for (std::size_t j = 0; j < data.matrix.consumers(); ++j)
      labels.labels.push_back(static_cast<int>(uniform_index(rng, 4)));
    total += fitness(rows, data.matrix, labels);
  }
  CHECK(total / 100 == doctest::Approx(0.25).epsilon(0.3));
}

TEST_CASE("identical consumers tie toward the lowest label") {
  FeatureMatrix fm;
  fm.values = Matrix(3, 6, 1.5);
  PseudoLabels labels;
  labels.labels = {1, 0, 2, 1, 0, 1};
  labels.classes = 3;
  // Every distance is zero, so each consumer is predicted as class 0.
  CHECK(fitness(std::vector<std::size_t>{0, 2}, fm, labels) == doctest::Approx(2.0 / 6.0));
}

TEST_CASE("rank_by_fitness gives the fittest rank K and breaks ties by index") {
  CHECK(rank_by_fitness(std::vector<double>{0.2, 0.9, 0.5}) == std::vector<int>{1, 3, 2});
  CHECK(rank_by_fitness(std::vector<double>{0.5, 0.5, 0.1}) == std::vector<int>{3, 2, 1});
}

TEST_CASE("rank_select with two individuals favours the better one 2:1") {
  Population pop;
  pop.individuals = {{0}, {1}};
  pop.fitness = {0.9, 0.1};
  pop.rank = rank_by_fitness(pop.fitness);
  Rng rng(123);
  int better = 0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i)
    if (rank_select(pop, rng) == 0) ++better;
  CHECK(std::abs(better / static_cast<double>(draws) - 2.0 / 3.0) < 0.01);
}

TEST_CASE("rank_select is uniform over equal fitness and trivial for one individual") {
  Population pop;
  pop.fitness = {0.4, 0.4, 0.4, 0.4};
  pop.individuals.assign(4, Individual{0});
  pop.rank = rank_by_fitness(pop.fitness);
  Rng rng(5);
  std::vector<int> counts(4, 0);
  for (int i = 0; i < 40000; ++i) ++counts[rank_select(pop, rng)];
  for (int c : counts) CHECK(std::abs(c / 40000.0 - 0.25) < 0.01);

  Population one;
  one.individuals = {{3}};
  one.fitness = {0.7};
  one.rank = {1};
  for (int i = 0; i < 10; ++i) CHECK(rank_select(one, rng) == 0);
}

TEST_CASE("crossover contracts") {
  Rng rng(9);
  const Individual p{2, 5, 7};
  CHECK(crossover(p, p, rng) == p);

  for (int i = 0; i < 200; ++i) {
    const Individual child = crossover(Individual{1, 4}, Individual{6, 9}, rng);
    REQUIRE(child.size() == 2);
    CHECK((child[0] == 1 || child[0] == 4));
    CHECK((child[1] == 6 || child[1] == 9));
  }

  const std::set<std::size_t> pool{1, 2, 3, 4, 5};
  std::set<Individual> seen;
  for (int i = 0; i < 500; ++i) {
    const Individual child = crossover(Individual{1, 2, 3}, Individual{3, 4, 5}, rng);
    CHECK(child.size() == 3);
    CHECK(well_formed(child, 10));
    for (std::size_t g : child) CHECK(pool.count(g) == 1);
    seen.insert(child);
  }
  CHECK(seen.size() > 5);
}

TEST_CASE("mutate contracts") {
  Rng rng(4);
  const Individual ind{1, 4, 8};
  CHECK(mutate(ind, 20, 0.0, rng) == ind);
  for (int i = 0; i < 200; ++i) {
    const Individual m = mutate(ind, 20, 1.0, rng);
    CHECK(well_formed(m, 20));
    std::vector<std::size_t> kept;
    std::set_intersection(ind.begin(), ind.end(), m.begin(), m.end(), std::back_inserter(kept));
    CHECK(kept.size() == 2);
  }
  const Individual full{0, 1, 2, 3};
  CHECK(mutate(full, 4, 1.0, rng) == full);
}

TEST_CASE("run_ga with zero generations returns the best initial individual") {
  const auto data = planted(3, 5, 50, 0.5, 2);
  const PseudoLabels labels = true_labels(data, 3);
  GaConfig cfg;
  cfg.population_size = 10;
  cfg.generations = 0;
  cfg.chromosome_length = 3;
  cfg.seed = 77;
  const GaResult result = run_ga(data.matrix, cfg, labels);
  REQUIRE(result.history.size() == 1);

  Rng rng(77);
  double best = -1;
  for (const auto& ind : init_population(cfg, 50, rng).individuals)
    best = std::max(best, fitness(ind, data.matrix, labels));
  CHECK(result.best.fitness == best);
  CHECK(result.history[0].best_fitness == best);
  CHECK(result.best.timestamps.size() == 3);
  CHECK(result.best.timestamps[0] == data.matrix.time_index[result.best.indices[0]]);
}

TEST_CASE("run_ga: monotone best, determinism and perfect fitness on clean data") {
  const auto data = planted(4, 8, 120, 0.0, 6);
  const PseudoLabels labels = true_labels(data, 4);
  GaConfig cfg;
  cfg.population_size = 20;
  cfg.generations = 15;
  cfg.chromosome_length = 4;
  cfg.seed = 3;
  const GaResult a = run_ga(data.matrix, cfg, labels);
  for (std::size_t g = 1; g < a.history.size(); ++g)
    CHECK(a.history[g].best_fitness >= a.history[g - 1].best_fitness);
  CHECK(a.best.fitness == 1.0);
  CHECK(oracle::loo_nearest_centroid_accuracy(consumer_features(data.matrix, a.best.indices), labels.labels, 4) ==
        1.0);
  CHECK(well_formed(a.best.indices, 120));

  const GaResult b = run_ga(data.matrix, cfg, labels);
  CHECK(a.best.indices == b.best.indices);
  CHECK(a.history.size() == b.history.size());
  for (std::size_t g = 0; g < a.history.size(); ++g) CHECK(a.history[g].mean_fitness == b.history[g].mean_fitness);
}

TEST_CASE("GaConfig validation") {
  GaConfig cfg;
  CHECK_NOTHROW(validate(cfg, 100));
  CHECK_THROWS_AS(validate(cfg, 11), Error);
  cfg.population_size = 1;
  CHECK_THROWS_AS(validate(cfg, 100), Error);
  cfg = {};
  cfg.crossover_prob = 1.5;
  CHECK_THROWS_AS(validate(cfg, 100), Error);
  cfg = {};
  cfg.elitism_count = 201;
  CHECK_THROWS_AS(validate(cfg, 100), Error);
}

TEST_CASE("subset JSON round trip and history CSV") {
  FeatureSubset s;
  s.indices = {3, 10, 40};
  s.timestamps = {1425859200, 1425859200 + 7 * kHalfHour, 1425859200 + 37 * kHalfHour};
  s.fitness = 0.8125;
  const FeatureSubset back = parse_subset_json(subset_json(s));
  CHECK(back.indices == s.indices);
  CHECK(back.timestamps == s.timestamps);
  CHECK(back.fitness == s.fitness);
  CHECK_THROWS_AS(parse_subset_json("{\"indices\": [1, 1]}"), Error);
  CHECK_THROWS_AS(parse_subset_json("not json"), Error);

  std::ostringstream out;
  write_history_csv(out, {{0, 0.5, 0.25}, {1, 0.75, 0.5}});
  CHECK(out.str() == "generation,best_fitness,mean_fitness\n0,0.5,0.25\n1,0.75,0.5\n");
}
