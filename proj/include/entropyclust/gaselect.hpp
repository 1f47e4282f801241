#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ingest.hpp"
#include "rng.hpp"
#include "som.hpp"

namespace entropyclust {

struct GaConfig {
  int population_size = 200;
  int generations = 120;
  double crossover_prob = 0.3;
  double mutation_prob = 0.001;
  int chromosome_length = 12;
  std::uint64_t seed = 0;
  int elitism_count = 1;
};

// Throws Error(InvalidConfig). `time_points` is M of the matrix the GA will run on.
void validate(const GaConfig& config, std::size_t time_points);

// Sorted, distinct row indices.
using Individual = std::vector<std::size_t>;

struct Population {
  std::vector<Individual> individuals;
  std::vector<double> fitness;
  std::vector<int> rank;  // K for the fittest, 1 for the least fit
};

struct PseudoLabels {
  std::vector<int> labels;  // compacted so every class in [0, classes) is non-empty
  int classes = 0;
  int empty_clusters = 0;  // SOM neurons that attracted no consumer
};

// Labels from a full-feature SOM with k_ref neurons.
PseudoLabels make_pseudo_labels(const FeatureMatrix& fm, int k_ref, std::uint64_t seed,
                                const SomConfig& som_template = {});

Population init_population(const GaConfig& config, std::size_t time_points, Rng& rng);

// 1 - leave-one-out nearest-centroid error over consumers, using only the
// individual's rows as features. Distance ties resolve to the lowest label.
double fitness(std::span<const std::size_t> individual, const FeatureMatrix& fm,
               const PseudoLabels& labels);

// Integer ranks with ties broken toward the lower index.
std::vector<int> rank_by_fitness(std::span<const double> fitness);

// Linear rank selection; tied fitness values share their mean rank.
std::size_t rank_select(const Population& population, Rng& rng);

Individual crossover(std::span<const std::size_t> parent_a, std::span<const std::size_t> parent_b,
                     Rng& rng);

Individual mutate(Individual individual, std::size_t time_points, double mutation_prob, Rng& rng);

struct FeatureSubset {
  std::vector<std::size_t> indices;
  std::vector<EpochSeconds> timestamps;
  double fitness = 0.0;
};

struct GenerationStats {
  int generation = 0;
  double best_fitness = 0.0;
  double mean_fitness = 0.0;
};

struct GaResult {
  FeatureSubset best;
  std::vector<GenerationStats> history;  // generation 0 is the initial population
};

GaResult run_ga(const FeatureMatrix& fm, const GaConfig& config, const PseudoLabels& labels);

// `{"indices": [...], "timestamps": [...], "fitness": f}`
std::string subset_json(const FeatureSubset& subset);
FeatureSubset parse_subset_json(const std::string& text);
void write_history_csv(std::ostream& out, const std::vector<GenerationStats>& history);

}  // namespace entropyclust
