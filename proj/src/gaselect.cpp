#include "entropyclust/gaselect.hpp"

#include <algorithm>
#include <iterator>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>

#include <json.hpp>

#include "entropyclust/error.hpp"
#include "entropyclust/log.hpp"
#include "entropyclust/parallel.hpp"

namespace entropyclust {

namespace {

// Uniform k-subset of [0, n), sorted (Floyd's algorithm).
Individual sample_subset(std::size_t n, std::size_t k, Rng& rng) {
  std::set<std::size_t> picked;
  for (std::size_t j = n - k; j < n; ++j) {
    const std::size_t t = uniform_index(rng, j + 1);
    if (!picked.insert(t).second) picked.insert(j);
  }
  return Individual(picked.begin(), picked.end());
}

bool intersects(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) return true;
    if (a[i] < b[j]) ++i;
    else ++j;
  }
  return false;
}

// Selection weights per individual: each tie group of fitness values shares
// the mean of the integer ranks it spans.
class RankSelector {
 public:
  explicit RankSelector(std::span<const double> fitness) : weights_(fitness.size()) {
    const std::size_t K = fitness.size();
    std::vector<std::size_t> order(K);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return fitness[a] > fitness[b]; });
    std::size_t start = 0;
    while (start < K) {
      std::size_t end = start + 1;
      while (end < K && fitness[order[end]] == fitness[order[start]]) ++end;
      // Positions start..end-1 hold ranks K-start .. K-end+1.
      const double mean_rank = static_cast<double>(2 * K - start - end + 1) / 2.0;
      for (std::size_t p = start; p < end; ++p) weights_[order[p]] = mean_rank;
      start = end;
    }
    total_ = static_cast<double>(K) * static_cast<double>(K + 1) / 2.0;
  }

  std::size_t pick(Rng& rng) const {
    const double u = uniform01(rng) * total_;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      acc += weights_[i];
      if (u < acc) return i;
    }
    return weights_.size() - 1;
  }

 private:
  std::vector<double> weights_;
  double total_ = 0.0;
};

}  // namespace

void validate(const GaConfig& config, std::size_t time_points) {
  if (config.population_size < 2) throw Error(ErrorKind::InvalidConfig, "population_size must be >= 2");
  if (config.generations < 0) throw Error(ErrorKind::InvalidConfig, "generations must be >= 0");
  if (!(config.crossover_prob >= 0.0 && config.crossover_prob <= 1.0))
    throw Error(ErrorKind::InvalidConfig, "crossover_prob must be in [0, 1]");
  if (!(config.mutation_prob >= 0.0 && config.mutation_prob <= 1.0))
    throw Error(ErrorKind::InvalidConfig, "mutation_prob must be in [0, 1]");
  if (config.chromosome_length < 1) throw Error(ErrorKind::InvalidConfig, "chromosome_length must be >= 1");
  if (static_cast<std::size_t>(config.chromosome_length) > time_points)
    throw Error(ErrorKind::InvalidConfig, "chromosome_length " + std::to_string(config.chromosome_length) +
                                              " exceeds " + std::to_string(time_points) + " time points");
  if (config.elitism_count < 0 || config.elitism_count > config.population_size)
    throw Error(ErrorKind::InvalidConfig, "elitism_count must be in [0, population_size]");
}

PseudoLabels make_pseudo_labels(const FeatureMatrix& fm, int k_ref, std::uint64_t seed,
                                const SomConfig& som_template) {
  const auto N = static_cast<int>(fm.consumers());
  if (k_ref < 2 || k_ref > N)
    throw Error(ErrorKind::InvalidConfig, "k_ref must be in [2, " + std::to_string(N) + "]");

  SomConfig cfg = som_template;
  cfg.cluster_count = k_ref;
  cfg.seed = seed;
  cfg.initial_radius.reset();
  Matrix samples = all_samples(fm);
  if (cfg.standardize) samples = standardize_columns(samples);
  const ClusterAssignment assignment = assign(fit_som(samples, cfg), samples);

  // Compact neuron indices to 0..classes-1 in neuron order.
  const auto sizes = assignment.sizes();
  std::vector<int> remap(sizes.size(), -1);
  PseudoLabels out;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] == 0) ++out.empty_clusters;
    else remap[i] = out.classes++;
  }
  if (out.classes < 2)
    throw Error(ErrorKind::DegenerateClustering,
                "reference SOM produced " + std::to_string(out.classes) + " non-empty cluster(s)");
  out.labels.reserve(assignment.consumers());
  for (std::size_t l : assignment.labels()) out.labels.push_back(remap[l]);
  return out;
}

Population init_population(const GaConfig& config, std::size_t time_points, Rng& rng) {
  validate(config, time_points);
  const auto K = static_cast<std::size_t>(config.population_size);
  const auto V = static_cast<std::size_t>(config.chromosome_length);
  Population pop;
  pop.individuals.reserve(K);
  for (std::size_t i = 0; i < K; ++i) pop.individuals.push_back(sample_subset(time_points, V, rng));
  pop.fitness.assign(K, std::numeric_limits<double>::quiet_NaN());
  pop.rank.assign(K, 0);
  return pop;
}

double fitness(std::span<const std::size_t> individual, const FeatureMatrix& fm,
               const PseudoLabels& labels) {
  const std::size_t N = fm.consumers();
  const std::size_t V = individual.size();
  const auto k = static_cast<std::size_t>(labels.classes);
  if (labels.labels.size() != N) throw Error(ErrorKind::InvalidInput, "label count differs from consumer count");
  if (N == 0 || V == 0) return 0.0;

  // x(j, v): consumer j's value at the v-th selected row.
  Matrix x = select_samples(fm, individual);
  Matrix sums(k, V);
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t j = 0; j < N; ++j) {
    const auto c = static_cast<std::size_t>(labels.labels[j]);
    ++counts[c];
    for (std::size_t v = 0; v < V; ++v) sums(c, v) += x(j, v);
  }
  Matrix centroids(k, V);
  for (std::size_t c = 0; c < k; ++c)
    if (counts[c] > 0)
      for (std::size_t v = 0; v < V; ++v) centroids(c, v) = sums(c, v) / static_cast<double>(counts[c]);

  std::size_t correct = 0;
  std::vector<double> own(V);
  for (std::size_t j = 0; j < N; ++j) {
    const auto y = static_cast<std::size_t>(labels.labels[j]);
    std::size_t predicted = k;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      std::span<const double> centre;
      if (c == y) {
        // Leave consumer j out of its own class centroid.
        if (counts[c] < 2) continue;
        const double n = static_cast<double>(counts[c] - 1);
        for (std::size_t v = 0; v < V; ++v) own[v] = (sums(c, v) - x(j, v)) / n;
        centre = own;
      } else {
        if (counts[c] == 0) continue;
        centre = centroids.row(c);
      }
      double d = 0.0;
      for (std::size_t v = 0; v < V; ++v) {
        const double diff = x(j, v) - centre[v];
        d += diff * diff;
      }
      if (d < best) {
        best = d;
        predicted = c;
      }
    }
    if (predicted == y) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(N);
}

std::vector<int> rank_by_fitness(std::span<const double> fitness) {
  const std::size_t K = fitness.size();
  std::vector<std::size_t> order(K);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return fitness[a] > fitness[b]; });
  std::vector<int> rank(K);
  for (std::size_t p = 0; p < K; ++p) rank[order[p]] = static_cast<int>(K - p);
  return rank;
}

std::size_t rank_select(const Population& population, Rng& rng) {
  if (population.fitness.empty()) throw Error(ErrorKind::InvalidInput, "empty population");
  return RankSelector(population.fitness).pick(rng);
}

Individual crossover(std::span<const std::size_t> parent_a, std::span<const std::size_t> parent_b,
                     Rng& rng) {
  const std::size_t V = parent_a.size();
  std::vector<std::size_t> pool;
  std::set_union(parent_a.begin(), parent_a.end(), parent_b.begin(), parent_b.end(),
                 std::back_inserter(pool));
  if (pool.size() == V) return Individual(pool.begin(), pool.end());

  const bool can_mix = V >= 2 || intersects(parent_a, parent_b);
  Individual child(V);
  while (true) {
    for (std::size_t i = 0; i < V; ++i)
      std::swap(pool[i], pool[i + uniform_index(rng, pool.size() - i)]);
    std::copy_n(pool.begin(), V, child.begin());
    std::sort(child.begin(), child.end());
    if (!can_mix || (intersects(child, parent_a) && intersects(child, parent_b))) return child;
  }
}

Individual mutate(Individual individual, std::size_t time_points, double mutation_prob, Rng& rng) {
  if (!(uniform01(rng) < mutation_prob)) return individual;
  const std::size_t V = individual.size();
  if (V == 0 || V >= time_points) return individual;

  const std::size_t position = uniform_index(rng, V);
  // r-th index of [0, M) that is not already a gene.
  std::size_t candidate = uniform_index(rng, time_points - V);
  for (std::size_t g : individual) {
    if (g <= candidate) ++candidate;
    else break;
  }
  individual[position] = candidate;
  std::sort(individual.begin(), individual.end());
  return individual;
}

GaResult run_ga(const FeatureMatrix& fm, const GaConfig& config, const PseudoLabels& labels) {
  const std::size_t M = fm.time_points();
  validate(config, M);
  if (labels.labels.size() != fm.consumers())
    throw Error(ErrorKind::InvalidInput, "label count differs from consumer count");

  Rng rng(config.seed);
  Population pop = init_population(config, M, rng);
  const auto K = static_cast<std::size_t>(config.population_size);
  const auto elites = static_cast<std::size_t>(config.elitism_count);

  auto evaluate = [&](Population& p, std::size_t from) {
    parallel_for(K - from, [&](std::size_t i) {
      p.fitness[from + i] = fitness(p.individuals[from + i], fm, labels);
    });
    p.rank = rank_by_fitness(p.fitness);
  };

  GaResult result;
  auto record = [&](int generation, const Population& p) {
    const auto best_it = std::max_element(p.fitness.begin(), p.fitness.end());
    const auto best = static_cast<std::size_t>(best_it - p.fitness.begin());
    const double mean = std::accumulate(p.fitness.begin(), p.fitness.end(), 0.0) / static_cast<double>(K);
    result.history.push_back({generation, *best_it, mean});
    if (generation == 0 || *best_it > result.best.fitness) {
      result.best.indices = p.individuals[best];
      result.best.fitness = *best_it;
    }
    log::debug("ga generation " + std::to_string(generation) + " best " + std::to_string(*best_it));
  };

  evaluate(pop, 0);
  record(0, pop);

  for (int gen = 1; gen <= config.generations; ++gen) {
    const RankSelector selector(pop.fitness);
    Population next;
    next.individuals.reserve(K);
    next.fitness.reserve(K);

    std::vector<std::size_t> order(K);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pop.rank[a] > pop.rank[b]; });
    for (std::size_t e = 0; e < elites; ++e) {
      next.individuals.push_back(pop.individuals[order[e]]);
      next.fitness.push_back(pop.fitness[order[e]]);
    }

    while (next.individuals.size() < K) {
      const std::size_t a = selector.pick(rng);
      const std::size_t b = selector.pick(rng);
      Individual child;
      if (uniform01(rng) < config.crossover_prob) {
        child = crossover(pop.individuals[a], pop.individuals[b], rng);
      } else {
        const bool a_fitter = pop.fitness[a] > pop.fitness[b] || (pop.fitness[a] == pop.fitness[b] && a <= b);
        child = pop.individuals[a_fitter ? a : b];
      }
      next.individuals.push_back(mutate(std::move(child), M, config.mutation_prob, rng));
      next.fitness.push_back(0.0);
    }
    pop = std::move(next);
    evaluate(pop, elites);
    record(gen, pop);
  }

  result.best.timestamps.reserve(result.best.indices.size());
  for (std::size_t i : result.best.indices) result.best.timestamps.push_back(fm.time_index[i]);
  return result;
}

std::string subset_json(const FeatureSubset& subset) {
  nlohmann::json doc;
  doc["indices"] = subset.indices;
  std::vector<std::string> ts;
  for (EpochSeconds t : subset.timestamps) ts.push_back(format_timestamp(t));
  doc["timestamps"] = ts;
  doc["fitness"] = subset.fitness;
  return doc.dump(2) + "\n";
}

FeatureSubset parse_subset_json(const std::string& text) {
  FeatureSubset out;
  try {
    const auto doc = nlohmann::json::parse(text);
    out.indices = doc.at("indices").get<std::vector<std::size_t>>();
    for (const auto& t : doc.value("timestamps", nlohmann::json::array()))
      out.timestamps.push_back(parse_timestamp(t.get<std::string>()));
    out.fitness = doc.value("fitness", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidInput, std::string("feature subset JSON: ") + e.what());
  }
  std::sort(out.indices.begin(), out.indices.end());
  if (std::adjacent_find(out.indices.begin(), out.indices.end()) != out.indices.end())
    throw Error(ErrorKind::InvalidInput, "feature subset has duplicate indices");
  return out;
}

void write_history_csv(std::ostream& out, const std::vector<GenerationStats>& history) {
  out << "generation,best_fitness,mean_fitness\n";
  for (const auto& h : history)
    out << h.generation << ',' << format_double(h.best_fitness) << ',' << format_double(h.mean_fitness) << '\n';
}

}  // namespace entropyclust
