#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ingest.hpp"
#include "matrix.hpp"
#include "rng.hpp"

namespace entropyclust {

struct SomConfig {
  int cluster_count = 4;
  int epochs = 200;
  double initial_rate = 0.5;
  double final_rate = 0.01;
  std::optional<double> initial_radius;  // defaults to cluster_count / 2
  double final_radius = 0.5;
  std::uint64_t seed = 0;
  bool standardize = false;  // z-score each feature before training

  double resolved_initial_radius() const {
    return initial_radius ? *initial_radius
                          : std::max(cluster_count / 2.0, final_radius);
  }
};

void validate(const SomConfig& config);

// One neuron per row, neurons arranged on a 1-D chain.
struct SomModel {
  Matrix weights;

  std::size_t neurons() const noexcept { return weights.rows(); }
  std::size_t dims() const noexcept { return weights.cols(); }
};

// Weights drawn uniformly inside the per-dimension [min, max] of the samples.
SomModel init_som(const SomConfig& config, const Matrix& samples, Rng& rng);

// Euclidean best matching unit; ties go to the lowest index.
std::size_t bmu(const SomModel& model, std::span<const double> feature);

// One competitive-learning step: W_i += rate * h(d) * (F - W_i) for every neuron
// with chain distance d <= radius from the BMU, h(d) = exp(-d^2 / (2 radius^2)).
// Returns the BMU index.
std::size_t update_step(SomModel& model, std::span<const double> feature, double rate,
                        double radius);

// Exponential interpolation from `initial` to `final` as step runs over [0, total).
double decay(double initial, double final, std::size_t step, std::size_t total);

SomModel train(SomModel model, const Matrix& samples, const SomConfig& config, Rng& rng);

// init_som + train using a generator seeded from config.seed.
SomModel fit_som(const Matrix& samples, const SomConfig& config);

double quantization_error(const SomModel& model, const Matrix& samples);

class ClusterAssignment {
 public:
  ClusterAssignment(std::size_t cluster_count, std::vector<std::size_t> labels);

  std::size_t cluster_count() const noexcept { return cluster_count_; }
  std::size_t consumers() const noexcept { return labels_.size(); }
  const std::vector<std::size_t>& labels() const noexcept { return labels_; }
  bool member(std::size_t cluster, std::size_t consumer) const {
    return labels_[consumer] == cluster;
  }
  // Binary A-by-B matrix; every column sums to one.
  Matrix membership() const;
  std::vector<std::size_t> sizes() const;

 private:
  std::size_t cluster_count_;
  std::vector<std::size_t> labels_;
};

ClusterAssignment assign(const SomModel& model, const Matrix& samples);

struct ClusterProfiles {
  Matrix profiles;  // A by M; rows of empty clusters are NaN
  std::vector<std::size_t> sizes;

  bool empty_cluster(std::size_t i) const { return sizes[i] == 0; }
};

// Averages every consumer column over all time rows of the matrix.
ClusterProfiles cluster_profiles(const ClusterAssignment& assignment, const FeatureMatrix& full);

// Consumer-major sample matrix (B by V) built from the chosen time rows.
Matrix select_samples(const FeatureMatrix& fm, std::span<const std::size_t> rows);
Matrix all_samples(const FeatureMatrix& fm);

// Column-wise z-score; constant columns become zero.
Matrix standardize_columns(const Matrix& samples);

// Model dump `{"A":, "V":, "weights": [[...]]}`.
std::string model_json(const SomModel& model);
void write_assignment_csv(std::ostream& out, const FeatureMatrix& fm,
                          const ClusterAssignment& assignment);

}  // namespace entropyclust
