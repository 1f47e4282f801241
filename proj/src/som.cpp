#include "entropyclust/som.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "entropyclust/error.hpp"

namespace entropyclust {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = a[k] - b[k];
    d += diff * diff;
  }
  return d;
}

}  // namespace

void validate(const SomConfig& config) {
  if (config.cluster_count < 1) throw Error(ErrorKind::InvalidConfig, "cluster_count must be >= 1");
  if (config.epochs < 1) throw Error(ErrorKind::InvalidConfig, "epochs must be >= 1");
  if (!(config.initial_rate > 0.0 && config.initial_rate <= 1.0))
    throw Error(ErrorKind::InvalidConfig, "initial_rate must be in (0, 1]");
  if (!(config.final_rate > 0.0 && config.final_rate <= config.initial_rate))
    throw Error(ErrorKind::InvalidConfig, "final_rate must be in (0, initial_rate]");
  const double r0 = config.resolved_initial_radius();
  if (!(config.final_radius > 0.0 && config.final_radius <= r0))
    throw Error(ErrorKind::InvalidConfig, "final_radius must be in (0, initial_radius]");
}

SomModel init_som(const SomConfig& config, const Matrix& samples, Rng& rng) {
  if (samples.rows() == 0 || samples.cols() == 0)
    throw Error(ErrorKind::InvalidInput, "SOM needs at least one sample and one feature");
  const std::size_t V = samples.cols();
  std::vector<double> lo(samples.row(0).begin(), samples.row(0).end());
  std::vector<double> hi = lo;
  for (std::size_t j = 1; j < samples.rows(); ++j)
    for (std::size_t k = 0; k < V; ++k) {
      lo[k] = std::min(lo[k], samples(j, k));
      hi[k] = std::max(hi[k], samples(j, k));
    }

  SomModel model{Matrix(static_cast<std::size_t>(config.cluster_count), V)};
  for (std::size_t i = 0; i < model.neurons(); ++i)
    for (std::size_t k = 0; k < V; ++k) {
      const double u = uniform01(rng);
      model.weights(i, k) = lo[k] == hi[k] ? lo[k] : lo[k] + u * (hi[k] - lo[k]);
    }
  return model;
}

std::size_t bmu(const SomModel& model, std::span<const double> feature) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < model.neurons(); ++i) {
    const double d = squared_distance(model.weights.row(i), feature);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

std::size_t update_step(SomModel& model, std::span<const double> feature, double rate,
                        double radius) {
  const std::size_t winner = bmu(model, feature);
  const auto A = static_cast<std::ptrdiff_t>(model.neurons());
  const auto w = static_cast<std::ptrdiff_t>(winner);
  const auto reach = radius > 0.0 ? static_cast<std::ptrdiff_t>(std::floor(radius)) : 0;
  for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(0, w - reach);
       i <= std::min(A - 1, w + reach); ++i) {
    const double d = static_cast<double>(i - w);
    const double h = d == 0.0 ? 1.0 : std::exp(-d * d / (2.0 * radius * radius));
    const double step = rate * h;
    auto row = model.weights.row(static_cast<std::size_t>(i));
    for (std::size_t k = 0; k < row.size(); ++k) row[k] += step * (feature[k] - row[k]);
  }
  return winner;
}

double decay(double initial, double final, std::size_t step, std::size_t total) {
  if (total <= 1 || initial == final) return initial;
  const double frac = static_cast<double>(step) / static_cast<double>(total - 1);
  return initial * std::pow(final / initial, frac);
}

SomModel train(SomModel model, const Matrix& samples, const SomConfig& config, Rng& rng) {
  validate(config);
  if (samples.rows() == 0) throw Error(ErrorKind::InvalidInput, "no samples to train on");
  if (samples.cols() != model.dims())
    throw Error(ErrorKind::InvalidInput, "sample width differs from model width");

  const std::size_t B = samples.rows();
  const std::size_t total = B * static_cast<std::size_t>(config.epochs);
  const double r0 = config.resolved_initial_radius();
  std::vector<std::size_t> order(B);
  std::size_t step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = B; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    for (std::size_t j : order) {
      const double rate = decay(config.initial_rate, config.final_rate, step, total);
      const double radius = decay(r0, config.final_radius, step, total);
      update_step(model, samples.row(j), rate, radius);
      ++step;
    }
  }
  return model;
}

SomModel fit_som(const Matrix& samples, const SomConfig& config) {
  validate(config);
  Rng rng(config.seed);
  SomModel model = init_som(config, samples, rng);
  return train(std::move(model), samples, config, rng);
}

double quantization_error(const SomModel& model, const Matrix& samples) {
  if (samples.rows() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t j = 0; j < samples.rows(); ++j) {
    const auto x = samples.row(j);
    total += std::sqrt(squared_distance(model.weights.row(bmu(model, x)), x));
  }
  return total / static_cast<double>(samples.rows());
}

ClusterAssignment::ClusterAssignment(std::size_t cluster_count, std::vector<std::size_t> labels)
    : cluster_count_(cluster_count), labels_(std::move(labels)) {
  for (std::size_t l : labels_)
    if (l >= cluster_count_) throw Error(ErrorKind::InvalidInput, "label out of range");
}

Matrix ClusterAssignment::membership() const {
  Matrix m(cluster_count_, labels_.size());
  for (std::size_t j = 0; j < labels_.size(); ++j) m(labels_[j], j) = 1.0;
  return m;
}

std::vector<std::size_t> ClusterAssignment::sizes() const {
  std::vector<std::size_t> s(cluster_count_, 0);
  for (std::size_t l : labels_) ++s[l];
  return s;
}

ClusterAssignment assign(const SomModel& model, const Matrix& samples) {
  std::vector<std::size_t> labels(samples.rows());
  for (std::size_t j = 0; j < samples.rows(); ++j) labels[j] = bmu(model, samples.row(j));
  return ClusterAssignment(model.neurons(), std::move(labels));
}

ClusterProfiles cluster_profiles(const ClusterAssignment& assignment, const FeatureMatrix& full) {
  if (assignment.consumers() != full.consumers())
    throw Error(ErrorKind::InvalidInput, "assignment size differs from consumer count");
  const std::size_t A = assignment.cluster_count();
  const std::size_t M = full.time_points();
  ClusterProfiles out{Matrix(A, M), assignment.sizes()};
  const auto& labels = assignment.labels();
  for (std::size_t t = 0; t < M; ++t) {
    const auto row = full.values.row(t);
    for (std::size_t j = 0; j < row.size(); ++j) out.profiles(labels[j], t) += row[j];
  }
  for (std::size_t i = 0; i < A; ++i) {
    const double n = static_cast<double>(out.sizes[i]);
    for (double& v : out.profiles.row(i))
      v = out.sizes[i] == 0 ? std::numeric_limits<double>::quiet_NaN() : v / n;
  }
  return out;
}

Matrix select_samples(const FeatureMatrix& fm, std::span<const std::size_t> rows) {
  Matrix s(fm.consumers(), rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] >= fm.time_points()) throw Error(ErrorKind::InvalidInput, "row index out of range");
    const auto src = fm.values.row(rows[k]);
    for (std::size_t j = 0; j < src.size(); ++j) s(j, k) = src[j];
  }
  return s;
}

Matrix all_samples(const FeatureMatrix& fm) { return fm.values.transposed(); }

Matrix standardize_columns(const Matrix& samples) {
  Matrix out = samples;
  const auto n = static_cast<double>(samples.rows());
  for (std::size_t k = 0; k < samples.cols(); ++k) {
    double mean = 0.0;
    for (std::size_t j = 0; j < samples.rows(); ++j) mean += samples(j, k);
    mean /= n;
    double var = 0.0;
    for (std::size_t j = 0; j < samples.rows(); ++j) var += (samples(j, k) - mean) * (samples(j, k) - mean);
    const double sd = std::sqrt(var / n);
    for (std::size_t j = 0; j < samples.rows(); ++j)
      out(j, k) = sd > 0.0 ? (samples(j, k) - mean) / sd : 0.0;
  }
  return out;
}

std::string model_json(const SomModel& model) {
  nlohmann::json doc;
  doc["A"] = model.neurons();
  doc["V"] = model.dims();
  nlohmann::json weights = nlohmann::json::array();
  for (std::size_t i = 0; i < model.neurons(); ++i) {
    const auto row = model.weights.row(i);
    weights.push_back(std::vector<double>(row.begin(), row.end()));
  }
  doc["weights"] = std::move(weights);
  return doc.dump(2) + "\n";
}

void write_assignment_csv(std::ostream& out, const FeatureMatrix& fm,
                          const ClusterAssignment& assignment) {
  out << "consumer_id,cluster\n";
  for (std::size_t j = 0; j < assignment.consumers(); ++j)
    out << fm.consumer_ids.at(j) << ',' << assignment.labels()[j] + 1 << '\n';
}

}  // namespace entropyclust
