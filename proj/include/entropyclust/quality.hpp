#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "matrix.hpp"
#include "som.hpp"

namespace entropyclust {

inline constexpr double kDegenerateVariance = 1e-12;
inline constexpr double kEigenClamp = 1e-8;

struct CorrelationMatrix {
  Matrix L;
  std::vector<std::size_t> degenerate_clusters;
};

// Pearson correlation; NaN when either series has zero variance.
double pearson(std::span<const double> a, std::span<const double> b);

CorrelationMatrix correlation_matrix(const ClusterProfiles& profiles);

struct EigenDecomposition {
  std::vector<double> values;  // descending
  Matrix vectors;              // column k pairs with values[k]
  int sweeps = 0;
};

// Cyclic Jacobi rotations on a symmetric matrix. Throws NoConvergence after 100 sweeps.
EigenDecomposition jacobi_eigen(const Matrix& symmetric);

// Descending eigenvalues; values in [-1e-8, 0) are clamped to zero.
std::vector<double> eigs_symmetric(const Matrix& symmetric);

struct QualityScore {
  double C = 0.0;
  std::vector<double> eigenvalues;
  std::vector<double> normalized_eigenvalues;
  int A = 0;
  int effective_A = 0;  // clusters that are neither empty nor constant
  bool degenerate = false;
};

// C = 1 + sum(p_i ln p_i) / ln A with p_i = lambda_i / sum(lambda), 0 ln 0 = 0.
QualityScore cluster_entropy_metric(std::span<const double> eigenvalues, int A);

// correlation_matrix -> eigs_symmetric -> cluster_entropy_metric.
QualityScore score_profiles(const ClusterProfiles& profiles);

// Centered moving mean; even windows take one more sample behind than ahead,
// and the window is truncated at both ends of the series.
std::vector<double> moving_average(std::span<const double> series, std::size_t window);

// `{"A":, "C":, "eigenvalues": [...], "degenerate": bool}`
std::string quality_json(const QualityScore& score);

}  // namespace entropyclust
