#include "entropyclust/quality.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "entropyclust/error.hpp"

namespace entropyclust {

namespace {

constexpr int kMaxSweeps = 100;
constexpr double kOffDiagonalTolerance = 1e-10;

double variance(std::span<const double> x, double mean) {
  double s = 0.0;
  for (double v : x) s += (v - mean) * (v - mean);
  return s / static_cast<double>(x.size());
}

double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double off_diagonal_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

}  // namespace

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double ma = mean_of(a);
  const double mb = mean_of(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    const double da = a[t] - ma;
    const double db = b[t] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

CorrelationMatrix correlation_matrix(const ClusterProfiles& profiles) {
  const std::size_t A = profiles.profiles.rows();
  if (A < 2) throw Error(ErrorKind::TooFewClusters, "need at least 2 clusters, got " + std::to_string(A));
  if (profiles.profiles.cols() < 2)
    throw Error(ErrorKind::InvalidInput, "profiles need at least 2 time points");

  CorrelationMatrix out{Matrix(A, A), {}};
  std::vector<bool> degenerate(A, false);
  for (std::size_t i = 0; i < A; ++i) {
    const auto row = profiles.profiles.row(i);
    degenerate[i] = profiles.empty_cluster(i) || !(variance(row, mean_of(row)) >= kDegenerateVariance);
    if (degenerate[i]) out.degenerate_clusters.push_back(i);
  }
  for (std::size_t i = 0; i < A; ++i) {
    out.L(i, i) = 1.0;
    for (std::size_t j = i + 1; j < A; ++j) {
      const double r = degenerate[i] || degenerate[j]
                           ? 0.0
                           : pearson(profiles.profiles.row(i), profiles.profiles.row(j));
      out.L(i, j) = r;
      out.L(j, i) = r;
    }
  }
  return out;
}

EigenDecomposition jacobi_eigen(const Matrix& symmetric) {
  const std::size_t n = symmetric.rows();
  if (symmetric.cols() != n) throw Error(ErrorKind::InvalidInput, "matrix is not square");
  for (double v : symmetric.data())
    if (!std::isfinite(v)) throw Error(ErrorKind::NoConvergence, "matrix has non-finite entries");

  Matrix a = symmetric;
  Matrix v(n, n);
  for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

  double frob = 0.0;
  for (double x : a.data()) frob += x * x;
  const double tol = kOffDiagonalTolerance * std::max(1.0, std::sqrt(frob));

  int sweep = 0;
  while (off_diagonal_norm(a) >= tol) {
    if (sweep == kMaxSweeps)
      throw Error(ErrorKind::NoConvergence, "off-diagonal norm above tolerance after 100 sweeps");
    ++sweep;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        // Rotation angle that zeroes a(p, q); t is the smaller root of t^2 + 2 theta t - 1.
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::abs(theta) > 1e100
                             ? 0.5 / theta
                             : (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const double tau = s / (1.0 + c);

        a(p, p) -= t * apq;
        a(q, q) += t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = akp - s * (akq + tau * akp);
          a(p, k) = a(k, p);
          a(k, q) = akq + s * (akp - tau * akq);
          a(q, k) = a(k, q);
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = vkp - s * (vkq + tau * vkp);
          v(k, q) = vkq + s * (vkp - tau * vkq);
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

  EigenDecomposition out{std::vector<double>(n), Matrix(n, n), sweep};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  return out;
}

std::vector<double> eigs_symmetric(const Matrix& symmetric) {
  auto values = jacobi_eigen(symmetric).values;
  for (double& x : values)
    if (x < 0.0 && x >= -kEigenClamp) x = 0.0;
  return values;
}

QualityScore cluster_entropy_metric(std::span<const double> eigenvalues, int A) {
  if (A < 2) throw Error(ErrorKind::InvalidInput, "entropy metric needs A >= 2");
  if (eigenvalues.size() != static_cast<std::size_t>(A))
    throw Error(ErrorKind::InvalidInput, "expected " + std::to_string(A) + " eigenvalues");

  QualityScore out;
  out.A = A;
  out.effective_A = A;
  out.eigenvalues.assign(eigenvalues.begin(), eigenvalues.end());
  double total = 0.0;
  for (double& x : out.eigenvalues) {
    if (!std::isfinite(x) || x < -kEigenClamp)
      throw Error(ErrorKind::InvalidInput, "eigenvalues must be non-negative");
    x = std::max(x, 0.0);
    total += x;
  }
  if (!(total > 0.0)) throw Error(ErrorKind::InvalidInput, "all eigenvalues are zero");

  double plogp = 0.0;
  out.normalized_eigenvalues.reserve(out.eigenvalues.size());
  for (double x : out.eigenvalues) {
    const double p = x / total;
    out.normalized_eigenvalues.push_back(p);
    if (p > 0.0) plogp += p * std::log(p);
  }
  out.C = std::clamp(1.0 + plogp / std::log(static_cast<double>(A)), 0.0, 1.0);
  return out;
}

QualityScore score_profiles(const ClusterProfiles& profiles) {
  const CorrelationMatrix corr = correlation_matrix(profiles);
  const int A = static_cast<int>(corr.L.rows());
  QualityScore score = cluster_entropy_metric(eigs_symmetric(corr.L), A);
  score.effective_A = A - static_cast<int>(corr.degenerate_clusters.size());
  score.degenerate = !corr.degenerate_clusters.empty();
  return score;
}

std::vector<double> moving_average(std::span<const double> series, std::size_t window) {
  if (window == 0) throw Error(ErrorKind::InvalidInput, "window must be >= 1");
  const std::size_t n = series.size();
  const std::size_t behind = window / 2;
  const std::size_t ahead = window - 1 - behind;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= behind ? i - behind : 0;
    const std::size_t hi = std::min(n - 1, i + ahead);
    double sum = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) sum += series[k];
    out[i] = sum / static_cast<double>(hi - lo + 1);
  }
  return out;
}

std::string quality_json(const QualityScore& score) {
  nlohmann::json doc;
  doc["A"] = score.A;
  doc["C"] = score.C;
  doc["eigenvalues"] = score.eigenvalues;
  doc["degenerate"] = score.degenerate;
  doc["effective_A"] = score.effective_A;
  return doc.dump(2) + "\n";
}

}  // namespace entropyclust
