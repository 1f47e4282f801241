#pragma once

// Reference computations used only by the tests. Each one is written from the
// textbook definition and shares no code with the library routine it checks.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numbers>
#include <vector>

namespace oracle {

// Adjusted Rand index between two labelings of the same items.
inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1;
    ra[a[i]] += 1;
    rb[b[i]] += 1;
  }
  auto c2 = [](double n) { return n * (n - 1) / 2; };
  double index = 0, sa = 0, sb = 0;
  for (const auto& [k, n] : joint) index += c2(n);
  for (const auto& [k, n] : ra) sa += c2(n);
  for (const auto& [k, n] : rb) sb += c2(n);
  const double expected = sa * sb / c2(static_cast<double>(a.size()));
  const double max_index = (sa + sb) / 2;
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

// Leave-one-out nearest centroid accuracy. features[j] is consumer j's vector.
// The own-class centroid is rebuilt from scratch without consumer j.
inline double loo_nearest_centroid_accuracy(const std::vector<std::vector<double>>& features,
                                            const std::vector<int>& labels, int classes) {
  const std::size_t n = features.size();
  std::size_t correct = 0;
  for (std::size_t j = 0; j < n; ++j) {
    int best_label = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int c = 0; c < classes; ++c) {
      std::vector<double> centre(features[j].size(), 0.0);
      std::size_t members = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] != c || i == j) continue;
        for (std::size_t v = 0; v < centre.size(); ++v) centre[v] += features[i][v];
        ++members;
      }
      if (members == 0) continue;
      double d = 0;
      for (std::size_t v = 0; v < centre.size(); ++v) {
        const double diff = features[j][v] - centre[v] / static_cast<double>(members);
        d += diff * diff;
      }
      if (d < best) {
        best = d;
        best_label = c;
      }
    }
    if (best_label == labels[j]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

// Roots of the characteristic polynomial of a symmetric 2x2 matrix, descending.
inline std::array<double, 2> eig2(double a, double b, double d) {
  const double mean = (a + d) / 2;
  const double radius = std::hypot((a - d) / 2, b);
  return {mean + radius, mean - radius};
}

// Roots of det(lambda I - S) for a symmetric 3x3 S via the trigonometric
// solution of the depressed cubic, descending.
inline std::array<double, 3> eig3(const std::array<std::array<double, 3>, 3>& s) {
  const double p1 = s[0][1] * s[0][1] + s[0][2] * s[0][2] + s[1][2] * s[1][2];
  const double q = (s[0][0] + s[1][1] + s[2][2]) / 3;
  if (p1 == 0) {
    std::array<double, 3> d{s[0][0], s[1][1], s[2][2]};
    std::sort(d.begin(), d.end(), std::greater<>());
    return d;
  }
  const double p2 = (s[0][0] - q) * (s[0][0] - q) + (s[1][1] - q) * (s[1][1] - q) +
                    (s[2][2] - q) * (s[2][2] - q) + 2 * p1;
  const double p = std::sqrt(p2 / 6);
  std::array<std::array<double, 3>, 3> b{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) b[i][j] = (s[i][j] - (i == j ? q : 0.0)) / p;
  const double det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) -
                     b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0]) +
                     b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
  const double r = std::clamp(det / 2, -1.0, 1.0);
  const double phi = std::acos(r) / 3;
  const double l1 = q + 2 * p * std::cos(phi);
  const double l3 = q + 2 * p * std::cos(phi + 2 * std::numbers::pi / 3);
  return {l1, 3 * q - l1 - l3, l3};
}

// 1 - normalized Shannon entropy of (1 + r, 1 - r) / 2, the metric for two
// profiles with correlation r.
inline double two_cluster_metric(double r) {
  const double p = (1 + r) / 2;
  const double q = (1 - r) / 2;
  double h = 0;
  if (p > 0) h -= p * std::log(p);
  if (q > 0) h -= q * std::log(q);
  return 1 - h / std::log(2.0);
}

// Mean of series[i - w/2 .. i + (w - 1 - w/2)] clipped to the series.
inline std::vector<double> windowed_mean(const std::vector<double>& series, std::size_t w) {
  const long n = static_cast<long>(series.size());
  const long behind = static_cast<long>(w / 2);
  const long ahead = static_cast<long>(w) - 1 - behind;
  std::vector<double> out;
  for (long i = 0; i < n; ++i) {
    std::vector<double> window;
    for (long k = i - behind; k <= i + ahead; ++k)
      if (k >= 0 && k < n) window.push_back(series[static_cast<std::size_t>(k)]);
    double sum = 0;
    for (double v : window) sum += v;
    out.push_back(sum / static_cast<double>(window.size()));
  }
  return out;
}

}  // namespace oracle
