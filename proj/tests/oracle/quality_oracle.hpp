#pragma once

// Naive reference for the sample-quality scores. Works on plain row-major
// vectors and shares no code with the library.

#include <algorithm>
#include <cmath>
#include <vector>

namespace oracle {

struct Scores {
  double valid_ratio = 0, s_chi2 = 0, s_conc = 0, s_range = 0, s_dist = 0, s_grad = 0, s_total = 0;
  bool grad_defined = false;
};

inline bool valid_depth(double d, double far_plane) { return std::isfinite(d) && d > 0 && d <= far_plane; }

inline Scores quality(const std::vector<double>& depth, int rows, int cols, double far_plane = 100.0,
                      int K = 20, double lo = 0.0, double hi = 100.0) {
  Scores s;
  auto at = [&](int i, int j) { return depth[static_cast<std::size_t>(i * cols + j)]; };
  auto ok = [&](int i, int j) { return valid_depth(at(i, j), far_plane); };

  // Histogram.
  std::vector<double> counts(static_cast<std::size_t>(K), 0.0);
  double N = 0;
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      if (!ok(i, j)) continue;
      double d = at(i, j);
      if (d < lo) d = lo;
      if (d > hi) d = hi;
      int b = static_cast<int>(std::floor(K * (d - lo) / (hi - lo)));
      if (b >= K) b = K - 1;
      counts[static_cast<std::size_t>(b)] += 1;
      N += 1;
    }
  }
  s.valid_ratio = N / (rows * cols);

  // Chi-square uniformity.
  const double nbar = N / K;
  double chi2 = 0;
  for (int k = 0; k < K; ++k) chi2 += (counts[k] - nbar) * (counts[k] - nbar) / nbar;
  s.s_chi2 = std::exp(-chi2 / N);

  // Maximum-bin concentration.
  double nmax = 0;
  for (int k = 0; k < K; ++k) nmax = std::max(nmax, counts[k]);
  const double pmax = nmax / N;
  if (pmax <= 2.0 / K) {
    s.s_conc = 1;
  } else {
    s.s_conc = 1 - std::min(1.0, (pmax - 2.0 / K) / (0.5 - 2.0 / K));
  }

  // Range utilization.
  double used = 0;
  for (int k = 0; k < K; ++k) used += counts[k] > 0 ? 1 : 0;
  s.s_range = used / K;

  s.s_dist = 0.5 * s.s_chi2 + 0.3 * s.s_conc + 0.2 * s.s_range;

  // Gradient magnitudes.
  std::vector<double> g;
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      if (!ok(i, j)) continue;
      double gx = 0, gy = 0;
      bool defined = true;
      if (cols > 1) {
        if (j == 0) {
          defined = defined && ok(i, 1);
          if (defined) gx = at(i, 1) - at(i, 0);
        } else if (j == cols - 1) {
          defined = defined && ok(i, j - 1);
          if (defined) gx = at(i, j) - at(i, j - 1);
        } else {
          defined = defined && ok(i, j - 1) && ok(i, j + 1);
          if (defined) gx = (at(i, j + 1) - at(i, j - 1)) / 2;
        }
      }
      if (rows > 1) {
        if (i == 0) {
          defined = defined && ok(1, j);
          if (defined) gy = at(1, j) - at(0, j);
        } else if (i == rows - 1) {
          defined = defined && ok(i - 1, j);
          if (defined) gy = at(i, j) - at(i - 1, j);
        } else {
          defined = defined && ok(i - 1, j) && ok(i + 1, j);
          if (defined) gy = (at(i + 1, j) - at(i - 1, j)) / 2;
        }
      }
      if (defined) g.push_back(std::sqrt(gx * gx + gy * gy));
    }
  }
  if (g.empty()) return s;
  s.grad_defined = true;

  // Nearest rank: smallest r with r / n >= 0.9, searched in integers.
  std::vector<double> sorted = g;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  std::size_t r = 1;
  while (r * 10 < 9 * n) ++r;
  const double t = sorted[r - 1];

  double sum = 0, cnt = 0;
  for (double v : g) {
    if (v <= t) {
      sum += v;
      cnt += 1;
    }
  }
  const double mu = sum / cnt;
  double cv = 0;
  if (mu >= 1e-12) {
    double var = 0;
    for (double v : g) {
      if (v <= t) var += (v - mu) * (v - mu);
    }
    cv = std::sqrt(var / cnt) / mu;
  }
  s.s_grad = 1 / (1 + cv);
  s.s_total = (s.s_dist + s.s_grad) / 2;
  return s;
}

}  // namespace oracle
