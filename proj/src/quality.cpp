#include "depthkit/quality.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "depthkit/error.hpp"

namespace depthkit {

DepthHistogram depth_histogram(const DepthSample& sample, int k, double lo, double hi) {
  if (k < 1) throw ConfigError("histogram needs at least one bin");
  if (!(lo < hi)) throw ConfigError("histogram range must satisfy lo < hi");
  if (sample.valid_count() == 0) {
    throw DegenerateInputError("sample " + sample.id + " has no valid depth");
  }

  DepthHistogram h;
  h.k = k;
  h.lo = lo;
  h.hi = hi;
  h.counts.assign(static_cast<std::size_t>(k), 0);
  for (Eigen::Index i = 0; i < sample.depth.size(); ++i) {
    if (!sample.valid(i)) continue;
    const double d = std::clamp(static_cast<double>(sample.depth(i)), lo, hi);
    const int bin = std::min(static_cast<int>(k * (d - lo) / (hi - lo)), k - 1);
    ++h.counts[static_cast<std::size_t>(bin)];
    ++h.n;
  }
  return h;
}

DepthHistogram depth_histogram(const DepthSample& sample, const QualitySettings& settings) {
  if (settings.range == HistogramRange::kFixed) {
    return depth_histogram(sample, settings.bins, settings.lo, settings.hi);
  }
  if (sample.valid_count() == 0) {
    throw DegenerateInputError("sample " + sample.id + " has no valid depth");
  }
  const float big = std::numeric_limits<float>::infinity();
  const double lo = sample.valid.select(sample.depth, big).minCoeff();
  double hi = sample.valid.select(sample.depth, -big).maxCoeff();
  if (!(hi > lo)) hi = lo + 1.0;
  return depth_histogram(sample, settings.bins, lo, hi);
}

double chi_square_score(const DepthHistogram& h) {
  if (h.n <= 0) throw DegenerateInputError("empty histogram");
  const double n = static_cast<double>(h.n);
  const double expected = n / h.k;
  double chi2 = 0.0;
  for (auto c : h.counts) {
    const double diff = static_cast<double>(c) - expected;
    chi2 += diff * diff / expected;
  }
  return std::exp(-chi2 / n);
}

double concentration_score(const DepthHistogram& h) {
  if (h.k <= 4) throw ConfigError("concentration score needs more than 4 bins");
  if (h.n <= 0) throw DegenerateInputError("empty histogram");
  const double p_max =
      static_cast<double>(*std::max_element(h.counts.begin(), h.counts.end())) / h.n;
  const double tolerated = 2.0 / h.k;
  if (p_max <= tolerated) return 1.0;
  return 1.0 - std::min(1.0, (p_max - tolerated) / (0.5 - tolerated));
}

double range_utilization(const DepthHistogram& h) {
  if (h.n <= 0) throw DegenerateInputError("empty histogram");
  const auto occupied = std::count_if(h.counts.begin(), h.counts.end(), [](auto c) { return c > 0; });
  return static_cast<double>(occupied) / h.k;
}

double distribution_score(double s_chi2, double s_conc, double s_range) {
  return kChiSquareWeight * s_chi2 + kConcentrationWeight * s_conc + kRangeWeight * s_range;
}

double distribution_score(const DepthHistogram& h) {
  return distribution_score(chi_square_score(h), concentration_score(h), range_utilization(h));
}

GradientField gradient_magnitude(const DepthSample& sample) {
  const Eigen::Index rows = sample.height();
  const Eigen::Index cols = sample.width();
  GradientField g{Image<double>::Zero(rows, cols), Mask::Constant(rows, cols, false)};

  const auto& d = sample.depth;
  const auto& v = sample.valid;
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (!v(i, j)) continue;

      double dx = 0.0;
      bool ok = true;
      if (cols > 1) {
        const Eigen::Index l = j == 0 ? 0 : j - 1;
        const Eigen::Index r = j == cols - 1 ? cols - 1 : j + 1;
        ok = v(i, l) && v(i, r);
        dx = (static_cast<double>(d(i, r)) - d(i, l)) / static_cast<double>(r - l);
      }
      double dy = 0.0;
      if (ok && rows > 1) {
        const Eigen::Index u = i == 0 ? 0 : i - 1;
        const Eigen::Index b = i == rows - 1 ? rows - 1 : i + 1;
        ok = v(u, j) && v(b, j);
        dy = (static_cast<double>(d(b, j)) - d(u, j)) / static_cast<double>(b - u);
      }
      if (!ok) continue;
      g.defined(i, j) = true;
      g.magnitude(i, j) = std::sqrt(dx * dx + dy * dy);
    }
  }
  return g;
}

double continuity_from_magnitudes(std::span<const double> magnitudes) {
  const std::size_t n = magnitudes.size();
  if (n == 0) throw DegenerateInputError("no defined gradient magnitudes");

  // Nearest-rank percentile: the ceil(q*n)-th smallest value, in integer arithmetic.
  constexpr std::size_t kPercent = 90;
  static_assert(kPercent == static_cast<std::size_t>(100 * (1.0 - kEdgeFraction) + 0.5));
  const std::size_t rank = (kPercent * n + 99) / 100;
  std::vector<double> sorted(magnitudes.begin(), magnitudes.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(rank - 1), sorted.end());
  const double threshold = sorted[rank - 1];

  double sum = 0.0;
  std::size_t count = 0;
  for (double g : magnitudes) {
    if (g <= threshold) {
      sum += g;
      ++count;
    }
  }
  const double mean = sum / static_cast<double>(count);
  if (mean < kFlatGradientMean) return 1.0;
  double sq = 0.0;
  for (double g : magnitudes) {
    if (g <= threshold) sq += (g - mean) * (g - mean);
  }
  const double cv = std::sqrt(sq / static_cast<double>(count)) / mean;
  return 1.0 / (1.0 + cv);
}

double gradient_continuity_score(const DepthSample& sample) {
  const GradientField g = gradient_magnitude(sample);
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(g.defined.count()));
  for (Eigen::Index i = 0; i < g.magnitude.size(); ++i) {
    if (g.defined(i)) values.push_back(g.magnitude(i));
  }
  if (values.empty()) {
    throw DegenerateInputError("sample " + sample.id + " has no pixel with a defined gradient");
  }
  return continuity_from_magnitudes(values);
}

double total_score(double s_dist, double s_grad) { return 0.5 * (s_grad + s_dist); }

QualityScores score_sample(const DepthSample& sample, const QualitySettings& settings) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  QualityScores s;
  s.id = sample.id;
  s.dataset = sample.dataset;
  s.valid_ratio = sample.valid_ratio();
  s.s_chi2 = s.s_conc = s.s_range = s.s_dist = s.s_grad = s.s_total = nan;
  if (sample.valid_count() == 0) return s;

  const DepthHistogram h = depth_histogram(sample, settings);
  s.s_chi2 = chi_square_score(h);
  s.s_conc = concentration_score(h);
  s.s_range = range_utilization(h);
  s.s_dist = distribution_score(s.s_chi2, s.s_conc, s.s_range);
  try {
    s.s_grad = gradient_continuity_score(sample);
  } catch (const DegenerateInputError&) {
    return s;
  }
  s.s_total = total_score(s.s_dist, s.s_grad);
  return s;
}

}  // namespace depthkit
