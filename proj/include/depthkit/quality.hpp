#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "depthkit/depthio.hpp"

namespace depthkit {

/// Equal-width histogram of the valid depths of one sample.
struct DepthHistogram {
  int k = 0;
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::int64_t> counts;
  std::int64_t n = 0;
};

enum class HistogramRange {
  kFixed,      ///< [lo, hi] shared by every sample of the corpus
  kPerSample,  ///< [min, max] of each sample's own valid depths
};

struct QualitySettings {
  int bins = 20;
  HistogramRange range = HistogramRange::kFixed;
  double lo = 0.0;
  double hi = kDefaultFarPlane;
};

/// Weights of the chi-square, concentration and range terms in the distribution score.
inline constexpr double kChiSquareWeight = 0.5;
inline constexpr double kConcentrationWeight = 0.3;
inline constexpr double kRangeWeight = 0.2;

/// Fraction of gradient magnitudes treated as object edges.
inline constexpr double kEdgeFraction = 0.10;

/// Below this mean gradient the coefficient of variation is taken as 0.
inline constexpr double kFlatGradientMean = 1e-12;

/// Per-sample quality record. Scores that cannot be computed (no valid pixel,
/// no defined gradient) are NaN.
struct QualityScores {
  std::string id;
  std::string dataset;
  double valid_ratio = 0.0;
  double s_chi2 = 0.0;
  double s_conc = 0.0;
  double s_range = 0.0;
  double s_dist = 0.0;
  double s_grad = 0.0;
  double s_total = 0.0;
};

/// Bins every valid depth; values outside [lo, hi] are clamped and a depth equal
/// to hi lands in the last bin. Throws DegenerateInputError on an all-invalid
/// sample and ConfigError unless k >= 1 and lo < hi.
DepthHistogram depth_histogram(const DepthSample& sample, int k, double lo, double hi);

/// Histogram with the range chosen by `settings` (per-sample range uses the
/// sample's own min/max; a constant map gets a unit-width range).
DepthHistogram depth_histogram(const DepthSample& sample, const QualitySettings& settings);

/// exp(-chi2 / N) of the counts against a uniform expectation N/K.
double chi_square_score(const DepthHistogram& h);

/// Penalizes the fullest bin linearly once it holds more than 2/K of the
/// samples, reaching 0 at one half. Requires K > 4.
double concentration_score(const DepthHistogram& h);

/// Fraction of non-empty bins.
double range_utilization(const DepthHistogram& h);

double distribution_score(double s_chi2, double s_conc, double s_range);
double distribution_score(const DepthHistogram& h);

/// Gradient magnitude per pixel. `defined` is false where the pixel or any
/// pixel of its difference stencil is invalid; `magnitude` is 0 there.
struct GradientField {
  Image<double> magnitude;
  Mask defined;
};

/// Central differences inside, one-sided differences on the border. A
/// dimension of extent 1 contributes a zero derivative.
GradientField gradient_magnitude(const DepthSample& sample);

/// 1 / (1 + CV) over the magnitudes not strictly above the nearest-rank 90th
/// percentile. Throws DegenerateInputError on an empty input.
double continuity_from_magnitudes(std::span<const double> magnitudes);

double gradient_continuity_score(const DepthSample& sample);

double total_score(double s_dist, double s_grad);

/// Computes every score for a sample. Scores that are undefined for the sample
/// come back as NaN rather than throwing.
QualityScores score_sample(const DepthSample& sample, const QualitySettings& settings = {});

}  // namespace depthkit
