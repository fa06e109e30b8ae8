#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "depthkit/depthio.hpp"
#include "depthkit/error.hpp"

namespace depthkit {

/// Scale and shift mapping a prediction onto a target: target ~ scale * pred + shift.
struct AffineFit {
  double scale = 1.0;
  double shift = 0.0;
};

struct EvalResult {
  double absrel = 0.0;
  double delta1 = 0.0;
  Eigen::Index m = 0;
};

inline constexpr double kDeltaThreshold = 1.25;
inline constexpr double kGradientLossWeight = 2.0;
inline constexpr int kGradientScales = 4;

namespace detail {

template <typename A, typename B>
void require_same_shape(const Eigen::ArrayBase<A>& a, const Eigen::ArrayBase<B>& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(what) + ": shapes differ (" + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()) + ")");
  }
}

template <typename P, typename G, typename M>
void require_shapes(const Eigen::ArrayBase<P>& pred, const Eigen::ArrayBase<G>& gt,
                    const Eigen::ArrayBase<M>& mask, const char* what) {
  require_same_shape(pred, gt, what);
  require_same_shape(pred, mask, what);
}

}  // namespace detail

/// Least-squares scale and shift of `pred` onto `gt` over `mask`, solved from the
/// 2x2 normal equations. Throws DegenerateInputError with fewer than two masked
/// pixels or a prediction that is constant over the mask.
template <typename P, typename G, typename M>
AffineFit lsq_align(const Eigen::ArrayBase<P>& pred, const Eigen::ArrayBase<G>& gt,
                    const Eigen::ArrayBase<M>& mask) {
  detail::require_shapes(pred, gt, mask, "lsq_align");
  double spp = 0.0, sp = 0.0, spg = 0.0, sg = 0.0;
  Eigen::Index m = 0;
  for (Eigen::Index r = 0; r < pred.rows(); ++r) {
    for (Eigen::Index c = 0; c < pred.cols(); ++c) {
      if (!mask(r, c)) continue;
      const double p = static_cast<double>(pred(r, c));
      const double g = static_cast<double>(gt(r, c));
      spp += p * p;
      sp += p;
      spg += p * g;
      sg += g;
      ++m;
    }
  }
  if (m < 2) throw DegenerateInputError("affine fit needs at least two masked pixels");

  Eigen::Matrix2d normal;
  normal << spp, sp, sp, static_cast<double>(m);
  const double det = normal.determinant();
  // det = m^2 * var(pred); relative to spp * m it is the squared coefficient of variation.
  if (!(det > 1e-12 * spp * static_cast<double>(m))) {
    throw DegenerateInputError("affine fit is singular: prediction is constant over the mask");
  }
  const Eigen::Vector2d solution = normal.inverse() * Eigen::Vector2d(spg, sg);
  return {solution(0), solution(1)};
}

/// Residual scale * pred + shift - gt over the mask, zero elsewhere.
template <typename P, typename G, typename M>
Image<double> aligned_residual(const Eigen::ArrayBase<P>& pred, const Eigen::ArrayBase<G>& gt,
                               const Eigen::ArrayBase<M>& mask, const AffineFit& fit) {
  detail::require_shapes(pred, gt, mask, "aligned_residual");
  Image<double> residual(pred.rows(), pred.cols());
  for (Eigen::Index r = 0; r < pred.rows(); ++r) {
    for (Eigen::Index c = 0; c < pred.cols(); ++c) {
      residual(r, c) = mask(r, c) ? fit.scale * static_cast<double>(pred(r, c)) + fit.shift -
                                        static_cast<double>(gt(r, c))
                                  : 0.0;
    }
  }
  return residual;
}

/// Mean of |pred - gt| / gt over the mask.
template <typename P, typename G, typename M>
double absrel(const Eigen::ArrayBase<P>& pred, const Eigen::ArrayBase<G>& gt,
              const Eigen::ArrayBase<M>& mask) {
  detail::require_shapes(pred, gt, mask, "absrel");
  double sum = 0.0;
  Eigen::Index m = 0;
  for (Eigen::Index r = 0; r < pred.rows(); ++r) {
    for (Eigen::Index c = 0; c < pred.cols(); ++c) {
      if (!mask(r, c)) continue;
      const double g = static_cast<double>(gt(r, c));
      if (!(g > 0.0)) throw DegenerateInputError("absrel: non-positive ground truth under the mask");
      sum += std::abs(static_cast<double>(pred(r, c)) - g) / g;
      ++m;
    }
  }
  if (m == 0) throw DegenerateInputError("absrel: empty mask");
  return sum / static_cast<double>(m);
}

/// Fraction of masked pixels with max(pred/gt, gt/pred) < tau.
template <typename P, typename G, typename M>
double delta1(const Eigen::ArrayBase<P>& pred, const Eigen::ArrayBase<G>& gt,
              const Eigen::ArrayBase<M>& mask, double tau = kDeltaThreshold) {
  detail::require_shapes(pred, gt, mask, "delta1");
  Eigen::Index hits = 0, m = 0;
  for (Eigen::Index r = 0; r < pred.rows(); ++r) {
    for (Eigen::Index c = 0; c < pred.cols(); ++c) {
      if (!mask(r, c)) continue;
      const double p = static_cast<double>(pred(r, c));
      const double g = static_cast<double>(gt(r, c));
      if (!(p > 0.0 && g > 0.0)) throw DegenerateInputError("delta1: non-positive depth under the mask");
      if (std::max(p / g, g / p) < tau) ++hits;
      ++m;
    }
  }
  if (m == 0) throw DegenerateInputError("delta1: empty mask");
  return static_cast<double>(hits) / static_cast<double>(m);
}

/// Aligns a disparity prediction to the inverse ground-truth depth, clamps the
/// aligned disparity at 1/depth_cap, inverts it and scores AbsRel and delta1.
template <typename P, typename G, typename M>
EvalResult evaluate_affine_invariant(const Eigen::ArrayBase<P>& pred_disparity,
                                     const Eigen::ArrayBase<G>& gt_depth,
                                     const Eigen::ArrayBase<M>& mask,
                                     double depth_cap = kDefaultFarPlane) {
  detail::require_shapes(pred_disparity, gt_depth, mask, "evaluate_affine_invariant");
  if (!(depth_cap > 0.0)) throw ConfigError("depth_cap must be positive");
  const Eigen::Index rows = gt_depth.rows(), cols = gt_depth.cols();

  Image<double> gt(rows, cols), gt_disp(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      gt(r, c) = static_cast<double>(gt_depth(r, c));
      if (mask(r, c) && !(gt(r, c) > 0.0 && gt(r, c) <= depth_cap)) {
        throw DegenerateInputError("ground-truth depth outside (0, depth_cap] under the mask");
      }
      gt_disp(r, c) = mask(r, c) ? 1.0 / gt(r, c) : 0.0;
    }
  }
  const AffineFit fit = lsq_align(pred_disparity, gt_disp, mask);
  const double min_disp = 1.0 / depth_cap;
  Image<double> depth(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      const double aligned = fit.scale * static_cast<double>(pred_disparity(r, c)) + fit.shift;
      depth(r, c) = 1.0 / std::max(aligned, min_disp);
    }
  }
  EvalResult result;
  result.absrel = absrel(depth, gt, mask);
  result.delta1 = delta1(depth, gt, mask);
  result.m = mask.count();
  return result;
}

/// Multi-scale gradient term on a residual: for each of `scales` levels (factor-2
/// mask-aware average pooling, a pooled pixel being valid when any contributor
/// is), the sum of |dx| + |dy| over valid neighbor pairs divided by the number
/// of valid pixels; the levels are averaged.
double multiscale_gradient_term(const Image<double>& residual, const Mask& mask, int scales = kGradientScales);

/// Mean squared residual after aligning pred onto gt.
template <typename P, typename G, typename M>
double ssi_loss(const Eigen::ArrayBase<P>& pred, const Eigen::ArrayBase<G>& gt,
                const Eigen::ArrayBase<M>& mask) {
  const AffineFit fit = lsq_align(pred, gt, mask);
  const Image<double> residual = aligned_residual(pred, gt, mask, fit);
  return residual.square().sum() / static_cast<double>(mask.count());
}

template <typename P, typename G, typename M>
double gradient_matching_loss(const Eigen::ArrayBase<P>& pred, const Eigen::ArrayBase<G>& gt,
                              const Eigen::ArrayBase<M>& mask, int scales = kGradientScales) {
  const AffineFit fit = lsq_align(pred, gt, mask);
  const Mask m = mask.template cast<bool>();
  return multiscale_gradient_term(aligned_residual(pred, gt, mask, fit), m, scales);
}

inline double total_loss(double ssi, double gm) { return ssi + kGradientLossWeight * gm; }

/// ssi_loss + 2 * gradient_matching_loss, sharing one alignment.
template <typename P, typename G, typename M>
double total_loss(const Eigen::ArrayBase<P>& pred, const Eigen::ArrayBase<G>& gt,
                  const Eigen::ArrayBase<M>& mask, int scales = kGradientScales) {
  const AffineFit fit = lsq_align(pred, gt, mask);
  const Image<double> residual = aligned_residual(pred, gt, mask, fit);
  const double ssi = residual.square().sum() / static_cast<double>(mask.count());
  const Mask m = mask.template cast<bool>();
  return total_loss(ssi, multiscale_gradient_term(residual, m, scales));
}

}  // namespace depthkit
