#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "depthkit/error.hpp"
#include "depthkit/evalkit.hpp"

using namespace depthkit;

namespace {

struct Pair {
  Image<double> pred, gt;
  Mask mask;
};

Pair random_pair(std::mt19937_64& rng, int h, int w, double invalid = 0.2) {
  std::uniform_real_distribution<double> u(0, 1);
  Pair p{Image<double>(h, w), Image<double>(h, w), Mask(h, w)};
  for (Eigen::Index i = 0; i < p.gt.size(); ++i) {
    p.gt(i) = 1 + 30 * u(rng);
    p.pred(i) = u(rng) * 5 - 1;
    p.mask(i) = u(rng) >= invalid;
  }
  return p;
}

// Scale and shift from centered moments: s = cov(p, g) / var(p), t = mean(g) - s * mean(p).
AffineFit centered_fit(const Pair& p) {
  double mp = 0, mg = 0, n = 0;
  for (Eigen::Index i = 0; i < p.gt.size(); ++i) {
    if (!p.mask(i)) continue;
    mp += p.pred(i);
    mg += p.gt(i);
    n += 1;
  }
  mp /= n;
  mg /= n;
  double cov = 0, var = 0;
  for (Eigen::Index i = 0; i < p.gt.size(); ++i) {
    if (!p.mask(i)) continue;
    cov += (p.pred(i) - mp) * (p.gt(i) - mg);
    var += (p.pred(i) - mp) * (p.pred(i) - mp);
  }
  return {cov / var, mg - cov / var * mp};
}

double masked_sse(const Pair& p, double s, double t) {
  double sse = 0;
  for (Eigen::Index i = 0; i < p.gt.size(); ++i) {
    if (p.mask(i)) sse += std::pow(s * p.pred(i) + t - p.gt(i), 2);
  }
  return sse;
}

TEST(LsqAlign, MatchesCenteredMomentsAndIsOptimal) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> probe(0, 0.05);
  for (int t = 0; t < 50; ++t) {
    const Pair p = random_pair(rng, 12, 15);
    const AffineFit fit = lsq_align(p.pred, p.gt, p.mask);
    const AffineFit ref = centered_fit(p);
    EXPECT_NEAR(fit.scale, ref.scale, 1e-9 * (1 + std::abs(ref.scale)));
    EXPECT_NEAR(fit.shift, ref.shift, 1e-9 * (1 + std::abs(ref.shift)));
    const double best = masked_sse(p, fit.scale, fit.shift);
    for (int k = 0; k < 20; ++k) {
      EXPECT_LE(best, masked_sse(p, fit.scale + probe(rng), fit.shift + probe(rng)) + 1e-9);
    }
  }
}

TEST(LsqAlign, RecoversExactAffineMap) {
  Image<double> p(3, 3), g(3, 3);
  for (int i = 0; i < 9; ++i) {
    p(i / 3, i % 3) = i;
    g(i / 3, i % 3) = 2.5 * i - 4;
  }
  const AffineFit fit = lsq_align(p, g, Mask::Constant(3, 3, true));
  EXPECT_NEAR(fit.scale, 2.5, 1e-12);
  EXPECT_NEAR(fit.shift, -4.0, 1e-12);
}

TEST(LsqAlign, DegenerateInputs) {
  const Image<double> flat = Image<double>::Constant(4, 4, 3.0);
  const Image<double> g = Image<double>::Random(4, 4);
  EXPECT_THROW(lsq_align(flat, g, Mask::Constant(4, 4, true)), DegenerateInputError);
  Mask one = Mask::Constant(4, 4, false);
  one(0, 0) = true;
  EXPECT_THROW(lsq_align(g, g, one), DegenerateInputError);
  EXPECT_THROW(lsq_align(g, Image<double>(4, 5), Mask::Constant(4, 4, true)), ShapeError);
}

TEST(Metrics, AbsRelAndDelta1OnKnownValues) {
  Image<double> pred(1, 4), gt(1, 4);
  pred << 1.1, 2.0, 5.0, 1.0;
  gt << 1.0, 2.0, 2.0, 1.0;
  const Mask all = Mask::Constant(1, 4, true);
  EXPECT_NEAR(absrel(pred, gt, all), (0.1 + 0 + 1.5 + 0) / 4, 1e-12);
  EXPECT_DOUBLE_EQ(delta1(pred, gt, all), 0.75);
  Image<double> edge(1, 1), one(1, 1);
  edge << 1.25;
  one << 1.0;
  EXPECT_DOUBLE_EQ(delta1(edge, one, Mask::Constant(1, 1, true)), 0.0);  // strict threshold
}

TEST(Evaluate, AffineInvariantInPrediction) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 30; ++t) {
    const Pair p = random_pair(rng, 10, 11);
    Image<double> disp = 1.0 / p.gt + 0.05 * (p.pred - 2);  // a noisy disparity
    const EvalResult base = evaluate_affine_invariant(disp, p.gt, p.mask);
    const double a = 0.1 + 5 * u(rng), b = -1 + 2 * u(rng);
    const Image<double> moved = a * disp + b;
    const EvalResult r = evaluate_affine_invariant(moved, p.gt, p.mask);
    EXPECT_NEAR(r.absrel, base.absrel, 1e-9);
    EXPECT_NEAR(r.delta1, base.delta1, 1e-9);
    EXPECT_EQ(r.m, p.mask.count());
  }
}

TEST(Evaluate, ExactDisparityScoresPerfectly) {
  std::mt19937_64 rng(4);
  const Pair p = random_pair(rng, 9, 9, 0.0);
  const Image<double> disp = 0.7 / p.gt + 0.02;
  const EvalResult r = evaluate_affine_invariant(disp, p.gt, p.mask);
  EXPECT_LT(r.absrel, 1e-9);
  EXPECT_EQ(r.delta1, 1.0);
}

TEST(Evaluate, ClampKeepsInversionFinite) {
  // A prediction pulling some aligned disparities below zero still yields finite depths.
  Image<double> gt(1, 4), disp(1, 4);
  gt << 1, 2, 4, 80;
  disp << 1.0, 0.5, 0.25, -3.0;
  const EvalResult r = evaluate_affine_invariant(disp, gt, Mask::Constant(1, 4, true), 100.0);
  EXPECT_TRUE(std::isfinite(r.absrel));
  Image<double> far(1, 2);
  far << 1, 150;
  EXPECT_THROW(evaluate_affine_invariant(Image<double>(Image<double>::Random(1, 2)), far, Mask::Constant(1, 2, true)),
               DegenerateInputError);
}

TEST(Losses, ZeroOnAffinePairsAndPositiveOtherwise) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 30; ++t) {
    const Pair p = random_pair(rng, 20, 17);
    const Image<double> affine = (p.gt - 0.3) / 1.7;
    EXPECT_LE(ssi_loss(affine, p.gt, p.mask), 1e-10);
    EXPECT_LE(gradient_matching_loss(affine, p.gt, p.mask), 1e-10);
    EXPECT_GT(ssi_loss(p.pred, p.gt, p.mask), 0.0);
    EXPECT_GT(gradient_matching_loss(p.pred, p.gt, p.mask), 0.0);
  }
}

TEST(Losses, TotalIsSsiPlusTwiceGradient) {
  std::mt19937_64 rng(6);
  const Pair p = random_pair(rng, 16, 16);
  const double ssi = ssi_loss(p.pred, p.gt, p.mask);
  const double gm = gradient_matching_loss(p.pred, p.gt, p.mask);
  EXPECT_EQ(total_loss(p.pred, p.gt, p.mask), ssi + 2.0 * gm);
  EXPECT_EQ(total_loss(0.25, 0.5), 1.25);
}

TEST(GradientTerm, RampAcrossFourScales) {
  // r(y, x) = x on 16x16: per level sum |dx| / pixels = 0.9375, 1.75, 3, 4.
  Image<double> ramp(16, 16);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) ramp(y, x) = x;
  }
  EXPECT_DOUBLE_EQ(multiscale_gradient_term(ramp, Mask::Constant(16, 16, true)), 2.421875);
  EXPECT_DOUBLE_EQ(multiscale_gradient_term(ramp, Mask::Constant(16, 16, true), 1), 0.9375);
}

TEST(GradientTerm, PoolingIgnoresMaskedContributors) {
  // Masked pixels hold garbage; pooling must average only the valid ones.
  Image<double> r(2, 2);
  r << 1.0, 1e6, 3.0, 1e6;
  Mask m(2, 2);
  m << true, false, true, false;
  // Level 0: one vertical pair |3 - 1| over 2 valid pixels = 1. Level 1: single pixel, 0.
  EXPECT_DOUBLE_EQ(multiscale_gradient_term(r, m, 2), 0.5);
}

TEST(GradientTerm, OddSizesPoolWithCeil) {
  Image<double> r = Image<double>::Zero(5, 5);
  r(4, 4) = 8.0;
  // Level 1 is 3x3 with the corner (8) alone; level 2 is 2x2 with (8) alone at (1, 1).
  const double l0 = (8.0 + 8.0) / 25.0;
  const double l1 = (8.0 + 8.0) / 9.0;
  const double l2 = (8.0 + 8.0) / 4.0;
  EXPECT_NEAR(multiscale_gradient_term(r, Mask::Constant(5, 5, true), 3), (l0 + l1 + l2) / 3.0, 1e-15);
}

}  // namespace
