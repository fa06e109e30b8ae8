#include "depthkit/evalkit.hpp"

namespace depthkit {
namespace {

struct Level {
  Image<double> value;
  Mask valid;
};

Level pool2(const Level& in) {
  const Eigen::Index rows = (in.value.rows() + 1) / 2;
  const Eigen::Index cols = (in.value.cols() + 1) / 2;
  Level out{Image<double>::Zero(rows, cols), Mask::Constant(rows, cols, false)};
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      double sum = 0.0;
      int n = 0;
      for (Eigen::Index dr = 0; dr < 2; ++dr) {
        for (Eigen::Index dc = 0; dc < 2; ++dc) {
          const Eigen::Index sr = 2 * r + dr, sc = 2 * c + dc;
          if (sr < in.value.rows() && sc < in.value.cols() && in.valid(sr, sc)) {
            sum += in.value(sr, sc);
            ++n;
          }
        }
      }
      if (n > 0) {
        out.value(r, c) = sum / n;
        out.valid(r, c) = true;
      }
    }
  }
  return out;
}

double level_term(const Level& level) {
  const auto& v = level.value;
  const auto& ok = level.valid;
  double sum = 0.0;
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
      if (!ok(r, c)) continue;
      if (c + 1 < v.cols() && ok(r, c + 1)) sum += std::abs(v(r, c + 1) - v(r, c));
      if (r + 1 < v.rows() && ok(r + 1, c)) sum += std::abs(v(r + 1, c) - v(r, c));
    }
  }
  const auto count = ok.count();
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

}  // namespace

double multiscale_gradient_term(const Image<double>& residual, const Mask& mask, int scales) {
  if (scales < 1) throw ConfigError("gradient matching needs at least one scale");
  if (residual.rows() != mask.rows() || residual.cols() != mask.cols()) {
    throw ShapeError("multiscale_gradient_term: residual and mask shapes differ");
  }
  if (mask.count() == 0) throw DegenerateInputError("multiscale_gradient_term: empty mask");
  Level level{mask.select(residual, 0.0), mask};
  double total = 0.0;
  for (int s = 0; s < scales; ++s) {
    if (s > 0) level = pool2(level);
    total += level_term(level);
  }
  return total / scales;
}

}  // namespace depthkit
