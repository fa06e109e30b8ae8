#include "depthkit/sdt/layers.hpp"

#include <algorithm>
#include <cmath>

#include "depthkit/error.hpp"

namespace depthkit::sdt {

template <typename Scalar>
Scalar gelu(Scalar x) {
  return Scalar(0.5) * x * (Scalar(1) + std::erf(x / std::sqrt(Scalar(2))));
}

template <typename Scalar>
RowMatrix<Scalar> project_layer(const RowMatrix<Scalar>& tokens, const Vector<Scalar>& cls,
                                const Linear<Scalar>& proj) {
  const Eigen::Index d = tokens.cols();
  if (cls.size() != d || proj.weight.cols() != 2 * d || proj.bias.size() != proj.weight.rows()) {
    throw ShapeError("project_layer: token width " + std::to_string(d) + " does not match projection " +
                     std::to_string(proj.weight.rows()) + "x" + std::to_string(proj.weight.cols()));
  }
  // [t, c] W^T + b = t W_t^T + (W_c c + b)^T: the class-token half is shared by every row.
  const Vector<Scalar> shared = proj.weight.rightCols(d) * cls + proj.bias;
  RowMatrix<Scalar> out(tokens.rows(), proj.weight.rows());
  out.noalias() = tokens * proj.weight.leftCols(d).transpose();
  out.rowwise() += shared.transpose();
  return out.unaryExpr([](Scalar v) { return gelu(v); });
}

template <typename Scalar>
Vector<Scalar> softmax(const Vector<Scalar>& logits) {
  const Vector<Scalar> e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

template <typename Scalar>
RowMatrix<Scalar> fuse(std::span<const RowMatrix<Scalar>> projected, const Vector<Scalar>& logits) {
  if (projected.empty() || static_cast<Eigen::Index>(projected.size()) != logits.size()) {
    throw ShapeError("fuse: need one logit per projected layer");
  }
  const Vector<Scalar> alpha = softmax(logits);
  RowMatrix<Scalar> out = RowMatrix<Scalar>::Zero(projected[0].rows(), projected[0].cols());
  for (std::size_t i = 0; i < projected.size(); ++i) {
    if (projected[i].rows() != out.rows() || projected[i].cols() != out.cols()) {
      throw ShapeError("fuse: projected layers differ in shape");
    }
    out += alpha(static_cast<Eigen::Index>(i)) * projected[i];
  }
  return out;
}

template <typename Scalar>
FeatureMap<Scalar> tokens_to_map(const RowMatrix<Scalar>& tokens, Eigen::Index h, Eigen::Index w) {
  if (tokens.rows() != h * w) {
    throw ShapeError("tokens_to_map: " + std::to_string(tokens.rows()) + " tokens for a " +
                     std::to_string(h) + "x" + std::to_string(w) + " grid");
  }
  return {h, w, tokens.transpose()};
}

template <typename Scalar>
RowMatrix<Scalar> map_to_tokens(const FeatureMap<Scalar>& map) {
  return map.data.transpose();
}

template <typename Scalar>
void batch_norm_inplace(FeatureMap<Scalar>& x, const BatchNorm<Scalar>& bn) {
  const Vector<Scalar> scale =
      bn.gamma.array() / (bn.running_var.array() + Scalar(kBatchNormEpsilon)).sqrt();
  const Vector<Scalar> shift = bn.beta.array() - bn.running_mean.array() * scale.array();
  x.data.array().colwise() *= scale.array();
  x.data.array().colwise() += shift.array();
}

template <typename Scalar>
void relu_inplace(FeatureMap<Scalar>& x) {
  x.data = x.data.cwiseMax(Scalar(0));
}

template <typename Scalar>
FeatureMap<Scalar> depthwise_conv3x3(const FeatureMap<Scalar>& x, const DepthwiseConv<Scalar>& conv) {
  if (conv.weight.rows() != x.channels() || conv.weight.cols() != 9) {
    throw ShapeError("depthwise_conv3x3: kernel does not match the channel count");
  }
  const Eigen::Index h = x.height, w = x.width;
  FeatureMap<Scalar> out = FeatureMap<Scalar>::Zero(x.channels(), h, w);
  for (Eigen::Index c = 0; c < x.channels(); ++c) {
    const Scalar* in = x.data.row(c).data();
    Scalar* dst = out.data.row(c).data();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const Scalar k = conv.weight(c, ky * 3 + kx);
        if (k == Scalar(0)) continue;
        const Eigen::Index y0 = std::max<Eigen::Index>(0, 1 - ky), y1 = std::min(h, h + 1 - ky);
        const Eigen::Index x0 = std::max<Eigen::Index>(0, 1 - kx), x1 = std::min(w, w + 1 - kx);
        for (Eigen::Index y = y0; y < y1; ++y) {
          const Scalar* src = in + (y + ky - 1) * w + (kx - 1);
          Scalar* row = dst + y * w;
          for (Eigen::Index xx = x0; xx < x1; ++xx) row[xx] += k * src[xx];
        }
      }
    }
  }
  return out;
}

namespace {

// Upper bound on the im2col buffer, in elements.
constexpr Eigen::Index kIm2colBudget = Eigen::Index(1) << 21;

template <typename Scalar>
void im2col3x3(const FeatureMap<Scalar>& x, Eigen::Index y0, Eigen::Index y1, RowMatrix<Scalar>& cols) {
  const Eigen::Index w = x.width, h = x.height;
  const Eigen::Index tile = (y1 - y0) * w;
  cols.resize(x.channels() * 9, tile);
  for (Eigen::Index c = 0; c < x.channels(); ++c) {
    const Scalar* in = x.data.row(c).data();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        Scalar* dst = cols.row(c * 9 + ky * 3 + kx).data();
        for (Eigen::Index y = y0; y < y1; ++y) {
          Scalar* row = dst + (y - y0) * w;
          const Eigen::Index sy = y + ky - 1;
          if (sy < 0 || sy >= h) {
            std::fill(row, row + w, Scalar(0));
            continue;
          }
          const Scalar* src = in + sy * w;
          const Eigen::Index shift = kx - 1;
          const Eigen::Index lo = std::max<Eigen::Index>(0, -shift);
          const Eigen::Index hi = std::min(w, w - shift);
          std::fill(row, row + lo, Scalar(0));
          std::copy(src + lo + shift, src + hi + shift, row + lo);
          std::fill(row + hi, row + w, Scalar(0));
        }
      }
    }
  }
}

}  // namespace

template <typename Scalar>
FeatureMap<Scalar> conv2d(const FeatureMap<Scalar>& x, const Conv2d<Scalar>& conv) {
  if (conv.kernel != 1 && conv.kernel != 3) throw ConfigError("conv2d supports kernels 1 and 3");
  if (conv.in_channels() != x.channels() || conv.weight.cols() != x.channels() * conv.kernel * conv.kernel) {
    throw ShapeError("conv2d: expected " + std::to_string(conv.in_channels()) + " input channels, got " +
                     std::to_string(x.channels()));
  }
  FeatureMap<Scalar> out{x.height, x.width, RowMatrix<Scalar>(conv.out_channels(), x.pixels())};
  if (conv.kernel == 1) {
    out.data.noalias() = conv.weight * x.data;
  } else {
    const Eigen::Index per_row = std::max<Eigen::Index>(1, x.channels() * 9 * x.width);
    const Eigen::Index rows_per_tile = std::max<Eigen::Index>(1, kIm2colBudget / per_row);
    RowMatrix<Scalar> cols;
    for (Eigen::Index y0 = 0; y0 < x.height; y0 += rows_per_tile) {
      const Eigen::Index y1 = std::min(x.height, y0 + rows_per_tile);
      im2col3x3(x, y0, y1, cols);
      out.data.middleCols(y0 * x.width, (y1 - y0) * x.width).noalias() = conv.weight * cols;
    }
  }
  if (conv.bias.size() > 0) out.data.colwise() += conv.bias;
  return out;
}

template <typename Scalar>
FeatureMap<Scalar> spatial_detail_enhancer(const FeatureMap<Scalar>& f, const DepthwiseConv<Scalar>& conv,
                                           const BatchNorm<Scalar>& bn) {
  FeatureMap<Scalar> out = depthwise_conv3x3(f, conv);
  batch_norm_inplace(out, bn);
  out.data += f.data;
  relu_inplace(out);
  return out;
}

BilinearTap bilinear_tap(double x, double y, Eigen::Index h, Eigen::Index w) {
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  const Eigen::Index x0 = static_cast<Eigen::Index>(std::floor(x));
  const Eigen::Index y0 = static_cast<Eigen::Index>(std::floor(y));
  const Eigen::Index x1 = std::min(x0 + 1, w - 1);
  const Eigen::Index y1 = std::min(y0 + 1, h - 1);
  const double fx = x - static_cast<double>(x0);
  const double fy = y - static_cast<double>(y0);
  return {{y0 * w + x0, y0 * w + x1, y1 * w + x0, y1 * w + x1},
          {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy}};
}

template <typename Scalar>
FeatureMap<Scalar> dysample2x(const FeatureMap<Scalar>& x, const Conv2d<Scalar>& offset_generator) {
  if (offset_generator.kernel != 1 || offset_generator.out_channels() != kOffsetChannels) {
    throw ShapeError("dysample2x: offset generator must be pointwise with 8 outputs");
  }
  const FeatureMap<Scalar> offsets = conv2d(x, offset_generator);
  const Eigen::Index h = x.height, w = x.width;
  const Eigen::Index oh = 2 * h, ow = 2 * w;
  const int sub = kUpsampleFactor * kUpsampleFactor;

  std::vector<BilinearTap> taps(static_cast<std::size_t>(oh * ow));
  for (Eigen::Index oy = 0; oy < oh; ++oy) {
    for (Eigen::Index ox = 0; ox < ow; ++ox) {
      const Eigen::Index src = (oy / 2) * w + (ox / 2);
      // Pixel-shuffle layout: channel comp * 4 + i * 2 + j drives sub-pixel (i, j).
      const int ch = static_cast<int>((oy % 2) * 2 + (ox % 2));
      const double dx = kOffsetRange * static_cast<double>(offsets.data(ch, src));
      const double dy = kOffsetRange * static_cast<double>(offsets.data(sub + ch, src));
      const double bx = (static_cast<double>(ox) + 0.5) / kUpsampleFactor - 0.5;
      const double by = (static_cast<double>(oy) + 0.5) / kUpsampleFactor - 0.5;
      taps[static_cast<std::size_t>(oy * ow + ox)] = bilinear_tap(bx + dx, by + dy, h, w);
    }
  }

  FeatureMap<Scalar> out{oh, ow, RowMatrix<Scalar>(x.channels(), oh * ow)};
  for (Eigen::Index c = 0; c < x.channels(); ++c) {
    const Scalar* in = x.data.row(c).data();
    Scalar* dst = out.data.row(c).data();
    for (std::size_t p = 0; p < taps.size(); ++p) {
      const BilinearTap& t = taps[p];
      dst[p] = static_cast<Scalar>(t.weight[0]) * in[t.index[0]] + static_cast<Scalar>(t.weight[1]) * in[t.index[1]] +
               static_cast<Scalar>(t.weight[2]) * in[t.index[2]] + static_cast<Scalar>(t.weight[3]) * in[t.index[3]];
    }
  }
  return out;
}

namespace {

template <typename Scalar>
FeatureMap<Scalar> conv_bn_relu(const FeatureMap<Scalar>& x, const Conv2d<Scalar>& conv,
                                const BatchNorm<Scalar>& bn) {
  FeatureMap<Scalar> y = conv2d(x, conv);
  batch_norm_inplace(y, bn);
  relu_inplace(y);
  return y;
}

template <typename Scalar>
FeatureMap<Scalar> dysample_block(const FeatureMap<Scalar>& x, const DecoderParams<Scalar>& p, int upsampler,
                                  int conv) {
  return conv_bn_relu(dysample2x(x, p.offset_generators[upsampler]), p.upsample_convs[conv],
                      p.upsample_bns[conv]);
}

}  // namespace

template <typename Scalar>
FeatureMap<Scalar> upsample16(const FeatureMap<Scalar>& x, const DecoderParams<Scalar>& params) {
  FeatureMap<Scalar> y = x;
  int upsampler = 0, conv = 0;
  for (int stage = 0; stage < 2; ++stage) {
    y = dysample_block(y, params, upsampler++, conv++);
    y = dysample_block(y, params, upsampler++, conv++);
    y = conv_bn_relu(y, params.upsample_convs[conv], params.upsample_bns[conv]);
    ++conv;
  }
  return y;
}

template <typename Scalar>
FeatureMap<Scalar> head(const FeatureMap<Scalar>& f, const DecoderParams<Scalar>& params) {
  FeatureMap<Scalar> mid = conv2d(f, params.head_conv);
  relu_inplace(mid);
  FeatureMap<Scalar> out = conv2d(mid, params.head_out);
  relu_inplace(out);
  return out;
}

#define DEPTHKIT_SDT_INSTANTIATE(S)                                                                  \
  template S gelu<S>(S);                                                                             \
  template RowMatrix<S> project_layer<S>(const RowMatrix<S>&, const Vector<S>&, const Linear<S>&);   \
  template Vector<S> softmax<S>(const Vector<S>&);                                                   \
  template RowMatrix<S> fuse<S>(std::span<const RowMatrix<S>>, const Vector<S>&);                    \
  template FeatureMap<S> tokens_to_map<S>(const RowMatrix<S>&, Eigen::Index, Eigen::Index);          \
  template RowMatrix<S> map_to_tokens<S>(const FeatureMap<S>&);                                      \
  template void batch_norm_inplace<S>(FeatureMap<S>&, const BatchNorm<S>&);                          \
  template void relu_inplace<S>(FeatureMap<S>&);                                                     \
  template FeatureMap<S> depthwise_conv3x3<S>(const FeatureMap<S>&, const DepthwiseConv<S>&);        \
  template FeatureMap<S> conv2d<S>(const FeatureMap<S>&, const Conv2d<S>&);                          \
  template FeatureMap<S> spatial_detail_enhancer<S>(const FeatureMap<S>&, const DepthwiseConv<S>&,   \
                                                    const BatchNorm<S>&);                            \
  template FeatureMap<S> dysample2x<S>(const FeatureMap<S>&, const Conv2d<S>&);                      \
  template FeatureMap<S> upsample16<S>(const FeatureMap<S>&, const DecoderParams<S>&);               \
  template FeatureMap<S> head<S>(const FeatureMap<S>&, const DecoderParams<S>&);

DEPTHKIT_SDT_INSTANTIATE(float)
DEPTHKIT_SDT_INSTANTIATE(double)

#undef DEPTHKIT_SDT_INSTANTIATE

}  // namespace depthkit::sdt
