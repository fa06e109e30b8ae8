#pragma once

#include <array>
#include <span>

#include "depthkit/sdt/params.hpp"
#include "depthkit/sdt/tensor.hpp"

namespace depthkit::sdt {

/// Exact GELU, x * Phi(x).
template <typename Scalar>
Scalar gelu(Scalar x);

/// Concatenates each spatial token (rows of `tokens`) with the class token,
/// applies the linear map and GELU. Returns N_p x width.
template <typename Scalar>
RowMatrix<Scalar> project_layer(const RowMatrix<Scalar>& tokens, const Vector<Scalar>& cls,
                                const Linear<Scalar>& proj);

template <typename Scalar>
Vector<Scalar> softmax(const Vector<Scalar>& logits);

/// Softmax-weighted sum of the projected layers.
template <typename Scalar>
RowMatrix<Scalar> fuse(std::span<const RowMatrix<Scalar>> projected, const Vector<Scalar>& logits);

/// Token r becomes spatial position (r / w, r % w).
template <typename Scalar>
FeatureMap<Scalar> tokens_to_map(const RowMatrix<Scalar>& tokens, Eigen::Index h, Eigen::Index w);

template <typename Scalar>
RowMatrix<Scalar> map_to_tokens(const FeatureMap<Scalar>& map);

template <typename Scalar>
void batch_norm_inplace(FeatureMap<Scalar>& x, const BatchNorm<Scalar>& bn);

template <typename Scalar>
void relu_inplace(FeatureMap<Scalar>& x);

template <typename Scalar>
FeatureMap<Scalar> depthwise_conv3x3(const FeatureMap<Scalar>& x, const DepthwiseConv<Scalar>& conv);

/// Stride-1 convolution with zero padding of kernel / 2 (kernel 1 or 3).
template <typename Scalar>
FeatureMap<Scalar> conv2d(const FeatureMap<Scalar>& x, const Conv2d<Scalar>& conv);

/// ReLU(F + BN(DWConv3x3(F))).
template <typename Scalar>
FeatureMap<Scalar> spatial_detail_enhancer(const FeatureMap<Scalar>& f, const DepthwiseConv<Scalar>& conv,
                                           const BatchNorm<Scalar>& bn);

/// Bilinear sample of every channel at (x, y) in input pixel units with the
/// coordinates clamped to the image.
struct BilinearTap {
  std::array<Eigen::Index, 4> index;
  std::array<double, 4> weight;
};
BilinearTap bilinear_tap(double x, double y, Eigen::Index h, Eigen::Index w);

/// Dynamic x2 upsampling: a pointwise generator predicts 8 offset channels,
/// scaled by 0.25 and pixel-shuffled into one (dx, dy) per output pixel, which
/// displaces the half-pixel-center base grid before bilinear resampling.
template <typename Scalar>
FeatureMap<Scalar> dysample2x(const FeatureMap<Scalar>& x, const Conv2d<Scalar>& offset_generator);

/// The x16 path: two stages of (block, block, refine), where a block is
/// ReLU(BN(Conv3x3(DySample x2))) and a refine is ReLU(BN(Conv3x3)).
template <typename Scalar>
FeatureMap<Scalar> upsample16(const FeatureMap<Scalar>& x, const DecoderParams<Scalar>& params);

/// ReLU(Conv1x1(ReLU(Conv3x3(F)))), one output channel.
template <typename Scalar>
FeatureMap<Scalar> head(const FeatureMap<Scalar>& f, const DecoderParams<Scalar>& params);

}  // namespace depthkit::sdt
