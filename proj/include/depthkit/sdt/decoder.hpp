#pragma once

#include "depthkit/depthio.hpp"
#include "depthkit/sdt/layers.hpp"
#include "depthkit/sdt/params.hpp"
#include "depthkit/sdt/tokens.hpp"

namespace depthkit::sdt {

/// Full decoder pass: project each layer with its class token, fuse, reshape to
/// the patch grid, enhance, upsample x16 and predict a non-negative disparity
/// map of (16 * grid_h) x (16 * grid_w). Pure: the same inputs always give the
/// same bits.
template <typename Scalar>
Image<Scalar> forward(const TokenSet& tokens, const DecoderParams<Scalar>& params);

/// The fused, enhanced feature map before upsampling (width x grid_h x grid_w).
template <typename Scalar>
FeatureMap<Scalar> encode_tokens(const TokenSet& tokens, const DecoderParams<Scalar>& params);

}  // namespace depthkit::sdt
