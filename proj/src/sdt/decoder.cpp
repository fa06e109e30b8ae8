#include "depthkit/sdt/decoder.hpp"

#include "depthkit/error.hpp"

namespace depthkit::sdt {

template <typename Scalar>
FeatureMap<Scalar> encode_tokens(const TokenSet& tokens, const DecoderParams<Scalar>& params) {
  tokens.validate();
  if (tokens.dim() != params.config.d_enc) {
    throw ShapeError("tokens have width " + std::to_string(tokens.dim()) + " but the decoder expects " +
                     std::to_string(params.config.d_enc));
  }
  std::array<RowMatrix<Scalar>, kNumLayers> projected;
  for (int l = 0; l < kNumLayers; ++l) {
    const TokenLayer& layer = tokens.layers[static_cast<std::size_t>(l)];
    projected[static_cast<std::size_t>(l)] =
        project_layer<Scalar>(layer.tokens.template cast<Scalar>(), layer.cls.template cast<Scalar>(),
                              params.projections[static_cast<std::size_t>(l)]);
  }
  const RowMatrix<Scalar> fused = fuse<Scalar>(projected, params.fusion_logits);
  return spatial_detail_enhancer(tokens_to_map(fused, tokens.grid_h, tokens.grid_w), params.sde_conv,
                                 params.sde_bn);
}

template <typename Scalar>
Image<Scalar> forward(const TokenSet& tokens, const DecoderParams<Scalar>& params) {
  FeatureMap<Scalar> features = encode_tokens(tokens, params);
  features = upsample16(features, params);
  const FeatureMap<Scalar> depth = head(features, params);
  return depth.plane(0).array();
}

template FeatureMap<float> encode_tokens<float>(const TokenSet&, const DecoderParams<float>&);
template FeatureMap<double> encode_tokens<double>(const TokenSet&, const DecoderParams<double>&);
template Image<float> forward<float>(const TokenSet&, const DecoderParams<float>&);
template Image<double> forward<double>(const TokenSet&, const DecoderParams<double>&);

}  // namespace depthkit::sdt
