#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "depthkit/sdt/config.hpp"
#include "depthkit/sdt/tensor.hpp"

namespace depthkit::sdt {

/// Dense layer, weight is out x in.
template <typename Scalar>
struct Linear {
  RowMatrix<Scalar> weight;
  Vector<Scalar> bias;
};

/// Dense 2-D convolution with stride 1 and "same" zero padding. `weight` is
/// out x (in * kernel * kernel) in (in, ky, kx) order; `bias` may be empty.
template <typename Scalar>
struct Conv2d {
  int kernel = 3;
  RowMatrix<Scalar> weight;
  Vector<Scalar> bias;

  Eigen::Index out_channels() const { return weight.rows(); }
  Eigen::Index in_channels() const { return weight.cols() / (kernel * kernel); }
};

/// Per-channel 3x3 convolution without bias, weight is channels x 9.
template <typename Scalar>
struct DepthwiseConv {
  RowMatrix<Scalar> weight;
};

/// Inference-mode batch normalization with stored statistics.
template <typename Scalar>
struct BatchNorm {
  Vector<Scalar> gamma, beta, running_mean, running_var;
};

template <typename Scalar>
struct DecoderParams {
  DecoderConfig config;
  // Token projection per encoder layer: (spatial token, class token) -> width.
  std::array<Linear<Scalar>, kNumLayers> projections;
  Vector<Scalar> fusion_logits;
  DepthwiseConv<Scalar> sde_conv;
  BatchNorm<Scalar> sde_bn;
  // Pointwise offset generators, one per dynamic upsampler.
  std::array<Conv2d<Scalar>, kNumUpsamplers> offset_generators;
  // Bias-free 3x3 convolutions of the upsampler, each followed by its BN.
  std::array<Conv2d<Scalar>, kNumUpsampleConvs> upsample_convs;
  std::array<BatchNorm<Scalar>, kNumUpsampleConvs> upsample_bns;
  Conv2d<Scalar> head_conv;
  Conv2d<Scalar> head_out;
};

/// Visits every array of `params` in a fixed order as
/// fn(name, array, learnable). Batch-norm running statistics are the only
/// non-learnable arrays.
template <typename Params, typename Fn>
void for_each_array(Params& params, Fn&& fn) {
  for (int i = 0; i < kNumLayers; ++i) {
    const std::string p = "proj" + std::to_string(i);
    fn(p + ".weight", params.projections[i].weight, true);
    fn(p + ".bias", params.projections[i].bias, true);
  }
  fn(std::string("fusion.logits"), params.fusion_logits, true);
  auto bn = [&fn](const std::string& prefix, auto& norm) {
    fn(prefix + ".gamma", norm.gamma, true);
    fn(prefix + ".beta", norm.beta, true);
    fn(prefix + ".running_mean", norm.running_mean, false);
    fn(prefix + ".running_var", norm.running_var, false);
  };
  fn(std::string("sde.dwconv.weight"), params.sde_conv.weight, true);
  bn("sde.bn", params.sde_bn);
  for (int i = 0; i < kNumUpsamplers; ++i) {
    const std::string p = "upsample.offset" + std::to_string(i);
    fn(p + ".weight", params.offset_generators[i].weight, true);
    fn(p + ".bias", params.offset_generators[i].bias, true);
  }
  for (int i = 0; i < kNumUpsampleConvs; ++i) {
    const std::string p = "upsample.conv" + std::to_string(i);
    fn(p + ".weight", params.upsample_convs[i].weight, true);
    bn(p + ".bn", params.upsample_bns[i]);
  }
  fn(std::string("head.conv.weight"), params.head_conv.weight, true);
  fn(std::string("head.conv.bias"), params.head_conv.bias, true);
  fn(std::string("head.out.weight"), params.head_out.weight, true);
  fn(std::string("head.out.bias"), params.head_out.bias, true);
}

/// Parameters with the documented initial values: zero fusion logits, zero
/// offset generators, weights uniform in +-sqrt(6 / fan_in), zero biases and
/// identity batch norms. Same config and seed give identical parameters.
template <typename Scalar>
DecoderParams<Scalar> init_params(const DecoderConfig& config, std::uint64_t seed);

/// All-zero parameters with the correct shapes (BN variance 1 so BN stays finite).
template <typename Scalar>
DecoderParams<Scalar> zero_params(const DecoderConfig& config);

template <typename To, typename From>
DecoderParams<To> cast_params(const DecoderParams<From>& params) {
  DecoderParams<To> out = zero_params<To>(params.config);
  std::vector<const From*> sources;
  for_each_array(params, [&](const std::string&, const auto& a, bool) { sources.push_back(a.data()); });
  std::size_t k = 0;
  for_each_array(out, [&](const std::string&, auto& a, bool) {
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = static_cast<To>(sources[k][i]);
    ++k;
  });
  return out;
}

/// Learnable scalar count (weights, biases, logits, BN affine).
std::int64_t count_params(const DecoderConfig& config);

/// Binary parameter file: "SDTP", u16 version, u32 d_enc, width, patch,
/// head_mid, then per array (visit order) u32 length and float32 values,
/// all little-endian.
void save_params(const std::filesystem::path& path, const DecoderParams<float>& params);
DecoderParams<float> load_params(const std::filesystem::path& path, const DecoderConfig& config);

}  // namespace depthkit::sdt
