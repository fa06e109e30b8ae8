#pragma once

#include <string>
#include <string_view>

#include "depthkit/sdt/config.hpp"

namespace depthkit::sdt {

/// FLOPs per component at one input resolution. One multiply-add counts as 2
/// FLOPs; convolutions cost 2*H*W*C_in*C_out*k^2/groups and linear layers
/// 2*n*d_in*d_out. Elementwise work (BN, activations, sampling) is not counted.
struct FlopsBreakdown {
  double projection = 0.0;
  double sde = 0.0;
  double offset_generators = 0.0;
  double upsample_convs = 0.0;
  double head = 0.0;
  double encoder = 0.0;  ///< 0 unless the encoder estimate was requested

  double decoder() const { return projection + sde + offset_generators + upsample_convs + head; }
  double total() const { return decoder() + encoder; }
};

/// Throws ConfigError when H or W is not a positive multiple of the patch size.
FlopsBreakdown count_flops_breakdown(const DecoderConfig& config, long height, long width,
                                     bool include_encoder);

double count_flops(const DecoderConfig& config, long height, long width, bool include_encoder);

/// Standard ViT estimate for n = N_p + 1 tokens of width D over `encoder_depth`
/// blocks: per block 2*(4nD^2 + 2n^2 D) for attention plus 2*2*n*D*4D for the
/// MLP, plus the patch embedding 2*N_p*(3*16*16)*D.
double vit_encoder_flops(const DecoderConfig& config, long height, long width);

/// Published parameter counts of the DPT decoder paired with ViT-S/B/L, in
/// millions. Reference constants only; used to express the size reduction.
double dpt_reference_params_millions(std::string_view preset_name);

/// Human-readable convention summary printed with reports and --version.
std::string counting_conventions();

}  // namespace depthkit::sdt
