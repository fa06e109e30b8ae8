#pragma once

#include <array>
#include <string>
#include <string_view>

namespace depthkit::sdt {

inline constexpr int kNumLayers = 4;
inline constexpr int kPatch = 16;
inline constexpr int kDefaultWidth = 256;
/// Each dynamic upsampler doubles the resolution; four of them give the patch size.
inline constexpr int kUpsampleFactor = 2;
inline constexpr int kNumUpsamplers = 4;
inline constexpr int kNumUpsampleConvs = 6;
/// Offset generator output: an (x, y) pair per sub-pixel of the 2x2 output block.
inline constexpr int kOffsetChannels = 2 * kUpsampleFactor * kUpsampleFactor;
inline constexpr double kOffsetRange = 0.25;
inline constexpr double kBatchNormEpsilon = 1e-5;

/// Structural hyperparameters of the decoder head plus the encoder geometry it
/// is paired with (the latter only feeds the FLOPs estimate).
struct DecoderConfig {
  std::string name = "custom";
  int d_enc = 384;
  int width = kDefaultWidth;
  int patch = kPatch;
  int head_mid = kDefaultWidth / 2;
  std::array<int, kNumLayers> layer_indices{2, 5, 8, 11};
  int encoder_depth = 12;

  /// Throws ConfigError on negative sizes or a patch other than 16.
  void validate() const;
};

/// Decoder at `width` channels with the head's hidden width set to width / 2.
DecoderConfig make_config(int d_enc, int width = kDefaultWidth);

/// ViT-S/B/L pairings ("s", "b", "l"): encoder widths 384/768/1024.
DecoderConfig preset(std::string_view name);

}  // namespace depthkit::sdt
