#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "depthkit/sdt/config.hpp"
#include "depthkit/sdt/tensor.hpp"

namespace depthkit::sdt {

struct TokenLayer {
  std::uint16_t index = 0;
  Vector<float> cls;          // D
  RowMatrix<float> tokens;    // N_p x D
};

/// Encoder features from four intermediate layers on a grid_h x grid_w patch grid.
struct TokenSet {
  std::vector<TokenLayer> layers;
  Eigen::Index grid_h = 0;
  Eigen::Index grid_w = 0;

  Eigen::Index num_patches() const { return grid_h * grid_w; }
  Eigen::Index dim() const { return layers.empty() ? 0 : layers.front().tokens.cols(); }

  /// Throws ShapeError unless there are four layers sharing N_p = grid_h * grid_w and D.
  void validate() const;
};

/// Little-endian dump: "SDTK", u16 version = 1, u16 n_layers = 4, u8 has_cls = 1,
/// then per layer u16 layer_index, u32 N_p, u32 D, u16 grid_h, u16 grid_w,
/// D float32 class token, N_p * D float32 tokens (row-major).
TokenSet read_tokens(const std::filesystem::path& path);
TokenSet parse_tokens(std::string_view bytes, const std::string& context = "token dump");
void write_tokens(const std::filesystem::path& path, const TokenSet& tokens);
std::string serialize_tokens(const TokenSet& tokens);

/// Standard-normal tokens for benchmarking and tests.
TokenSet random_tokens(const DecoderConfig& config, Eigen::Index grid_h, Eigen::Index grid_w,
                       std::uint64_t seed);

}  // namespace depthkit::sdt
