#include "depthkit/sdt/tokens.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "depthkit/error.hpp"
#include "depthkit/util/atomic_file.hpp"
#include "depthkit/util/binary.hpp"

namespace depthkit::sdt {
namespace {
constexpr std::string_view kMagic = "SDTK";
constexpr std::uint16_t kVersion = 1;
}  // namespace

void TokenSet::validate() const {
  if (layers.size() != kNumLayers) {
    throw ShapeError("token set has " + std::to_string(layers.size()) + " layers, expected 4");
  }
  if (grid_h <= 0 || grid_w <= 0) throw ShapeError("token grid must be at least 1x1");
  const Eigen::Index d = dim();
  if (d <= 0) throw ShapeError("token width must be positive");
  for (const auto& l : layers) {
    if (l.tokens.rows() != num_patches() || l.tokens.cols() != d || l.cls.size() != d) {
      throw ShapeError("token layer " + std::to_string(l.index) + " does not match the " +
                       std::to_string(grid_h) + "x" + std::to_string(grid_w) + "x" + std::to_string(d) +
                       " grid");
    }
  }
}

TokenSet parse_tokens(std::string_view bytes, const std::string& context) {
  LittleEndianReader in(bytes, context);
  if (in.get_bytes(4) != kMagic) throw FormatError(context + ": bad magic, expected SDTK");
  const auto version = in.get<std::uint16_t>();
  if (version != kVersion) throw FormatError(context + ": unsupported version " + std::to_string(version));
  const auto n_layers = in.get<std::uint16_t>();
  if (n_layers != kNumLayers) {
    throw FormatError(context + ": expected 4 layers, found " + std::to_string(n_layers));
  }
  if (in.get<std::uint8_t>() != 1) throw FormatError(context + ": class tokens are required");

  TokenSet set;
  for (int l = 0; l < kNumLayers; ++l) {
    TokenLayer layer;
    layer.index = in.get<std::uint16_t>();
    const auto n_p = in.get<std::uint32_t>();
    const auto d = in.get<std::uint32_t>();
    const auto gh = in.get<std::uint16_t>();
    const auto gw = in.get<std::uint16_t>();
    if (static_cast<std::uint64_t>(gh) * gw != n_p) {
      throw FormatError(context + ": layer " + std::to_string(l) + " grid " + std::to_string(gh) + "x" +
                        std::to_string(gw) + " does not hold " + std::to_string(n_p) + " tokens");
    }
    if (static_cast<std::uint64_t>(n_p + 1) * d * 4 > in.remaining()) {
      throw FormatError(context + ": layer " + std::to_string(l) + " is truncated");
    }
    if (l == 0) {
      set.grid_h = gh;
      set.grid_w = gw;
    } else if (gh != set.grid_h || gw != set.grid_w) {
      throw FormatError(context + ": layers disagree on the token grid");
    }
    layer.cls.resize(d);
    for (std::uint32_t i = 0; i < d; ++i) layer.cls(i) = in.get<float>();
    layer.tokens.resize(n_p, d);
    float* data = layer.tokens.data();
    for (std::uint64_t i = 0; i < static_cast<std::uint64_t>(n_p) * d; ++i) data[i] = in.get<float>();
    set.layers.push_back(std::move(layer));
  }
  if (in.remaining() != 0) throw FormatError(context + ": trailing bytes after the last layer");
  set.validate();
  return set;
}

TokenSet read_tokens(const std::filesystem::path& path) {
  return parse_tokens(read_binary_file(path.string()), path.string());
}

std::string serialize_tokens(const TokenSet& tokens) {
  tokens.validate();
  if (tokens.grid_h > std::numeric_limits<std::uint16_t>::max() ||
      tokens.grid_w > std::numeric_limits<std::uint16_t>::max()) {
    throw CapacityError("token grid does not fit the 16-bit header fields");
  }
  LittleEndianWriter out;
  out.put_bytes(kMagic);
  out.put(kVersion);
  out.put(static_cast<std::uint16_t>(kNumLayers));
  out.put(static_cast<std::uint8_t>(1));
  for (const auto& layer : tokens.layers) {
    out.put(layer.index);
    out.put(static_cast<std::uint32_t>(tokens.num_patches()));
    out.put(static_cast<std::uint32_t>(tokens.dim()));
    out.put(static_cast<std::uint16_t>(tokens.grid_h));
    out.put(static_cast<std::uint16_t>(tokens.grid_w));
    for (Eigen::Index i = 0; i < layer.cls.size(); ++i) out.put(layer.cls(i));
    for (Eigen::Index i = 0; i < layer.tokens.size(); ++i) out.put(layer.tokens.data()[i]);
  }
  return out.bytes();
}

void write_tokens(const std::filesystem::path& path, const TokenSet& tokens) {
  write_file_atomic(path, serialize_tokens(tokens));
}

TokenSet random_tokens(const DecoderConfig& config, Eigen::Index grid_h, Eigen::Index grid_w,
                       std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  // Box-Muller on raw draws keeps the values identical across standard libraries.
  auto uniform = [&engine] { return (static_cast<double>(engine() >> 11) + 0.5) * 0x1.0p-53; };
  auto normal = [&] {
    return static_cast<float>(std::sqrt(-2.0 * std::log(uniform())) * std::cos(2.0 * M_PI * uniform()));
  };
  TokenSet set;
  set.grid_h = grid_h;
  set.grid_w = grid_w;
  for (int l = 0; l < kNumLayers; ++l) {
    TokenLayer layer;
    layer.index = static_cast<std::uint16_t>(config.layer_indices[static_cast<std::size_t>(l)]);
    layer.cls.resize(config.d_enc);
    for (Eigen::Index i = 0; i < layer.cls.size(); ++i) layer.cls(i) = normal();
    layer.tokens = RowMatrix<float>(grid_h * grid_w, config.d_enc);
    for (Eigen::Index i = 0; i < layer.tokens.size(); ++i) layer.tokens.data()[i] = normal();
    set.layers.push_back(std::move(layer));
  }
  return set;
}

}  // namespace depthkit::sdt
