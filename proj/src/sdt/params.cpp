#include "depthkit/sdt/params.hpp"

#include <cmath>
#include <random>

#include "depthkit/error.hpp"
#include "depthkit/util/atomic_file.hpp"
#include "depthkit/util/binary.hpp"

namespace depthkit::sdt {

void DecoderConfig::validate() const {
  if (d_enc <= 0) throw ConfigError("encoder width must be positive");
  if (width < 0 || head_mid < 0) throw ConfigError("decoder widths must be non-negative");
  if (patch != kPatch) throw ConfigError("only patch size 16 is supported");
  if (encoder_depth < 0) throw ConfigError("encoder depth must be non-negative");
}

DecoderConfig make_config(int d_enc, int width) {
  DecoderConfig c;
  c.d_enc = d_enc;
  c.width = width;
  c.head_mid = width / 2;
  return c;
}

DecoderConfig preset(std::string_view name) {
  DecoderConfig c;
  if (name == "s") {
    c = make_config(384);
    c.layer_indices = {2, 5, 8, 11};
    c.encoder_depth = 12;
  } else if (name == "b") {
    c = make_config(768);
    c.layer_indices = {2, 5, 8, 11};
    c.encoder_depth = 12;
  } else if (name == "l") {
    c = make_config(1024);
    c.layer_indices = {4, 11, 17, 23};
    c.encoder_depth = 24;
  } else {
    throw ConfigError("unknown decoder config \"" + std::string(name) + "\" (expected s, b or l)");
  }
  c.name = std::string(name);
  return c;
}

namespace {

template <typename Scalar>
BatchNorm<Scalar> identity_bn(Eigen::Index channels) {
  return {Vector<Scalar>::Ones(channels), Vector<Scalar>::Zero(channels),
          Vector<Scalar>::Zero(channels), Vector<Scalar>::Ones(channels)};
}

template <typename Scalar>
Conv2d<Scalar> zero_conv(int kernel, Eigen::Index in, Eigen::Index out, bool bias) {
  Conv2d<Scalar> c;
  c.kernel = kernel;
  c.weight = RowMatrix<Scalar>::Zero(out, in * kernel * kernel);
  c.bias = bias ? Vector<Scalar>::Zero(out) : Vector<Scalar>();
  return c;
}

// Uniform doubles from raw 64-bit draws so parameters do not depend on the
// standard library's distribution implementation.
class UniformSource {
 public:
  explicit UniformSource(std::uint64_t seed) : engine_(seed) {}
  double operator()(double bound) {
    const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return bound * (2.0 * u - 1.0);
  }

 private:
  std::mt19937_64 engine_;
};

template <typename Derived>
void fill_uniform(Eigen::MatrixBase<Derived>& m, Eigen::Index fan_in, UniformSource& rng) {
  if (fan_in == 0) return;
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.derived().data()[i] = static_cast<typename Derived::Scalar>(rng(bound));
  }
}

}  // namespace

template <typename Scalar>
DecoderParams<Scalar> zero_params(const DecoderConfig& config) {
  config.validate();
  const Eigen::Index w = config.width;
  DecoderParams<Scalar> p;
  p.config = config;
  for (auto& proj : p.projections) {
    proj.weight = RowMatrix<Scalar>::Zero(w, 2 * config.d_enc);
    proj.bias = Vector<Scalar>::Zero(w);
  }
  p.fusion_logits = Vector<Scalar>::Zero(kNumLayers);
  p.sde_conv.weight = RowMatrix<Scalar>::Zero(w, 9);
  p.sde_bn = identity_bn<Scalar>(w);
  for (auto& g : p.offset_generators) g = zero_conv<Scalar>(1, w, kOffsetChannels, true);
  for (auto& c : p.upsample_convs) c = zero_conv<Scalar>(3, w, w, false);
  for (auto& bn : p.upsample_bns) bn = identity_bn<Scalar>(w);
  p.head_conv = zero_conv<Scalar>(3, w, config.head_mid, true);
  p.head_out = zero_conv<Scalar>(1, config.head_mid, 1, true);
  return p;
}

template <typename Scalar>
DecoderParams<Scalar> init_params(const DecoderConfig& config, std::uint64_t seed) {
  DecoderParams<Scalar> p = zero_params<Scalar>(config);
  UniformSource rng(seed);
  for (auto& proj : p.projections) fill_uniform(proj.weight, proj.weight.cols(), rng);
  fill_uniform(p.sde_conv.weight, 9, rng);
  for (auto& c : p.upsample_convs) fill_uniform(c.weight, c.weight.cols(), rng);
  fill_uniform(p.head_conv.weight, p.head_conv.weight.cols(), rng);
  fill_uniform(p.head_out.weight, p.head_out.weight.cols(), rng);
  return p;
}

template DecoderParams<float> zero_params<float>(const DecoderConfig&);
template DecoderParams<double> zero_params<double>(const DecoderConfig&);
template DecoderParams<float> init_params<float>(const DecoderConfig&, std::uint64_t);
template DecoderParams<double> init_params<double>(const DecoderConfig&, std::uint64_t);

std::int64_t count_params(const DecoderConfig& config) {
  config.validate();
  const std::int64_t d = config.d_enc;
  const std::int64_t w = config.width;
  const std::int64_t m = config.head_mid;
  const std::int64_t projection = kNumLayers * (2 * d * w + w);
  const std::int64_t fusion = kNumLayers;
  const std::int64_t sde = 9 * w + 2 * w;
  const std::int64_t offsets = kNumUpsamplers * (w * kOffsetChannels + kOffsetChannels);
  const std::int64_t convs = kNumUpsampleConvs * (9 * w * w + 2 * w);
  const std::int64_t head = 9 * w * m + m + m + 1;
  return projection + fusion + sde + offsets + convs + head;
}

namespace {
constexpr std::string_view kParamsMagic = "SDTP";
constexpr std::uint16_t kParamsVersion = 1;
}  // namespace

void save_params(const std::filesystem::path& path, const DecoderParams<float>& params) {
  LittleEndianWriter out;
  out.put_bytes(kParamsMagic);
  out.put(kParamsVersion);
  out.put(static_cast<std::uint32_t>(params.config.d_enc));
  out.put(static_cast<std::uint32_t>(params.config.width));
  out.put(static_cast<std::uint32_t>(params.config.patch));
  out.put(static_cast<std::uint32_t>(params.config.head_mid));
  for_each_array(params, [&](const std::string&, const auto& a, bool) {
    out.put(static_cast<std::uint32_t>(a.size()));
    for (Eigen::Index i = 0; i < a.size(); ++i) out.put(a.data()[i]);
  });
  write_file_atomic(path, out.bytes());
}

DecoderParams<float> load_params(const std::filesystem::path& path, const DecoderConfig& config) {
  const std::string bytes = read_binary_file(path.string());
  LittleEndianReader in(bytes, path.string());
  if (in.get_bytes(4) != kParamsMagic) throw FormatError(path.string() + ": not a parameter file");
  if (in.get<std::uint16_t>() != kParamsVersion) {
    throw FormatError(path.string() + ": unsupported parameter file version");
  }
  const auto d_enc = in.get<std::uint32_t>();
  const auto width = in.get<std::uint32_t>();
  const auto patch = in.get<std::uint32_t>();
  const auto head_mid = in.get<std::uint32_t>();
  if (static_cast<int>(d_enc) != config.d_enc || static_cast<int>(width) != config.width ||
      static_cast<int>(patch) != config.patch || static_cast<int>(head_mid) != config.head_mid) {
    throw ShapeError(path.string() + ": parameter file does not match the decoder config");
  }
  DecoderParams<float> params = zero_params<float>(config);
  for_each_array(params, [&](const std::string& name, auto& a, bool) {
    const auto n = in.get<std::uint32_t>();
    if (n != static_cast<std::uint32_t>(a.size())) {
      throw ShapeError(path.string() + ": array " + name + " has " + std::to_string(n) +
                       " values, expected " + std::to_string(a.size()));
    }
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = in.get<float>();
  });
  if (in.remaining() != 0) throw FormatError(path.string() + ": trailing bytes after parameters");
  return params;
}

}  // namespace depthkit::sdt
