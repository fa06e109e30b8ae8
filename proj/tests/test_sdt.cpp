#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>

#include "depthkit/error.hpp"
#include "depthkit/sdt/bench.hpp"
#include "depthkit/sdt/counters.hpp"
#include "depthkit/sdt/decoder.hpp"
#include "oracle/decoder_oracle.hpp"

namespace fs = std::filesystem;
using namespace depthkit;
using namespace depthkit::sdt;

namespace {

FeatureMap<double> random_map(std::mt19937_64& rng, int c, int h, int w) {
  std::uniform_real_distribution<double> u(-1, 1);
  FeatureMap<double> m{h, w, RowMatrix<double>(c, h * w)};
  for (Eigen::Index i = 0; i < m.data.size(); ++i) m.data.data()[i] = u(rng);
  return m;
}

oracle::Tensor to_tensor(const FeatureMap<double>& m) {
  oracle::Tensor t(static_cast<int>(m.channels()), static_cast<int>(m.height), static_cast<int>(m.width));
  for (int c = 0; c < t.c; ++c) {
    for (int y = 0; y < t.h; ++y) {
      for (int x = 0; x < t.w; ++x) t.at(c, y, x) = m.data(c, y * t.w + x);
    }
  }
  return t;
}

double max_diff(const FeatureMap<double>& a, const oracle::Tensor& b) {
  double worst = 0;
  for (int c = 0; c < b.c; ++c) {
    for (int y = 0; y < b.h; ++y) {
      for (int x = 0; x < b.w; ++x) worst = std::max(worst, std::abs(a.data(c, y * b.w + x) - b.at(c, y, x)));
    }
  }
  return worst;
}

Conv2d<double> random_conv(std::mt19937_64& rng, int k, int in, int out, bool bias) {
  std::uniform_real_distribution<double> u(-1, 1);
  Conv2d<double> c{k, RowMatrix<double>(out, in * k * k), bias ? Vector<double>(out) : Vector<double>()};
  for (Eigen::Index i = 0; i < c.weight.size(); ++i) c.weight.data()[i] = u(rng);
  for (Eigen::Index i = 0; i < c.bias.size(); ++i) c.bias(i) = u(rng);
  return c;
}

DecoderParams<double> randomized_params(const DecoderConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  auto p = init_params<double>(config, seed);
  for_each_array(p, [&](const std::string& name, auto& a, bool) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      a.data()[i] = name.find("running_var") != std::string::npos ? 0.5 + 0.25 * (u(rng) + 1) : 0.5 * u(rng);
    }
  });
  return p;
}

TEST(Layers, GeluKnownValues) {
  EXPECT_DOUBLE_EQ(gelu(0.0), 0.0);
  EXPECT_NEAR(gelu(1.0), 0.8413447460685429, 1e-15);
  EXPECT_NEAR(gelu(-1.0), -0.15865525393145707, 1e-15);
  EXPECT_NEAR(gelu(3.0f), 2.9959502f, 1e-6f);
}

TEST(Layers, SoftmaxAndFuse) {
  Vector<double> logits = Vector<double>::Zero(4);
  EXPECT_TRUE(softmax(logits).isApprox(Vector<double>::Constant(4, 0.25)));
  logits << 1000, 1000, -1000, 0;
  const Vector<double> a = softmax(logits);
  EXPECT_NEAR(a(0), 0.5, 1e-15);
  EXPECT_NEAR(a.sum(), 1.0, 1e-15);

  std::vector<RowMatrix<double>> layers;
  for (int l = 0; l < 4; ++l) layers.push_back(RowMatrix<double>::Constant(3, 2, l + 1));
  const RowMatrix<double> fused = fuse<double>(layers, Vector<double>::Zero(4));
  EXPECT_TRUE(fused.isApprox(RowMatrix<double>::Constant(3, 2, 2.5)));
}

TEST(Layers, ProjectionConcatenatesOwnClassToken) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  const int n = 5, d = 3, w = 4;
  RowMatrix<double> tokens(n, d);
  Vector<double> cls(d);
  Linear<double> lin{RowMatrix<double>(w, 2 * d), Vector<double>(w)};
  for (Eigen::Index i = 0; i < tokens.size(); ++i) tokens.data()[i] = u(rng);
  for (Eigen::Index i = 0; i < cls.size(); ++i) cls(i) = u(rng);
  for (Eigen::Index i = 0; i < lin.weight.size(); ++i) lin.weight.data()[i] = u(rng);
  for (Eigen::Index i = 0; i < lin.bias.size(); ++i) lin.bias(i) = u(rng);
  const RowMatrix<double> out = project_layer(tokens, cls, lin);
  for (int r = 0; r < n; ++r) {
    Vector<double> cat(2 * d);
    cat << tokens.row(r).transpose(), cls;
    const Vector<double> ref = lin.weight * cat + lin.bias;
    for (int o = 0; o < w; ++o) EXPECT_NEAR(out(r, o), oracle::gelu(ref(o)), 1e-14);
  }
  EXPECT_THROW(project_layer(tokens, Vector<double>(Vector<double>::Zero(2)), lin), ShapeError);
}

TEST(Layers, TokensToMapIsRowMajor) {
  RowMatrix<double> t(6, 2);
  for (int r = 0; r < 6; ++r) t.row(r) << r, 10 + r;
  const FeatureMap<double> m = tokens_to_map(t, 2, 3);
  EXPECT_EQ(m(0, 1, 2), 5.0);  // token 5 at (5 / 3, 5 % 3)
  EXPECT_EQ(m(1, 1, 0), 13.0);
  EXPECT_TRUE(map_to_tokens(m).isApprox(t));
  EXPECT_THROW(tokens_to_map(t, 4, 2), ShapeError);
}

TEST(Layers, ConvolutionsMatchOracleAcrossTiles) {
  std::mt19937_64 rng(2);
  // 64 channels x 96 wide exceeds one im2col tile over 130 rows.
  const FeatureMap<double> x = random_map(rng, 64, 130, 96);
  const Conv2d<double> k3 = random_conv(rng, 3, 64, 5, true);
  EXPECT_LT(max_diff(conv2d(x, k3), oracle::conv(to_tensor(x), k3)), 1e-11);
  const FeatureMap<double> small = random_map(rng, 3, 4, 1);
  const Conv2d<double> k1 = random_conv(rng, 1, 3, 2, false);
  EXPECT_LT(max_diff(conv2d(small, k1), oracle::conv(to_tensor(small), k1)), 1e-14);
  const Conv2d<double> k3n = random_conv(rng, 3, 3, 2, false);
  EXPECT_LT(max_diff(conv2d(small, k3n), oracle::conv(to_tensor(small), k3n)), 1e-14);
  EXPECT_THROW(conv2d(small, k3), ShapeError);
}

TEST(Layers, DepthwiseEnhancerMatchesOracle) {
  std::mt19937_64 rng(3);
  DecoderConfig c = make_config(4, 6);
  const auto p = randomized_params(c, 3);
  const FeatureMap<double> f = random_map(rng, 6, 5, 7);
  const FeatureMap<double> y = spatial_detail_enhancer(f, p.sde_conv, p.sde_bn);
  // Oracle: dwconv as a dense conv with a diagonal kernel.
  Conv2d<double> dense{3, RowMatrix<double>::Zero(6, 6 * 9), Vector<double>()};
  for (int ch = 0; ch < 6; ++ch) {
    for (int k = 0; k < 9; ++k) dense.weight(ch, ch * 9 + k) = p.sde_conv.weight(ch, k);
  }
  oracle::Tensor t = oracle::conv(to_tensor(f), dense);
  oracle::bn(t, p.sde_bn);
  const oracle::Tensor in = to_tensor(f);
  for (std::size_t i = 0; i < t.v.size(); ++i) t.v[i] = std::max(0.0, t.v[i] + in.v[i]);
  EXPECT_LT(max_diff(y, t), 1e-13);
}

TEST(Layers, BilinearTapClampsAndWeightsSumToOne) {
  const BilinearTap in = bilinear_tap(1.25, 0.5, 3, 4);
  EXPECT_EQ(in.index[0], 1);
  EXPECT_EQ(in.index[3], 6);
  EXPECT_NEAR(in.weight[0], 0.75 * 0.5, 1e-15);
  const BilinearTap out = bilinear_tap(-3.0, 9.0, 3, 4);
  EXPECT_EQ(out.index[0], 2 * 4 + 0);
  EXPECT_NEAR(out.weight[0] + out.weight[1] + out.weight[2] + out.weight[3], 1.0, 1e-15);
  EXPECT_NEAR(out.weight[0], 1.0, 1e-15);
}

TEST(Layers, DynamicUpsamplingWithOffsetsMatchesOracle) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 10; ++t) {
    const int c = 1 + t % 4;
    const FeatureMap<double> x = random_map(rng, c, 2 + t % 5, 3 + t % 4);
    Conv2d<double> gen = random_conv(rng, 1, c, 8, true);
    gen.weight *= 3.0;  // offsets large enough to leave the cell and hit the clamp
    const FeatureMap<double> y = dysample2x(x, gen);
    ASSERT_EQ(y.height, 2 * x.height);
    ASSERT_EQ(y.width, 2 * x.width);
    EXPECT_LT(max_diff(y, oracle::dysample(to_tensor(x), gen)), 1e-13);
  }
}

TEST(Decoder, ForwardMatchesOracleInDouble) {
  const DecoderConfig c = make_config(10, 6);
  const auto p = randomized_params(c, 5);
  const TokenSet tokens = random_tokens(c, 3, 2, 5);
  const Image<double> out = forward(tokens, p);
  ASSERT_EQ(out.rows(), 48);
  ASSERT_EQ(out.cols(), 32);
  const oracle::Tensor ref = oracle::forward(tokens, p);
  double worst = 0;
  for (int y = 0; y < 48; ++y) {
    for (int x = 0; x < 32; ++x) worst = std::max(worst, std::abs(out(y, x) - ref.at(0, y, x)));
  }
  EXPECT_LT(worst, 1e-12);
  EXPECT_GE(out.minCoeff(), 0.0);
}

TEST(Decoder, FloatTracksDoubleAndIsDeterministic) {
  const DecoderConfig c = make_config(16, 8);
  const auto pd = randomized_params(c, 6);
  const auto pf = cast_params<float>(pd);
  const TokenSet tokens = random_tokens(c, 2, 3, 6);
  const Image<double> d = forward(tokens, pd);
  const Image<float> f1 = forward(tokens, pf);
  const Image<float> f2 = forward(tokens, pf);
  EXPECT_TRUE((f1 == f2).all());
  EXPECT_LT((f1.cast<double>() - d).abs().maxCoeff(), 1e-4 * (1 + d.abs().maxCoeff()));
}

TEST(Decoder, RejectsMismatchedTokens) {
  const DecoderConfig c = make_config(16, 8);
  const auto p = init_params<float>(c, 1);
  EXPECT_THROW(forward(random_tokens(make_config(12, 8), 2, 2, 1), p), ShapeError);
  TokenSet bad = random_tokens(c, 2, 2, 1);
  bad.layers.pop_back();
  EXPECT_THROW(forward(bad, p), ShapeError);
}

TEST(Params, InitialValues) {
  const DecoderConfig c = preset("s");
  const auto p = init_params<float>(c, 7);
  EXPECT_TRUE((p.fusion_logits.array() == 0).all());
  for (const auto& g : p.offset_generators) {
    EXPECT_TRUE((g.weight.array() == 0).all());
    EXPECT_TRUE((g.bias.array() == 0).all());
  }
  const double bound = std::sqrt(6.0 / (9.0 * c.width));
  EXPECT_LE(p.upsample_convs[0].weight.cwiseAbs().maxCoeff(), bound);
  EXPECT_GT(p.upsample_convs[0].weight.cwiseAbs().maxCoeff(), 0.9 * bound);
  EXPECT_TRUE((p.upsample_bns[2].gamma.array() == 1).all());
  EXPECT_TRUE((p.head_conv.bias.array() == 0).all());
  const auto q = init_params<float>(c, 7);
  EXPECT_TRUE((p.projections[3].weight.array() == q.projections[3].weight.array()).all());
  const auto r = init_params<float>(c, 8);
  EXPECT_FALSE((p.projections[3].weight.array() == r.projections[3].weight.array()).all());
}

TEST(Params, CountMatchesEnumerationForManyShapes) {
  for (int d : {1, 7, 384}) {
    for (int w : {0, 1, 2, 8, 256}) {
      const DecoderConfig c = make_config(d, w);
      const auto params = zero_params<float>(c);
      std::int64_t n = 0;
      for_each_array(params, [&](const std::string&, const auto& a, bool learnable) {
        if (learnable) n += a.size();
      });
      EXPECT_EQ(count_params(c), n) << "d=" << d << " w=" << w;
    }
  }
}

TEST(Params, ReductionAgainstReferenceCounts) {
  for (const char* name : {"s", "b", "l"}) {
    const double ratio = static_cast<double>(count_params(preset(name))) / (dpt_reference_params_millions(name) * 1e6);
    EXPECT_LE(ratio, 0.15) << name;
  }
  EXPECT_THROW(preset("xl"), ConfigError);
}

TEST(Params, SaveLoadRoundTripAndShapeCheck) {
  const fs::path path = fs::temp_directory_path() / "depthkit_params.sdtp";
  const DecoderConfig c = make_config(12, 8);
  const auto p = cast_params<float>(randomized_params(c, 9));
  save_params(path, p);
  const auto q = load_params(path, c);
  std::vector<float> a, b;
  for_each_array(p, [&](const std::string&, const auto& x, bool) { a.insert(a.end(), x.data(), x.data() + x.size()); });
  for_each_array(q, [&](const std::string&, const auto& x, bool) { b.insert(b.end(), x.data(), x.data() + x.size()); });
  EXPECT_EQ(a, b);
  EXPECT_THROW(load_params(path, make_config(12, 10)), ShapeError);
  fs::remove(path);
}

TEST(Tokens, ByteLayoutAndRoundTrip) {
  const DecoderConfig c = make_config(3, 4);
  TokenSet t = random_tokens(c, 2, 5, 3);
  for (int l = 0; l < 4; ++l) t.layers[static_cast<std::size_t>(l)].index = static_cast<std::uint16_t>(2 + 3 * l);
  const std::string bytes = serialize_tokens(t);
  ASSERT_EQ(bytes.size(), 9u + 4 * (14 + 4 * (3 + 10 * 3)));
  EXPECT_EQ(bytes.substr(0, 4), "SDTK");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[6], 4);
  EXPECT_EQ(bytes[8], 1);
  EXPECT_EQ(bytes[9], 2);                     // first layer index
  EXPECT_EQ(static_cast<unsigned char>(bytes[11]), 10u);  // N_p
  EXPECT_EQ(bytes[15], 3);                    // D
  EXPECT_EQ(bytes[19], 2);                    // grid_h
  EXPECT_EQ(bytes[21], 5);                    // grid_w
  float first_cls;
  std::memcpy(&first_cls, bytes.data() + 23, 4);
  EXPECT_EQ(first_cls, t.layers[0].cls(0));

  const TokenSet back = parse_tokens(bytes);
  EXPECT_EQ(back.grid_h, 2);
  EXPECT_EQ(back.grid_w, 5);
  for (int l = 0; l < 4; ++l) {
    EXPECT_EQ(back.layers[static_cast<std::size_t>(l)].index, t.layers[static_cast<std::size_t>(l)].index);
    EXPECT_TRUE((back.layers[static_cast<std::size_t>(l)].tokens.array() ==
                 t.layers[static_cast<std::size_t>(l)].tokens.array())
                    .all());
  }
}

TEST(Tokens, MalformedDumpsRejected) {
  const std::string good = serialize_tokens(random_tokens(make_config(2, 4), 1, 2, 1));
  EXPECT_THROW(parse_tokens("XXXX" + good.substr(4)), FormatError);
  EXPECT_THROW(parse_tokens(good.substr(0, good.size() - 1)), FormatError);
  EXPECT_THROW(parse_tokens(good + "z"), FormatError);
  std::string no_cls = good;
  no_cls[8] = 0;
  EXPECT_THROW(parse_tokens(no_cls), FormatError);
}

TEST(Flops, ComponentsFromFirstPrinciples) {
  const DecoderConfig c = preset("s");
  const FlopsBreakdown f = count_flops_breakdown(c, 256, 256, false);
  const double hw = 16.0 * 16.0, W = 256, M = 128;
  EXPECT_DOUBLE_EQ(f.projection, 4 * 2 * hw * 768 * W);
  EXPECT_DOUBLE_EQ(f.sde, 2 * hw * W * 9);
  EXPECT_DOUBLE_EQ(f.offset_generators, 2 * W * 8 * hw * (1 + 4 + 16 + 64));
  EXPECT_DOUBLE_EQ(f.upsample_convs, 2 * 9 * W * W * hw * (4 + 16 + 16 + 64 + 256 + 256));
  EXPECT_DOUBLE_EQ(f.head, 2 * 256.0 * 256.0 * (9 * W * M + M));
  EXPECT_EQ(f.encoder, 0.0);
}

TEST(Flops, DecoderScalesExactlyWithPixels) {
  for (const char* name : {"s", "b", "l"}) {
    const DecoderConfig c = preset(name);
    EXPECT_EQ(count_flops(c, 512, 512, false) / count_flops(c, 256, 256, false), 4.0);
    EXPECT_EQ(count_flops(c, 1024, 1024, false) / count_flops(c, 512, 512, false), 4.0);
  }
  EXPECT_THROW(count_flops(preset("s"), 250, 256, false), ConfigError);
  EXPECT_EQ(count_flops(make_config(384, 0), 256, 256, false), 0.0);
}

TEST(Flops, VitEstimate) {
  const DecoderConfig c = preset("b");
  const double n = 257, d = 768;
  const double expect = 12 * (2 * (4 * n * d * d + 2 * n * n * d) + 16 * n * d * d) + 2 * 256 * 768 * d;
  EXPECT_DOUBLE_EQ(vit_encoder_flops(c, 256, 256), expect);
  EXPECT_DOUBLE_EQ(count_flops(c, 256, 256, true) - count_flops(c, 256, 256, false), expect);
}

TEST(Bench, ReportsMeanAndSpread) {
  const BenchResult r = bench(make_config(16, 8), 32, 32, 3, 1, 0);
  EXPECT_EQ(r.runs, 3);
  EXPECT_GT(r.mean_ms, 0.0);
  EXPECT_GE(r.std_ms, 0.0);
  EXPECT_NE(format_latency(r).find(" ms"), std::string::npos);
  EXPECT_THROW(bench(make_config(16, 8), 30, 32, 1), ConfigError);
}

}  // namespace
