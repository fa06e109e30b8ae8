#include "depthkit/sdt/bench.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#include "depthkit/error.hpp"
#include "depthkit/sdt/decoder.hpp"

namespace depthkit::sdt {

BenchResult bench(const DecoderConfig& config, long height, long width, int runs, int warmup,
                  std::uint64_t seed) {
  if (runs < 1) throw ConfigError("bench needs at least one run");
  if (height <= 0 || width <= 0 || height % config.patch != 0 || width % config.patch != 0) {
    throw ConfigError("bench resolution must be a positive multiple of the patch size");
  }
  const TokenSet tokens = random_tokens(config, height / config.patch, width / config.patch, seed);
  const DecoderParams<float> params = init_params<float>(config, seed);

  for (int i = 0; i < warmup; ++i) (void)forward(tokens, params);

  std::vector<double> ms;
  ms.reserve(static_cast<std::size_t>(runs));
  for (int i = 0; i < runs; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const Image<float> out = forward(tokens, params);
    const auto t1 = std::chrono::steady_clock::now();
    if (out.size() == 0) throw Error("bench: empty output");
    ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }

  BenchResult r;
  r.runs = runs;
  for (double v : ms) r.mean_ms += v;
  r.mean_ms /= runs;
  if (runs > 1) {
    double sq = 0.0;
    for (double v : ms) sq += (v - r.mean_ms) * (v - r.mean_ms);
    r.std_ms = std::sqrt(sq / (runs - 1));
  }
  return r;
}

std::string format_latency(const BenchResult& result) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f \xC2\xB1 %.2f ms", result.mean_ms, result.std_ms);
  return buf;
}

}  // namespace depthkit::sdt
