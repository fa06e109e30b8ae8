#pragma once

#include <cstdint>
#include <string>

#include "depthkit/sdt/config.hpp"

namespace depthkit::sdt {

struct BenchResult {
  double mean_ms = 0.0;
  double std_ms = 0.0;  ///< sample standard deviation of the same runs
  int runs = 0;
};

/// Times `runs` single-threaded float forward passes at height x width after
/// `warmup` untimed passes, on seeded random tokens and parameters.
BenchResult bench(const DecoderConfig& config, long height, long width, int runs, int warmup = 1,
                  std::uint64_t seed = 0);

/// "X.XX ± Y.YY ms"
std::string format_latency(const BenchResult& result);

}  // namespace depthkit::sdt
