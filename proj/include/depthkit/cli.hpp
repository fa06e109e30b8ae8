#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace depthkit::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Runs the `depthkit` command line. `args` excludes the program name.
/// Returns 0 on success, 1 on usage errors and 2 on data errors (or on any
/// sample-level failure when --strict is given).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Library version plus the counting and filtering conventions.
std::string version_text();

struct SynthOptions {
  std::string out_dir;
  int count = 100;
  int height = 48;
  int width = 64;
  unsigned long long seed = 0;
  bool with_predictions = false;
  double prediction_noise = 0.0;
};

/// Writes a synthetic multi-dataset corpus (depth maps plus manifest.jsonl and,
/// optionally, disparity predictions in predictions.jsonl) under out_dir.
/// Samples cycle through clean, narrow-range, noisy and sparse variants.
void synthesize_corpus(const SynthOptions& options);

}  // namespace depthkit::cli
