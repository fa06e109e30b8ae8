#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "depthkit/cli.hpp"
#include "depthkit/depthio.hpp"
#include "depthkit/error.hpp"

namespace depthkit::cli {
namespace {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(engine_() >> 11) * 0x1.0p-53);
  }

 private:
  std::mt19937_64 engine_;
};

enum class Variant { kClean, kNarrow, kNoisy, kSparse };

Variant variant_for(int i) {
  switch (i % 5) {
    case 2:
      return Variant::kNarrow;
    case 3:
      return Variant::kNoisy;
    case 4:
      return Variant::kSparse;
    default:
      return Variant::kClean;
  }
}

// A tilted ground plane receding with image row plus a nearer box, all in (0, 60] m.
DepthImage clean_scene(int h, int w, Rng& rng) {
  const double near = rng.uniform(0.5, 4.0);
  const double far = rng.uniform(30.0, 58.0);
  const double tilt = rng.uniform(-0.2, 0.2);
  const int bx0 = static_cast<int>(rng.uniform(0.1, 0.4) * w);
  const int bx1 = bx0 + static_cast<int>(rng.uniform(0.2, 0.4) * w);
  const int by0 = static_cast<int>(rng.uniform(0.1, 0.4) * h);
  const int by1 = by0 + static_cast<int>(rng.uniform(0.2, 0.4) * h);
  const double box_depth = rng.uniform(near, 0.5 * (near + far));
  DepthImage d(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double t = 1.0 - (y + 0.5) / h;
      double v = near + (far - near) * t * (1.0 + tilt * ((x + 0.5) / w - 0.5));
      if (y >= by0 && y < by1 && x >= bx0 && x < bx1) v = box_depth;
      d(y, x) = static_cast<float>(std::clamp(v, 0.1, 60.0));
    }
  }
  return d;
}

DepthImage make_depth(Variant variant, int h, int w, Rng& rng) {
  DepthImage d = clean_scene(h, w, rng);
  switch (variant) {
    case Variant::kClean:
      break;
    case Variant::kNarrow: {
      const double base = rng.uniform(3.0, 10.0);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) d(y, x) = static_cast<float>(base + 0.6 * (y + 0.5) / h);
      }
      break;
    }
    case Variant::kNoisy: {
      const double sigma = rng.uniform(1.0, 3.0);
      for (Eigen::Index i = 0; i < d.size(); ++i) {
        d(i) = static_cast<float>(std::clamp(d(i) + rng.uniform(-sigma, sigma), 0.1, 60.0));
      }
      break;
    }
    case Variant::kSparse:
      for (Eigen::Index i = 0; i < d.size(); ++i) {
        if (rng.uniform(0.0, 1.0) < 0.9) d(i) = 0.0f;
      }
      break;
  }
  return d;
}

}  // namespace

void synthesize_corpus(const SynthOptions& options) {
  if (options.count < 1 || options.height < 1 || options.width < 1) {
    throw ConfigError("synth needs a positive count and size");
  }
  namespace fs = std::filesystem;
  const fs::path root = fs::absolute(options.out_dir);
  fs::create_directories(root / "depth");
  if (options.with_predictions) fs::create_directories(root / "pred");

  static const char* kDatasets[] = {"indoor", "outdoor", "synthetic"};
  std::vector<ManifestEntry> gts, preds;
  for (int i = 0; i < options.count; ++i) {
    Rng rng(options.seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(i));
    char id[32];
    std::snprintf(id, sizeof id, "s%05d", i);

    ManifestEntry entry;
    entry.id = id;
    entry.dataset = kDatasets[i % 3];
    entry.format = (i % 2 == 0) ? DepthFormat::kPfm : DepthFormat::kPng16;
    entry.depth_scale = entry.format == DepthFormat::kPng16 ? 1000.0 : 1.0;
    entry.depth_path = root / "depth" / (entry.id + (entry.format == DepthFormat::kPfm ? ".pfm" : ".png"));

    DepthSample sample = make_sample(entry.id, make_depth(variant_for(i), options.height, options.width, rng),
                                     kDefaultFarPlane, entry.dataset);
    sample.depth_scale = entry.depth_scale;
    write_depth(sample, entry.depth_path, entry.format);
    gts.push_back(entry);

    if (options.with_predictions) {
      // Disparity affine in 1/depth of the stored map (after any quantization),
      // optionally perturbed multiplicatively.
      sample = load_depth(entry);
      const double a = rng.uniform(0.5, 2.0);
      const double b = rng.uniform(0.0, 0.1);
      DepthImage disparity(options.height, options.width);
      for (Eigen::Index k = 0; k < disparity.size(); ++k) {
        const double noise = options.prediction_noise > 0.0
                                 ? 1.0 + rng.uniform(-options.prediction_noise, options.prediction_noise)
                                 : 1.0;
        disparity(k) = sample.valid(k) ? static_cast<float>((a / sample.depth(k) + b) * noise) : 0.0f;
      }
      ManifestEntry pred;
      pred.id = entry.id;
      pred.dataset = entry.dataset;
      pred.format = DepthFormat::kPfm;
      pred.depth_path = root / "pred" / (entry.id + ".pfm");
      write_pfm(pred.depth_path, disparity);
      preds.push_back(pred);
    }
  }
  write_manifest(root / "manifest.jsonl", gts);
  if (options.with_predictions) write_manifest(root / "predictions.jsonl", preds);
}

}  // namespace depthkit::cli
