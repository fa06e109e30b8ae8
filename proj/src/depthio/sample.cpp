#include "depthkit/depthio.hpp"

#include "depthkit/error.hpp"

#include <algorithm>

namespace depthkit {

std::string_view to_string(DepthFormat format) {
  switch (format) {
    case DepthFormat::kPfm:
      return "pfm";
    case DepthFormat::kPng16:
      return "png16";
  }
  return "unknown";
}

DepthFormat parse_depth_format(std::string_view name) {
  if (name == "pfm") return DepthFormat::kPfm;
  if (name == "png16") return DepthFormat::kPng16;
  throw ConfigError("unknown depth format \"" + std::string(name) + "\" (expected pfm or png16)");
}

DepthSample make_sample(std::string id, DepthImage depth, double far_plane, std::string dataset) {
  DepthSample sample;
  sample.id = std::move(id);
  sample.dataset = std::move(dataset);
  sample.valid = depth.unaryExpr([far_plane](float v) { return is_valid_depth(v, far_plane); });
  sample.depth = std::move(depth);
  return sample;
}

DepthSample load_depth(const ManifestEntry& entry, double far_plane) {
  if (!(entry.depth_scale > 0.0)) {
    throw ConfigError("sample " + entry.id + ": depth_scale must be positive");
  }
  DepthImage meters;
  switch (entry.format) {
    case DepthFormat::kPfm:
      meters = read_pfm(entry.depth_path);
      if (entry.depth_scale != 1.0) meters /= static_cast<float>(entry.depth_scale);
      break;
    case DepthFormat::kPng16: {
      const Image<std::uint16_t> codes = read_png16(entry.depth_path);
      const double scale = entry.depth_scale;
      // A zero code is the invalid sentinel; it maps to 0 m which fails the validity test.
      meters = codes.unaryExpr([scale](std::uint16_t c) { return static_cast<float>(c / scale); });
      break;
    }
  }
  DepthSample sample = make_sample(entry.id, std::move(meters), far_plane, entry.dataset);
  sample.depth_scale = entry.depth_scale;
  return sample;
}

void write_depth(const DepthSample& sample, const std::filesystem::path& path, DepthFormat format) {
  if (sample.depth.rows() != sample.valid.rows() || sample.depth.cols() != sample.valid.cols()) {
    throw ShapeError("sample " + sample.id + ": depth and mask shapes differ");
  }
  switch (format) {
    case DepthFormat::kPfm: {
      DepthImage stored = sample.valid.select(sample.depth, 0.0f);
      if (sample.depth_scale != 1.0) stored *= static_cast<float>(sample.depth_scale);
      write_pfm(path, stored);
      return;
    }
    case DepthFormat::kPng16: {
      Image<std::uint16_t> codes(sample.height(), sample.width());
      for (Eigen::Index i = 0; i < codes.size(); ++i) {
        if (!sample.valid(i)) {
          codes(i) = 0;
          continue;
        }
        const double raw = std::round(static_cast<double>(sample.depth(i)) * sample.depth_scale);
        if (raw > 65535.0) {
          throw CapacityError("sample " + sample.id + ": depth " + std::to_string(sample.depth(i)) +
                              " m exceeds the 16-bit range at depth_scale " +
                              std::to_string(sample.depth_scale));
        }
        // Tiny positive depths must not collapse onto the invalid sentinel.
        codes(i) = static_cast<std::uint16_t>(std::max(raw, 1.0));
      }
      write_png16(path, codes);
      return;
    }
  }
}

}  // namespace depthkit
