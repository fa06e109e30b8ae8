#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace depthkit {

/// Row-major image-shaped array (rows = height, cols = width).
template <typename Scalar>
using Image = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using DepthImage = Image<float>;
using Mask = Image<bool>;

inline constexpr double kDefaultFarPlane = 100.0;

enum class DepthFormat { kPfm, kPng16 };

std::string_view to_string(DepthFormat format);
/// Throws ConfigError for anything other than "pfm" or "png16".
DepthFormat parse_depth_format(std::string_view name);

/// One depth map in meters with its validity mask.
///
/// `depth` and `valid` always share the same shape. Positions marked valid hold
/// a finite value in (0, far_plane]; values at invalid positions are
/// unspecified and must not be read.
struct DepthSample {
  std::string id;
  std::string dataset;
  double depth_scale = 1.0;
  DepthImage depth;
  Mask valid;

  Eigen::Index height() const { return depth.rows(); }
  Eigen::Index width() const { return depth.cols(); }
  Eigen::Index pixel_count() const { return depth.size(); }
  Eigen::Index valid_count() const { return valid.count(); }
  double valid_ratio() const {
    return pixel_count() == 0 ? 0.0 : static_cast<double>(valid_count()) / pixel_count();
  }
};

/// The validity predicate: finite, strictly positive and not beyond the far plane.
inline bool is_valid_depth(double value, double far_plane) {
  return std::isfinite(value) && value > 0.0 && value <= far_plane;
}

/// Builds a sample from meters, deriving the mask with `is_valid_depth`.
DepthSample make_sample(std::string id, DepthImage depth, double far_plane = kDefaultFarPlane,
                        std::string dataset = {});

struct ManifestEntry {
  std::string id;
  std::filesystem::path depth_path;
  DepthFormat format = DepthFormat::kPfm;
  double depth_scale = 1.0;
  std::string dataset;
  std::optional<std::filesystem::path> rgb_path;
};

// Raw single-channel rasters. PFM keeps float32 values, PNG keeps the 16-bit codes.
DepthImage read_pfm(const std::filesystem::path& path);
void write_pfm(const std::filesystem::path& path, const DepthImage& values);

Image<std::uint16_t> read_png16(const std::filesystem::path& path);
void write_png16(const std::filesystem::path& path, const Image<std::uint16_t>& codes);

/// Loads the depth map referenced by `entry`, converting raw units to meters.
DepthSample load_depth(const ManifestEntry& entry, double far_plane = kDefaultFarPlane);

/// Writes `sample` to `path`; invalid pixels are stored as 0. For png16 the
/// sample's depth_scale sets the quantization.
void write_depth(const DepthSample& sample, const std::filesystem::path& path, DepthFormat format);

/// Reads a JSON-lines manifest. Relative paths resolve against the manifest's
/// directory. Blank lines are skipped; unknown keys are ignored.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
std::vector<ManifestEntry> parse_manifest(std::string_view text,
                                          const std::filesystem::path& base_dir = {});

std::string manifest_line(const ManifestEntry& entry);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

}  // namespace depthkit
