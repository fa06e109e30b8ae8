#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "depthkit/depthio.hpp"
#include "depthkit/error.hpp"

namespace depthkit {
namespace {

constexpr std::size_t kMaxSide = 1u << 16;
constexpr std::size_t kMaxPixels = 1u << 28;

bool is_space(char c) { return c == ' ' || c == '\n' || c == '\r' || c == '\t'; }

class HeaderCursor {
 public:
  HeaderCursor(const std::string& bytes, const std::filesystem::path& path)
      : bytes_(bytes), path_(path) {}

  std::string_view token() {
    while (pos_ < bytes_.size() && is_space(bytes_[pos_])) ++pos_;
    const std::size_t begin = pos_;
    while (pos_ < bytes_.size() && !is_space(bytes_[pos_])) ++pos_;
    if (begin == pos_) fail("unexpected end of header");
    return std::string_view(bytes_).substr(begin, pos_ - begin);
  }

  // The header ends with exactly one whitespace character after the scale.
  std::size_t data_offset() {
    if (pos_ >= bytes_.size() || !is_space(bytes_[pos_])) fail("missing header terminator");
    if (bytes_[pos_] == '\r' && pos_ + 1 < bytes_.size() && bytes_[pos_ + 1] == '\n') ++pos_;
    return pos_ + 1;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(path_.string() + ": malformed PFM header: " + what);
  }

 private:
  const std::string& bytes_;
  const std::filesystem::path& path_;
  std::size_t pos_ = 0;
};

template <typename T>
T parse_number(std::string_view text, const HeaderCursor& cursor, const char* what) {
  T value{};
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size()) {
    cursor.fail(std::string("bad ") + what + " \"" + std::string(text) + "\"");
  }
  return value;
}

std::uint32_t byteswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0x0000ff00u) | ((v << 8) & 0x00ff0000u) | (v << 24);
}

}  // namespace

DepthImage read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  HeaderCursor cursor(bytes, path);
  const std::string_view magic = cursor.token();
  if (magic == "PF") cursor.fail("three-channel PFM is not a depth map");
  if (magic != "Pf") cursor.fail("bad magic");

  // Parse as 64-bit so oversized dimensions report as capacity rather than format problems.
  const auto width = parse_number<std::uint64_t>(cursor.token(), cursor, "width");
  const auto height = parse_number<std::uint64_t>(cursor.token(), cursor, "height");
  const std::string scale_text(cursor.token());
  double scale = 0.0;
  {
    std::istringstream ss(scale_text);
    ss.imbue(std::locale::classic());
    if (!(ss >> scale) || !ss.eof() || scale == 0.0) cursor.fail("bad scale \"" + scale_text + "\"");
  }
  const std::size_t offset = cursor.data_offset();

  if (width == 0 || height == 0) cursor.fail("zero dimension");
  if (width > kMaxSide || height > kMaxSide || width * height > kMaxPixels) {
    throw CapacityError(path.string() + ": PFM dimensions " + std::to_string(width) + "x" +
                        std::to_string(height) + " exceed the supported size");
  }
  const std::size_t count = width * height;
  if (bytes.size() < offset + count * 4) {
    throw FormatError(path.string() + ": truncated PFM data");
  }

  const bool file_little = scale < 0.0;
  const bool swap = file_little != (std::endian::native == std::endian::little);
  DepthImage image(static_cast<Eigen::Index>(height), static_cast<Eigen::Index>(width));
  const char* data = bytes.data() + offset;
  for (std::size_t r = 0; r < height; ++r) {
    // Rows are stored bottom to top.
    const std::size_t dst_row = height - 1 - r;
    for (std::size_t c = 0; c < width; ++c) {
      std::uint32_t bits;
      std::memcpy(&bits, data + 4 * (r * width + c), 4);
      if (swap) bits = byteswap32(bits);
      image(static_cast<Eigen::Index>(dst_row), static_cast<Eigen::Index>(c)) =
          std::bit_cast<float>(bits);
    }
  }
  return image;
}

void write_pfm(const std::filesystem::path& path, const DepthImage& values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "Pf\n" << values.cols() << ' ' << values.rows() << "\n-1.0\n";
  std::string row(static_cast<std::size_t>(values.cols()) * 4, '\0');
  for (Eigen::Index r = values.rows() - 1; r >= 0; --r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      std::uint32_t bits = std::bit_cast<std::uint32_t>(values(r, c));
      if constexpr (std::endian::native == std::endian::big) bits = byteswap32(bits);
      std::memcpy(row.data() + 4 * c, &bits, 4);
    }
    out.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace depthkit
