#include <png.h>

#include <bit>
#include <csetjmp>
#include <cstdio>
#include <memory>
#include <vector>

#include "depthkit/depthio.hpp"
#include "depthkit/error.hpp"

namespace depthkit {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

constexpr png_uint_32 kMaxSide = 1u << 16;

void on_png_warning(png_structp, png_const_charp) {}

}  // namespace

Image<std::uint16_t> read_png16(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw IoError("cannot open " + path.string());

  png_byte signature[8];
  if (std::fread(signature, 1, 8, file.get()) != 8 || png_sig_cmp(signature, 0, 8) != 0) {
    throw FormatError(path.string() + ": not a PNG file");
  }

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, on_png_warning);
  if (!png) throw Error("libpng: cannot create read struct");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error("libpng: cannot create info struct");
  }

  Image<std::uint16_t> codes;
  std::vector<png_bytep> rows;
  std::string failure;
  // Everything touched after setjmp lives outside this frame so longjmp leaves it intact.
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(path.string() + ": corrupt PNG data");
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_set_user_limits(png, kMaxSide, kMaxSide);
  png_read_info(png, info);

  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  if (bit_depth != 16 || color_type != PNG_COLOR_TYPE_GRAY) {
    failure = "expected 16-bit single-channel grayscale, got bit depth " + std::to_string(bit_depth) +
              " color type " + std::to_string(color_type);
  } else {
    if (std::endian::native == std::endian::little) png_set_swap(png);
    png_read_update_info(png, info);
    codes.resize(height, width);
    rows.resize(height);
    for (png_uint_32 r = 0; r < height; ++r) {
      rows[r] = reinterpret_cast<png_bytep>(codes.row(r).data());
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (!failure.empty()) throw FormatError(path.string() + ": " + failure);
  return codes;
}

void write_png16(const std::filesystem::path& path, const Image<std::uint16_t>& codes) {
  if (codes.rows() <= 0 || codes.cols() <= 0 || codes.rows() > kMaxSide || codes.cols() > kMaxSide) {
    throw CapacityError(path.string() + ": image size not representable as PNG");
  }
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError("cannot write " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, on_png_warning);
  if (!png) throw Error("libpng: cannot create write struct");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("libpng: cannot create info struct");
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(codes.rows()));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(codes.cols()), static_cast<png_uint_32>(codes.rows()),
               16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (std::endian::native == std::endian::little) png_set_swap(png);
  for (Eigen::Index r = 0; r < codes.rows(); ++r) {
    rows[static_cast<std::size_t>(r)] =
        reinterpret_cast<png_bytep>(const_cast<std::uint16_t*>(codes.row(r).data()));
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace depthkit
