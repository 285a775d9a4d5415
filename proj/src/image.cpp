#include "vsel/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>

#include <cstdio>
#include <cstring>
#include <memory>
#include <sstream>

#include "vsel/binary_io.hpp"
#include "vsel/resample.hpp"

namespace vsel {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

Image read_png(const std::filesystem::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str())) {
    throw FormatError("PNG " + path.string() + ": " + img.message);
  }
  const bool gray = (img.format & PNG_FORMAT_FLAG_COLOR) == 0;
  img.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buffer.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw FormatError("PNG " + path.string() + ": " + msg);
  }
  const Index h = img.height, w = img.width, c = gray ? 1 : 3;
  Image out;
  out.planes.assign(static_cast<std::size_t>(c), Grid(h, w));
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x)
      for (Index ch = 0; ch < c; ++ch)
        out.planes[static_cast<std::size_t>(ch)](y, x) = buffer[static_cast<std::size_t>((y * w + x) * c + ch)] / 255.0;
  return out;
}

Image read_pnm(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::size_t pos = 2;
  auto next_int = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    long v = 0;
    bool any = false;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      any = true;
    }
    if (!any) throw FormatError("PNM " + path.string() + ": malformed header");
    return v;
  };
  const Index c = bytes[1] == '5' ? 1 : 3;
  const Index w = next_int(), h = next_int();
  const long maxval = next_int();
  if (w <= 0 || h <= 0) throw FormatError("PNM " + path.string() + ": zero-dimension image");
  if (maxval <= 0 || maxval > 255) throw FormatError("PNM " + path.string() + ": only 8-bit supported");
  ++pos;  // single whitespace after maxval
  if (bytes.size() < pos + static_cast<std::size_t>(w * h * c)) {
    throw FormatError("PNM " + path.string() + ": truncated payload");
  }
  Image out;
  out.planes.assign(static_cast<std::size_t>(c), Grid(h, w));
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x)
      for (Index ch = 0; ch < c; ++ch)
        out.planes[static_cast<std::size_t>(ch)](y, x) =
            bytes[pos + static_cast<std::size_t>((y * w + x) * c + ch)] / static_cast<double>(maxval);
  return out;
}

}  // namespace

Image Image::constant(Index height, Index width, Index channels, double value) {
  Image img;
  img.planes.assign(static_cast<std::size_t>(channels), Grid::Constant(height, width, value));
  return img;
}

Image read_image(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  static const unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), png_sig, 8) == 0) return read_png(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6')) {
    return read_pnm(path, bytes);
  }
  throw FormatError("unsupported image format: " + path.string());
}

void write_png(const std::filesystem::path& path, const Image& image) {
  if (image.empty()) throw ShapeError("cannot write an empty image");
  const Index c = image.channels();
  if (c != 1 && c != 3) throw ShapeError("PNG output needs 1 or 3 channels");
  const Index h = image.height(), w = image.width();
  std::vector<png_byte> buffer(static_cast<std::size_t>(h * w * c));
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x)
      for (Index ch = 0; ch < c; ++ch) {
        const double v = std::clamp(image.planes[static_cast<std::size_t>(ch)](y, x), 0.0, 1.0);
        buffer[static_cast<std::size_t>((y * w + x) * c + ch)] =
            static_cast<png_byte>(std::lround(v * 255.0));
      }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(w);
  img.height = static_cast<png_uint_32>(h);
  img.format = c == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, buffer.data(), 0, nullptr)) {
    throw ConfigError("PNG write failed for " + path.string() + ": " + img.message);
  }
}

void write_png(const std::filesystem::path& path, const Grid& grid) {
  Image img;
  img.planes.push_back(grid);
  write_png(path, img);
}

Image to_grayscale(const Image& image) {
  if (image.channels() != 3) return image;
  Image out;
  out.planes.push_back(0.299 * image.planes[0] + 0.587 * image.planes[1] + 0.114 * image.planes[2]);
  return out;
}

Image resize_bilinear(const Image& image, Index rows, Index cols) {
  Image out;
  for (const Grid& p : image.planes) out.planes.push_back(resize_bilinear(p, rows, cols));
  return out;
}

}  // namespace vsel
