#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include <jpeglib.h>
#include <jerror.h>
#include <png.h>

#include "slideq/error.hpp"
#include "slideq/image.hpp"

namespace slideq {
namespace {

constexpr std::uint8_t kPngMagic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

bool is_png(std::span<const std::uint8_t> b) {
  return b.size() >= 8 && std::memcmp(b.data(), kPngMagic, 8) == 0;
}

bool is_jpeg(std::span<const std::uint8_t> b) {
  return b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF;
}

SlideImage from_rgb8(const std::uint8_t* data, int width, int height) {
  Plane<double> r(height, width), g(height, width), b(height, width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::uint8_t* px = data + 3 * (static_cast<std::size_t>(y) * width + x);
      r(y, x) = px[0] / 255.0;
      g(y, x) = px[1] / 255.0;
      b(y, x) = px[2] / 255.0;
    }
  }
  return SlideImage(std::move(r), std::move(g), std::move(b));
}

SlideImage decode_png(std::span<const std::uint8_t> bytes) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw Error(ErrorCode::MalformedImage, std::string("png header: ") + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw Error(ErrorCode::MalformedImage, "png data: " + msg);
  }
  return from_rgb8(buffer.data(), static_cast<int>(image.width),
                   static_cast<int>(image.height));
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
  bool hit_eof;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

void jpeg_emit(j_common_ptr cinfo, int level) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  if (level < 0 && cinfo->err->msg_code == JWRN_JPEG_EOF) err->hit_eof = true;
}

// Returns false on libjpeg failure; no C++ objects with destructors live
// across the setjmp boundary.
bool decode_jpeg_raw(std::span<const std::uint8_t> bytes, std::vector<std::uint8_t>& out,
                     int& width, int& height, JpegErrorManager& err) {
  jpeg_decompress_struct cinfo;
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  err.base.emit_message = jpeg_emit;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  width = static_cast<int>(cinfo.output_width);
  height = static_cast<int>(cinfo.output_height);
  out.resize(static_cast<std::size_t>(width) * height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  // libjpeg pads truncated streams and only warns.
  const bool truncated = err.hit_eof;
  jpeg_destroy_decompress(&cinfo);
  if (truncated) {
    std::snprintf(err.message, sizeof(err.message), "corrupt or truncated jpeg data");
    return false;
  }
  return true;
}

SlideImage decode_jpeg(std::span<const std::uint8_t> bytes) {
  std::vector<std::uint8_t> buffer;
  int width = 0;
  int height = 0;
  JpegErrorManager err{};
  if (!decode_jpeg_raw(bytes, buffer, width, height, err)) {
    throw Error(ErrorCode::MalformedImage, std::string("jpeg: ") + err.message);
  }
  return from_rgb8(buffer.data(), width, height);
}

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

SlideImage decode_image(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) {
    throw Error(ErrorCode::MalformedImage, "stream too short to identify");
  }
  if (is_png(bytes)) return decode_png(bytes);
  if (is_jpeg(bytes)) return decode_jpeg(bytes);
  throw Error(ErrorCode::UnsupportedFormat, "not a PNG or JPEG stream");
}

SlideImage read_image_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_image(bytes);
}

std::vector<std::uint8_t> encode_png(const SlideImage& img) {
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(img.pixel_count()) * 3);
  std::size_t i = 0;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      rgb[i++] = quantize(img.red()(y, x));
      rgb[i++] = quantize(img.green()(y, x));
      rgb[i++] = quantize(img.blue()(y, x));
    }
  }
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, rgb.data(), 0, nullptr)) {
    throw Error(ErrorCode::IoError, std::string("png encode: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, rgb.data(), 0, nullptr)) {
    throw Error(ErrorCode::IoError, std::string("png encode: ") + image.message);
  }
  out.resize(size);
  return out;
}

void write_png_file(const SlideImage& img, const std::filesystem::path& path) {
  const auto bytes = encode_png(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

}  // namespace slideq
