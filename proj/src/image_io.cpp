// SPDX-License-Identifier: Apache-2.0
#include <png.h>
#include <jpeglib.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include "lamsc/error.hpp"
#include "lamsc/image.hpp"

namespace lamsc {

ImageSample make_image(int height, int width, int channels, std::string source_id, double fill) {
  return ImageSample{Tensor({height, width, channels}, fill), std::move(source_id)};
}

void validate_image(const ImageSample& image) {
  const auto& t = image.pixels;
  if (t.rank() != 3) fail(ErrorCode::shape_mismatch, "image must be HxWxC, got " + shape_str(t.shape()));
  if (t.dim(2) != 1 && t.dim(2) != 3)
    fail(ErrorCode::precondition, "image must have 1 or 3 channels, got " + std::to_string(t.dim(2)));
  if (t.dim(0) < kMinImageSide || t.dim(1) < kMinImageSide)
    fail(ErrorCode::precondition, "image too small: " + std::to_string(t.dim(0)) + "x" + std::to_string(t.dim(1)) +
                                      " (minimum " + std::to_string(kMinImageSide) + "x" +
                                      std::to_string(kMinImageSide) + ")");
  for (double v : t.values())
    if (!std::isfinite(v) || v < 0.0 || v > 1.0)
      fail(ErrorCode::precondition, "image pixel outside [0,1] or non-finite");
}

void clip_unit(Tensor& t) {
  for (auto& v : t.values()) v = std::clamp(v, 0.0, 1.0);
}

namespace io {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) fail(ErrorCode::io, "cannot open " + path);
  return f;
}

std::string lower_ext(const std::string& path) {
  std::string ext = std::filesystem::path(path).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

struct PngRaw {
  int width = 0, height = 0, channels = 0;
  bool palette = false;
  std::vector<std::uint8_t> bytes;
};

[[noreturn]] void png_error_fn(png_structp, png_const_charp msg) { fail(ErrorCode::io, std::string("png: ") + msg); }
void png_warning_fn(png_structp, png_const_charp) {}

// Reads a PNG as 8-bit samples; palette images keep their indices when
// `keep_palette` is set and are expanded to RGB otherwise.
PngRaw read_png(const std::string& path, bool keep_palette) {
  auto f = open_file(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8)) fail(ErrorCode::io, path + " is not a PNG file");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warning_fn);
  png_infop info = png_create_info_struct(png);
  PngRaw raw;
  try {
    png_init_io(png, f.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) {
      if (keep_palette) {
        if (depth < 8) png_set_packing(png);
        raw.palette = true;
      } else {
        png_set_palette_to_rgb(png);
      }
    }
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (!raw.palette && png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_read_update_info(png, info);
    raw.width = static_cast<int>(png_get_image_width(png, info));
    raw.height = static_cast<int>(png_get_image_height(png, info));
    raw.channels = png_get_channels(png, info);
    const std::size_t stride = png_get_rowbytes(png, info);
    raw.bytes.resize(stride * static_cast<std::size_t>(raw.height));
    std::vector<png_bytep> rows(static_cast<std::size_t>(raw.height));
    for (int y = 0; y < raw.height; ++y) rows[static_cast<std::size_t>(y)] = raw.bytes.data() + stride * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return raw;
}

void write_png(const std::string& path, int width, int height, int channels, const std::uint8_t* bytes) {
  auto f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warning_fn);
  png_infop info = png_create_info_struct(png);
  try {
    png_init_io(png, f.get());
    const int color = channels == 1 ? PNG_COLOR_TYPE_GRAY : channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_RGBA;
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, color,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    // Fixed zlib settings keep the output byte-stable.
    png_set_compression_level(png, 6);
    png_write_info(png, info);
    for (int y = 0; y < height; ++y)
      png_write_row(png, bytes + static_cast<std::size_t>(y) * width * channels);
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
}

ImageSample from_bytes(int width, int height, int channels, const std::uint8_t* bytes, int stride_channels,
                       const std::string& id) {
  ImageSample img = make_image(height, width, channels, id);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < channels; ++c)
        img.pixels.at(y, x, c) =
            bytes[(static_cast<std::size_t>(y) * width + x) * stride_channels + c] / 255.0;
  return img;
}

ImageSample load_png_image(const std::string& path, const std::string& id) {
  PngRaw raw = read_png(path, false);
  const int keep = raw.channels >= 3 ? 3 : 1;
  return from_bytes(raw.width, raw.height, keep, raw.bytes.data(), raw.channels, id);
}

struct JpegErr {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
};

ImageSample load_jpeg_image(const std::string& path, const std::string& id) {
  auto f = open_file(path, "rb");
  jpeg_decompress_struct cinfo;
  JpegErr err;
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = [](j_common_ptr c) { std::longjmp(reinterpret_cast<JpegErr*>(c->err)->jump, 1); };
  std::vector<std::uint8_t> bytes;
  int width = 0, height = 0, channels = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    fail(ErrorCode::io, "jpeg decode failed: " + path);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, f.get());
  jpeg_read_header(&cinfo, TRUE);
  if (cinfo.num_components != 1) cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  width = static_cast<int>(cinfo.output_width);
  height = static_cast<int>(cinfo.output_height);
  channels = cinfo.output_components;
  bytes.resize(static_cast<std::size_t>(width) * height * channels);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = bytes.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * channels;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return from_bytes(width, height, channels, bytes.data(), channels, id);
}

std::string next_pnm_token(std::istream& in) {
  std::string tok;
  char ch;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(ch);
  }
  return tok;
}

ImageSample load_pnm_image(const std::string& path, const std::string& id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open " + path);
  const std::string magic = next_pnm_token(in);
  if (magic != "P5" && magic != "P6") fail(ErrorCode::io, path + ": only binary PGM/PPM (P5/P6) supported");
  const int channels = magic == "P6" ? 3 : 1;
  int width = 0, height = 0, maxval = 0;
  try {
    width = std::stoi(next_pnm_token(in));
    height = std::stoi(next_pnm_token(in));
    maxval = std::stoi(next_pnm_token(in));
  } catch (const std::exception&) {
    fail(ErrorCode::io, path + ": malformed PNM header");
  }
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 255) fail(ErrorCode::io, path + ": unsupported PNM header");
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(width) * height * channels);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) fail(ErrorCode::io, path + ": truncated PNM data");
  ImageSample img = from_bytes(width, height, channels, bytes.data(), channels, id);
  if (maxval != 255)
    for (auto& v : img.pixels.values()) v = std::min(1.0, v * 255.0 / maxval);
  return img;
}

}  // namespace

ImageSample load_image(const std::string& path) {
  if (!std::filesystem::exists(path)) fail(ErrorCode::io, "image not found: " + path);
  const std::string id = std::filesystem::path(path).stem().string();
  const std::string ext = lower_ext(path);
  if (ext == ".png") return load_png_image(path, id);
  if (ext == ".jpg" || ext == ".jpeg") return load_jpeg_image(path, id);
  if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") return load_pnm_image(path, id);
  fail(ErrorCode::io, "unsupported image format: " + path);
}

void save_png(const std::string& path, const ImageSample& image) {
  const int h = image.height(), w = image.width(), c = image.channels();
  std::vector<std::uint8_t> bytes(image.pixels.size());
  for (std::size_t i = 0; i < bytes.size(); ++i)
    bytes[i] = static_cast<std::uint8_t>(std::lround(std::clamp(image.pixels[i], 0.0, 1.0) * 255.0));
  write_png(path, w, h, c, bytes.data());
}

IndexMap load_index_map(const std::string& path) {
  if (!std::filesystem::exists(path)) fail(ErrorCode::io, "annotation not found: " + path);
  PngRaw raw = read_png(path, true);
  IndexMap map{raw.height, raw.width, {}};
  map.values.resize(static_cast<std::size_t>(raw.width) * raw.height);
  // Gray+alpha or RGB annotations are read from their first channel.
  for (std::size_t i = 0; i < map.values.size(); ++i) map.values[i] = raw.bytes[i * static_cast<std::size_t>(raw.channels)];
  return map;
}

void save_index_png(const std::string& path, const IndexMap& map) {
  write_png(path, map.width, map.height, 1, map.values.data());
}

}  // namespace io

ImageSample resize_image(const ImageSample& image, int height, int width) {
  const int h = image.height(), w = image.width(), c = image.channels();
  if (h == height && w == width) return image;
  ImageSample out = make_image(height, width, c, image.source_id);
  if (height <= h && width <= w) {
    // Area averaging with fractional pixel coverage.
    const double sy = static_cast<double>(h) / height, sx = static_cast<double>(w) / width;
    for (int oy = 0; oy < height; ++oy) {
      const double y0 = oy * sy, y1 = y0 + sy;
      for (int ox = 0; ox < width; ++ox) {
        const double x0 = ox * sx, x1 = x0 + sx;
        for (int ch = 0; ch < c; ++ch) {
          double acc = 0.0, area = 0.0;
          for (int y = static_cast<int>(y0); y < std::min(h, static_cast<int>(std::ceil(y1))); ++y) {
            const double wy = std::min<double>(y + 1, y1) - std::max<double>(y, y0);
            for (int x = static_cast<int>(x0); x < std::min(w, static_cast<int>(std::ceil(x1))); ++x) {
              const double wx = std::min<double>(x + 1, x1) - std::max<double>(x, x0);
              acc += wy * wx * image.pixels.at(y, x, ch);
              area += wy * wx;
            }
          }
          out.pixels.at(oy, ox, ch) = area > 0 ? acc / area : 0.0;
        }
      }
    }
  } else {
    for (int oy = 0; oy < height; ++oy) {
      const double fy = std::clamp((oy + 0.5) * h / height - 0.5, 0.0, h - 1.0);
      const int y0 = static_cast<int>(fy), y1 = std::min(y0 + 1, h - 1);
      const double ty = fy - y0;
      for (int ox = 0; ox < width; ++ox) {
        const double fx = std::clamp((ox + 0.5) * w / width - 0.5, 0.0, w - 1.0);
        const int x0 = static_cast<int>(fx), x1 = std::min(x0 + 1, w - 1);
        const double tx = fx - x0;
        for (int ch = 0; ch < c; ++ch) {
          const double top = image.pixels.at(y0, x0, ch) * (1 - tx) + image.pixels.at(y0, x1, ch) * tx;
          const double bot = image.pixels.at(y1, x0, ch) * (1 - tx) + image.pixels.at(y1, x1, ch) * tx;
          out.pixels.at(oy, ox, ch) = top * (1 - ty) + bot * ty;
        }
      }
    }
  }
  return out;
}

IndexMap resize_index_nearest(const IndexMap& map, int height, int width) {
  if (map.height == height && map.width == width) return map;
  IndexMap out{height, width, std::vector<std::uint8_t>(static_cast<std::size_t>(height) * width)};
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(map.height - 1, static_cast<int>((y + 0.5) * map.height / height));
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(map.width - 1, static_cast<int>((x + 0.5) * map.width / width));
      out.values[static_cast<std::size_t>(y) * width + x] = map.at(sy, sx);
    }
  }
  return out;
}

}  // namespace lamsc
