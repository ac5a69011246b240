#include "artikin/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>

#include "artikin/errors.hpp"

namespace artikin {

namespace {

void write_pfm_raw(const std::filesystem::path& path, int w, int h, int channels,
                   const std::vector<float>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << (channels == 3 ? "PF" : "Pf") << "\n" << w << " " << h << "\n-1.0\n";
  for (int y = h - 1; y >= 0; --y)
    out.write(reinterpret_cast<const char*>(rows.data() + static_cast<std::size_t>(y) * w * channels),
              static_cast<std::streamsize>(sizeof(float) * w * channels));
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<float> read_pfm_raw(const std::filesystem::path& path, int& w, int& h,
                                int& channels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string magic;
  double scale = 0;
  in >> magic >> w >> h >> scale;
  in.get();
  if (magic != "PF" && magic != "Pf") throw ParseError(path.string() + ": not a PFM file");
  if (scale >= 0) throw ParseError(path.string() + ": big-endian PFM unsupported");
  channels = magic == "PF" ? 3 : 1;
  std::vector<float> data(static_cast<std::size_t>(w) * h * channels);
  for (int y = h - 1; y >= 0; --y)
    if (!in.read(reinterpret_cast<char*>(data.data() + static_cast<std::size_t>(y) * w * channels),
                 static_cast<std::streamsize>(sizeof(float) * w * channels)))
      throw ParseError(path.string() + ": truncated PFM");
  return data;
}

void write_png_rgb8(const std::filesystem::path& path, int w, int h,
                    const std::vector<unsigned char>& rgb) {
  FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (fp == nullptr) throw IoError("cannot write " + path.string());
  std::unique_ptr<FILE, int (*)(FILE*)> guard(fp, &std::fclose);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (png == nullptr || info == nullptr) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng failed writing " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, w, h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < h; ++y)
    png_write_row(png, const_cast<png_bytep>(rgb.data() + static_cast<std::size_t>(y) * w * 3));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

unsigned char to8(double v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

void write_pfm(const std::filesystem::path& path, const ImageF& image) {
  std::vector<float> rows(image.data.begin(), image.data.end());
  write_pfm_raw(path, image.width, image.height, 1, rows);
}

void write_pfm(const std::filesystem::path& path, const ImageRGB& image) {
  std::vector<float> rows;
  rows.reserve(image.data.size() * 3);
  for (const auto& v : image.data)
    for (int c = 0; c < 3; ++c) rows.push_back(static_cast<float>(v[c]));
  write_pfm_raw(path, image.width, image.height, 3, rows);
}

ImageF read_pfm_gray(const std::filesystem::path& path) {
  int w, h, ch;
  auto data = read_pfm_raw(path, w, h, ch);
  if (ch != 1) throw ParseError(path.string() + ": expected a gray PFM");
  ImageF img(w, h);
  std::copy(data.begin(), data.end(), img.data.begin());
  return img;
}

ImageRGB read_pfm_rgb(const std::filesystem::path& path) {
  int w, h, ch;
  auto data = read_pfm_raw(path, w, h, ch);
  if (ch != 3) throw ParseError(path.string() + ": expected a color PFM");
  ImageRGB img(w, h);
  for (std::size_t i = 0; i < img.data.size(); ++i)
    img.data[i] = Vector3d(data[3 * i], data[3 * i + 1], data[3 * i + 2]);
  return img;
}

void write_png(const std::filesystem::path& path, const ImageRGB& image) {
  std::vector<unsigned char> rgb;
  rgb.reserve(image.data.size() * 3);
  for (const auto& v : image.data)
    for (int c = 0; c < 3; ++c) rgb.push_back(to8(v[c]));
  write_png_rgb8(path, image.width, image.height, rgb);
}

void write_png_normalized(const std::filesystem::path& path, const ImageF& image) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : image.data)
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  double range = hi > lo ? hi - lo : 1.0;
  ImageRGB out(image.width, image.height);
  for (std::size_t i = 0; i < image.data.size(); ++i) {
    double v = std::isfinite(image.data[i]) ? (image.data[i] - lo) / range : 0.0;
    out.data[i] = Vector3d::Constant(v);
  }
  write_png(path, out);
}

void write_render_maps(const std::filesystem::path& dir, const std::string& prefix,
                       const RenderMaps& maps) {
  auto base = [&](const char* ch) { return dir / (prefix + "_" + ch); };
  write_pfm(base("color").string() + ".pfm", maps.color);
  write_png(base("color").string() + ".png", maps.color);
  write_pfm(base("alpha").string() + ".pfm", maps.alpha);
  write_png_normalized(base("alpha").string() + ".png", maps.alpha);
  write_pfm(base("distance").string() + ".pfm", maps.distance);
  write_png_normalized(base("distance").string() + ".png", maps.distance);
  write_pfm(base("depth").string() + ".pfm", maps.depth);
  write_png_normalized(base("depth").string() + ".png", maps.depth);
  write_pfm(base("normal").string() + ".pfm", maps.normal);
  ImageRGB shaded(maps.normal.width, maps.normal.height);
  for (std::size_t i = 0; i < shaded.data.size(); ++i)
    shaded.data[i] = maps.alpha.data[i] > 0 ? Vector3d(0.5 * (maps.normal.data[i].array() + 1.0))
                                            : Vector3d::Zero();
  write_png(base("normal").string() + ".png", shaded);

  static const Vector3d palette[] = {{0.6, 0.6, 0.6}, {0.9, 0.2, 0.2}, {0.2, 0.7, 0.2},
                                     {0.2, 0.3, 0.9}, {0.9, 0.8, 0.1}, {0.8, 0.3, 0.8},
                                     {0.1, 0.8, 0.8}, {0.9, 0.5, 0.1}};
  ImageF part(maps.alpha.width, maps.alpha.height, -1.0);
  ImageRGB seg_rgb(maps.alpha.width, maps.alpha.height, Vector3d::Zero());
  for (std::size_t i = 0; i < part.data.size(); ++i) {
    if (maps.alpha.data[i] <= 0.0 || maps.seg.empty()) continue;
    int best = 0;
    for (std::size_t c = 1; c < maps.seg.size(); ++c)
      if (maps.seg[c].data[i] > maps.seg[best].data[i]) best = static_cast<int>(c);
    part.data[i] = best;
    seg_rgb.data[i] = maps.alpha.data[i] * palette[best % 8];
  }
  write_pfm(base("seg").string() + ".pfm", part);
  write_png(base("seg").string() + ".png", seg_rgb);
}

}  // namespace artikin
