#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "reskan/image.hpp"

namespace reskan {

namespace {

// P5 binary PGM. Comments allowed in the header; maxval above 255 (16-bit
// data) is rejected.
Image read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image file: " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P5") throw DataError("unsupported PGM magic '" + magic + "' in " + path.string());
  auto next_int = [&]() {
    int v;
    while (true) {
      in >> std::ws;
      if (in.peek() == '#') {
        std::string line;
        std::getline(in, line);
        continue;
      }
      if (!(in >> v)) throw DataError("truncated PGM header in " + path.string());
      return v;
    }
  };
  const int w = next_int(), h = next_int(), maxval = next_int();
  if (w <= 0 || h <= 0) throw DataError("bad PGM dimensions in " + path.string());
  if (maxval > 255)
    throw DataError("unsupported 16-bit PGM (maxval " + std::to_string(maxval) + ") in " + path.string() +
                    "; only 8-bit images are supported");
  in.get();  // single whitespace after the header
  std::vector<unsigned char> buf(static_cast<size_t>(w) * h);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size()))
    throw DataError("truncated PGM payload in " + path.string());
  Image img{w, h, std::vector<float>(buf.size())};
  for (size_t i = 0; i < buf.size(); ++i) img.px[i] = static_cast<float>(buf[i]);
  return img;
}

struct PngReadCloser {
  png_structp png = nullptr;
  png_infop info = nullptr;
  FILE* fp = nullptr;
  ~PngReadCloser() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (fp) fclose(fp);
  }
};

Image read_png(const std::filesystem::path& path) {
  PngReadCloser ctx;
  ctx.fp = std::fopen(path.c_str(), "rb");
  if (!ctx.fp) throw DataError("cannot open image file: " + path.string());
  ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.png || !ctx.info) throw DataError("libpng initialization failed for " + path.string());
  if (setjmp(png_jmpbuf(ctx.png))) throw DataError("corrupt PNG file: " + path.string());
  png_init_io(ctx.png, ctx.fp);
  png_read_info(ctx.png, ctx.info);

  const int bit_depth = png_get_bit_depth(ctx.png, ctx.info);
  if (bit_depth == 16)
    throw DataError("unsupported 16-bit PNG in " + path.string() + "; only 8-bit images are supported");
  const int color_type = png_get_color_type(ctx.png, ctx.info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(ctx.png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(ctx.png);
  if (png_get_valid(ctx.png, ctx.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(ctx.png);
  png_set_strip_alpha(ctx.png);
  png_read_update_info(ctx.png, ctx.info);

  const int w = static_cast<int>(png_get_image_width(ctx.png, ctx.info));
  const int h = static_cast<int>(png_get_image_height(ctx.png, ctx.info));
  const int channels = png_get_channels(ctx.png, ctx.info);
  if (channels != 1 && channels != 3)
    throw DataError("unsupported PNG channel layout (" + std::to_string(channels) + " channels) in " +
                    path.string());

  std::vector<unsigned char> data(static_cast<size_t>(w) * h * channels);
  std::vector<png_bytep> rows(static_cast<size_t>(h));
  for (int y = 0; y < h; ++y) rows[static_cast<size_t>(y)] = data.data() + static_cast<size_t>(y) * w * channels;
  png_read_image(ctx.png, rows.data());

  Image img{w, h, std::vector<float>(static_cast<size_t>(w) * h)};
  if (channels == 1) {
    for (size_t i = 0; i < img.px.size(); ++i) img.px[i] = static_cast<float>(data[i]);
  } else {
    // luminance weighting
    for (size_t i = 0; i < img.px.size(); ++i) {
      const unsigned char* p = data.data() + i * 3;
      img.px[i] = 0.299f * p[0] + 0.587f * p[1] + 0.114f * p[2];
    }
  }
  return img;
}

}  // namespace

Image read_image(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(c));
  if (ext == ".pgm") return read_pgm(path);
  if (ext == ".png") return read_png(path);
  throw DataError("unsupported image format '" + ext + "' for " + path.string() + "; expected .pgm or .png");
}

void write_pgm(const std::filesystem::path& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write image file: " + path.string());
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> buf(img.px.size());
  for (size_t i = 0; i < buf.size(); ++i) {
    const float v = std::round(img.px[i]);
    buf[i] = static_cast<unsigned char>(std::min(255.0f, std::max(0.0f, v)));
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

void write_png_gray(const std::filesystem::path& path, const Image& img) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw DataError("cannot write image file: " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fclose(fp);
    throw DataError("PNG write failed for " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<unsigned char> row(static_cast<size_t>(img.width));
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const float v = std::round(img.at(y, x));
      row[static_cast<size_t>(x)] = static_cast<unsigned char>(std::min(255.0f, std::max(0.0f, v)));
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  fclose(fp);
}

Image resize_bilinear(const Image& img, int target) {
  if (target < 1) throw ConfigError("resize target must be positive");
  Image out{target, target, std::vector<float>(static_cast<size_t>(target) * target)};
  const double sx = static_cast<double>(img.width) / target;
  const double sy = static_cast<double>(img.height) / target;
  for (int y = 0; y < target; ++y) {
    const double fy = std::min(std::max((y + 0.5) * sy - 0.5, 0.0), static_cast<double>(img.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < target; ++x) {
      const double fx = std::min(std::max((x + 0.5) * sx - 0.5, 0.0), static_cast<double>(img.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - x0;
      const double top = (1.0 - wx) * img.at(y0, x0) + wx * img.at(y0, x1);
      const double bot = (1.0 - wx) * img.at(y1, x0) + wx * img.at(y1, x1);
      out.at(y, x) = static_cast<float>((1.0 - wy) * top + wy * bot);
    }
  }
  return out;
}

Image center_crop(const Image& img, int size) {
  if (size > img.width || size > img.height)
    throw DataError("center_crop size " + std::to_string(size) + " exceeds image " + std::to_string(img.width) +
                    "x" + std::to_string(img.height));
  const int ox = (img.width - size) / 2;
  const int oy = (img.height - size) / 2;
  Image out{size, size, std::vector<float>(static_cast<size_t>(size) * size)};
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) out.at(y, x) = img.at(y + oy, x + ox);
  return out;
}

std::string PreprocessRecipe::describe() const {
  std::ostringstream os;
  for (size_t i = 0; i < steps.size(); ++i) {
    if (i) os << ",";
    switch (steps[i].kind) {
      case StepKind::resize: os << "resize(" << steps[i].arg << ")"; break;
      case StepKind::center_crop: os << "center_crop(" << steps[i].arg << ")"; break;
      case StepKind::to_grayscale: os << "to_grayscale"; break;
      case StepKind::scale_to_unit: os << "scale_to_unit"; break;
    }
  }
  return os.str();
}

Tensor<float> apply_recipe(const Image& img, const PreprocessRecipe& recipe) {
  Image cur = img;
  bool unit = false;
  for (const auto& step : recipe.steps) {
    switch (step.kind) {
      case StepKind::resize: cur = resize_bilinear(cur, step.arg); break;
      case StepKind::center_crop: cur = center_crop(cur, step.arg); break;
      case StepKind::to_grayscale: break;  // images are grayscale after load
      case StepKind::scale_to_unit: unit = true; break;
    }
  }
  Tensor<float> t({1, cur.height, cur.width});
  const float scale = unit ? 1.0f / 255.0f : 1.0f;
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = cur.px[static_cast<size_t>(i)] * scale;
  return t;
}

}  // namespace reskan
