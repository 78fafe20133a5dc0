#include "colay/render.hpp"

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "colay/error.hpp"

namespace colay {
namespace {

using Rgb = std::array<std::uint8_t, 3>;

// Legend for the first 24 classes; later classes cycle with a shift.
constexpr std::array<Rgb, 24> kLegend = {{
    {31, 119, 180},  {255, 127, 14}, {44, 160, 44},   {214, 39, 40},   {148, 103, 189}, {140, 86, 75},
    {227, 119, 194}, {127, 127, 127}, {188, 189, 34}, {23, 190, 207},  {174, 199, 232}, {255, 187, 120},
    {152, 223, 138}, {255, 152, 150}, {197, 176, 213}, {196, 156, 148}, {247, 182, 210}, {199, 199, 199},
    {219, 219, 141}, {158, 218, 229}, {57, 59, 121},  {99, 121, 57},   {140, 109, 49},  {132, 60, 57},
}};

struct PixelRect {
  int x0, y0, x1, y1;  // half-open
};

PixelRect to_pixels(const AttributeSchema& s, const Box& b, int width, int height) {
  const long res = s.resolution();
  return {static_cast<int>(b.x_min * static_cast<long>(width) / res),
          static_cast<int>(b.y_min * static_cast<long>(height) / res),
          static_cast<int>((b.x_max + 1L) * width / res), static_cast<int>((b.y_max + 1L) * height / res)};
}

void fill(Raster& r, PixelRect rc, Rgb c, int alpha = 255) {
  rc.x0 = std::clamp(rc.x0, 0, r.width);
  rc.x1 = std::clamp(rc.x1, 0, r.width);
  rc.y0 = std::clamp(rc.y0, 0, r.height);
  rc.y1 = std::clamp(rc.y1, 0, r.height);
  for (int y = rc.y0; y < rc.y1; ++y) {
    for (int x = rc.x0; x < rc.x1; ++x) {
      if (alpha >= 255) {
        r.set(x, y, c);
        continue;
      }
      auto p = r.pixel(x, y);
      for (int k = 0; k < 3; ++k) p[k] = static_cast<std::uint8_t>((c[k] * alpha + p[k] * (255 - alpha)) / 255);
      r.set(x, y, p);
    }
  }
}

int attr(const AttributeSchema& s, const Element& e, const char* name) {
  auto idx = s.index_of(name);
  return idx ? e.values[*idx] : 0;
}

void draw_styled(Raster& r, const AttributeSchema& s, const Element& e, PixelRect rc) {
  const Rgb bg{static_cast<std::uint8_t>(attr(s, e, "bg_r")), static_cast<std::uint8_t>(attr(s, e, "bg_g")),
               static_cast<std::uint8_t>(attr(s, e, "bg_b"))};
  const Rgb fg{static_cast<std::uint8_t>(attr(s, e, "fg_r")), static_cast<std::uint8_t>(attr(s, e, "fg_g")),
               static_cast<std::uint8_t>(attr(s, e, "fg_b"))};
  const int bg_a = attr(s, e, "bg_a");
  const int fg_a = attr(s, e, "fg_a");
  fill(r, rc, bg, bg_a);

  const int border = 1 + attr(s, e, "font_weight") / 3;
  fill(r, {rc.x0, rc.y0, rc.x1, rc.y0 + border}, fg, fg_a);
  fill(r, {rc.x0, rc.y1 - border, rc.x1, rc.y1}, fg, fg_a);
  fill(r, {rc.x0, rc.y0, rc.x0 + border, rc.y1}, fg, fg_a);
  fill(r, {rc.x1 - border, rc.y0, rc.x1, rc.y1}, fg, fg_a);

  // Dummy text: one line of glyph blocks sized by font-size.
  const int font = attr(s, e, "font_size");
  if (font <= 0) return;
  const int glyph_h = std::max(1, font * r.height / 1024);
  const int glyph_w = std::max(1, glyph_h * 3 / 5);
  const int gap = std::max(1, glyph_h / 3);
  const int inner_w = rc.x1 - rc.x0 - 2 * (border + 1);
  const int inner_h = rc.y1 - rc.y0 - 2 * (border + 1);
  if (inner_w < glyph_w || inner_h < glyph_h) return;
  const int glyphs = std::max(1, (inner_w * 7 / 10 + gap) / (glyph_w + gap));
  const int line_w = glyphs * glyph_w + (glyphs - 1) * gap;
  const int align = attr(s, e, "alignment");
  const int h_align = align % 3;
  const int v_align = align / 3;
  const int left = rc.x0 + border + 1;
  const int top = rc.y0 + border + 1;
  const int x_start = left + (inner_w - line_w) * h_align / 2;
  const int y_start = top + (inner_h - glyph_h) * std::min(v_align, 2) / 2;
  for (int g = 0; g < glyphs; ++g) {
    const int gx = x_start + g * (glyph_w + gap);
    fill(r, {gx, y_start, gx + glyph_w, y_start + glyph_h}, fg, std::max(fg_a, 128));
  }
}

void png_write_to_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

}  // namespace

Raster::Raster(int w, int h, std::array<std::uint8_t, 3> c) : width(w), height(h) {
  if (w <= 0 || h <= 0) throw ValidationError("raster size must be positive");
  rgb.resize(static_cast<std::size_t>(w) * h * 3);
  for (std::size_t i = 0; i < rgb.size(); i += 3) {
    rgb[i] = c[0];
    rgb[i + 1] = c[1];
    rgb[i + 2] = c[2];
  }
}

std::array<std::uint8_t, 3> Raster::pixel(int x, int y) const {
  const auto i = (static_cast<std::size_t>(y) * width + x) * 3;
  return {rgb[i], rgb[i + 1], rgb[i + 2]};
}

void Raster::set(int x, int y, std::array<std::uint8_t, 3> c) {
  const auto i = (static_cast<std::size_t>(y) * width + x) * 3;
  rgb[i] = c[0];
  rgb[i + 1] = c[1];
  rgb[i + 2] = c[2];
}

std::array<std::uint8_t, 3> class_color(int cls) {
  const auto base = kLegend[static_cast<std::size_t>(cls) % kLegend.size()];
  const int shift = (cls / static_cast<int>(kLegend.size())) * 37;
  return {static_cast<std::uint8_t>((base[0] + shift) % 256), static_cast<std::uint8_t>((base[1] + 2 * shift) % 256),
          static_cast<std::uint8_t>((base[2] + 3 * shift) % 256)};
}

Raster render(const Layout& layout, int width, int height) {
  if (width <= 0 || height <= 0) throw ValidationError("render canvas must be non-empty");
  const auto& s = layout.schema();
  Raster r(width, height);
  const bool styled = s.has_style();
  for (const auto& e : layout.elements()) {
    if (!e.valid) continue;
    const auto rc = to_pixels(s, element_box(s, e), width, height);
    if (styled)
      draw_styled(r, s, e, rc);
    else
      fill(r, rc, class_color(element_class(s, e)));
  }
  return r;
}

std::vector<std::uint8_t> encode_png(const Raster& raster) {
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, info ? &info : nullptr);
    throw std::runtime_error("PNG encoding failed");
  }
  png_set_write_fn(png, &out, png_write_to_vector, nullptr);
  png_set_IHDR(png, info, static_cast<png_uint_32>(raster.width), static_cast<png_uint_32>(raster.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < raster.height; ++y) {
    auto* row = const_cast<png_bytep>(raster.rgb.data() + static_cast<std::size_t>(y) * raster.width * 3);
    png_write_row(png, row);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

void write_png(const Raster& raster, const std::string& path) {
  const auto bytes = encode_png(raster);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace colay
