#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "colay/layout.hpp"

namespace colay {

struct Raster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

  Raster() = default;
  Raster(int w, int h, std::array<std::uint8_t, 3> fill = {255, 255, 255});

  std::array<std::uint8_t, 3> pixel(int x, int y) const;
  void set(int x, int y, std::array<std::uint8_t, 3> c);
  bool operator==(const Raster&) const = default;
};

// Fixed color legend shared by the renderer and the editor.
std::array<std::uint8_t, 3> class_color(int cls);

// Draws elements in sequence order onto a white canvas. Schemas with style
// attributes are drawn with their own colors, borders and glyph blocks;
// others use the class legend.
Raster render(const Layout& layout, int width, int height);

std::vector<std::uint8_t> encode_png(const Raster& raster);
void write_png(const Raster& raster, const std::string& path);

}  // namespace colay
