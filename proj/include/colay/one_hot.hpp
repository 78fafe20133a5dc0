#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "colay/layout.hpp"

namespace colay {

// Dense row-major N x d_total matrix. Rows may be soft (decoder output).
struct OneHotLayout {
  int rows = 0;
  int cols = 0;
  std::vector<float> data;

  OneHotLayout() = default;
  OneHotLayout(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0f) {}

  float& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  float at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  std::span<const float> row(int r) const {
    return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
  }
};

OneHotLayout encode_one_hot(const Layout& layout);

// Per-slice argmax. An element is invalid iff its class slice peaks at the
// sentinel slot; swapped coordinates are reordered.
Layout decode_one_hot(SchemaPtr schema, const OneHotLayout& m);

}  // namespace colay
