#include "colay/one_hot.hpp"

#include <algorithm>
#include <string>

#include "colay/error.hpp"

namespace colay {
namespace {

// Index of the largest entry in [begin, begin + count); first wins ties.
int argmax(std::span<const float> row, int begin, int count) {
  int best = 0;
  for (int j = 1; j < count; ++j)
    if (row[static_cast<std::size_t>(begin + j)] > row[static_cast<std::size_t>(begin + best)]) best = j;
  return best;
}

}  // namespace

OneHotLayout encode_one_hot(const Layout& layout) {
  const auto& s = layout.schema();
  layout.validate();
  OneHotLayout m(static_cast<int>(layout.size()), s.one_hot_width());
  for (int n = 0; n < m.rows; ++n) {
    const auto& e = layout[static_cast<std::size_t>(n)];
    for (std::size_t i = 0; i < s.attribute_count(); ++i) m.at(n, s.slot_offset(i) + e.values[i]) = 1.0f;
  }
  return m;
}

Layout decode_one_hot(SchemaPtr schema, const OneHotLayout& m) {
  const auto& s = *schema;
  if (m.cols != s.one_hot_width())
    throw ValidationError("one-hot width " + std::to_string(m.cols) + " does not match schema width " +
                          std::to_string(s.one_hot_width()));
  if (m.rows != s.capacity())
    throw ValidationError("one-hot rows " + std::to_string(m.rows) + " does not match capacity " +
                          std::to_string(s.capacity()));
  std::vector<Element> valid;
  const std::size_t cls = s.class_index();
  for (int n = 0; n < m.rows; ++n) {
    const auto row = m.row(n);
    const int cls_slot = argmax(row, s.slot_offset(cls), s.cardinality(cls) + 1);
    if (cls_slot == s.sentinel(cls)) continue;
    Element e;
    e.valid = true;
    e.values.resize(s.attribute_count());
    for (std::size_t i = 0; i < s.attribute_count(); ++i) {
      // A valid element never carries a sentinel, so only real values compete.
      e.values[i] = argmax(row, s.slot_offset(i), s.cardinality(i));
    }
    auto& xmin = e.values[s.x_min_index()];
    auto& xmax = e.values[s.x_max_index()];
    auto& ymin = e.values[s.y_min_index()];
    auto& ymax = e.values[s.y_max_index()];
    if (xmin > xmax) std::swap(xmin, xmax);
    if (ymin > ymax) std::swap(ymin, ymax);
    valid.push_back(std::move(e));
  }
  return Layout::from_valid(std::move(schema), std::move(valid));
}

}  // namespace colay
