#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "colay/schema.hpp"

namespace colay {

// One layout item. Invalid elements hold the per-attribute sentinel d_i in
// every slot.
struct Element {
  std::vector<int> values;
  bool valid = false;

  bool operator==(const Element&) const = default;
};

struct Box {
  int x_min = 0, y_min = 0, x_max = 0, y_max = 0;

  bool operator==(const Box&) const = default;
};

Element make_invalid_element(const AttributeSchema& schema);

// Builds a valid element from class and box; style attributes default to 0.
Element make_element(const AttributeSchema& schema, int cls, Box box);

Box element_box(const AttributeSchema& schema, const Element& e);
int element_class(const AttributeSchema& schema, const Element& e);

// Exactly `capacity()` elements; valid ones form a prefix.
class Layout {
 public:
  explicit Layout(SchemaPtr schema);

  // Pads `valid` with invalid elements. Throws ValidationError if there are
  // more than N elements or any element violates the schema.
  static Layout from_valid(SchemaPtr schema, std::vector<Element> valid);

  const AttributeSchema& schema() const noexcept { return *schema_; }
  const SchemaPtr& schema_ptr() const noexcept { return schema_; }

  std::span<const Element> elements() const noexcept { return elements_; }
  const Element& operator[](std::size_t i) const { return elements_.at(i); }
  std::size_t size() const noexcept { return elements_.size(); }
  std::size_t valid_count() const noexcept;
  std::vector<Element> valid_elements() const;

  // Throws ValidationError naming the element and attribute on violation.
  void validate() const;

  bool operator==(const Layout& other) const;

 private:
  SchemaPtr schema_;
  std::vector<Element> elements_;
};

// Per-class tally of valid elements (length K).
std::vector<int> count_classes(const Layout& layout);

// Valid elements ordered by (y_min, x_min, y_max, x_max, class), invalid
// padding kept as the suffix.
Layout sort_canonical(const Layout& layout);

}  // namespace colay
