#include "colay/layout.hpp"

#include <algorithm>
#include <string>
#include <tuple>

#include "colay/error.hpp"

namespace colay {

Element make_invalid_element(const AttributeSchema& schema) {
  Element e;
  e.valid = false;
  e.values.resize(schema.attribute_count());
  for (std::size_t i = 0; i < schema.attribute_count(); ++i) e.values[i] = schema.sentinel(i);
  return e;
}

Element make_element(const AttributeSchema& schema, int cls, Box box) {
  Element e;
  e.valid = true;
  e.values.assign(schema.attribute_count(), 0);
  e.values[schema.class_index()] = cls;
  e.values[schema.x_min_index()] = box.x_min;
  e.values[schema.y_min_index()] = box.y_min;
  e.values[schema.x_max_index()] = box.x_max;
  e.values[schema.y_max_index()] = box.y_max;
  return e;
}

Box element_box(const AttributeSchema& schema, const Element& e) {
  return {e.values[schema.x_min_index()], e.values[schema.y_min_index()], e.values[schema.x_max_index()],
          e.values[schema.y_max_index()]};
}

int element_class(const AttributeSchema& schema, const Element& e) { return e.values[schema.class_index()]; }

Layout::Layout(SchemaPtr schema) : schema_(std::move(schema)) {
  if (!schema_) throw ValidationError("layout requires a schema", "/schema");
  elements_.assign(static_cast<std::size_t>(schema_->capacity()), make_invalid_element(*schema_));
}

Layout Layout::from_valid(SchemaPtr schema, std::vector<Element> valid) {
  Layout out(std::move(schema));
  if (valid.size() > out.elements_.size()) {
    throw ValidationError("layout has " + std::to_string(valid.size()) + " elements, capacity is " +
                              std::to_string(out.elements_.size()),
                          "/elements");
  }
  for (std::size_t i = 0; i < valid.size(); ++i) {
    if (!valid[i].valid) throw ValidationError("expected a valid element", "/elements/" + std::to_string(i));
    out.elements_[i] = std::move(valid[i]);
  }
  out.validate();
  return out;
}

std::size_t Layout::valid_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(elements_.begin(), elements_.end(), [](const Element& e) { return e.valid; }));
}

std::vector<Element> Layout::valid_elements() const {
  std::vector<Element> out;
  for (const auto& e : elements_)
    if (e.valid) out.push_back(e);
  return out;
}

void Layout::validate() const {
  const auto& s = *schema_;
  if (elements_.size() != static_cast<std::size_t>(s.capacity()))
    throw ValidationError("layout must hold exactly N elements", "/elements");
  bool seen_invalid = false;
  for (std::size_t n = 0; n < elements_.size(); ++n) {
    const auto& e = elements_[n];
    const std::string where = "/elements/" + std::to_string(n);
    if (e.values.size() != s.attribute_count())
      throw ValidationError("element has " + std::to_string(e.values.size()) + " attributes, schema has " +
                                std::to_string(s.attribute_count()),
                            where);
    if (!e.valid) {
      seen_invalid = true;
      for (std::size_t i = 0; i < e.values.size(); ++i) {
        if (e.values[i] != s.sentinel(i))
          throw ValidationError("invalid element must hold the sentinel in attribute " + std::to_string(i),
                                where + "/" + s.attributes()[i].name);
      }
      continue;
    }
    if (seen_invalid) throw ValidationError("valid element after invalid padding", where);
    for (std::size_t i = 0; i < e.values.size(); ++i) {
      if (e.values[i] < 0 || e.values[i] >= s.cardinality(i))
        throw ValidationError("attribute " + std::to_string(i) + " value " + std::to_string(e.values[i]) +
                                  " outside [0, " + std::to_string(s.cardinality(i)) + ")",
                              where + "/" + s.attributes()[i].name);
    }
    const Box b = element_box(s, e);
    if (b.x_min > b.x_max) throw ValidationError("x_min > x_max", where + "/x_min");
    if (b.y_min > b.y_max) throw ValidationError("y_min > y_max", where + "/y_min");
  }
}

bool Layout::operator==(const Layout& other) const {
  return (schema_ == other.schema_ || *schema_ == *other.schema_) && elements_ == other.elements_;
}

std::vector<int> count_classes(const Layout& layout) {
  const auto& s = layout.schema();
  std::vector<int> counts(static_cast<std::size_t>(s.num_classes()), 0);
  for (const auto& e : layout.elements())
    if (e.valid) ++counts[static_cast<std::size_t>(element_class(s, e))];
  return counts;
}

Layout sort_canonical(const Layout& layout) {
  const auto& s = layout.schema();
  auto valid = layout.valid_elements();
  auto key = [&s](const Element& e) {
    const Box b = element_box(s, e);
    return std::make_tuple(b.y_min, b.x_min, b.y_max, b.x_max, element_class(s, e));
  };
  std::stable_sort(valid.begin(), valid.end(), [&](const Element& a, const Element& b) { return key(a) < key(b); });
  return Layout::from_valid(layout.schema_ptr(), std::move(valid));
}

}  // namespace colay
