#include "colay/schema.hpp"

#include <algorithm>

#include "colay/error.hpp"

namespace colay {
namespace {

constexpr const char* kCoordNames[4] = {"x_min", "y_min", "x_max", "y_max"};

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::vector<Attribute> base_attributes(int classes, int resolution) {
  return {{"class", classes},
          {"x_min", resolution},
          {"y_min", resolution},
          {"x_max", resolution},
          {"y_max", resolution}};
}

}  // namespace

AttributeSchema::AttributeSchema(std::string name, std::vector<Attribute> attributes, std::size_t class_index,
                                 int element_capacity, int canvas_width, int canvas_height,
                                 std::vector<std::string> class_names)
    : name_(std::move(name)),
      attributes_(std::move(attributes)),
      class_names_(std::move(class_names)),
      class_index_(class_index),
      capacity_(element_capacity),
      canvas_width_(canvas_width),
      canvas_height_(canvas_height) {
  if (attributes_.empty()) throw ValidationError("schema has no attributes", "/attributes");
  if (class_index_ >= attributes_.size()) throw ValidationError("class index out of range", "/class_index");
  if (capacity_ <= 0) throw ValidationError("element capacity must be positive", "/element_capacity");
  if (canvas_width_ <= 0 || canvas_height_ <= 0) throw ValidationError("canvas must be non-empty", "/canvas");
  for (std::size_t i = 0; i < attributes_.size(); ++i) {
    if (attributes_[i].cardinality < 2)
      throw ValidationError("attribute cardinality must be >= 2", "/attributes/" + std::to_string(i));
  }
  std::size_t* coord_slots[4] = {&x_min_, &y_min_, &x_max_, &y_max_};
  for (int c = 0; c < 4; ++c) {
    auto idx = index_of(kCoordNames[c]);
    if (!idx) throw ValidationError(std::string("schema lacks coordinate attribute ") + kCoordNames[c], "/attributes");
    *coord_slots[c] = *idx;
  }
  for (int c = 1; c < 4; ++c) {
    if (cardinality(*coord_slots[c]) != cardinality(x_min_))
      throw ValidationError("coordinate attributes must share one cardinality", "/attributes");
  }
  offsets_.reserve(attributes_.size());
  int offset = 0;
  for (const auto& a : attributes_) {
    offsets_.push_back(offset);
    offset += a.cardinality + 1;
  }
  width_ = offset;
  const int k = num_classes();
  if (class_names_.size() > static_cast<std::size_t>(k))
    throw ValidationError("more class names than classes", "/class_names");
  for (int c = static_cast<int>(class_names_.size()); c < k; ++c) class_names_.push_back("class" + std::to_string(c));
}

std::optional<std::size_t> AttributeSchema::index_of(const std::string& attribute) const {
  for (std::size_t i = 0; i < attributes_.size(); ++i)
    if (attributes_[i].name == attribute) return i;
  return std::nullopt;
}

bool AttributeSchema::has_style() const {
  return index_of("bg_r").has_value() && index_of("fg_r").has_value();
}

const std::string& AttributeSchema::class_name(int k) const { return class_names_.at(static_cast<std::size_t>(k)); }

std::uint64_t AttributeSchema::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  h = fnv1a(h, name_.data(), name_.size());
  for (const auto& a : attributes_) {
    h = fnv1a(h, a.name.data(), a.name.size());
    h = fnv1a(h, &a.cardinality, sizeof(a.cardinality));
  }
  const std::uint64_t scalars[4] = {class_index_, static_cast<std::uint64_t>(capacity_),
                                    static_cast<std::uint64_t>(canvas_width_),
                                    static_cast<std::uint64_t>(canvas_height_)};
  h = fnv1a(h, scalars, sizeof(scalars));
  return h;
}

bool AttributeSchema::operator==(const AttributeSchema& other) const {
  if (name_ != other.name_ || class_index_ != other.class_index_ || capacity_ != other.capacity_ ||
      canvas_width_ != other.canvas_width_ || canvas_height_ != other.canvas_height_ ||
      attributes_.size() != other.attributes_.size() || class_names_ != other.class_names_)
    return false;
  for (std::size_t i = 0; i < attributes_.size(); ++i) {
    if (attributes_[i].name != other.attributes_[i].name ||
        attributes_[i].cardinality != other.attributes_[i].cardinality)
      return false;
  }
  return true;
}

AttributeSchema AttributeSchema::toy() {
  return AttributeSchema("toy", base_attributes(4, 64), 0, 16, 64, 64, {"container", "image", "text", "button"});
}

AttributeSchema AttributeSchema::clay() {
  return AttributeSchema("clay", base_attributes(24, 64), 0, 64, 144, 256,
                         {"root",       "background", "image",        "pictogram",     "button",
                          "text",       "label",      "text input",   "map",           "checkbox",
                          "switch",     "pager indicator", "slider",  "radio button",  "spinner",
                          "progress bar", "advertisement", "drawer",  "navigation bar", "toolbar",
                          "list item",  "card view",  "container",    "date picker"});
}

AttributeSchema AttributeSchema::c4() {
  auto attrs = base_attributes(4, 1024);
  for (const char* prefix : {"fg_", "bg_"})
    for (const char* ch : {"r", "g", "b", "a"}) attrs.push_back({std::string(prefix) + ch, 256});
  attrs.push_back({"font_size", 128});
  attrs.push_back({"font_weight", 9});
  attrs.push_back({"alignment", 9});
  return AttributeSchema("c4", std::move(attrs), 0, 64, 256, 256, {"container", "image", "text", "button"});
}

SchemaPtr builtin_schema(const std::string& name) {
  if (name == "toy") return std::make_shared<const AttributeSchema>(AttributeSchema::toy());
  if (name == "clay") return std::make_shared<const AttributeSchema>(AttributeSchema::clay());
  if (name == "c4") return std::make_shared<const AttributeSchema>(AttributeSchema::c4());
  throw ValidationError("unknown schema '" + name + "'", "/schema");
}

}  // namespace colay
