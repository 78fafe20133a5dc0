#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace colay {

struct Attribute {
  std::string name;
  int cardinality = 0;
};

// Declares the discrete attributes of a layout element. Every attribute i
// takes values in [0, d_i); the value d_i is reserved for invalid (padding)
// elements, so each attribute occupies d_i + 1 one-hot slots.
class AttributeSchema {
 public:
  AttributeSchema(std::string name, std::vector<Attribute> attributes,
                  std::size_t class_index, int element_capacity,
                  int canvas_width, int canvas_height,
                  std::vector<std::string> class_names = {});

  const std::string& name() const noexcept { return name_; }
  std::span<const Attribute> attributes() const noexcept { return attributes_; }
  std::size_t attribute_count() const noexcept { return attributes_.size(); }
  int cardinality(std::size_t i) const { return attributes_.at(i).cardinality; }
  int sentinel(std::size_t i) const { return cardinality(i); }

  std::size_t class_index() const noexcept { return class_index_; }
  int num_classes() const { return cardinality(class_index_); }
  int capacity() const noexcept { return capacity_; }
  int canvas_width() const noexcept { return canvas_width_; }
  int canvas_height() const noexcept { return canvas_height_; }

  // Quantized axis resolution shared by the four coordinate attributes.
  int resolution() const { return cardinality(x_min_); }
  std::size_t x_min_index() const noexcept { return x_min_; }
  std::size_t y_min_index() const noexcept { return y_min_; }
  std::size_t x_max_index() const noexcept { return x_max_; }
  std::size_t y_max_index() const noexcept { return y_max_; }

  // Offset of attribute i's first one-hot slot within an encoded row.
  int slot_offset(std::size_t i) const { return offsets_.at(i); }
  int one_hot_width() const noexcept { return width_; }

  std::optional<std::size_t> index_of(const std::string& attribute) const;
  bool has_style() const;
  const std::string& class_name(int k) const;
  std::span<const std::string> class_names() const noexcept { return class_names_; }

  // Stable 64-bit fingerprint over everything that affects encoding.
  std::uint64_t hash() const;

  bool operator==(const AttributeSchema& other) const;

  // Desk-scale schema: container/image/text/button, 64-step axes, N = 16.
  static AttributeSchema toy();
  // CLAY-style: 24 classes, 64-step axes, N = 64.
  static AttributeSchema clay();
  // C4-style: 4 classes, 1024-step axes, colors, font and alignment.
  static AttributeSchema c4();

 private:
  std::string name_;
  std::vector<Attribute> attributes_;
  std::vector<std::string> class_names_;
  std::vector<int> offsets_;
  std::size_t class_index_ = 0;
  std::size_t x_min_ = 0, y_min_ = 0, x_max_ = 0, y_max_ = 0;
  int capacity_ = 0;
  int canvas_width_ = 0;
  int canvas_height_ = 0;
  int width_ = 0;
};

using SchemaPtr = std::shared_ptr<const AttributeSchema>;

// Builtin schema by name ("toy", "clay", "c4"); throws ValidationError.
SchemaPtr builtin_schema(const std::string& name);

}  // namespace colay
