#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "colay/conditions.hpp"

namespace colay::model {

// Word-level vocabulary: id 0 is padding, id 1 unknown words.
class Vocabulary {
 public:
  static constexpr std::int64_t kPad = 0;
  static constexpr std::int64_t kUnknown = 1;

  Vocabulary();
  // Words ordered by descending frequency, then alphabetically.
  static Vocabulary build(const std::vector<Prompt>& prompts, std::size_t max_size = 4096);
  explicit Vocabulary(std::vector<std::string> tokens);

  std::int64_t id(const std::string& word) const;
  const std::string& token(std::int64_t id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  // Flattened word ids, cut at max_tokens.
  std::vector<std::int64_t> encode(const Prompt& p, std::size_t max_tokens) const;

  // One token per line.
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int64_t> index_;
};

}  // namespace colay::model
