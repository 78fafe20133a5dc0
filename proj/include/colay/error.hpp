#pragma once

#include <stdexcept>
#include <string>

namespace colay {

// Input that violates a documented contract. `path` names the offending
// field (JSON pointer style, e.g. "/elements/3/x_min") when one applies.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& message, std::string path = {})
      : std::runtime_error(message), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

// A checkpoint, corpus or other on-disk artifact is absent or unusable.
class MissingArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace colay
