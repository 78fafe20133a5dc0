#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "colay/conditions.hpp"

namespace colay {

enum class PromptStyle : std::uint8_t { Layout, Functionality, Usability, Overview };

PromptStyle prompt_style_from_string(std::string_view s);
std::string_view to_string(PromptStyle s);

// Template description of a layout built from class counts, vertical
// regions and column structure. Same layout, style and seed give the same
// prompt.
Prompt synthesize_prompt(const Layout& layout, PromptStyle style, std::uint64_t seed);

// Lower-cases and splits on anything that is not a letter or digit.
std::vector<std::string> tokenize_words(std::string_view text);

// Splits on '.', '!' and '?' into sentences of word tokens.
Prompt parse_prompt(std::string_view text);

}  // namespace colay
