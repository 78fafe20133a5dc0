#include "colay/prompt.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <random>
#include <set>

#include "colay/error.hpp"

namespace colay {
namespace {

constexpr std::array<const char*, 3> kRegionNames = {"top", "middle", "bottom"};

std::string plural(const std::string& noun, int n) {
  if (n == 1) return noun;
  if (!noun.empty() && (noun.back() == 's' || noun.back() == 'x')) return noun + "es";
  return noun + "s";
}

std::string join_list(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += (i + 1 == items.size()) ? " and " : ", ";
    out += items[i];
  }
  return out;
}

// "3 buttons, 2 images and 1 text", most frequent class first.
std::string count_phrase(const AttributeSchema& s, const std::vector<int>& counts) {
  std::vector<int> order(counts.size());
  for (std::size_t k = 0; k < counts.size(); ++k) order[k] = static_cast<int>(k);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return counts[a] > counts[b]; });
  std::vector<std::string> parts;
  for (int k : order)
    if (counts[k] > 0) parts.push_back(std::to_string(counts[k]) + " " + plural(s.class_name(k), counts[k]));
  return join_list(parts);
}

struct Summary {
  std::vector<int> counts;
  std::array<std::vector<int>, 3> region_counts;
  int columns = 1;
  int vertical_guides = 0;
  int valid = 0;
};

Summary summarize(const Layout& layout) {
  const auto& s = layout.schema();
  Summary out;
  out.counts = count_classes(layout);
  for (auto& r : out.region_counts) r.assign(out.counts.size(), 0);
  std::map<int, int> per_row;
  std::set<int> lefts;
  const int res = s.resolution();
  for (const auto& e : layout.elements()) {
    if (!e.valid) continue;
    ++out.valid;
    const Box b = element_box(s, e);
    const int centre2 = b.y_min + b.y_max;  // twice the centre
    const int region = std::min(2, centre2 * 3 / (2 * res));
    ++out.region_counts[static_cast<std::size_t>(region)][static_cast<std::size_t>(element_class(s, e))];
    ++per_row[b.y_min];
    lefts.insert(b.x_min);
  }
  for (const auto& [row, n] : per_row) out.columns = std::max(out.columns, n);
  out.vertical_guides = static_cast<int>(lefts.size());
  return out;
}

std::string pick(Rng& rng, std::initializer_list<const char*> options) {
  std::uniform_int_distribution<std::size_t> d(0, options.size() - 1);
  return *(options.begin() + static_cast<std::ptrdiff_t>(d(rng)));
}

std::vector<std::string> layout_sentences(const AttributeSchema& s, const Summary& sum, Rng& rng) {
  const std::string screen = pick(rng, {"screen", "page", "view"});
  const std::string verb = pick(rng, {"contains", "has", "shows"});
  std::vector<std::string> out;
  out.push_back("The " + screen + " " + verb + " " + count_phrase(s, sum.counts));
  for (std::size_t r = 0; r < 3; ++r) {
    const std::string phrase = count_phrase(s, sum.region_counts[r]);
    if (phrase.empty()) continue;
    out.push_back("At the " + std::string(kRegionNames[r]) + " there " +
                  (std::count_if(sum.region_counts[r].begin(), sum.region_counts[r].end(),
                                 [](int c) { return c > 0; }) == 1 &&
                           *std::max_element(sum.region_counts[r].begin(), sum.region_counts[r].end()) == 1
                       ? "is "
                       : "are ") +
                  phrase);
  }
  if (sum.columns > 1)
    out.push_back("Elements are arranged in " + std::to_string(sum.columns) + " columns");
  else
    out.push_back("Elements are stacked in a single column");
  return out;
}

std::vector<std::string> functionality_sentences(const AttributeSchema& s, const Summary& sum, Rng& rng) {
  const std::string screen = pick(rng, {"screen", "page", "app"});
  std::vector<std::string> out;
  out.push_back("This " + screen + " presents " + count_phrase(s, sum.counts));
  for (std::size_t r = 0; r < 3; ++r) {
    const std::string phrase = count_phrase(s, sum.region_counts[r]);
    if (!phrase.empty()) out.push_back("It offers " + phrase + " in the " + kRegionNames[r] + " area");
  }
  return out;
}

std::vector<std::string> usability_sentences(const AttributeSchema& s, const Summary& sum, Rng& rng) {
  const std::string verb = pick(rng, {"use", "interact with", "work with"});
  std::vector<std::string> out;
  for (std::size_t r = 0; r < 3; ++r) {
    const std::string phrase = count_phrase(s, sum.region_counts[r]);
    if (!phrase.empty()) out.push_back("A user can " + verb + " " + phrase + " at the " + kRegionNames[r]);
  }
  out.push_back("The content follows " + std::to_string(sum.vertical_guides) + " vertical guides");
  return out;
}

std::vector<std::string> overview_sentences(const AttributeSchema& s, const Summary& sum, Rng& rng) {
  const std::string screen = pick(rng, {"screen", "interface", "page"});
  std::vector<std::string> out;
  out.push_back("A " + screen + " with " + std::to_string(sum.valid) + " " + plural("element", sum.valid));
  out.push_back("It includes " + count_phrase(s, sum.counts));
  out.push_back("The layout uses " + std::to_string(sum.columns) + " " + plural("column", sum.columns));
  std::size_t busiest = 0;
  int busiest_n = -1;
  for (std::size_t r = 0; r < 3; ++r) {
    int n = 0;
    for (int c : sum.region_counts[r]) n += c;
    if (n > busiest_n) {
      busiest_n = n;
      busiest = r;
    }
  }
  out.push_back("Most elements sit at the " + std::string(kRegionNames[busiest]));
  return out;
}

}  // namespace

PromptStyle prompt_style_from_string(std::string_view s) {
  if (s == "layout") return PromptStyle::Layout;
  if (s == "functionality") return PromptStyle::Functionality;
  if (s == "usability") return PromptStyle::Usability;
  if (s == "overview") return PromptStyle::Overview;
  throw ValidationError("unknown prompt style '" + std::string(s) + "'", "/prompt_style");
}

std::string_view to_string(PromptStyle s) {
  switch (s) {
    case PromptStyle::Layout: return "layout";
    case PromptStyle::Functionality: return "functionality";
    case PromptStyle::Usability: return "usability";
    case PromptStyle::Overview: return "overview";
  }
  return "layout";
}

std::vector<std::string> tokenize_words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Prompt parse_prompt(std::string_view text) {
  Prompt p;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == '.' || text[i] == '!' || text[i] == '?') {
      auto words = tokenize_words(text.substr(start, i - start));
      if (!words.empty()) p.sentences.push_back(std::move(words));
      start = i + 1;
    }
  }
  return p;
}

Prompt synthesize_prompt(const Layout& layout, PromptStyle style, std::uint64_t seed) {
  const auto sum = summarize(layout);
  if (sum.valid == 0) return parse_prompt("The screen is empty.");
  Rng rng(seed);
  std::vector<std::string> sentences;
  switch (style) {
    case PromptStyle::Layout: sentences = layout_sentences(layout.schema(), sum, rng); break;
    case PromptStyle::Functionality: sentences = functionality_sentences(layout.schema(), sum, rng); break;
    case PromptStyle::Usability: sentences = usability_sentences(layout.schema(), sum, rng); break;
    case PromptStyle::Overview: sentences = overview_sentences(layout.schema(), sum, rng); break;
  }
  Prompt p;
  for (const auto& s : sentences) p.sentences.push_back(tokenize_words(s));
  return p;
}

}  // namespace colay
