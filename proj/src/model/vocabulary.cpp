#include "colay/model/vocabulary.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "colay/error.hpp"

namespace colay::model {

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{"[PAD]", "[UNK]"}) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < 2 || tokens_[0] != "[PAD]" || tokens_[1] != "[UNK]")
    throw ValidationError("vocabulary must start with [PAD] and [UNK]", "/vocab");
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<std::int64_t>(i)).second)
      throw ValidationError("duplicate vocabulary token '" + tokens_[i] + "'", "/vocab/" + std::to_string(i));
  }
}

Vocabulary Vocabulary::build(const std::vector<Prompt>& prompts, std::size_t max_size) {
  std::map<std::string, std::size_t> freq;
  for (const auto& p : prompts)
    for (const auto& s : p.sentences)
      for (const auto& w : s) ++freq[w];
  std::vector<std::pair<std::string, std::size_t>> words(freq.begin(), freq.end());
  std::stable_sort(words.begin(), words.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens{"[PAD]", "[UNK]"};
  for (const auto& [w, n] : words) {
    if (tokens.size() >= max_size) break;
    tokens.push_back(w);
  }
  return Vocabulary(std::move(tokens));
}

std::int64_t Vocabulary::id(const std::string& word) const {
  const auto it = index_.find(word);
  return it == index_.end() ? kUnknown : it->second;
}

std::vector<std::int64_t> Vocabulary::encode(const Prompt& p, std::size_t max_tokens) const {
  std::vector<std::int64_t> ids;
  for (const auto& s : p.sentences)
    for (const auto& w : s) {
      if (ids.size() >= max_tokens) return ids;
      ids.push_back(id(w));
    }
  return ids;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw MissingArtifactError("cannot write vocabulary to " + path);
  for (const auto& t : tokens_) out << t << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("vocabulary file not found: " + path);
  std::vector<std::string> tokens;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) tokens.push_back(line);
  return Vocabulary(std::move(tokens));
}

}  // namespace colay::model
