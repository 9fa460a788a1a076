#include "paag/vocab.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "paag/tensor.hpp"

namespace paag::data {

namespace {
const std::vector<std::string> kReservedWords = {"<pad>", "<unk>", "<s>", "</s>"};
}

Vocabulary::Vocabulary() : words_(kReservedWords) {
  for (TokenId i = 0; i < words_.size(); ++i) ids_.emplace(words_[i], i);
}

Vocabulary Vocabulary::from_words(std::vector<std::string> words) {
  if (words.size() < kReserved ||
      !std::equal(kReservedWords.begin(), kReservedWords.end(), words.begin()))
    throw DataError("vocabulary must start with the reserved tokens");
  Vocabulary v;
  v.words_ = std::move(words);
  v.ids_.clear();
  for (TokenId i = 0; i < v.words_.size(); ++i) {
    if (!v.ids_.emplace(v.words_[i], i).second)
      throw DataError("duplicate vocabulary word '" + v.words_[i] + "'");
  }
  return v;
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& corpus,
                             std::size_t max_size) {
  if (max_size < kReserved)
    throw ConfigError("vocabulary max_size must be >= 4, got " +
                      std::to_string(max_size));
  if (corpus.empty()) throw DataError("cannot build a vocabulary from an empty corpus");
  std::map<std::string, std::size_t> counts;
  for (const auto& sentence : corpus)
    for (const auto& w : sentence)
      if (std::find(kReservedWords.begin(), kReservedWords.end(), w) ==
          kReservedWords.end())
        ++counts[w];
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  // map iteration is lexicographic, so a stable sort keeps ties in that order
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> words = kReservedWords;
  for (const auto& [w, _] : ranked) {
    if (words.size() >= kReserved + max_size) break;
    words.push_back(w);
  }
  return from_words(std::move(words));
}

TokenId Vocabulary::lookup(const std::string& word) const {
  auto it = ids_.find(word);
  return it == ids_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(const std::string& word) const {
  return ids_.count(word) > 0;
}

const std::string& Vocabulary::word(TokenId id) const {
  if (id >= words_.size())
    throw DataError("token id " + std::to_string(id) + " outside vocabulary of " +
                    std::to_string(words_.size()));
  return words_[id];
}

std::vector<std::string> tokenize(const std::string& text) {
  std::istringstream is(text);
  std::vector<std::string> out;
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

}  // namespace paag::data
