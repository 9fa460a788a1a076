#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

namespace paag::data {

using TokenId = std::size_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kUnk = 1;
inline constexpr TokenId kSos = 2;
inline constexpr TokenId kEos = 3;
inline constexpr std::size_t kReserved = 4;

/// Word <-> id map. Ids 0..3 are PAD, UNK, SOS, EOS.
class Vocabulary {
 public:
  Vocabulary();

  /// Keeps the max_size most frequent words (ties lexicographic) after the
  /// reserved ids. Throws ConfigError when max_size < 4 and DataError on
  /// an empty corpus.
  static Vocabulary build(const std::vector<std::vector<std::string>>& corpus,
                          std::size_t max_size);
  /// Restores a vocabulary from its full id-ordered word list.
  static Vocabulary from_words(std::vector<std::string> words);

  TokenId lookup(const std::string& word) const;
  bool contains(const std::string& word) const;
  const std::string& word(TokenId id) const;
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> ids_;
};

std::vector<std::string> tokenize(const std::string& text);

}  // namespace paag::data
