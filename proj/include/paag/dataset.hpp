#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "paag/ops.hpp"
#include "paag/vocab.hpp"

namespace paag::data {

/// One record as stored on disk: whitespace-segmented text fields.
struct RawExample {
  std::string question;
  std::string answer;
  std::vector<std::string> reviews;
  std::vector<std::pair<std::string, std::string>> attributes;

  bool operator==(const RawExample&) const = default;
};

struct Attribute {
  TokenId key;
  TokenId value;
};

struct QAExample {
  std::vector<TokenId> question;
  std::vector<std::vector<TokenId>> reviews;
  std::vector<Attribute> attributes;
  std::vector<TokenId> answer;  // terminated by exactly one EOS
  /// Question words outside the vocabulary; word i has extended id |V| + i.
  std::vector<std::string> oov_words;

  std::map<std::string, TokenId> oov_map(std::size_t vocab_size) const;
};

struct EncodeStats {
  std::size_t truncated_attribute_values = 0;
  std::size_t dropped_empty_reviews = 0;
};

/// Throws DataError naming `record` when the question or answer is empty,
/// no review survives tokenization, or an attribute key is empty.
QAExample encode_example(const RawExample& raw, const Vocabulary& vocab,
                         std::size_t record = 0, EncodeStats* stats = nullptr);

/// Maps ids back to words; extended ids use the example's OOV list and a
/// trailing EOS is dropped.
std::vector<std::string> decode_tokens(const std::vector<TokenId>& ids,
                                       const Vocabulary& vocab,
                                       const std::vector<std::string>& oov_words);
std::string join_tokens(const std::vector<std::string>& words);

std::vector<RawExample> read_jsonl(const std::filesystem::path& path);
std::vector<RawExample> parse_jsonl(const std::string& text);
void write_jsonl(const std::filesystem::path& path,
                 const std::vector<RawExample>& examples);
std::string to_jsonl(const std::vector<RawExample>& examples);

/// Every token sequence of the corpus (question, answer, reviews, attributes),
/// for vocabulary construction.
std::vector<std::vector<std::string>> corpus_sentences(
    const std::vector<RawExample>& examples);

/// Deterministic fixed-ratio split; returns (train, test).
std::pair<std::vector<RawExample>, std::vector<RawExample>> split(
    const std::vector<RawExample>& examples, double test_ratio,
    std::uint64_t seed);

/// An example padded to batch-wide lengths. Masks mark real tokens; padded
/// reviews have an all-zero word mask and a zero review_mask entry.
struct PaddedExample {
  std::vector<TokenId> question;
  Mask question_mask;
  std::vector<std::vector<TokenId>> reviews;
  std::vector<Mask> review_word_masks;
  Mask review_mask;
  std::vector<TokenId> attr_keys;
  std::vector<TokenId> attr_values;
  Mask attr_mask;
  std::vector<TokenId> answer;
  Mask answer_mask;
  std::size_t n_oov = 0;
  std::size_t source = 0;  // index into the batched example list

  std::size_t question_length() const;
  std::size_t answer_length() const;
};

struct Batch {
  std::vector<PaddedExample> items;
};

std::vector<Batch> batch(const std::vector<QAExample>& examples,
                         std::size_t batch_size);
Batch batch_of(const std::vector<const QAExample*>& examples,
               const std::vector<std::size_t>& sources);
PaddedExample pad_single(const QAExample& example);

}  // namespace paag::data
