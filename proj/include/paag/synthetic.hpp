#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "paag/dataset.hpp"

namespace paag::data {

/// Parameters of the synthetic product-QA corpus. Question templates use the
/// placeholders {key} and {name}; answer template i pairs with question
/// template i and may also use {value}.
struct SyntheticSpec {
  std::size_t vocab_size = 2000;
  std::size_t num_products = 100;
  std::size_t attrs_per_product = 5;
  std::size_t reviews_per_product = 3;
  std::size_t review_facts_per_product = 2;
  double noise_rate = 0.3;
  double review_question_rate = 0.3;
  double name_rate = 0.3;
  /// Fraction of answers that state a wrong value for the asked key.
  double contradiction_rate = 0.0;
  std::vector<std::string> question_templates;
  std::vector<std::string> answer_templates;

  SyntheticSpec();
  /// Throws ConfigError when a rate is outside [0, 1] or templates mismatch.
  void validate() const;

  static SyntheticSpec from_kv(const std::map<std::string, std::string>& kv);
  std::map<std::string, std::string> to_kv() const;
};

/// Pure function of (spec, seed): one example per product.
std::vector<RawExample> generate_synthetic(const SyntheticSpec& spec,
                                           std::uint64_t seed);

}  // namespace paag::data
