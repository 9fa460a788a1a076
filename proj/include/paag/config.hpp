#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "paag/synthetic.hpp"

namespace paag {

enum class Variant { RAGF, RAGFD, RAGFWD, PAAG };

std::string to_string(Variant v);
/// Throws ConfigError for anything but RAGF, RAGFD, RAGFWD, PAAG.
Variant parse_variant(const std::string& s);

/// Every run setting. The variant alone decides the adversarial recipe, so
/// the ablation invariants hold by construction:
///   RAGF   no critic
///   RAGFD  vanilla GAN critic
///   RAGFWD Wasserstein critic, no gradient penalty
///   PAAG   Wasserstein critic with gradient penalty
struct RunConfig {
  std::string mode = "train";
  Variant variant = Variant::PAAG;
  std::uint64_t seed = 1;

  std::size_t embed = 32;
  std::size_t hidden = 32;
  std::size_t vocab_size = 2000;
  bool attend_review_words = false;

  std::size_t filters = 16;
  std::size_t projection = 32;
  bool per_step_critic = false;

  std::size_t batch_size = 16;
  double learning_rate = 0.1;
  double critic_learning_rate = 0.01;
  double clip_norm = 5.0;
  std::size_t epochs = 20;
  std::size_t warmup_epochs = 2;
  std::size_t critic_iters = 1;
  double lambda_gp = 10.0;
  double lambda_adv = 0.1;

  std::size_t beam = 4;
  std::size_t max_decode_len = 30;

  std::string train_data;
  std::string eval_data;
  std::string output_dir = "run";
  std::string checkpoint;
  std::string report;
  std::string generations;

  double test_ratio = 0.1;
  data::SyntheticSpec synth;

  bool has_critic() const { return variant != Variant::RAGF; }
  bool wasserstein() const { return variant == Variant::RAGFWD || variant == Variant::PAAG; }
  /// Penalty weight actually applied: lambda_gp for PAAG, 0 otherwise.
  double penalty_weight() const { return variant == Variant::PAAG ? lambda_gp : 0.0; }

  /// Throws ConfigError naming the offending field.
  void validate() const;

  /// Unknown keys and malformed values raise ConfigError naming the key.
  /// Synthetic-corpus keys carry a "synth." prefix.
  static RunConfig from_kv(const std::map<std::string, std::string>& kv);
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::string& path);

  std::map<std::string, std::string> to_kv() const;
  /// Canonical text: every key, sorted, one per line.
  std::string serialize() const;

  bool operator==(const RunConfig& o) const { return to_kv() == o.to_kv(); }
};

}  // namespace paag
