#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "paag/checkpoint.hpp"
#include "paag/config.hpp"
#include "paag/dataset.hpp"
#include "paag/decoder.hpp"
#include "paag/discriminator.hpp"
#include "paag/optim.hpp"

namespace paag {

struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

nn::GeneratorDims generator_dims(const RunConfig& c, std::size_t vocab);
nn::CriticDims critic_dims(const RunConfig& c, std::size_t vocab);

/// Generator and (for every variant but RAGF) critic parameters.
struct Model {
  RunConfig config;
  data::Vocabulary vocab;
  ParamStore generator;
  ParamStore critic;

  /// Generator weights come from Rng(seed), critic weights from a separate
  /// stream, so variants share the same initial generator.
  static Model create(const RunConfig& config, data::Vocabulary vocab);

  nn::GeneratorParams gen() const;
  nn::DiscriminatorParams disc() const;

  /// meta holds the canonical config, the vocabulary and `epoch`.
  Checkpoint to_checkpoint(std::size_t epoch) const;
  static Model from_checkpoint(const Checkpoint& ckpt);
};

/// Extended (copied) ids read as UNK on the critic side.
std::vector<data::TokenId> critic_answer(const data::PaddedExample& ex, std::size_t vocab);

/// Frozen-generator streams the critic scores for one example.
struct CriticStreams {
  Tensor d_o, d_f;
  Tensor m, fused;
  std::vector<data::TokenId> answer;
};
CriticStreams critic_streams(const Model& model, const data::PaddedExample& ex);

struct CurveRow {
  std::size_t step = 0;
  double loss_g = 0;
  double loss_d = 0;
  double d_real = 0;
  double d_fake_facts = 0;
  double d_fake_nofacts = 0;
  double grad_penalty = 0;
  double grad_norm_mean = 0;
};

std::string curve_header();
std::string curve_line(const CurveRow& r);

/// Per-batch critic statistics, averaged over the batch.
struct CriticStats {
  double loss = 0, d_real = 0, d_fake_facts = 0, d_fake_nofacts = 0;
  double grad_penalty = 0, grad_norm = 0;
};

class Trainer {
 public:
  Trainer(Model model, std::vector<data::QAExample> examples);

  Model& model() { return model_; }
  const Model& model() const { return model_; }
  const std::vector<data::QAExample>& examples() const { return examples_; }
  const std::vector<CurveRow>& curve() const { return curve_; }
  std::size_t step_count() const { return step_; }

  /// One shuffled pass. Adversarial terms are on once `epoch` (0-based)
  /// reaches warmup_epochs and the variant has a critic.
  void run_epoch(std::size_t epoch);
  /// Critic update(s) followed by one generator update on `batch`.
  CurveRow train_step(const data::Batch& batch, bool adversarial);
  /// One critic update against the current, untouched generator.
  CriticStats critic_step(const data::Batch& batch);

  /// Mean teacher-forced loss over all training examples, no graph.
  double mean_loss() const;

 private:
  CriticStats critic_update(const data::Batch& batch, const std::vector<nn::ForcedRun>& runs,
                            const std::vector<nn::DecoderContext>& ctxs,
                            const std::vector<Tensor>& d_f);
  void check_finite(const data::Batch& batch, const CurveRow& row) const;

  Model model_;
  std::vector<data::QAExample> examples_;
  AdagradState gen_opt_, critic_opt_;
  Rng shuffle_rng_, eps_rng_;
  std::vector<CurveRow> curve_;
  std::size_t step_ = 0;
};

/// Reads the dataset of `config.train_data`, builds the vocabulary, trains,
/// and writes per-epoch checkpoints, `final.ckpt` and `curves.csv` under
/// `config.output_dir`. `on_epoch` runs after each epoch's checkpoint.
Model train(const RunConfig& config,
            const std::function<void(std::size_t epoch, const Trainer&)>& on_epoch = {});

std::filesystem::path epoch_checkpoint_path(const RunConfig& c, std::size_t epoch);
std::filesystem::path final_checkpoint_path(const RunConfig& c);

}  // namespace paag
