#include "paag/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "paag/kvconfig.hpp"

namespace paag {

namespace {

constexpr std::uint64_t kCriticStream = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kShuffleStream = 0xbf58476d1ce4e5b9ULL;
constexpr std::uint64_t kEpsStream = 0x94d049bb133111ebULL;

std::vector<data::QAExample> encode_all(const std::vector<data::RawExample>& raw,
                                        const data::Vocabulary& vocab) {
  std::vector<data::QAExample> out;
  out.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out.push_back(data::encode_example(raw[i], vocab, i));
  return out;
}

}  // namespace

nn::GeneratorDims generator_dims(const RunConfig& c, std::size_t vocab) {
  nn::GeneratorDims d;
  d.vocab = vocab;
  d.embed = c.embed;
  d.hidden = c.hidden;
  d.attend_review_words = c.attend_review_words;
  return d;
}

nn::CriticDims critic_dims(const RunConfig& c, std::size_t vocab) {
  nn::CriticDims d;
  d.vocab = vocab;
  d.embed = c.embed;
  d.hidden = c.hidden;
  d.filters = c.filters;
  d.projection = c.projection;
  return d;
}

Model Model::create(const RunConfig& config, data::Vocabulary vocab) {
  config.validate();
  Model m;
  m.config = config;
  m.vocab = std::move(vocab);
  Rng rng(config.seed);
  nn::GeneratorParams::create(m.generator, generator_dims(config, m.vocab.size()), rng);
  if (config.has_critic()) {
    Rng critic_rng(config.seed ^ kCriticStream);
    nn::DiscriminatorParams::create(m.critic, critic_dims(config, m.vocab.size()), critic_rng);
  }
  return m;
}

nn::GeneratorParams Model::gen() const {
  return nn::GeneratorParams::bind(generator, generator_dims(config, vocab.size()));
}

nn::DiscriminatorParams Model::disc() const {
  if (critic.empty()) throw ContractError("variant " + to_string(config.variant) + " has no critic");
  return nn::DiscriminatorParams::bind(critic, critic_dims(config, vocab.size()));
}

Checkpoint Model::to_checkpoint(std::size_t epoch) const {
  Checkpoint ck;
  ck.tensors = generator.entries();
  for (const auto& e : critic.entries()) ck.tensors.push_back(e);
  ck.meta["config"] = config.to_kv();
  ck.meta["vocab"] = vocab.words();
  ck.meta["epoch"] = epoch;
  return ck;
}

Model Model::from_checkpoint(const Checkpoint& ck) {
  if (!ck.meta.contains("config") || !ck.meta.contains("vocab"))
    throw DataError("checkpoint lacks config or vocabulary metadata");
  Model m;
  m.config = RunConfig::from_kv(ck.meta.at("config").get<std::map<std::string, std::string>>());
  m.vocab = data::Vocabulary::from_words(ck.meta.at("vocab").get<std::vector<std::string>>());
  for (const auto& [name, t] : ck.tensors) {
    auto& store = name.rfind("critic.", 0) == 0 ? m.critic : m.generator;
    store.add(name, Tensor::from(t.shape(), t.values(), true));
  }
  m.gen();  // validates shapes against the vocabulary
  if (m.config.has_critic()) m.disc();
  return m;
}

std::vector<data::TokenId> critic_answer(const data::PaddedExample& ex, std::size_t vocab) {
  std::vector<data::TokenId> ids(ex.answer.begin(),
                                 ex.answer.begin() + static_cast<long>(ex.answer_length()));
  for (auto& id : ids)
    if (id >= vocab) id = data::kUnk;
  return ids;
}

CriticStreams critic_streams(const Model& model, const data::PaddedExample& ex) {
  NoGradGuard guard;
  const auto gp = model.gen();
  const auto ctx = nn::build_context(gp, ex);
  CriticStreams s;
  s.d_o = nn::teacher_forced(gp, ctx, ex).d_o;
  s.d_f = nn::no_facts_states(gp, ctx, ex);
  s.m = ctx.memory.m;
  s.fused = ctx.reviews.fusion.fused;
  s.answer = critic_answer(ex, model.vocab.size());
  return s;
}

std::string curve_header() {
  return "step,loss_g,loss_d,D_real,D_fake_facts,D_fake_nofacts,grad_penalty,grad_norm_mean";
}

std::string curve_line(const CurveRow& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", r.step, r.loss_g,
                r.loss_d, r.d_real, r.d_fake_facts, r.d_fake_nofacts, r.grad_penalty,
                r.grad_norm_mean);
  return buf;
}

Trainer::Trainer(Model model, std::vector<data::QAExample> examples)
    : model_(std::move(model)),
      examples_(std::move(examples)),
      shuffle_rng_(model_.config.seed ^ kShuffleStream),
      eps_rng_(model_.config.seed ^ kEpsStream) {
  if (examples_.empty()) throw DataError("training set is empty");
  gen_opt_.learning_rate = model_.config.learning_rate;
  critic_opt_.learning_rate = model_.config.critic_learning_rate;
}

void Trainer::run_epoch(std::size_t epoch) {
  std::vector<std::size_t> order(examples_.size());
  std::iota(order.begin(), order.end(), 0);
  shuffle_rng_.shuffle(order);
  const bool adversarial = model_.config.has_critic() && epoch >= model_.config.warmup_epochs;
  const std::size_t bs = model_.config.batch_size;
  for (std::size_t start = 0; start < order.size(); start += bs) {
    std::vector<const data::QAExample*> ptrs;
    std::vector<std::size_t> sources;
    for (std::size_t i = start; i < std::min(order.size(), start + bs); ++i) {
      ptrs.push_back(&examples_[order[i]]);
      sources.push_back(order[i]);
    }
    train_step(data::batch_of(ptrs, sources), adversarial);
  }
}

CriticStats Trainer::critic_update(const data::Batch& batch,
                                   const std::vector<nn::ForcedRun>& runs,
                                   const std::vector<nn::DecoderContext>& ctxs,
                                   const std::vector<Tensor>& d_f) {
  const auto& cfg = model_.config;
  const auto dp = model_.disc();
  const double inv = 1.0 / static_cast<double>(batch.items.size());
  CriticStats st;
  model_.critic.zero_grad();
  for (std::size_t i = 0; i < batch.items.size(); ++i) {
    Tensor d_g;
    {
      // d^g is the real sample; the critic objective does not move it.
      NoGradGuard guard;
      d_g = nn::encode_ground_truth(dp, critic_answer(batch.items[i], model_.vocab.size()));
    }
    const Tensor& m = ctxs[i].memory.m;
    const Tensor& cr = ctxs[i].reviews.fusion.fused;
    nn::CriticLoss l =
        cfg.wasserstein()
            ? nn::loss_d(dp, d_f[i], runs[i].d_o, d_g, m, cr, cfg.penalty_weight(), eps_rng_,
                         cfg.per_step_critic)
            : nn::loss_d_vanilla(dp, runs[i].d_o, d_g, m, cr, cfg.per_step_critic);
    if (!cfg.wasserstein()) {
      NoGradGuard guard;
      l.d_fake_nofacts = nn::sequence_score(dp, d_f[i], m, cr, cfg.per_step_critic).item();
    }
    backward(scale(l.loss, inv));
    st.loss += l.loss.item() * inv;
    st.d_real += l.d_real * inv;
    st.d_fake_facts += l.d_fake_facts * inv;
    st.d_fake_nofacts += l.d_fake_nofacts * inv;
    st.grad_penalty += l.grad_penalty * inv;
    st.grad_norm += l.grad_norm * inv;
  }
  if (std::isfinite(st.loss)) {
    clip_grad_norm(model_.critic, cfg.clip_norm);
    adagrad_step(model_.critic, critic_opt_);
  }
  return st;
}

CriticStats Trainer::critic_step(const data::Batch& batch) {
  std::vector<nn::ForcedRun> runs;
  std::vector<nn::DecoderContext> ctxs;
  std::vector<Tensor> d_f;
  {
    NoGradGuard guard;
    const auto gp = model_.gen();
    for (const auto& ex : batch.items) {
      ctxs.push_back(nn::build_context(gp, ex));
      runs.push_back(nn::teacher_forced(gp, ctxs.back(), ex));
      d_f.push_back(nn::no_facts_states(gp, ctxs.back(), ex));
    }
  }
  return critic_update(batch, runs, ctxs, d_f);
}

CurveRow Trainer::train_step(const data::Batch& batch, bool adversarial) {
  const auto& cfg = model_.config;
  const auto gp = model_.gen();
  const double inv = 1.0 / static_cast<double>(batch.items.size());
  CurveRow row;
  row.step = step_;

  std::vector<nn::DecoderContext> ctxs;
  std::vector<nn::ForcedRun> runs;
  model_.generator.zero_grad();
  for (const auto& ex : batch.items) {
    ctxs.push_back(nn::build_context(gp, ex));
    runs.push_back(nn::teacher_forced(gp, ctxs.back(), ex));
    row.loss_g += runs.back().loss.item() * inv;
    if (!adversarial) {
      backward(scale(runs.back().loss, inv));
      runs.back() = nn::ForcedRun{};
      ctxs.back() = nn::DecoderContext{};
    }
  }

  if (adversarial) {
    std::vector<Tensor> d_f;
    for (std::size_t i = 0; i < batch.items.size(); ++i)
      d_f.push_back(nn::no_facts_states(gp, ctxs[i], batch.items[i]));
    CriticStats st;
    for (std::size_t k = 0; k < cfg.critic_iters; ++k) st = critic_update(batch, runs, ctxs, d_f);
    row.loss_d = st.loss;
    row.d_real = st.d_real;
    row.d_fake_facts = st.d_fake_facts;
    row.d_fake_nofacts = st.d_fake_nofacts;
    row.grad_penalty = st.grad_penalty;
    row.grad_norm_mean = st.grad_norm;
    check_finite(batch, row);

    const auto dp = model_.disc();
    const auto form = cfg.wasserstein() ? nn::AdversarialForm::wasserstein
                                        : nn::AdversarialForm::minimax;
    for (std::size_t i = 0; i < batch.items.size(); ++i) {
      Tensor adv = nn::generator_adversarial(dp, runs[i].d_o, ctxs[i].memory.m,
                                             ctxs[i].reviews.fusion.fused, form,
                                             cfg.per_step_critic);
      backward(add(scale(runs[i].loss, inv), scale(adv, cfg.lambda_adv * inv)));
    }
    model_.critic.zero_grad();
  }
  check_finite(batch, row);
  clip_grad_norm(model_.generator, cfg.clip_norm);
  adagrad_step(model_.generator, gen_opt_);
  ++step_;
  curve_.push_back(row);
  return row;
}

void Trainer::check_finite(const data::Batch& batch, const CurveRow& row) const {
  if (std::isfinite(row.loss_g) && std::isfinite(row.loss_d)) return;
  nlohmann::json dump;
  dump["step"] = row.step;
  dump["loss_g"] = std::isfinite(row.loss_g) ? nlohmann::json(row.loss_g) : nlohmann::json(std::to_string(row.loss_g));
  dump["loss_d"] = std::isfinite(row.loss_d) ? nlohmann::json(row.loss_d) : nlohmann::json(std::to_string(row.loss_d));
  for (const auto& ex : batch.items) {
    const auto& src = examples_[ex.source];
    dump["batch"].push_back({{"source", ex.source},
                             {"question", src.question},
                             {"answer", src.answer},
                             {"reviews", src.reviews.size()},
                             {"attributes", src.attributes.size()}});
  }
  const std::filesystem::path dir = model_.config.output_dir.empty() ? "." : model_.config.output_dir;
  std::filesystem::create_directories(dir);
  const auto path = dir / "nan_dump.json";
  std::ofstream(path) << dump.dump(2) << "\n";
  throw TrainingError("non-finite loss at step " + std::to_string(row.step) +
                      "; last batch written to " + path.string());
}

double Trainer::mean_loss() const {
  NoGradGuard guard;
  const auto gp = model_.gen();
  double total = 0;
  for (const auto& ex : examples_) total += nn::teacher_forced(gp, data::pad_single(ex)).loss.item();
  return total / static_cast<double>(examples_.size());
}

std::filesystem::path epoch_checkpoint_path(const RunConfig& c, std::size_t epoch) {
  return std::filesystem::path(c.output_dir) / ("epoch_" + std::to_string(epoch) + ".ckpt");
}

std::filesystem::path final_checkpoint_path(const RunConfig& c) {
  return std::filesystem::path(c.output_dir) / "final.ckpt";
}

Model train(const RunConfig& config,
            const std::function<void(std::size_t, const Trainer&)>& on_epoch) {
  config.validate();
  if (config.train_data.empty()) throw ConfigError("config field 'train_data': required for training");
  const auto raw = data::read_jsonl(config.train_data);
  auto vocab = data::Vocabulary::build(data::corpus_sentences(raw), config.vocab_size);
  auto examples = encode_all(raw, vocab);
  Trainer trainer(Model::create(config, std::move(vocab)), std::move(examples));

  std::filesystem::create_directories(config.output_dir);
  std::ofstream curves(std::filesystem::path(config.output_dir) / "curves.csv");
  curves << curve_header() << "\n";
  std::size_t written = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    trainer.run_epoch(epoch);
    for (; written < trainer.curve().size(); ++written)
      curves << curve_line(trainer.curve()[written]) << "\n";
    curves.flush();
    save_checkpoint(epoch_checkpoint_path(config, epoch + 1), trainer.model().to_checkpoint(epoch + 1));
    if (on_epoch) on_epoch(epoch, trainer);
  }
  save_checkpoint(final_checkpoint_path(config), trainer.model().to_checkpoint(config.epochs));
  return trainer.model();
}

}  // namespace paag
