#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "paag/config.hpp"
#include "paag/evaluate.hpp"
#include "paag/gradcheck.hpp"
#include "paag/kvconfig.hpp"
#include "paag/synthetic.hpp"
#include "paag/train.hpp"

namespace fs = std::filesystem;
using namespace paag;

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant;
  std::optional<std::size_t> beam;
  std::optional<std::size_t> critic_iters;
  bool attend_review_words = false;
  bool per_step_critic = false;
};

void setup_logging() {
  spdlog::set_pattern("[%H:%M:%S] [%l] %v");
  const char* env = std::getenv("PAAG_LOG");
  spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::info);
}

RunConfig resolve(const std::string& mode, const Overrides& o) {
  auto kv = o.config_path.empty() ? std::map<std::string, std::string>{}
                                  : read_kv_file(o.config_path);
  kv["mode"] = mode;
  if (o.seed) kv["seed"] = std::to_string(*o.seed);
  if (o.variant) kv["variant"] = *o.variant;
  if (o.beam) kv["beam"] = std::to_string(*o.beam);
  if (o.critic_iters) kv["critic_iters"] = std::to_string(*o.critic_iters);
  if (o.attend_review_words) kv["attend_review_words"] = "true";
  if (o.per_step_critic) kv["per_step_critic"] = "true";
  return RunConfig::from_kv(kv);
}

fs::path or_default(const std::string& path, const RunConfig& c, const char* name) {
  return path.empty() ? fs::path(c.output_dir) / name : fs::path(path);
}

Model load_model(const RunConfig& c, const Overrides& o) {
  const fs::path ckpt = c.checkpoint.empty() ? final_checkpoint_path(c) : fs::path(c.checkpoint);
  spdlog::info("loading checkpoint {}", ckpt.string());
  Model m = Model::from_checkpoint(load_checkpoint(ckpt));
  m.config.max_decode_len = c.max_decode_len;
  if (o.beam) m.config.beam = *o.beam;
  return m;
}

std::vector<data::RawExample> eval_set(const RunConfig& c) {
  if (c.eval_data.empty()) throw ConfigError("config field 'eval_data': required");
  return data::read_jsonl(c.eval_data);
}

int run_train(const RunConfig& c) {
  spdlog::info("training {} for {} epochs (warm-up {}), seed {}", to_string(c.variant), c.epochs,
               c.warmup_epochs, c.seed);
  std::size_t seen = 0;
  train(c, [&](std::size_t epoch, const Trainer& t) {
    const auto& rows = t.curve();
    double g = 0, d = 0;
    for (std::size_t i = seen; i < rows.size(); ++i) {
      g += rows[i].loss_g;
      d += rows[i].loss_d;
    }
    const double n = static_cast<double>(rows.size() - seen);
    seen = rows.size();
    spdlog::info("epoch {:>3}  loss_g {:.4f}  loss_d {:.4f}", epoch + 1, g / n, d / n);
  });
  spdlog::info("wrote {}", final_checkpoint_path(c).string());
  return 0;
}

int run_eval(const RunConfig& c, const Overrides& o) {
  const Model m = load_model(c, o);
  const auto report = evaluate(m, eval_set(c));
  const fs::path out = or_default(c.report, c, "eval.json");
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream(out) << report.to_json().dump(2) << "\n";
  spdlog::info("model  BLEU {:.4f}  BLEU1 {:.4f}", report.model.bleu.bleu, report.model.bleu.bleu_n[0]);
  spdlog::info("bm25   BLEU {:.4f}  BLEU1 {:.4f}", report.bm25.bleu.bleu, report.bm25.bleu.bleu_n[0]);
  spdlog::info("tfidf  BLEU {:.4f}  BLEU1 {:.4f}", report.tfidf.bleu.bleu, report.tfidf.bleu.bleu_n[0]);
  spdlog::info("wrote {}", out.string());
  return 0;
}

int run_generate(const RunConfig& c, const Overrides& o) {
  const Model m = load_model(c, o);
  const fs::path out = or_default(c.generations, c, "generations.jsonl");
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream os(out);
  for (const auto& g : generate(m, eval_set(c))) os << g.to_json().dump() << "\n";
  spdlog::info("wrote {}", out.string());
  return 0;
}

int run_synth(const RunConfig& c) {
  const auto corpus = data::generate_synthetic(c.synth, c.seed);
  auto [train_set, test_set] = data::split(corpus, c.test_ratio, c.seed);
  const fs::path train_path = or_default(c.train_data, c, "train.jsonl");
  const fs::path test_path = or_default(c.eval_data, c, "test.jsonl");
  for (const auto& p : {train_path, test_path})
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
  data::write_jsonl(train_path, train_set);
  data::write_jsonl(test_path, test_set);
  spdlog::info("wrote {} training and {} test examples", train_set.size(), test_set.size());
  return 0;
}

int run_gradcheck(const RunConfig& c) {
  auto checks = op_gradchecks(c.seed);
  for (auto& m : model_gradchecks(c.seed)) checks.push_back(std::move(m));
  const auto report = run_gradchecks(std::move(checks));
  std::cout << report.text();
  return report.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Product-aware answer generation"};
  app.require_subcommand(1);
  Overrides o;
  const char* modes[] = {"train", "eval", "generate", "synth-data", "gradcheck"};
  for (const char* mode : modes) {
    auto* sub = app.add_subcommand(mode);
    sub->add_option("--config", o.config_path, "flat key = value config file");
    sub->add_option("--seed", o.seed);
    sub->add_option("--variant", o.variant)->check(CLI::IsMember({"RAGF", "RAGFD", "RAGFWD", "PAAG"}));
    sub->add_option("--beam", o.beam);
    sub->add_option("--critic-iters", o.critic_iters);
    sub->add_flag("--attend-review-words", o.attend_review_words);
    sub->add_flag("--per-step-critic", o.per_step_critic);
  }
  CLI11_PARSE(app, argc, argv);
  const std::string mode = app.get_subcommands().front()->get_name();
  try {
    const RunConfig c = resolve(mode, o);
    if (mode == "train") return run_train(c);
    if (mode == "eval") return run_eval(c, o);
    if (mode == "generate") return run_generate(c, o);
    if (mode == "synth-data") return run_synth(c);
    return run_gradcheck(c);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
}
