#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "paag/config.hpp"
#include "paag/evaluate.hpp"
#include "paag/gradcheck.hpp"
#include "paag/synthetic.hpp"
#include "paag/train.hpp"

namespace fs = std::filesystem;
using namespace paag;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("paag_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig tiny_config(const fs::path& dir, Variant v) {
  RunConfig c;
  c.variant = v;
  c.embed = 6;
  c.hidden = 5;
  c.vocab_size = 150;
  c.filters = 3;
  c.projection = 4;
  c.batch_size = 4;
  c.epochs = 2;
  c.warmup_epochs = 1;
  c.max_decode_len = 12;
  c.beam = 2;
  c.output_dir = dir.string();
  c.synth.num_products = 12;
  c.synth.vocab_size = 120;
  return c;
}

/// Writes a synthetic train/test split into dir and points the config at it.
void with_data(RunConfig& c, const fs::path& dir) {
  auto corpus = data::generate_synthetic(c.synth, 3);
  auto [tr, te] = data::split(corpus, 0.25, 3);
  c.train_data = (dir / "train.jsonl").string();
  c.eval_data = (dir / "test.jsonl").string();
  data::write_jsonl(c.train_data, tr);
  data::write_jsonl(c.eval_data, te);
}

std::pair<Model, std::vector<data::QAExample>> tiny_model(const RunConfig& c) {
  const auto corpus = data::generate_synthetic(c.synth, 3);
  auto vocab = data::Vocabulary::build(data::corpus_sentences(corpus), c.vocab_size);
  std::vector<data::QAExample> xs;
  for (std::size_t i = 0; i < corpus.size(); ++i) xs.push_back(data::encode_example(corpus[i], vocab, i));
  return {Model::create(c, std::move(vocab)), std::move(xs)};
}

}  // namespace

TEST_CASE("config: kv round trip") {
  RunConfig c;
  c.variant = Variant::RAGFWD;
  c.seed = 99;
  c.lambda_adv = 0.25;
  c.critic_learning_rate = 1.0 / 3.0;
  c.attend_review_words = true;
  c.synth.noise_rate = 0.125;
  c.output_dir = "somewhere/else";
  const auto back = RunConfig::parse(c.serialize());
  CHECK(back == c);
  CHECK(back.critic_learning_rate == c.critic_learning_rate);
  CHECK(back.serialize() == c.serialize());
}

TEST_CASE("config: unknown keys and bad values name the field") {
  try {
    RunConfig::parse("bogus = 3\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("bogus") != std::string::npos);
  }
  try {
    RunConfig::parse("hidden = many\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("hidden") != std::string::npos);
  }
  CHECK_THROWS_AS(RunConfig::parse("synth.bogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("variant = GAN\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("variant = PAAG\nlambda_gp = 0\n"), ConfigError);
  CHECK_NOTHROW(RunConfig::parse("variant = RAGFWD\nlambda_gp = 0\n"));
}

TEST_CASE("variant flags encode the ablation ladder") {
  RunConfig c;
  c.variant = Variant::RAGF;
  CHECK_FALSE(c.has_critic());
  c.variant = Variant::RAGFD;
  CHECK(c.has_critic());
  CHECK_FALSE(c.wasserstein());
  CHECK(c.penalty_weight() == 0);
  c.variant = Variant::RAGFWD;
  CHECK(c.wasserstein());
  CHECK(c.penalty_weight() == 0);
  c.variant = Variant::PAAG;
  CHECK(c.wasserstein());
  CHECK(c.penalty_weight() == c.lambda_gp);
}

TEST_CASE("RAGF has no critic parameters") {
  const auto dir = scratch("ragf");
  auto [m, xs] = tiny_model(tiny_config(dir, Variant::RAGF));
  CHECK(m.critic.empty());
  CHECK_THROWS_AS(m.disc(), ContractError);
  auto [p, ys] = tiny_model(tiny_config(dir, Variant::PAAG));
  CHECK_FALSE(p.critic.empty());
}

TEST_CASE("variants share the initial generator and the first loss") {
  const auto dir = scratch("share");
  auto c = tiny_config(dir, Variant::RAGF);
  c.warmup_epochs = 0;
  auto [a, xs] = tiny_model(c);
  c.variant = Variant::RAGFWD;
  auto [b, ys] = tiny_model(c);
  REQUIRE(a.generator.size() == b.generator.size());
  for (std::size_t i = 0; i < a.generator.size(); ++i) {
    const auto da = a.generator.entries()[i].second.data();
    const auto db = b.generator.entries()[i].second.data();
    CHECK(std::equal(da.begin(), da.end(), db.begin(), db.end()));
  }
  Trainer ta(std::move(a), xs), tb(std::move(b), ys);
  ta.run_epoch(0);
  tb.run_epoch(0);
  CHECK(ta.curve().front().loss_g == tb.curve().front().loss_g);
  CHECK(ta.curve().front().loss_d == 0.0);
  CHECK(tb.curve().front().loss_d != 0.0);
}

TEST_CASE("train writes checkpoints that evaluate and generate load") {
  const auto dir = scratch("pipeline");
  auto c = tiny_config(dir, Variant::PAAG);
  with_data(c, dir);
  std::size_t epochs_seen = 0;
  train(c, [&](std::size_t, const Trainer&) { ++epochs_seen; });
  CHECK(epochs_seen == 2);
  CHECK(fs::exists(epoch_checkpoint_path(c, 1)));
  CHECK(fs::exists(epoch_checkpoint_path(c, 2)));
  REQUIRE(fs::exists(final_checkpoint_path(c)));
  const auto curves = slurp(dir / "curves.csv");
  CHECK(curves.rfind(curve_header(), 0) == 0);

  const Model m = Model::from_checkpoint(load_checkpoint(final_checkpoint_path(c)));
  CHECK(m.config == c);
  CHECK(m.critic.size() > 0);
  const auto test = data::read_jsonl(c.eval_data);
  const auto report = evaluate(m, test);
  CHECK(report.examples == test.size());
  CHECK(report.beam == c.beam);
  CHECK(report.model.bleu1_per_example.size() == test.size());
  CHECK(report.to_json().contains("bm25"));
  const auto gens = generate(m, test);
  REQUIRE(gens.size() == test.size());
  for (const auto& g : gens) CHECK(std::isfinite(g.log_prob));
}

TEST_CASE("references scored against themselves give BLEU 100") {
  const auto dir = scratch("selfbleu");
  auto [m, xs] = tiny_model(tiny_config(dir, Variant::RAGF));
  const auto corpus = data::generate_synthetic(m.config.synth, 3);
  std::vector<metrics::Sentence> refs;
  for (const auto& ex : corpus) refs.push_back(data::tokenize(ex.answer));
  const auto gp = m.gen();
  const metrics::WordVectors vectors(m.vocab, gp.embedding);
  const auto s = score_texts(refs, refs, vectors);
  CHECK(s.bleu.bleu == doctest::Approx(100.0).epsilon(1e-12));
  for (double b : s.bleu1_per_example) CHECK(b == doctest::Approx(100.0).epsilon(1e-12));
}

TEST_CASE("baseline columns use the rankers directly") {
  data::SyntheticSpec s;
  s.num_products = 15;
  const auto corpus = data::generate_synthetic(s, 8);
  const auto bm = extractive_answers(corpus, true);
  const auto tf = extractive_answers(corpus, false);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto q = data::tokenize(corpus[i].question);
    std::vector<metrics::Sentence> rs;
    for (const auto& r : corpus[i].reviews) rs.push_back(data::tokenize(r));
    CHECK(bm[i] == rs[metrics::bm25_rank(q, rs).order.front()]);
    CHECK(tf[i] == rs[metrics::tfidf_rank(q, rs).order.front()]);
  }
}

TEST_CASE("evaluating on a foreign corpus is a vocabulary mismatch") {
  const auto dir = scratch("mismatch");
  auto [m, xs] = tiny_model(tiny_config(dir, Variant::RAGF));
  std::vector<data::RawExample> foreign{
      {"wie heisst das produkt", "es heisst blau", {"ich mag es sehr"}, {}}};
  CHECK_THROWS_AS(evaluate(m, foreign), DataError);
}

TEST_CASE("same seed gives byte-identical checkpoints") {
  auto run = [] {
    const auto dir = scratch("det");
    auto c = tiny_config(dir, Variant::PAAG);
    with_data(c, dir);
    train(c);
    return std::pair{slurp(final_checkpoint_path(c)), slurp(dir / "curves.csv")};
  };
  const auto a = run();
  const auto b = run();
  CHECK(!a.first.empty());
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("gradcheck covers many ops and passes") {
  auto checks = op_gradchecks(1);
  for (auto& m : model_gradchecks(1)) checks.push_back(std::move(m));
  std::set<std::string> names;
  for (const auto& c : checks) names.insert(c.name);
  CHECK(names.size() >= 12);
  const auto report = run_gradchecks(std::move(checks));
  CHECK(report.passed());
  for (const auto& r : report.results) CHECK_MESSAGE(r.passed, r.name);
}

TEST_CASE("gradcheck flags an op with a wrong backward") {
  Tensor x = Tensor::from({3}, {0.3, -0.2, 0.7}, true);
  GradCheck broken{"broken_square", {x}, [x] {
                     std::vector<double> out(3);
                     for (std::size_t i = 0; i < 3; ++i) out[i] = x.data()[i] * x.data()[i];
                     Tensor y = make_op("broken_square", {3}, out, {x},
                                        [x](const Tensor& g, const Tensor&) {
                                          return std::vector<Tensor>{mul(g, x)};  // missing factor 2
                                        });
                     return sum(y);
                   }};
  CHECK_FALSE(run_gradcheck(broken).passed);
}

TEST_CASE("a non-finite loss dumps the batch and aborts") {
  const auto dir = scratch("nan");
  auto c = tiny_config(dir, Variant::RAGF);
  auto [m, xs] = tiny_model(c);
  auto d = m.generator.entries().front().second.mutable_data();
  for (double& v : d) v = std::numeric_limits<double>::quiet_NaN();
  Trainer t(std::move(m), xs);
  CHECK_THROWS_AS(t.run_epoch(0), TrainingError);
  REQUIRE(fs::exists(dir / "nan_dump.json"));
  const auto dump = nlohmann::json::parse(slurp(dir / "nan_dump.json"));
  CHECK(dump.contains("batch"));
}
