#include "paag/config.hpp"

#include <charconv>
#include <functional>

#include "paag/kvconfig.hpp"
#include "paag/tensor.hpp"

namespace paag {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::RAGF: return "RAGF";
    case Variant::RAGFD: return "RAGFD";
    case Variant::RAGFWD: return "RAGFWD";
    case Variant::PAAG: return "PAAG";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  if (s == "RAGF") return Variant::RAGF;
  if (s == "RAGFD") return Variant::RAGFD;
  if (s == "RAGFWD") return Variant::RAGFWD;
  if (s == "PAAG") return Variant::PAAG;
  throw ConfigError("variant: expected RAGF, RAGFD, RAGFWD or PAAG, got '" + s + "'");
}

namespace {

constexpr const char* kSynthPrefix = "synth.";

std::string fmt(double x) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

std::string fmt(bool b) { return b ? "true" : "false"; }

[[noreturn]] void bad(const std::string& key, const std::string& value, const char* want) {
  throw ConfigError("config field '" + key + "': expected " + want + ", got '" + value + "'");
}

std::size_t as_size(const std::string& k, const std::string& v) {
  std::uint64_t x = 0;
  auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) bad(k, v, "a non-negative integer");
  return static_cast<std::size_t>(x);
}

double as_double(const std::string& k, const std::string& v) {
  double x = 0;
  auto r = std::from_chars(v.data(), v.data() + v.size(), x);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) bad(k, v, "a number");
  return x;
}

bool as_bool(const std::string& k, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad(k, v, "true or false");
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto size = [&](const char* k, std::size_t RunConfig::*f) {
      t[k] = [f](RunConfig& c, const std::string& key, const std::string& v) { c.*f = as_size(key, v); };
    };
    auto real = [&](const char* k, double RunConfig::*f) {
      t[k] = [f](RunConfig& c, const std::string& key, const std::string& v) { c.*f = as_double(key, v); };
    };
    auto flag = [&](const char* k, bool RunConfig::*f) {
      t[k] = [f](RunConfig& c, const std::string& key, const std::string& v) { c.*f = as_bool(key, v); };
    };
    auto text = [&](const char* k, std::string RunConfig::*f) {
      t[k] = [f](RunConfig& c, const std::string&, const std::string& v) { c.*f = v; };
    };
    t["variant"] = [](RunConfig& c, const std::string&, const std::string& v) { c.variant = parse_variant(v); };
    t["seed"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = as_size(k, v); };
    text("mode", &RunConfig::mode);
    size("embed", &RunConfig::embed);
    size("hidden", &RunConfig::hidden);
    size("vocab_size", &RunConfig::vocab_size);
    flag("attend_review_words", &RunConfig::attend_review_words);
    size("filters", &RunConfig::filters);
    size("projection", &RunConfig::projection);
    flag("per_step_critic", &RunConfig::per_step_critic);
    size("batch_size", &RunConfig::batch_size);
    real("learning_rate", &RunConfig::learning_rate);
    real("critic_learning_rate", &RunConfig::critic_learning_rate);
    real("clip_norm", &RunConfig::clip_norm);
    size("epochs", &RunConfig::epochs);
    size("warmup_epochs", &RunConfig::warmup_epochs);
    size("critic_iters", &RunConfig::critic_iters);
    real("lambda_gp", &RunConfig::lambda_gp);
    real("lambda_adv", &RunConfig::lambda_adv);
    size("beam", &RunConfig::beam);
    size("max_decode_len", &RunConfig::max_decode_len);
    text("train_data", &RunConfig::train_data);
    text("eval_data", &RunConfig::eval_data);
    text("output_dir", &RunConfig::output_dir);
    text("checkpoint", &RunConfig::checkpoint);
    text("report", &RunConfig::report);
    text("generations", &RunConfig::generations);
    real("test_ratio", &RunConfig::test_ratio);
    return t;
  }();
  return table;
}

}  // namespace

void RunConfig::validate() const {
  auto need = [](bool ok, const char* field, const char* what) {
    if (!ok) throw ConfigError(std::string("config field '") + field + "': " + what);
  };
  static const char* modes[] = {"train", "eval", "generate", "synth-data", "gradcheck"};
  bool known = false;
  for (const char* m : modes) known = known || mode == m;
  need(known, "mode", "expected train, eval, generate, synth-data or gradcheck");
  need(embed > 0, "embed", "must be positive");
  need(hidden > 0, "hidden", "must be positive");
  need(vocab_size > data::kReserved, "vocab_size", "must exceed the 4 reserved ids");
  need(filters > 0, "filters", "must be positive");
  need(projection > 0, "projection", "must be positive");
  need(batch_size > 0, "batch_size", "must be positive");
  need(learning_rate > 0, "learning_rate", "must be positive");
  need(critic_learning_rate > 0, "critic_learning_rate", "must be positive");
  need(clip_norm > 0, "clip_norm", "must be positive");
  need(critic_iters > 0, "critic_iters", "must be positive");
  need(lambda_gp >= 0, "lambda_gp", "must be non-negative");
  need(variant != Variant::PAAG || lambda_gp > 0, "lambda_gp",
       "PAAG requires a positive gradient-penalty weight");
  need(lambda_adv >= 0, "lambda_adv", "must be non-negative");
  need(beam > 0, "beam", "must be positive");
  need(max_decode_len > 0, "max_decode_len", "must be positive");
  need(test_ratio >= 0 && test_ratio < 1, "test_ratio", "must lie in [0, 1)");
  synth.validate();
}

RunConfig RunConfig::from_kv(const std::map<std::string, std::string>& kv) {
  RunConfig c;
  std::map<std::string, std::string> synth_kv;
  const auto synth_keys = c.synth.to_kv();
  for (const auto& [k, v] : kv) {
    if (k.rfind(kSynthPrefix, 0) == 0) {
      const std::string sub = k.substr(std::string(kSynthPrefix).size());
      if (!synth_keys.count(sub)) throw ConfigError("unknown config key '" + k + "'");
      synth_kv[sub] = v;
      continue;
    }
    auto it = setters().find(k);
    if (it == setters().end()) throw ConfigError("unknown config key '" + k + "'");
    it->second(c, k, v);
  }
  c.synth = data::SyntheticSpec::from_kv(synth_kv);
  c.validate();
  return c;
}

RunConfig RunConfig::parse(const std::string& text) { return from_kv(parse_kv(text)); }

RunConfig RunConfig::load(const std::string& path) { return from_kv(read_kv_file(path)); }

std::map<std::string, std::string> RunConfig::to_kv() const {
  std::map<std::string, std::string> kv{
      {"mode", mode},
      {"variant", to_string(variant)},
      {"seed", std::to_string(seed)},
      {"embed", std::to_string(embed)},
      {"hidden", std::to_string(hidden)},
      {"vocab_size", std::to_string(vocab_size)},
      {"attend_review_words", fmt(attend_review_words)},
      {"filters", std::to_string(filters)},
      {"projection", std::to_string(projection)},
      {"per_step_critic", fmt(per_step_critic)},
      {"batch_size", std::to_string(batch_size)},
      {"learning_rate", fmt(learning_rate)},
      {"critic_learning_rate", fmt(critic_learning_rate)},
      {"clip_norm", fmt(clip_norm)},
      {"epochs", std::to_string(epochs)},
      {"warmup_epochs", std::to_string(warmup_epochs)},
      {"critic_iters", std::to_string(critic_iters)},
      {"lambda_gp", fmt(lambda_gp)},
      {"lambda_adv", fmt(lambda_adv)},
      {"beam", std::to_string(beam)},
      {"max_decode_len", std::to_string(max_decode_len)},
      {"train_data", train_data},
      {"eval_data", eval_data},
      {"output_dir", output_dir},
      {"checkpoint", checkpoint},
      {"report", report},
      {"generations", generations},
      {"test_ratio", fmt(test_ratio)},
  };
  for (const auto& [k, v] : synth.to_kv()) kv[kSynthPrefix + k] = v;
  return kv;
}

std::string RunConfig::serialize() const { return format_kv(to_kv()); }

}  // namespace paag
