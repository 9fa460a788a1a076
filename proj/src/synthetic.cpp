#include "paag/synthetic.hpp"

#include <algorithm>
#include <sstream>

#include "paag/rng.hpp"

namespace paag::data {

namespace {

const std::vector<std::string> kQuestionTemplates = {
    "can you tell me what the {key} of this product is",
    "what {key} does the {name} have could anyone tell me",
    "i want to know the {key} before i buy it",
};
const std::vector<std::string> kAnswerTemplates = {
    "the {key} of this product is {value} i am satisfied with it",
    "the {name} has {value} {key} and it works well",
    "its {key} is {value} you can buy it with confidence",
};

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
    s.replace(pos, from.size(), to);
  return s;
}

std::vector<std::string> split_templates(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  for (std::string t; std::getline(is, t, '|');) {
    auto b = t.find_first_not_of(' ');
    auto e = t.find_last_not_of(' ');
    if (b != std::string::npos) out.push_back(t.substr(b, e - b + 1));
  }
  return out;
}

std::string join_templates(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& t : v) out += (out.empty() ? "" : " | ") + t;
  return out;
}

std::vector<std::string> pool(const std::string& prefix, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

struct Fact {
  std::string key, value;
};

}  // namespace

SyntheticSpec::SyntheticSpec()
    : question_templates(kQuestionTemplates), answer_templates(kAnswerTemplates) {}

void SyntheticSpec::validate() const {
  auto rate = [](const char* name, double v) {
    if (!(v >= 0.0 && v <= 1.0))
      throw ConfigError(std::string(name) + " must lie in [0, 1]");
  };
  rate("noise_rate", noise_rate);
  rate("review_question_rate", review_question_rate);
  rate("name_rate", name_rate);
  rate("contradiction_rate", contradiction_rate);
  if (num_products == 0) throw ConfigError("num_products must be >= 1");
  if (reviews_per_product == 0) throw ConfigError("reviews_per_product must be >= 1");
  if (attrs_per_product + review_facts_per_product == 0)
    throw ConfigError("a product needs at least one attribute or review fact");
  if (question_templates.empty() || question_templates.size() != answer_templates.size())
    throw ConfigError("question_templates and answer_templates must pair up");
  for (const auto& t : question_templates)
    if (t.find("{key}") == std::string::npos)
      throw ConfigError("question template without {key}: " + t);
  for (const auto& t : answer_templates)
    if (t.find("{value}") == std::string::npos)
      throw ConfigError("answer template without {value}: " + t);
}

SyntheticSpec SyntheticSpec::from_kv(const std::map<std::string, std::string>& kv) {
  SyntheticSpec s;
  for (const auto& [k, v] : kv) {
    try {
      if (k == "vocab_size") s.vocab_size = std::stoul(v);
      else if (k == "num_products") s.num_products = std::stoul(v);
      else if (k == "attrs_per_product") s.attrs_per_product = std::stoul(v);
      else if (k == "reviews_per_product") s.reviews_per_product = std::stoul(v);
      else if (k == "review_facts_per_product") s.review_facts_per_product = std::stoul(v);
      else if (k == "noise_rate") s.noise_rate = std::stod(v);
      else if (k == "review_question_rate") s.review_question_rate = std::stod(v);
      else if (k == "name_rate") s.name_rate = std::stod(v);
      else if (k == "contradiction_rate") s.contradiction_rate = std::stod(v);
      else if (k == "question_templates") s.question_templates = split_templates(v);
      else if (k == "answer_templates") s.answer_templates = split_templates(v);
    } catch (const std::logic_error&) {
      throw ConfigError("synthetic spec: bad value for " + k + ": '" + v + "'");
    }
  }
  s.validate();
  return s;
}

std::map<std::string, std::string> SyntheticSpec::to_kv() const {
  auto num = [](double x) {
    std::ostringstream os;
    os << x;
    return os.str();
  };
  return {{"vocab_size", std::to_string(vocab_size)},
          {"num_products", std::to_string(num_products)},
          {"attrs_per_product", std::to_string(attrs_per_product)},
          {"reviews_per_product", std::to_string(reviews_per_product)},
          {"review_facts_per_product", std::to_string(review_facts_per_product)},
          {"noise_rate", num(noise_rate)},
          {"review_question_rate", num(review_question_rate)},
          {"name_rate", num(name_rate)},
          {"contradiction_rate", num(contradiction_rate)},
          {"question_templates", join_templates(question_templates)},
          {"answer_templates", join_templates(answer_templates)}};
}

std::vector<RawExample> generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);

  const std::size_t n_keys = std::max<std::size_t>(2 * spec.attrs_per_product, 6);
  const std::size_t n_feats = std::max<std::size_t>(2 * spec.review_facts_per_product, 4);
  const std::size_t n_values = std::max<std::size_t>(spec.vocab_size / 4, 8);
  const std::size_t used = n_keys + n_feats + n_values + 40;
  const std::size_t n_fill = spec.vocab_size > used + 16 ? spec.vocab_size - used : 16;
  const auto keys = pool("attr", n_keys);
  const auto feats = pool("feat", n_feats);
  const auto values = pool("val", n_values);
  const auto fillers = pool("w", n_fill);

  auto pick_distinct = [&](const std::vector<std::string>& from, std::size_t n) {
    std::vector<std::string> v = from;
    rng.shuffle(v);
    v.resize(std::min(n, v.size()));
    return v;
  };
  auto filler_run = [&](std::size_t lo, std::size_t hi) {
    std::string s;
    const std::size_t n = lo + rng.below(hi - lo + 1);
    for (std::size_t i = 0; i < n; ++i) s += (s.empty() ? "" : " ") + rng.pick(fillers);
    return s;
  };
  auto mention = [&](const Fact& f) {
    const std::string lead = filler_run(1, 3);
    const std::string tail = filler_run(2, 4);
    return rng.bernoulli(0.5) ? lead + " the " + f.key + " is " + f.value + " " + tail
                              : "i think " + f.value + " " + f.key + " is " + tail;
  };

  std::vector<RawExample> corpus;
  corpus.reserve(spec.num_products);
  for (std::size_t p = 0; p < spec.num_products; ++p) {
    RawExample ex;
    const std::string name = "item" + std::to_string(p);

    std::vector<Fact> attrs, facts;
    for (const auto& k : pick_distinct(keys, spec.attrs_per_product))
      attrs.push_back({k, rng.pick(values)});
    for (const auto& k : pick_distinct(feats, spec.review_facts_per_product))
      facts.push_back({k, rng.pick(values)});
    for (const auto& a : attrs) ex.attributes.emplace_back(a.key, a.value);

    std::vector<Fact> all = attrs;
    all.insert(all.end(), facts.begin(), facts.end());
    std::vector<int> about(spec.reviews_per_product, -1);  // fact index or -1
    for (std::size_t r = 0; r < spec.reviews_per_product; ++r)
      if (!rng.bernoulli(spec.noise_rate)) about[r] = static_cast<int>(rng.below(all.size()));

    // Review-borne questions need a review that can carry the fact.
    const bool can_ask_review = !facts.empty() && spec.noise_rate < 1.0;
    const bool ask_review = attrs.empty() || (can_ask_review && rng.bernoulli(spec.review_question_rate));
    std::size_t target;
    if (ask_review) {
      target = attrs.size() + rng.below(facts.size());
      if (std::find(about.begin(), about.end(), static_cast<int>(target)) == about.end())
        about[rng.below(about.size())] = static_cast<int>(target);
    } else {
      target = rng.below(attrs.size());
    }

    for (int a : about)
      ex.reviews.push_back(a < 0 ? filler_run(6, 10) : mention(all[static_cast<std::size_t>(a)]));

    const Fact& fact = all[target];
    std::string value = fact.value;
    if (rng.bernoulli(spec.contradiction_rate)) {
      do value = rng.pick(values);
      while (value == fact.value);
    }

    std::vector<std::size_t> named, plain;
    for (std::size_t i = 0; i < spec.question_templates.size(); ++i)
      (spec.question_templates[i].find("{name}") != std::string::npos ? named : plain).push_back(i);
    const std::size_t t = !named.empty() && (plain.empty() || rng.bernoulli(spec.name_rate))
                              ? rng.pick(named)
                              : rng.pick(plain);
    auto fill = [&](std::string s) {
      s = replace_all(std::move(s), "{key}", fact.key);
      s = replace_all(std::move(s), "{name}", name);
      return replace_all(std::move(s), "{value}", value);
    };
    ex.question = fill(spec.question_templates[t]);
    ex.answer = fill(spec.answer_templates[t]);
    corpus.push_back(std::move(ex));
  }
  return corpus;
}

}  // namespace paag::data
