#include "paag/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "paag/rng.hpp"

namespace paag::data {

std::map<std::string, TokenId> QAExample::oov_map(std::size_t vocab_size) const {
  std::map<std::string, TokenId> m;
  for (std::size_t i = 0; i < oov_words.size(); ++i)
    m.emplace(oov_words[i], vocab_size + i);
  return m;
}

QAExample encode_example(const RawExample& raw, const Vocabulary& vocab,
                         std::size_t record, EncodeStats* stats) {
  auto fail = [record](const std::string& what) -> DataError {
    return DataError("record " + std::to_string(record) + ": " + what);
  };
  QAExample ex;
  const auto q = tokenize(raw.question);
  const auto a = tokenize(raw.answer);
  if (q.empty()) throw fail("empty question");
  if (a.empty()) throw fail("empty answer");

  for (const auto& w : q) {
    if (vocab.contains(w)) {
      ex.question.push_back(vocab.lookup(w));
      continue;
    }
    auto it = std::find(ex.oov_words.begin(), ex.oov_words.end(), w);
    if (it == ex.oov_words.end()) {
      ex.oov_words.push_back(w);
      it = ex.oov_words.end() - 1;
    }
    ex.question.push_back(vocab.size() + static_cast<TokenId>(it - ex.oov_words.begin()));
  }

  for (const auto& w : a) {
    if (vocab.contains(w)) {
      ex.answer.push_back(vocab.lookup(w));
      continue;
    }
    auto it = std::find(ex.oov_words.begin(), ex.oov_words.end(), w);
    ex.answer.push_back(it == ex.oov_words.end()
                            ? kUnk
                            : vocab.size() + static_cast<TokenId>(it - ex.oov_words.begin()));
  }
  ex.answer.push_back(kEos);

  for (const auto& r : raw.reviews) {
    auto toks = tokenize(r);
    if (toks.empty()) {
      if (stats) ++stats->dropped_empty_reviews;
      continue;
    }
    std::vector<TokenId> ids;
    ids.reserve(toks.size());
    for (const auto& w : toks) ids.push_back(vocab.lookup(w));
    ex.reviews.push_back(std::move(ids));
  }
  if (ex.reviews.empty()) throw fail("no non-empty review");

  for (const auto& [k, v] : raw.attributes) {
    auto kt = tokenize(k);
    auto vt = tokenize(v);
    if (kt.empty() || vt.empty()) throw fail("empty attribute key or value");
    if ((kt.size() > 1 || vt.size() > 1) && stats) ++stats->truncated_attribute_values;
    ex.attributes.push_back({vocab.lookup(kt.front()), vocab.lookup(vt.front())});
  }
  return ex;
}

std::vector<std::string> decode_tokens(const std::vector<TokenId>& ids,
                                       const Vocabulary& vocab,
                                       const std::vector<std::string>& oov_words) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const TokenId id = ids[i];
    if (id == kEos && i + 1 == ids.size()) break;
    if (id < vocab.size()) {
      out.push_back(vocab.word(id));
    } else if (id - vocab.size() < oov_words.size()) {
      out.push_back(oov_words[id - vocab.size()]);
    } else {
      throw DataError("extended id " + std::to_string(id) + " has no OOV word");
    }
  }
  return out;
}

std::string join_tokens(const std::vector<std::string>& words) {
  std::string s;
  for (const auto& w : words) {
    if (!s.empty()) s += ' ';
    s += w;
  }
  return s;
}

namespace {

RawExample from_json(const nlohmann::json& j) {
  RawExample r;
  r.question = j.at("question").get<std::string>();
  r.answer = j.at("answer").get<std::string>();
  r.reviews = j.value("reviews", std::vector<std::string>{});
  for (const auto& kv : j.value("attributes", nlohmann::json::array())) {
    if (!kv.is_array() || kv.size() != 2)
      throw DataError("attribute entries must be [key, value] pairs");
    r.attributes.emplace_back(kv[0].get<std::string>(), kv[1].get<std::string>());
  }
  return r;
}

nlohmann::json to_json(const RawExample& r) {
  nlohmann::json attrs = nlohmann::json::array();
  for (const auto& [k, v] : r.attributes) attrs.push_back({k, v});
  return {{"question", r.question},
          {"answer", r.answer},
          {"reviews", r.reviews},
          {"attributes", attrs}};
}

}  // namespace

std::vector<RawExample> parse_jsonl(const std::string& text) {
  std::vector<RawExample> out;
  std::istringstream is(text);
  std::size_t lineno = 0;
  for (std::string line; std::getline(is, line);) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<RawExample> read_jsonl(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read dataset " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_jsonl(ss.str());
}

std::string to_jsonl(const std::vector<RawExample>& examples) {
  std::string out;
  for (const auto& e : examples) out += to_json(e).dump() + "\n";
  return out;
}

void write_jsonl(const std::filesystem::path& path,
                 const std::vector<RawExample>& examples) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write dataset " + path.string());
  os << to_jsonl(examples);
}

std::vector<std::vector<std::string>> corpus_sentences(
    const std::vector<RawExample>& examples) {
  std::vector<std::vector<std::string>> out;
  for (const auto& e : examples) {
    out.push_back(tokenize(e.question));
    out.push_back(tokenize(e.answer));
    for (const auto& r : e.reviews) out.push_back(tokenize(r));
    for (const auto& [k, v] : e.attributes) {
      auto kt = tokenize(k), vt = tokenize(v);
      if (!kt.empty()) out.push_back({kt.front()});
      if (!vt.empty()) out.push_back({vt.front()});
    }
  }
  return out;
}

std::pair<std::vector<RawExample>, std::vector<RawExample>> split(
    const std::vector<RawExample>& examples, double test_ratio,
    std::uint64_t seed) {
  if (test_ratio < 0 || test_ratio >= 1)
    throw ConfigError("test_ratio must be in [0, 1)");
  std::vector<std::size_t> idx(examples.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  rng.shuffle(idx);
  const auto n_test = static_cast<std::size_t>(test_ratio * static_cast<double>(examples.size()));
  std::vector<std::size_t> test_idx(idx.begin(), idx.begin() + n_test);
  std::vector<std::size_t> train_idx(idx.begin() + n_test, idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::pair<std::vector<RawExample>, std::vector<RawExample>> out;
  for (auto i : train_idx) out.first.push_back(examples[i]);
  for (auto i : test_idx) out.second.push_back(examples[i]);
  return out;
}

std::size_t PaddedExample::question_length() const {
  return static_cast<std::size_t>(std::count(question_mask.begin(), question_mask.end(), 1));
}

std::size_t PaddedExample::answer_length() const {
  return static_cast<std::size_t>(std::count(answer_mask.begin(), answer_mask.end(), 1));
}

namespace {

void pad_to(std::vector<TokenId>& ids, Mask& mask, std::size_t len) {
  mask.assign(len, 0);
  std::fill(mask.begin(), mask.begin() + static_cast<long>(ids.size()), 1);
  ids.resize(len, kPad);
}

}  // namespace

Batch batch_of(const std::vector<const QAExample*>& examples,
               const std::vector<std::size_t>& sources) {
  std::size_t lq = 0, la = 0, lr = 0, tr = 0, ta = 0;
  for (const auto* e : examples) {
    lq = std::max(lq, e->question.size());
    la = std::max(la, e->answer.size());
    tr = std::max(tr, e->reviews.size());
    ta = std::max(ta, e->attributes.size());
    for (const auto& r : e->reviews) lr = std::max(lr, r.size());
  }
  Batch b;
  for (std::size_t k = 0; k < examples.size(); ++k) {
    const auto& e = *examples[k];
    PaddedExample p;
    p.source = sources[k];
    p.n_oov = e.oov_words.size();
    p.question = e.question;
    pad_to(p.question, p.question_mask, lq);
    p.answer = e.answer;
    pad_to(p.answer, p.answer_mask, la);
    for (std::size_t i = 0; i < tr; ++i) {
      std::vector<TokenId> r = i < e.reviews.size() ? e.reviews[i] : std::vector<TokenId>{};
      Mask m;
      pad_to(r, m, lr);
      p.reviews.push_back(std::move(r));
      p.review_word_masks.push_back(std::move(m));
      p.review_mask.push_back(i < e.reviews.size() ? 1 : 0);
    }
    for (std::size_t i = 0; i < ta; ++i) {
      const bool real = i < e.attributes.size();
      p.attr_keys.push_back(real ? e.attributes[i].key : kPad);
      p.attr_values.push_back(real ? e.attributes[i].value : kPad);
      p.attr_mask.push_back(real ? 1 : 0);
    }
    b.items.push_back(std::move(p));
  }
  return b;
}

std::vector<Batch> batch(const std::vector<QAExample>& examples,
                         std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  std::vector<Batch> out;
  for (std::size_t start = 0; start < examples.size(); start += batch_size) {
    std::vector<const QAExample*> ptrs;
    std::vector<std::size_t> src;
    for (std::size_t i = start; i < std::min(examples.size(), start + batch_size); ++i) {
      ptrs.push_back(&examples[i]);
      src.push_back(i);
    }
    out.push_back(batch_of(ptrs, src));
  }
  return out;
}

PaddedExample pad_single(const QAExample& example) {
  return batch_of({&example}, {0}).items.front();
}

}  // namespace paag::data
