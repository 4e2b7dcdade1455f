#include "cocoba/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cocoba/error.hpp"
#include "cocoba/rng.hpp"

namespace cocoba {
namespace {

using nlohmann::json;

bool is_word_byte(unsigned char c) {
  return std::isalnum(c) != 0 || c == '_' || c >= 0x80;
}

char fold(char c) {
  return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
}

std::string folded(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), fold);
  return out;
}

bool matches_at(std::string_view text, std::size_t pos, std::string_view term) {
  if (term.empty() || pos + term.size() > text.size()) return false;
  for (std::size_t k = 0; k < term.size(); ++k) {
    if (fold(text[pos + k]) != fold(term[k])) return false;
  }
  const std::size_t end = pos + term.size();
  const bool left_ok = pos == 0 || !is_word_byte(text[pos - 1]) ||
                       !is_word_byte(term.front());
  const bool right_ok = end == text.size() || !is_word_byte(text[end]) ||
                        !is_word_byte(term.back());
  return left_ok && right_ok;
}

std::vector<std::string> match_candidates(const std::vector<std::string>& terms) {
  std::vector<std::string> out(terms.begin(), terms.end());
  out.emplace_back(kQueryToken);
  // Longest first so "diabetes" wins over "diabet".
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.size() > b.size();
  });
  return out;
}

}  // namespace

Label label_from_int(int value) {
  if (value == 1) return Label::kPositive;
  if (value == -1) return Label::kNegative;
  throw Error(ErrorCode::kInvalidArgument,
              "label must be 1 or -1, got " + std::to_string(value));
}

Posting make_posting(PostingId id, std::string text, std::vector<Span> spans,
                     std::optional<Label> gold_label, Split split) {
  if (spans.empty()) {
    throw Error(ErrorCode::kFormatError, "posting '" + id + "' has no term spans");
  }
  std::sort(spans.begin(), spans.end());
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const Span& s = spans[i];
    if (s.start >= s.end || s.end > text.size()) {
      throw Error(ErrorCode::kFormatError, "posting '" + id + "' has an out-of-bounds span");
    }
    if (i > 0 && spans[i - 1].end > s.start) {
      throw Error(ErrorCode::kFormatError, "posting '" + id + "' has overlapping spans");
    }
  }
  return Posting{std::move(id), std::move(text), std::move(spans), gold_label, split};
}

std::vector<Span> find_term_spans(std::string_view text,
                                  const std::vector<std::string>& query_terms) {
  const auto candidates = match_candidates(query_terms);
  std::vector<Span> spans;
  std::size_t pos = 0;
  while (pos < text.size()) {
    bool hit = false;
    for (const auto& term : candidates) {
      if (matches_at(text, pos, term)) {
        spans.push_back({pos, pos + term.size()});
        pos += term.size();
        hit = true;
        break;
      }
    }
    if (!hit) ++pos;
  }
  return spans;
}

Posting canonicalize_terms(const Posting& posting,
                           const std::vector<std::string>& query_terms) {
  if (query_terms.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "query_terms is empty");
  }
  const auto found = find_term_spans(posting.text, query_terms);
  if (found.empty()) {
    throw Error(ErrorCode::kMissingTerm,
                "no query term in posting '" + posting.id + "'");
  }
  std::string text;
  std::vector<Span> spans;
  std::size_t cursor = 0;
  for (const Span& s : found) {
    text.append(posting.text, cursor, s.start - cursor);
    spans.push_back({text.size(), text.size() + kQueryToken.size()});
    text.append(kQueryToken);
    cursor = s.end;
  }
  text.append(posting.text, cursor, std::string::npos);
  Posting out = posting;
  out.text = std::move(text);
  out.term_spans = std::move(spans);
  return out;
}

Span select_anchor_span(const Posting& posting) {
  if (posting.term_spans.empty()) {
    throw Error(ErrorCode::kFormatError, "posting '" + posting.id + "' has no term spans");
  }
  return *std::min_element(posting.term_spans.begin(), posting.term_spans.end());
}

Dataset::Dataset(std::string name, std::vector<std::string> query_terms,
                 std::vector<Posting> postings)
    : name_(std::move(name)),
      query_terms_(std::move(query_terms)),
      postings_(std::move(postings)) {
  if (query_terms_.empty()) {
    throw Error(ErrorCode::kFormatError, "dataset has no query terms");
  }
  std::set<std::string> allowed;
  for (const auto& t : query_terms_) allowed.insert(folded(t));
  allowed.insert(folded(kQueryToken));

  index_.reserve(postings_.size());
  for (std::size_t i = 0; i < postings_.size(); ++i) {
    const Posting& p = postings_[i];
    if (!index_.emplace(p.id, i).second) {
      throw Error(ErrorCode::kDuplicateId, "duplicate posting id '" + p.id + "'");
    }
    for (const Span& s : p.term_spans) {
      const auto sub = folded(std::string_view(p.text).substr(s.start, s.end - s.start));
      if (allowed.count(sub) == 0) {
        throw Error(ErrorCode::kFormatError,
                    "span '" + sub + "' in posting '" + p.id + "' is not a query term");
      }
    }
  }
}

const Posting& Dataset::at(const PostingId& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) throw Error(ErrorCode::kUnknownId, "unknown posting '" + id + "'");
  return postings_[it->second];
}

std::vector<PostingId> Dataset::ids(Split split) const {
  std::vector<PostingId> out;
  for (const auto& p : postings_) {
    if (p.split == split) out.push_back(p.id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

Dataset Dataset::canonicalized() const {
  std::vector<Posting> out;
  out.reserve(postings_.size());
  for (const auto& p : postings_) out.push_back(canonicalize_terms(p, query_terms_));
  return Dataset(name_, query_terms_, std::move(out));
}

PoolState cold_start_split(const Dataset& dataset, std::size_t n_seed,
                           std::uint64_t rng_seed) {
  const auto train = dataset.ids(Split::kTrain);
  std::vector<PostingId> candidates;
  for (const auto& id : train) {
    if (dataset.at(id).gold_label) candidates.push_back(id);
  }
  if (candidates.size() < n_seed) {
    throw Error(ErrorCode::kInsufficientData,
                "need " + std::to_string(n_seed) + " labeled train postings, have " +
                    std::to_string(candidates.size()));
  }
  Rng rng(rng_seed);
  // Partial Fisher-Yates over the sorted candidate list.
  for (std::size_t i = 0; i < n_seed; ++i) {
    const auto j = i + rng.uniform_below(candidates.size() - i);
    std::swap(candidates[i], candidates[j]);
  }
  PoolState pool;
  for (std::size_t i = 0; i < n_seed; ++i) {
    pool.labeled.emplace(candidates[i], *dataset.at(candidates[i]).gold_label);
  }
  for (const auto& id : train) {
    if (pool.labeled.count(id) == 0) pool.unlabeled.insert(id);
  }
  for (const auto& id : dataset.ids(Split::kTest)) pool.test.insert(id);
  return pool;
}

std::string serialize_pool(const PoolState& pool) {
  json labeled = json::array();
  for (const auto& [id, label] : pool.labeled) labeled.push_back({id, to_int(label)});
  json j;
  j["labeled"] = std::move(labeled);
  j["unlabeled"] = pool.unlabeled;
  j["test"] = pool.test;
  return j.dump();
}

Dataset load_dataset(const std::string& jsonl_path, const std::string& meta_path) {
  std::ifstream meta_in(meta_path);
  if (!meta_in) throw Error(ErrorCode::kIoError, "cannot open " + meta_path);
  json meta;
  try {
    meta = json::parse(meta_in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormatError, meta_path + ": " + e.what());
  }
  if (!meta.contains("query_terms") || !meta["query_terms"].is_array()) {
    throw Error(ErrorCode::kFormatError, meta_path + ": missing query_terms");
  }
  auto terms = meta["query_terms"].get<std::vector<std::string>>();
  auto name = meta.value("name", std::string());

  std::ifstream in(jsonl_path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + jsonl_path);
  std::vector<Posting> postings;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json rec = json::parse(line);
      std::vector<Span> spans;
      for (const auto& s : rec.at("spans")) {
        spans.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()});
      }
      std::optional<Label> label;
      if (rec.contains("label") && !rec["label"].is_null()) {
        label = label_from_int(rec["label"].get<int>());
      }
      const auto split_str = rec.value("split", std::string("train"));
      if (split_str != "train" && split_str != "test") {
        throw Error(ErrorCode::kFormatError, "bad split '" + split_str + "'");
      }
      postings.push_back(make_posting(rec.at("id").get<std::string>(),
                                      rec.at("text").get<std::string>(), std::move(spans),
                                      label,
                                      split_str == "test" ? Split::kTest : Split::kTrain));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kFormatError,
                  jsonl_path + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code() == ErrorCode::kInvalidArgument ? ErrorCode::kFormatError : e.code(),
                  jsonl_path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return Dataset(std::move(name), std::move(terms), std::move(postings));
}

void save_dataset(const Dataset& dataset, const std::string& jsonl_path,
                  const std::string& meta_path) {
  std::ofstream out(jsonl_path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + jsonl_path);
  for (const auto& p : dataset.postings()) {
    json spans = json::array();
    for (const auto& s : p.term_spans) spans.push_back({s.start, s.end});
    json rec;
    rec["id"] = p.id;
    rec["text"] = p.text;
    rec["spans"] = std::move(spans);
    rec["label"] = p.gold_label ? json(to_int(*p.gold_label)) : json(nullptr);
    rec["split"] = p.split == Split::kTest ? "test" : "train";
    out << rec.dump() << '\n';
  }
  std::ofstream meta(meta_path, std::ios::binary);
  if (!meta) throw Error(ErrorCode::kIoError, "cannot write " + meta_path);
  meta << json{{"query_terms", dataset.query_terms()}, {"name", dataset.name()}}.dump(2)
       << '\n';
}

}  // namespace cocoba
