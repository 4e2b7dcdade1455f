#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cocoba {

using PostingId = std::string;

// Positive = +1, Negative = -1 so that sums of signed confidences compare
// directly against zero.
enum class Label : int { kNegative = -1, kPositive = 1 };

inline int to_int(Label label) { return static_cast<int>(label); }
Label label_from_int(int value);

enum class Split { kTrain, kTest };

inline constexpr std::string_view kQueryToken = "<QTERM>";

// Byte offsets into Posting::text, half-open.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  friend bool operator==(const Span&, const Span&) = default;
  friend auto operator<=>(const Span&, const Span&) = default;
};

struct Posting {
  PostingId id;
  std::string text;
  std::vector<Span> term_spans;
  std::optional<Label> gold_label;
  Split split = Split::kTrain;
};

// Sorts spans and checks the posting invariants (non-empty, in bounds,
// non-overlapping). Throws FormatError.
Posting make_posting(PostingId id, std::string text, std::vector<Span> spans,
                     std::optional<Label> gold_label = std::nullopt,
                     Split split = Split::kTrain);

// Locates every case-insensitive whole-word occurrence of a query term (or of
// the synthesized token) in text, in document order.
std::vector<Span> find_term_spans(std::string_view text,
                                  const std::vector<std::string>& query_terms);

// Replaces every query-term occurrence with <QTERM>. Idempotent.
Posting canonicalize_terms(const Posting& posting,
                           const std::vector<std::string>& query_terms);

// First span in document order.
Span select_anchor_span(const Posting& posting);

class Dataset {
 public:
  Dataset() = default;
  Dataset(std::string name, std::vector<std::string> query_terms,
          std::vector<Posting> postings);

  const std::string& name() const { return name_; }
  const std::vector<std::string>& query_terms() const { return query_terms_; }
  const std::vector<Posting>& postings() const { return postings_; }
  std::size_t size() const { return postings_.size(); }

  bool contains(const PostingId& id) const { return index_.count(id) != 0; }
  const Posting& at(const PostingId& id) const;

  // Ids of the given split, sorted.
  std::vector<PostingId> ids(Split split) const;

  Dataset canonicalized() const;

 private:
  std::string name_;
  std::vector<std::string> query_terms_;
  std::vector<Posting> postings_;
  std::unordered_map<PostingId, std::size_t> index_;
};

// L, U and T of the active-learning loop. Ordered containers keep every
// iteration over the pool in id order.
struct PoolState {
  std::map<PostingId, Label> labeled;
  std::set<PostingId> unlabeled;
  std::set<PostingId> test;

  friend bool operator==(const PoolState&, const PoolState&) = default;
};

// Draws n_seed labeled train postings uniformly without replacement into L;
// the rest of the train split goes to U and the test split to T.
PoolState cold_start_split(const Dataset& dataset, std::size_t n_seed,
                           std::uint64_t rng_seed);

std::string serialize_pool(const PoolState& pool);

// JSON Lines body plus the sidecar metadata file.
Dataset load_dataset(const std::string& jsonl_path, const std::string& meta_path);
void save_dataset(const Dataset& dataset, const std::string& jsonl_path,
                  const std::string& meta_path);

}  // namespace cocoba
