#include "cocoba/embeddings.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "cocoba/error.hpp"
#include "cocoba/rng.hpp"

namespace cocoba {
namespace {

constexpr char kMagic[5] = {'C', 'V', 'E', 'C', '1'};

void check_vector(const Vec& v, std::size_t dim, const PostingId& id, const char* view) {
  if (v.size() != dim) {
    throw Error(ErrorCode::kDimMismatch, std::string(view) + " vector of '" + id +
                                             "' has length " + std::to_string(v.size()) +
                                             ", expected " + std::to_string(dim));
  }
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw Error(ErrorCode::kFormatError,
                  std::string("non-finite value in ") + view + " vector of '" + id + "'");
    }
  }
}

class ByteReader {
 public:
  ByteReader(const std::string& data, const std::string& path) : data_(data), path_(path) {}

  template <typename T>
  T read() {
    static_assert(std::is_trivially_copyable_v<T>);
    need(sizeof(T));
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, data_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      std::reverse(std::begin(buf), std::end(buf));
    }
    T out;
    std::memcpy(&out, buf, sizeof(T));
    pos_ += sizeof(T);
    return out;
  }

  std::string read_string(std::size_t n) {
    need(n);
    std::string out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  bool at_end() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) {
      throw Error(ErrorCode::kFormatError, path_ + ": truncated record");
    }
  }

  const std::string& data_;
  const std::string& path_;
  std::size_t pos_ = 0;
};

template <typename T>
void put(std::string& out, T value) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(std::begin(buf), std::end(buf));
  }
  out.append(reinterpret_cast<const char*>(buf), sizeof(T));
}

EmbeddingSnapshot parse_binary(const std::string& data, const std::string& path) {
  ByteReader r(data, path);
  r.read_string(sizeof(kMagic));
  const auto count = r.read<std::uint32_t>();
  const ViewDims dims{r.read<std::uint32_t>(), r.read<std::uint32_t>()};
  if (dims.doc == 0 || dims.word == 0) {
    throw Error(ErrorCode::kFormatError, path + ": header dims must be positive");
  }
  std::map<PostingId, ViewVectors> vectors;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto id_len = r.read<std::uint16_t>();
    auto id = r.read_string(id_len);
    ViewVectors v;
    v.doc.resize(dims.doc);
    v.word.resize(dims.word);
    for (auto& x : v.doc) x = r.read<float>();
    for (auto& x : v.word) x = r.read<float>();
    if (!vectors.emplace(id, std::move(v)).second) {
      throw Error(ErrorCode::kDuplicateId, path + ": duplicate id '" + id + "'");
    }
  }
  if (!r.at_end()) {
    throw Error(ErrorCode::kFormatError,
                path + ": more records than the header count " + std::to_string(count));
  }
  return EmbeddingSnapshot(dims, std::move(vectors));
}

EmbeddingSnapshot parse_jsonl(const std::string& data, const std::string& path) {
  std::map<PostingId, ViewVectors> vectors;
  ViewDims dims;
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < data.size()) {
    auto end = data.find('\n', start);
    if (end == std::string::npos) end = data.size();
    const std::string_view line(data.data() + start, end - start);
    start = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    std::string id;
    ViewVectors v;
    try {
      const auto rec = nlohmann::json::parse(line);
      id = rec.at("id").get<std::string>();
      v.doc = rec.at("doc").get<Vec>();
      v.word = rec.at("word").get<Vec>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kFormatError,
                  path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (vectors.empty()) dims = {v.doc.size(), v.word.size()};
    if (!vectors.emplace(id, std::move(v)).second) {
      throw Error(ErrorCode::kDuplicateId, path + ": duplicate id '" + id + "'");
    }
  }
  if (vectors.empty()) throw Error(ErrorCode::kFormatError, path + ": empty snapshot");
  if (dims.doc == 0 || dims.word == 0) {
    throw Error(ErrorCode::kFormatError, path + ": vector dims must be positive");
  }
  return EmbeddingSnapshot(dims, std::move(vectors));
}

// Lower-cased word tokens with their byte offsets; <QTERM> is one token.
struct Token {
  std::string text;
  std::size_t start;
};

std::vector<Token> tokenize(const std::string& text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text.compare(i, kQueryToken.size(), kQueryToken) == 0) {
      tokens.push_back({std::string(kQueryToken), i});
      i += kQueryToken.size();
      continue;
    }
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isalnum(c) || c == '_' || c >= 0x80) {
      const std::size_t start = i;
      std::string tok;
      while (i < text.size()) {
        const auto d = static_cast<unsigned char>(text[i]);
        if (!(std::isalnum(d) || d == '_' || d >= 0x80)) break;
        tok.push_back(static_cast<char>(std::tolower(d)));
        ++i;
      }
      tokens.push_back({std::move(tok), start});
      continue;
    }
    ++i;
  }
  return tokens;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

void add_token(Vec& acc, const std::string& token, std::uint64_t view_salt) {
  const std::uint64_t base = fnv1a(token) ^ view_salt;
  for (std::size_t j = 0; j < acc.size(); ++j) {
    const auto h = splitmix64(base + j);
    acc[j] += (h & 1U) ? 1.0 : -1.0;
  }
}

void normalize(Vec& v) {
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (double& x : v) x /= norm;
  }
}

constexpr std::uint64_t kDocSalt = 0x646f63ULL;
constexpr std::uint64_t kWordSalt = 0x776f7264ULL;

}  // namespace

EmbeddingSnapshot::EmbeddingSnapshot(ViewDims dims, std::map<PostingId, ViewVectors> vectors,
                                     std::uint64_t epoch)
    : dims_(dims), vectors_(std::move(vectors)), epoch_(epoch) {
  if (dims_.doc == 0 || dims_.word == 0) {
    throw Error(ErrorCode::kFormatError, "snapshot dims must be positive");
  }
  for (const auto& [id, v] : vectors_) {
    check_vector(v.doc, dims_.doc, id, "doc");
    check_vector(v.word, dims_.word, id, "word");
  }
}

const ViewVectors& EmbeddingSnapshot::at(const PostingId& id) const {
  const auto it = vectors_.find(id);
  if (it == vectors_.end()) {
    throw Error(ErrorCode::kCoverageError, "no vectors for posting '" + id + "'");
  }
  return it->second;
}

EmbeddingSnapshot EmbeddingSnapshot::with_epoch(std::uint64_t epoch) const {
  EmbeddingSnapshot out = *this;
  out.epoch_ = epoch;
  return out;
}

void EmbeddingSnapshot::require_coverage(const std::vector<PostingId>& ids) const {
  for (const auto& id : ids) {
    if (!contains(id)) {
      throw Error(ErrorCode::kCoverageError, "snapshot is missing posting '" + id + "'");
    }
  }
}

EmbeddingSnapshot load_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() >= sizeof(kMagic) && std::memcmp(data.data(), kMagic, sizeof(kMagic)) == 0) {
    return parse_binary(data, path);
  }
  return parse_jsonl(data, path);
}

void write_snapshot(const EmbeddingSnapshot& snapshot, const std::string& path) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(snapshot.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(snapshot.dims().doc));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(snapshot.dims().word));
  for (const auto& [id, v] : snapshot.vectors()) {
    if (id.size() > UINT16_MAX) {
      throw Error(ErrorCode::kFormatError, "posting id too long for snapshot: '" + id + "'");
    }
    put<std::uint16_t>(out, static_cast<std::uint16_t>(id.size()));
    out += id;
    for (double x : v.doc) put<float>(out, static_cast<float>(x));
    for (double x : v.word) put<float>(out, static_cast<float>(x));
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw Error(ErrorCode::kIoError, "cannot write " + path);
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
}

void write_snapshot_jsonl(const EmbeddingSnapshot& snapshot, const std::string& path) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw Error(ErrorCode::kIoError, "cannot write " + path);
  for (const auto& [id, v] : snapshot.vectors()) {
    file << nlohmann::json{{"id", id}, {"doc", v.doc}, {"word", v.word}}.dump() << '\n';
  }
}

HashEmbedding hash_embed(const Posting& posting, ViewDims dims, std::size_t window) {
  if (dims.doc < 8 || dims.word < 8) {
    throw Error(ErrorCode::kInvalidArgument, "hash_embed dims must be at least 8");
  }
  const auto tokens = tokenize(posting.text);
  HashEmbedding out;
  out.vectors.doc.assign(dims.doc, 0.0);
  for (const auto& t : tokens) add_token(out.vectors.doc, t.text, kDocSalt);
  normalize(out.vectors.doc);

  const Span anchor = select_anchor_span(posting);
  std::size_t anchor_idx = tokens.size();
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].start == anchor.start) {
      anchor_idx = i;
      break;
    }
  }
  out.vectors.word.assign(dims.word, 0.0);
  bool any = false;
  if (anchor_idx < tokens.size()) {
    const std::size_t lo = anchor_idx >= window ? anchor_idx - window : 0;
    const std::size_t hi = std::min(tokens.size(), anchor_idx + window + 1);
    for (std::size_t i = lo; i < hi; ++i) {
      if (i == anchor_idx || tokens[i].text == kQueryToken) continue;
      add_token(out.vectors.word, tokens[i].text, kWordSalt);
      any = true;
    }
  }
  if (!any) {
    out.empty_context = true;
    // Resize to D_word so a doc/word dim mismatch still yields a valid vector.
    out.vectors.word = out.vectors.doc;
    out.vectors.word.resize(dims.word, 0.0);
    if (dims.word < dims.doc) normalize(out.vectors.word);
  } else {
    normalize(out.vectors.word);
  }
  return out;
}

EmbeddingSnapshot hash_embed_dataset(const Dataset& dataset, ViewDims dims, std::size_t window) {
  std::map<PostingId, ViewVectors> vectors;
  for (const auto& p : dataset.postings()) {
    auto v = hash_embed(p, dims, window).vectors;
    // Keep in-memory values identical to what the f32 file format stores.
    for (double& x : v.doc) x = static_cast<float>(x);
    for (double& x : v.word) x = static_cast<float>(x);
    vectors.emplace(p.id, std::move(v));
  }
  return EmbeddingSnapshot(dims, std::move(vectors));
}

}  // namespace cocoba
