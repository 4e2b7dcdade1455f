#pragma once

#include <memory>
#include <string>
#include <vector>

#include "cocoba/corpus.hpp"
#include "cocoba/embeddings.hpp"

namespace cocoba {

// Common surface of every query strategy driven by the harness and the
// annotation service: one pending query at a time, commit, and prediction.
class QueryLoop {
 public:
  virtual ~QueryLoop() = default;

  virtual PostingId next_id() = 0;
  virtual void commit_label(const PostingId& id, Label label) = 0;
  virtual std::vector<Label> predict(const std::vector<PostingId>& ids) = 0;
  virtual void swap_snapshot(std::shared_ptr<const EmbeddingSnapshot> snapshot) = 0;
  virtual const PoolState& pool() const = 0;
  virtual std::string name() const = 0;
};

}  // namespace cocoba
