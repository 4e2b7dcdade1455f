#pragma once

// Brute-force query ranking: retrain every bag with the naive trainer, find
// the disagreement set, weight each point by naive Parzen sums over that set
// and add the per-bag scores up.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "cocoba/corpus.hpp"
#include "cocoba/embeddings.hpp"
#include "oracles.hpp"

namespace oracle {

struct Ranked {
  std::string id;
  double score = 0.0;
  int bags = 0;
};

inline std::vector<Ranked> rank_queries(const std::vector<std::vector<std::string>>& samples,
                                        const cocoba::PoolState& pool,
                                        const cocoba::EmbeddingSnapshot& snapshot, double h_doc,
                                        double h_word, bool density,
                                        const cocoba::LearnerConfig& lc = {}) {
  std::map<std::string, Ranked> by_id;
  for (const auto& sample : samples) {
    std::vector<std::vector<double>> xd, xw;
    std::vector<int> ys;
    for (const auto& id : sample) {
      xd.push_back(snapshot.at(id).doc);
      xw.push_back(snapshot.at(id).word);
      ys.push_back(pool.labeled.at(id) == cocoba::Label::kPositive ? 1 : -1);
    }
    const auto md = train_logistic(xd, ys, lc.learning_rate, lc.epochs, lc.l2);
    const auto mw = train_logistic(xw, ys, lc.learning_rate, lc.epochs, lc.l2);

    struct Point {
      std::string id;
      double cd, cw;
    };
    std::vector<Point> contention;
    std::vector<std::vector<double>> pd, pw;
    for (const auto& id : pool.unlabeled) {
      const auto& v = snapshot.at(id);
      const double cd = confidence(md.w, md.b, v.doc);
      const double cw = confidence(mw.w, mw.b, v.word);
      if ((cd >= 0.0) != (cw >= 0.0)) {
        contention.push_back({id, cd, cw});
        pd.push_back(v.doc);
        pw.push_back(v.word);
      }
    }
    for (std::size_t i = 0; i < contention.size(); ++i) {
      const double a = density ? parzen(pd, h_doc, pd[i]) : 1.0;
      const double b = density ? parzen(pw, h_word, pw[i]) : 1.0;
      auto& r = by_id[contention[i].id];
      r.id = contention[i].id;
      r.score += a * std::fabs(contention[i].cd) + b * std::fabs(contention[i].cw);
      ++r.bags;
    }
  }
  std::vector<Ranked> out;
  for (auto& e : by_id) out.push_back(e.second);
  std::stable_sort(out.begin(), out.end(),
                   [](const Ranked& a, const Ranked& b) { return a.score > b.score; });
  return out;
}

}  // namespace oracle
