#include "cocoba/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <boost/math/distributions/students_t.hpp>

#include "cocoba/baselines.hpp"
#include "cocoba/density.hpp"
#include "cocoba/error.hpp"

namespace cocoba {

using nlohmann::json;
namespace fs = std::filesystem;

double f1_positive(const std::map<PostingId, Label>& predictions,
                   const std::map<PostingId, Label>& gold) {
  if (predictions.size() != gold.size()) {
    throw Error(ErrorCode::kIdMismatch, "prediction and gold id sets differ in size");
  }
  std::size_t tp = 0, fp = 0, fn = 0;
  auto p = predictions.begin();
  for (auto g = gold.begin(); g != gold.end(); ++g, ++p) {
    if (p->first != g->first) {
      throw Error(ErrorCode::kIdMismatch, "id '" + p->first + "' has no gold label");
    }
    const bool pred_pos = p->second == Label::kPositive;
    const bool gold_pos = g->second == Label::kPositive;
    if (pred_pos && gold_pos) ++tp;
    if (pred_pos && !gold_pos) ++fp;
    if (!pred_pos && gold_pos) ++fn;
  }
  const double precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp);
  const double recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

bool is_engine_strategy(std::string_view name) {
  return name == "cocoba" || name == "coba" || name == "coco" || name == "cotesting";
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream));
}

std::pair<double, double> pool_bandwidths(const Dataset& dataset,
                                          const EmbeddingSnapshot& snapshot,
                                          std::uint64_t seed) {
  std::vector<Vec> doc;
  std::vector<Vec> word;
  for (const auto& id : dataset.ids(Split::kTrain)) {
    const auto& v = snapshot.at(id);
    doc.push_back(v.doc);
    word.push_back(v.word);
  }
  return {auto_bandwidth(doc, seed), auto_bandwidth(word, derive_seed(seed, 1))};
}

CellOptions resolve_options(const CellOptions& options, const Dataset& dataset,
                            const EmbeddingSnapshot& snapshot, std::uint64_t seed) {
  CellOptions out = options;
  if (out.bandwidth_mode == BandwidthMode::kAuto) {
    std::tie(out.engine.bandwidth_doc, out.engine.bandwidth_word) =
        pool_bandwidths(dataset, snapshot, derive_seed(seed, 3));
    out.bandwidth_mode = BandwidthMode::kFixed;
  }
  return out;
}

std::unique_ptr<QueryLoop> make_loop(std::string_view strategy,
                                     std::shared_ptr<const Dataset> dataset,
                                     std::shared_ptr<const EmbeddingSnapshot> snapshot,
                                     PoolState pool, const CellOptions& options,
                                     std::uint64_t seed) {
  if (is_engine_strategy(strategy)) {
    EngineConfig config = options.engine;
    config.strategy = parse_strategy(strategy);
    config.rng_seed = derive_seed(seed, 1);
    return std::make_unique<Engine>(std::move(dataset), std::move(snapshot), std::move(pool),
                                    config);
  }
  BaselineConfig config;
  if (strategy == "random") {
    config.kind = BaselineKind::kRandom;
  } else if (strategy == "uncertainty") {
    config.kind = BaselineKind::kUncertainty;
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unknown strategy '" + std::string(strategy) + "'");
  }
  config.rng_seed = derive_seed(seed, 2);
  config.learner = options.engine.learner;
  return std::make_unique<BaselineLoop>(std::move(snapshot), std::move(pool), config);
}

CellResult run_cell(std::shared_ptr<const Dataset> dataset,
                    const std::vector<std::shared_ptr<const EmbeddingSnapshot>>& snapshots,
                    std::string_view strategy, std::uint64_t seed, const CellOptions& options) {
  if (snapshots.empty()) throw Error(ErrorCode::kInvalidArgument, "no snapshot given");
  if (options.eval_every == 0) throw Error(ErrorCode::kInvalidArgument, "eval_every must be >= 1");
  CellResult result;
  result.strategy = std::string(strategy);
  result.seed = seed;
  result.cold_start = cold_start_split(*dataset, options.cold_start, seed);

  const CellOptions opts = resolve_options(options, *dataset, *snapshots.front(), seed);
  auto loop = make_loop(strategy, dataset, snapshots.front(), result.cold_start, opts, seed);
  auto* engine = dynamic_cast<Engine*>(loop.get());

  const auto& pool = loop->pool();
  const std::size_t train_size = pool.labeled.size() + pool.unlabeled.size();
  const std::size_t cap =
      opts.budget_cap ? *opts.budget_cap
                      : static_cast<std::size_t>(std::llround(opts.budget_frac * train_size));

  std::map<PostingId, Label> gold;
  std::vector<PostingId> test_ids;
  for (const auto& id : pool.test) {
    if (const auto& label = dataset->at(id).gold_label) {
      gold.emplace(id, *label);
      test_ids.push_back(id);
    }
  }
  auto evaluate = [&]() {
    const auto labels = loop->predict(test_ids);
    std::map<PostingId, Label> predictions;
    for (std::size_t i = 0; i < test_ids.size(); ++i) predictions.emplace(test_ids[i], labels[i]);
    return f1_positive(predictions, gold);
  };

  std::size_t iteration = 0;
  while (pool.labeled.size() < cap && !pool.unlabeled.empty()) {
    const PostingId id = loop->next_id();
    if (engine != nullptr && engine->next_query().source == QuerySource::kFallback) {
      ++result.fallback_queries;
    }
    const auto& label = dataset->at(id).gold_label;
    if (!label) throw Error(ErrorCode::kOracleMiss, "posting '" + id + "' has no gold label");
    loop->commit_label(id, *label);
    ++iteration;
    result.queries.push_back(id);

    if (opts.swap_every > 0 && snapshots.size() > 1 && iteration % opts.swap_every == 0) {
      ++result.swaps;
      loop->swap_snapshot(snapshots[std::min(result.swaps, snapshots.size() - 1)]);
    }
    const bool done = pool.labeled.size() >= cap || pool.unlabeled.empty();
    if (iteration % opts.eval_every == 0 || done) {
      result.curve.push_back({iteration, pool.labeled.size(), id, evaluate()});
    }
  }
  return result;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string format_f1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

std::string curve_csv(const Curve& curve) {
  std::string out = "iteration,budget,queried_id,f1\n";
  for (const auto& r : curve) {
    out += std::to_string(r.iteration) + ',' + std::to_string(r.budget) + ',' +
           csv_field(r.queried_id) + ',' + format_f1(r.f1_positive) + '\n';
  }
  return out;
}

double f1_at_budget(const Curve& curve, double budget) {
  if (curve.empty()) throw Error(ErrorCode::kEmptySet, "empty learning curve");
  if (budget <= static_cast<double>(curve.front().budget)) return curve.front().f1_positive;
  if (budget >= static_cast<double>(curve.back().budget)) return curve.back().f1_positive;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    const auto& hi = curve[i];
    if (budget <= static_cast<double>(hi.budget)) {
      const auto& lo = curve[i - 1];
      const double span = static_cast<double>(hi.budget - lo.budget);
      const double w = (budget - static_cast<double>(lo.budget)) / span;
      return lo.f1_positive + w * (hi.f1_positive - lo.f1_positive);
    }
  }
  return curve.back().f1_positive;
}

TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kIdMismatch, "paired samples differ in size");
  if (a.size() < 2) {
    throw Error(ErrorCode::kInsufficientSeeds, "paired t-test needs at least two seeds");
  }
  const double n = static_cast<double>(a.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i] - mean;
    ss += d * d;
  }
  const double sd = std::sqrt(ss / (n - 1.0));
  TTestResult r;
  r.mean_difference = mean;
  if (sd == 0.0) {
    r.degenerate = true;
    r.p_value = mean == 0.0 ? 1.0 : 0.0;
  } else {
    const double t = mean / (sd / std::sqrt(n));
    r.t = t;
    const boost::math::students_t dist(n - 1.0);
    r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
  }
  r.significant = r.p_value < 0.05;
  return r;
}

json summarize(const std::map<std::string, std::vector<Curve>>& curves,
               const std::vector<double>& fractions, std::size_t train_size,
               const std::string& reference) {
  json out;
  out["fractions"] = fractions;
  out["train_size"] = train_size;
  out["reference"] = reference;
  std::map<std::string, std::vector<std::vector<double>>> at_fraction;  // [fraction][seed]
  json strategies = json::object();
  for (const auto& [name, cells] : curves) {
    if (cells.empty()) {
      throw Error(ErrorCode::kInsufficientSeeds, "strategy '" + name + "' has no curves");
    }
    std::vector<std::vector<double>> values(fractions.size());
    json means = json::array();
    for (std::size_t f = 0; f < fractions.size(); ++f) {
      const double budget = fractions[f] * static_cast<double>(train_size);
      double sum = 0.0;
      for (const auto& curve : cells) {
        values[f].push_back(f1_at_budget(curve, budget));
        sum += values[f].back();
      }
      means.push_back(sum / static_cast<double>(cells.size()));
    }
    strategies[name] = {{"mean_f1", means}, {"per_seed_f1", values}, {"seeds", cells.size()}};
    at_fraction[name] = std::move(values);
  }
  out["strategies"] = std::move(strategies);

  json tests = json::array();
  if (at_fraction.count(reference) != 0) {
    for (const auto& [name, values] : at_fraction) {
      if (name == reference) continue;
      for (std::size_t f = 0; f < fractions.size(); ++f) {
        json entry{{"strategy", name}, {"against", reference}, {"fraction", fractions[f]}};
        try {
          const auto r = paired_t_test(at_fraction[reference][f], values[f]);
          entry["mean_difference"] = r.mean_difference;
          entry["t"] = r.t ? json(*r.t) : json(nullptr);
          entry["p_value"] = r.p_value;
          entry["degenerate"] = r.degenerate;
          entry["significant"] = r.significant;
        } catch (const Error& e) {
          entry["error"] = error_code_name(e.code());
        }
        tests.push_back(std::move(entry));
      }
    }
  }
  out["tests"] = std::move(tests);
  return out;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << text;
}

std::string queries_log(const CellResult& cell) {
  std::string out;
  for (std::size_t i = 0; i < cell.queries.size(); ++i) {
    out += std::to_string(i + 1) + '\t' + cell.queries[i] + '\n';
  }
  return out;
}

}  // namespace

json run_experiment(const ExperimentSpec& spec) {
  if (spec.seeds.empty()) throw Error(ErrorCode::kInvalidArgument, "no seeds given");
  if (spec.strategies.empty()) throw Error(ErrorCode::kInvalidArgument, "no strategies given");
  for (double f : spec.fractions) {
    if (!(f > 0.0 && f <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "budget fractions must lie in (0, 1]");
    }
  }
  auto dataset = std::make_shared<const Dataset>(load_dataset(spec.dataset_path, spec.meta_path));
  std::vector<std::shared_ptr<const EmbeddingSnapshot>> snapshots;
  for (const auto& path : spec.snapshot_paths) {
    snapshots.push_back(std::make_shared<const EmbeddingSnapshot>(load_snapshot(path)));
  }
  if (snapshots.empty()) throw Error(ErrorCode::kInvalidArgument, "no snapshot given");
  for (const auto& s : snapshots) {
    std::vector<PostingId> ids;
    for (const auto& p : dataset->postings()) ids.push_back(p.id);
    s->require_coverage(ids);
  }

  struct Task {
    std::string strategy;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (const auto& s : spec.strategies) {
    for (auto seed : spec.seeds) tasks.push_back({s, seed});
  }
  std::vector<std::optional<CellResult>> results(tasks.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&]() {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        results[i] = run_cell(dataset, snapshots, tasks[i].strategy, tasks[i].seed, spec.options);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(spec.jobs, tasks.size()));
  std::vector<std::thread> threads;
  for (std::size_t j = 1; j < jobs; ++j) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);

  const fs::path out_dir(spec.out_dir);
  std::map<std::string, std::vector<Curve>> curves;
  std::size_t train_size = 0;
  for (const auto& r : results) {
    const auto& cell = *r;
    const auto dir = out_dir / cell.strategy / ("seed-" + std::to_string(cell.seed));
    fs::create_directories(dir);
    write_text(dir / "curve.csv", curve_csv(cell.curve));
    if (spec.queries_log) write_text(dir / "queries.log", queries_log(cell));
    curves[cell.strategy].push_back(cell.curve);
    train_size = cell.cold_start.labeled.size() + cell.cold_start.unlabeled.size();
  }
  std::string reference = spec.strategies.front();
  for (const auto& s : spec.strategies) {
    if (is_engine_strategy(s)) {
      reference = s;
      break;
    }
  }
  std::vector<double> fractions;
  for (double f : spec.fractions) {
    if (spec.options.budget_cap || f <= spec.options.budget_frac + 1e-12) fractions.push_back(f);
  }
  auto summary = summarize(curves, fractions, train_size, reference);
  summary["seeds"] = spec.seeds;
  fs::create_directories(out_dir);
  write_text(out_dir / "summary.json", summary.dump(2) + "\n");
  return summary;
}

}  // namespace cocoba

namespace cocoba {
namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* what) {
  if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, std::string(what) + " must be an object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || item.key() == k;
    if (!ok) {
      throw Error(ErrorCode::kInvalidArgument,
                  std::string("unknown ") + what + " key '" + item.key() + "'");
    }
  }
}

}  // namespace

CellOptions cell_options_from_json(const json& j) {
  reject_unknown(j,
                 {"cold_start", "budget_frac", "budget_cap", "eval_every", "swap_every",
                  "bandwidth", "estimators", "subsample_ratio", "learning_rate", "epochs", "l2"},
                 "cell option");
  CellOptions o;
  try {
    o.cold_start = j.value("cold_start", o.cold_start);
    o.budget_frac = j.value("budget_frac", o.budget_frac);
    if (j.contains("budget_cap") && !j["budget_cap"].is_null()) {
      o.budget_cap = j["budget_cap"].get<std::size_t>();
    }
    o.eval_every = j.value("eval_every", o.eval_every);
    o.swap_every = j.value("swap_every", o.swap_every);
    if (j.contains("bandwidth")) {
      const auto& bw = j["bandwidth"];
      if (bw.is_string() && bw.get<std::string>() == "auto") {
        o.bandwidth_mode = BandwidthMode::kAuto;
      } else if (bw.is_array() && bw.size() == 2) {
        o.engine.bandwidth_doc = bw[0].get<double>();
        o.engine.bandwidth_word = bw[1].get<double>();
      } else {
        throw Error(ErrorCode::kInvalidArgument, "bandwidth must be \"auto\" or [doc, word]");
      }
    }
    o.engine.estimators = j.value("estimators", o.engine.estimators);
    o.engine.subsample_ratio = j.value("subsample_ratio", o.engine.subsample_ratio);
    o.engine.learner.learning_rate = j.value("learning_rate", o.engine.learner.learning_rate);
    o.engine.learner.epochs = j.value("epochs", o.engine.learner.epochs);
    o.engine.learner.l2 = j.value("l2", o.engine.learner.l2);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("cell options: ") + e.what());
  }
  if (!(o.budget_frac > 0.0 && o.budget_frac <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "budget_frac must lie in (0, 1]");
  }
  if (o.eval_every == 0) throw Error(ErrorCode::kInvalidArgument, "eval_every must be >= 1");
  o.engine.validate();
  return o;
}

ExperimentSpec experiment_spec_from_json(const json& j) {
  reject_unknown(j,
                 {"dataset", "meta", "snapshots", "strategies", "seeds", "fractions", "options",
                  "out", "queries_log", "jobs"},
                 "experiment");
  ExperimentSpec spec;
  try {
    spec.dataset_path = j.at("dataset").get<std::string>();
    spec.meta_path = j.at("meta").get<std::string>();
    spec.snapshot_paths = j.at("snapshots").get<std::vector<std::string>>();
    spec.strategies = j.at("strategies").get<std::vector<std::string>>();
    const auto& seeds = j.at("seeds");
    if (seeds.is_number_unsigned()) {
      for (std::uint64_t s = 1; s <= seeds.get<std::uint64_t>(); ++s) spec.seeds.push_back(s);
    } else {
      spec.seeds = seeds.get<std::vector<std::uint64_t>>();
    }
    spec.fractions = j.value("fractions", spec.fractions);
    spec.out_dir = j.at("out").get<std::string>();
    spec.queries_log = j.value("queries_log", false);
    spec.jobs = j.value("jobs", std::size_t{1});
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("experiment: ") + e.what());
  }
  if (j.contains("options")) spec.options = cell_options_from_json(j["options"]);
  for (const auto& s : spec.strategies) {
    if (!is_engine_strategy(s) && s != "random" && s != "uncertainty") {
      throw Error(ErrorCode::kInvalidArgument, "unknown strategy '" + s + "'");
    }
  }
  return spec;
}

SynthSpec synth_spec_from_json(const json& j) {
  reject_unknown(j, {"n", "doc_dim", "word_dim", "contexts", "noise", "pos_rate",
                     "test_fraction", "seed"},
                 "synth");
  SynthSpec s;
  try {
    s.n = j.value("n", s.n);
    s.dims.doc = j.value("doc_dim", s.dims.doc);
    s.dims.word = j.value("word_dim", s.dims.word);
    s.contexts = j.value("contexts", s.contexts);
    s.noise = j.value("noise", s.noise);
    s.pos_rate = j.value("pos_rate", s.pos_rate);
    s.test_fraction = j.value("test_fraction", s.test_fraction);
    s.seed = j.value("seed", s.seed);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("synth: ") + e.what());
  }
  return s;
}

}  // namespace cocoba
