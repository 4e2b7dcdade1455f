// al-bench: simulated-oracle learning curves and synthetic corpora.

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cocoba/cocoba.h"

namespace {

int fail(cocoba_status status) {
  std::cerr << "al-bench: " << cocoba_status_name(status) << ": " << cocoba_last_error() << "\n";
  return 1;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active-learning benchmark harness"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run learning curves for strategies x seeds");
  std::string dataset, meta, snapshots, strategies = "cocoba,uncertainty,random", out = "results";
  std::string seeds = "5", bandwidth = "fixed";
  std::size_t cold_start = 50, eval_every = 10, swap_every = 350, jobs = 1;
  std::size_t estimators = 15, budget_cap = 0;
  double budget_frac = 1.0, subsample = 0.6, bw_doc = 30.0, bw_word = 45.0;
  int epochs = 200;
  bool queries_log = false;
  run->add_option("--dataset", dataset, "Dataset JSON Lines file")->required();
  run->add_option("--meta", meta, "Dataset metadata JSON (default: <dataset stem>.meta.json)");
  run->add_option("--snapshot", snapshots,
                  "Embedding snapshot; comma-separated list for periodic swaps")
      ->required();
  run->add_option("--strategy", strategies,
                  "Comma-separated: cocoba,coba,coco,cotesting,uncertainty,random");
  run->add_option("--seeds", seeds, "Seed count N (seeds 1..N) or comma-separated seed list");
  run->add_option("--cold-start", cold_start, "Initial labeled set size");
  run->add_option("--budget-frac", budget_frac, "Stop when |L| reaches this share of train");
  run->add_option("--budget-cap", budget_cap, "Absolute cap on |L| (overrides --budget-frac)");
  run->add_option("--eval-every", eval_every, "Evaluate test F1 every N queries");
  run->add_option("--swap-every", swap_every, "Swap to the next snapshot every N queries");
  run->add_option("--estimators", estimators, "Bagged estimators K");
  run->add_option("--subsample", subsample, "Bag sample ratio of |L|");
  run->add_option("--bandwidth", bandwidth, "fixed (use --bw-doc/--bw-word) or auto");
  run->add_option("--bw-doc", bw_doc, "Doc-view Parzen bandwidth");
  run->add_option("--bw-word", bw_word, "Word-view Parzen bandwidth");
  run->add_option("--epochs", epochs, "Gradient-descent epochs per learner");
  run->add_option("--jobs", jobs, "Cells run in parallel");
  run->add_flag("--queries-log", queries_log, "Write queries.log per cell");
  run->add_option("--out", out, "Output directory");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic two-view corpus");
  std::size_t n = 4000, contexts = 8, synth_doc_dim = 48, synth_word_dim = 48;
  double pos_rate = 0.18, noise = 1.25;
  std::uint64_t synth_seed = 1;
  std::string synth_out = "synth";
  synth->add_option("--n", n, "Number of postings (>= 200)");
  synth->add_option("--pos-rate", pos_rate, "Share of positive postings");
  synth->add_option("--contexts", contexts, "Latent contexts (>= 2)");
  synth->add_option("--noise", noise, "Gaussian noise scale");
  synth->add_option("--doc-dim", synth_doc_dim, "Doc-view dimension");
  synth->add_option("--word-dim", synth_word_dim, "Word-view dimension");
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--out", synth_out, "Output directory");

  auto* embed = app.add_subcommand("embed", "Hash-embed a dataset into a snapshot");
  std::string embed_out = "snapshot.cvec";
  std::size_t doc_dim = 16, word_dim = 16;
  std::uint32_t window = 5;
  embed->add_option("--dataset", dataset, "Dataset JSON Lines file")->required();
  embed->add_option("--meta", meta, "Dataset metadata JSON");
  embed->add_option("--doc-dim", doc_dim, "Doc-view dimension (>= 8)");
  embed->add_option("--word-dim", word_dim, "Word-view dimension (>= 8)");
  embed->add_option("--window", window, "Context tokens on each side of the query term");
  embed->add_option("--out", embed_out, "Snapshot path");

  CLI11_PARSE(app, argc, argv);

  auto default_meta = [&]() {
    if (!meta.empty()) return meta;
    auto stem = dataset;
    if (const auto dot = stem.rfind(".jsonl"); dot != std::string::npos) stem.resize(dot);
    return stem + ".meta.json";
  };

  if (*synth) {
    const nlohmann::json spec{{"n", n},           {"pos_rate", pos_rate}, {"contexts", contexts},
                              {"noise", noise},   {"doc_dim", synth_doc_dim},
                              {"word_dim", synth_word_dim}, {"seed", synth_seed}};
    if (auto st = cocoba_synth_generate(spec.dump().c_str(), synth_out.c_str()); st != COCOBA_OK) {
      return fail(st);
    }
    std::cout << "wrote " << synth_out << "/dataset.jsonl, dataset.meta.json, snapshot.cvec\n";
    return 0;
  }

  if (*embed) {
    cocoba_dataset* raw = nullptr;
    cocoba_dataset* canonical = nullptr;
    cocoba_snapshot* snap = nullptr;
    auto st = cocoba_dataset_load(dataset.c_str(), default_meta().c_str(), &raw);
    if (st == COCOBA_OK) st = cocoba_dataset_canonicalize(raw, &canonical);
    if (st == COCOBA_OK) {
      st = cocoba_snapshot_hash_embed(canonical, static_cast<std::uint32_t>(doc_dim),
                                      static_cast<std::uint32_t>(word_dim), window, &snap);
    }
    if (st == COCOBA_OK) st = cocoba_snapshot_write(snap, embed_out.c_str());
    cocoba_snapshot_free(snap);
    cocoba_dataset_free(canonical);
    cocoba_dataset_free(raw);
    if (st != COCOBA_OK) return fail(st);
    std::cout << "wrote " << embed_out << "\n";
    return 0;
  }

  nlohmann::json options{{"cold_start", cold_start}, {"budget_frac", budget_frac},
                         {"eval_every", eval_every}, {"swap_every", swap_every},
                         {"estimators", estimators}, {"subsample_ratio", subsample},
                         {"epochs", epochs}};
  if (budget_cap > 0) options["budget_cap"] = budget_cap;
  if (bandwidth == "auto") {
    options["bandwidth"] = "auto";
  } else if (bandwidth == "fixed") {
    options["bandwidth"] = {bw_doc, bw_word};
  } else {
    std::cerr << "al-bench: --bandwidth must be 'fixed' or 'auto'\n";
    return 2;
  }
  nlohmann::json spec{{"dataset", dataset},
                      {"meta", default_meta()},
                      {"snapshots", split_list(snapshots)},
                      {"strategies", split_list(strategies)},
                      {"out", out},
                      {"queries_log", queries_log},
                      {"jobs", jobs},
                      {"options", options}};
  if (seeds.find(',') == std::string::npos) {
    spec["seeds"] = std::stoull(seeds);
  } else {
    std::vector<std::uint64_t> list;
    for (const auto& s : split_list(seeds)) list.push_back(std::stoull(s));
    spec["seeds"] = list;
  }
  char* summary = nullptr;
  if (auto st = cocoba_experiment_run(spec.dump().c_str(), &summary); st != COCOBA_OK) {
    return fail(st);
  }
  const auto parsed = nlohmann::json::parse(summary);
  cocoba_string_free(summary);
  const auto& fractions = parsed["fractions"];
  std::printf("%-12s", "strategy");
  for (const auto& f : fractions) std::printf("  %6.0f%%", f.get<double>() * 100.0);
  std::printf("\n");
  for (const auto& [name, row] : parsed["strategies"].items()) {
    std::printf("%-12s", name.c_str());
    for (const auto& v : row["mean_f1"]) std::printf("  %7.3f", v.get<double>());
    std::printf("\n");
  }
  std::cout << "summary: " << out << "/summary.json\n";
  return 0;
}
