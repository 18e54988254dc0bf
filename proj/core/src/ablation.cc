#include "treg/ablation.h"

#include <fstream>
#include <map>
#include <thread>

#include "treg/errors.h"
#include "treg/random.h"

namespace treg {

Suite make_mixed_suite(int per_kind, std::uint64_t seed, int length) {
  Suite suite;
  const SuiteKind kinds[] = {SuiteKind::Rigid, SuiteKind::Scale, SuiteKind::Deform};
  for (SuiteKind kind : kinds) {
    std::vector<Sequence> seqs =
        make_suite(kind, per_kind, derive_seed(seed, static_cast<std::uint64_t>(kind)), length);
    for (Sequence& s : seqs) {
      suite.sequences.push_back(std::move(s));
      suite.kinds.push_back(kind);
    }
  }
  return suite;
}

std::vector<TrackResult> evaluate_suite(const ModelParams& params, const Suite& suite,
                                        const TrackerConfig& tracker, std::uint64_t seed,
                                        int threads) {
  const std::size_t n = suite.sequences.size();
  std::vector<TrackResult> results(n);
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(1, threads)), std::max<std::size_t>(n, 1));
  auto run = [&](std::size_t i) {
    results[i] = track_sequence(params, suite.sequences[i], tracker, derive_seed(seed, i));
  };
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) run(i);
    return results;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = t; i < n; i += workers) run(i);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

namespace {

void append_rows(std::vector<AblationRow>& rows, const std::string& name, const Suite& suite,
                 const std::vector<TrackResult>& results) {
  rows.push_back({name, mean_success_auc(results), mean_precision(results)});
  const SuiteKind kinds[] = {SuiteKind::Rigid, SuiteKind::Scale, SuiteKind::Deform};
  for (SuiteKind kind : kinds) {
    std::vector<TrackResult> subset;
    for (std::size_t i = 0; i < results.size(); ++i) {
      if (suite.kinds[i] == kind) subset.push_back(results[i]);
    }
    if (subset.empty()) continue;
    rows.push_back({name + "/" + suite_name(kind), mean_success_auc(subset), mean_precision(subset)});
  }
}

}  // namespace

std::vector<AblationRow> run_ablation(std::span<const AblationEntry> entries,
                                      const Suite& suite, const TrackerConfig& tracker,
                                      std::uint64_t seed, int threads) {
  for (const AblationEntry& e : entries) {
    if (!std::filesystem::is_regular_file(e.checkpoint)) {
      throw ConfigError("ablation config '" + e.name + "': missing checkpoint " +
                        e.checkpoint.string());
    }
  }
  std::vector<AblationRow> rows;
  for (const AblationEntry& e : entries) {
    const ModelParams params = ModelParams::load(e.checkpoint);
    TrackerConfig cfg = tracker;
    cfg.queue = e.queue;
    append_rows(rows, e.name, suite, evaluate_suite(params, suite, cfg, seed, threads));
  }
  return rows;
}

void write_ablation_csv(const std::filesystem::path& path, std::span<const AblationRow> rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "config,auc,precision\n";
  for (const AblationRow& r : rows) {
    out << r.config << ',' << format_double(r.auc) << ',' << format_double(r.precision) << '\n';
  }
}

const AblationRow& find_row(std::span<const AblationRow> rows, const std::string& config) {
  for (const AblationRow& r : rows) {
    if (r.config == config) return r;
  }
  throw ConfigError("no ablation row named '" + config + "'");
}

std::vector<AblationRow> run_ablation_plan(
    const AblationPlan& plan, const std::filesystem::path& workdir,
    const std::function<void(const std::string&)>& progress) {
  if (plan.seeds.empty()) throw ConfigError("ablation plan needs at least one seed");
  auto note = [&](const std::string& msg) {
    if (progress) progress(msg);
  };
  const FeatureConfig features;
  std::vector<AblationRow> all;
  std::vector<std::string> order;
  std::map<std::string, std::pair<double, double>> sums;

  for (std::uint64_t seed : plan.seeds) {
    const std::filesystem::path dir = workdir / ("seed_" + std::to_string(seed));
    std::filesystem::create_directories(dir);
    const Suite train_suite =
        make_mixed_suite(plan.train_per_kind, derive_seed(seed, 200), plan.length);
    const Suite eval_suite =
        make_mixed_suite(plan.eval_per_kind, derive_seed(seed, 100), plan.length);

    struct Model {
      std::string name;
      FusionKind fusion;
      bool tat_cls;
    };
    std::vector<Model> models;
    for (FusionKind k : plan.fusions) models.push_back({fusion_name(k), k, false});
    if (plan.tat_cls) models.push_back({"tat_cls", FusionKind::TargetAwareTransformer, true});

    TrainConfig tc = plan.train;
    tc.seed = derive_seed(seed, 300);
    tc.threads = plan.threads;
    std::vector<AblationEntry> entries;
    for (const Model& m : models) {
      note("seed " + std::to_string(seed) + ": training " + m.name);
      // Same initialization stream for every model of a seed.
      ModelParams init = ModelParams::init(features, m.fusion, m.tat_cls, derive_seed(seed, 400));
      const TrainResult tr = train(tc, train_suite.sequences, std::move(init));
      const std::filesystem::path ckpt = dir / (m.name + ".ckpt");
      tr.params.save(ckpt);
      write_loss_log(dir / (m.name + "_loss.csv"), tr.log);
      entries.push_back({m.name, ckpt, plan.tracker.queue});
    }
    if (!plan.fusions.empty() &&
        plan.fusions.front() == FusionKind::TargetAwareTransformer) {
      for (QueueMode q : plan.queue_modes) {
        entries.push_back({"queue_" + queue_mode_name(q), dir / "tat.ckpt", q});
      }
    }
    note("seed " + std::to_string(seed) + ": evaluating " + std::to_string(entries.size()) +
         " configs on " + std::to_string(eval_suite.sequences.size()) + " sequences");
    const std::vector<AblationRow> rows =
        run_ablation(entries, eval_suite, plan.tracker, derive_seed(seed, 500), plan.threads);
    write_ablation_csv(dir / "results.csv", rows);
    for (const AblationRow& r : rows) {
      all.push_back({"s" + std::to_string(seed) + "/" + r.config, r.auc, r.precision});
      if (!sums.contains(r.config)) order.push_back(r.config);
      sums[r.config].first += r.auc;
      sums[r.config].second += r.precision;
    }
  }
  const double n = static_cast<double>(plan.seeds.size());
  for (const std::string& name : order) {
    all.push_back({"mean/" + name, sums[name].first / n, sums[name].second / n});
  }
  return all;
}

}  // namespace treg
