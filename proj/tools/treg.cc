// treg: synthetic data generation, training, tracking, evaluation, ablation
// and attention dumps.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "treg/ablation.h"
#include "treg/config.h"
#include "treg/errors.h"
#include "treg/image.h"
#include "treg/metrics.h"
#include "treg/model.h"
#include "treg/synthetic.h"
#include "treg/tracker.h"
#include "treg/trainer.h"

namespace fs = std::filesystem;
using namespace treg;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string fusion;
  std::string queue;
  bool force = false;
};

int thread_cap() {
  int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("TREG_THREADS")) {
    try {
      const int cap = std::stoi(env);
      if (cap >= 1) threads = std::min(threads, cap);
    } catch (const std::exception&) {
      throw ConfigError(std::string("TREG_THREADS must be a positive integer, got '") + env + "'");
    }
  }
  return threads;
}

RunConfig resolve(const std::string& command, const Flags& flags) {
  RunConfig cfg;
  cfg.command = command;
  cfg.threads = thread_cap();
  if (!flags.config.empty()) apply_json_file(cfg, flags.config);
  cfg.threads = std::min(cfg.threads, thread_cap());
  if (flags.seed) cfg.seed = *flags.seed;
  if (!flags.out.empty()) cfg.out = flags.out;
  if (!flags.fusion.empty()) cfg.fusion = parse_fusion(flags.fusion);
  if (!flags.queue.empty()) cfg.tracker.queue = parse_queue_mode(flags.queue);
  cfg.force = flags.force;
  if (cfg.out.empty()) throw ConfigError("no output directory (--out or \"out\")");
  return cfg;
}

void require_input(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string("no ") + what + " given");
  if (!fs::exists(path)) throw MissingInputError(std::string("missing ") + what + ": " + path);
}

// Creates the output directory; an existing non-empty one needs --force.
void prepare_out(const RunConfig& cfg) {
  const fs::path out(cfg.out);
  if (fs::exists(out) && !fs::is_empty(out)) {
    if (!cfg.force) {
      throw ConfigError("output directory " + cfg.out + " is not empty (use --force)");
    }
    fs::remove_all(out);
  }
  fs::create_directories(out);
  std::ofstream(out / "config.json", std::ios::binary) << to_json(cfg);
}

void write_boxes(const fs::path& path, const std::vector<BBox>& boxes) {
  std::ofstream out(path, std::ios::binary);
  for (std::size_t f = 0; f < boxes.size(); ++f) out << f << ',' << format_box_line(boxes[f]) << '\n';
  if (!out) throw Error("cannot write " + path.string());
}

std::vector<BBox> read_boxes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("missing box file: " + path.string());
  std::vector<BBox> boxes;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    long frame = 0;
    double v[4];
    char sep[4];
    if (!(fields >> frame >> sep[0] >> v[0] >> sep[1] >> v[1] >> sep[2] >> v[2] >> sep[3] >> v[3])) {
      throw SpecError("malformed box line in " + path.string() + ": " + line);
    }
    boxes.push_back(BBox::from_corners(v[0], v[1], v[2], v[3]));
  }
  return boxes;
}

void write_metrics(const fs::path& path, const std::vector<std::string>& names,
                   const std::vector<TrackResult>& results) {
  std::ofstream out(path, std::ios::binary);
  out << "sequence,auc,precision\n";
  for (std::size_t i = 0; i < results.size(); ++i) {
    out << names[i] << ',' << format_double(success_auc(results[i])) << ','
        << format_double(precision_at(results[i])) << '\n';
  }
  out << "all," << format_double(mean_success_auc(results)) << ','
      << format_double(mean_precision(results)) << '\n';
}

int cmd_gen(const RunConfig& cfg) {
  std::vector<Sequence> seqs;
  if (cfg.suite == "mixed") {
    seqs = make_mixed_suite(cfg.sequences, cfg.seed, cfg.length).sequences;
  } else {
    seqs = make_suite(parse_suite(cfg.suite), cfg.sequences, cfg.seed, cfg.length);
  }
  prepare_out(cfg);
  for (const Sequence& s : seqs) save_sequence(s, fs::path(cfg.out) / s.name);
  std::cout << "wrote " << seqs.size() << " sequences to " << cfg.out << "\n";
  return 0;
}

int cmd_train(RunConfig cfg) {
  require_input(cfg.data, "dataset directory");
  const std::vector<Sequence> data = load_dataset(cfg.data);
  prepare_out(cfg);
  cfg.train.seed = cfg.seed;
  cfg.train.threads = cfg.threads;
  ModelParams init = ModelParams::init(FeatureConfig{}, cfg.fusion, cfg.tat_cls, cfg.seed);
  init.average_residual = cfg.average_residual;
  const TrainResult r = train(cfg.train, data, std::move(init));
  r.params.save(fs::path(cfg.out) / "model.ckpt");
  write_loss_log(fs::path(cfg.out) / "loss.csv", r.log);
  if (!r.log.empty()) {
    std::cout << "final loss " << r.log.back().losses.total << " after " << r.log.size()
              << " steps\n";
  }
  return 0;
}

int cmd_track(const RunConfig& cfg) {
  require_input(cfg.checkpoint, "checkpoint");
  require_input(cfg.data, "dataset directory");
  const ModelParams params = ModelParams::load(cfg.checkpoint);
  Suite suite;
  suite.sequences = load_dataset(cfg.data);
  suite.kinds.assign(suite.sequences.size(), SuiteKind::Rigid);
  prepare_out(cfg);
  const std::vector<TrackResult> results =
      evaluate_suite(params, suite, cfg.tracker, cfg.seed, cfg.threads);
  std::vector<std::string> names;
  for (std::size_t i = 0; i < results.size(); ++i) {
    names.push_back(suite.sequences[i].name);
    write_boxes(fs::path(cfg.out) / (names.back() + ".txt"), results[i].predicted);
  }
  write_metrics(fs::path(cfg.out) / "metrics.csv", names, results);
  std::cout << "auc " << mean_success_auc(results) << " precision " << mean_precision(results)
            << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg) {
  require_input(cfg.data, "dataset directory");
  require_input(cfg.results, "results directory");
  const std::vector<Sequence> data = load_dataset(cfg.data);
  std::vector<TrackResult> results;
  std::vector<std::string> names;
  for (const Sequence& s : data) {
    std::vector<BBox> pred = read_boxes(fs::path(cfg.results) / (s.name + ".txt"));
    if (pred.size() != s.boxes.size()) {
      throw SpecError("result file for " + s.name + " has " + std::to_string(pred.size()) +
                      " boxes, expected " + std::to_string(s.boxes.size()));
    }
    results.push_back(TrackResult::from_boxes(std::move(pred), s.boxes));
    names.push_back(s.name);
  }
  prepare_out(cfg);
  write_metrics(fs::path(cfg.out) / "metrics.csv", names, results);
  std::cout << "auc " << mean_success_auc(results) << " precision " << mean_precision(results)
            << "\n";
  return 0;
}

int cmd_ablate(RunConfig cfg) {
  prepare_out(cfg);
  cfg.ablation.threads = cfg.threads;
  cfg.ablation.tracker = cfg.tracker;
  const std::vector<AblationRow> rows = run_ablation_plan(
      cfg.ablation, cfg.out, [](const std::string& msg) { std::cerr << msg << "\n"; });
  write_ablation_csv(fs::path(cfg.out) / "results.csv", rows);
  for (const AblationRow& r : rows) {
    if (r.config.rfind("mean/", 0) == 0) {
      std::printf("%-28s auc %.4f  precision %.4f\n", r.config.c_str(), r.auc, r.precision);
    }
  }
  return 0;
}

int cmd_dump_attn(const RunConfig& cfg) {
  require_input(cfg.checkpoint, "checkpoint");
  require_input(cfg.data, "dataset directory");
  const ModelParams params = ModelParams::load(cfg.checkpoint);
  const std::vector<Sequence> data = load_dataset(cfg.data);
  prepare_out(cfg);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Sequence& s = data[i];
    const fs::path dir = fs::path(cfg.out) / s.name;
    fs::create_directories(dir);
    Tracker tracker(params, cfg.tracker, derive_seed(cfg.seed, i));
    tracker.init(s.frames[0].image(), s.boxes[0]);
    std::vector<BBox> boxes{s.boxes[0]};
    std::size_t last = s.frames.size();
    if (cfg.max_frames > 0) last = std::min(last, static_cast<std::size_t>(cfg.max_frames) + 1);
    for (std::size_t f = 1; f < last; ++f) {
      const FrameOutput o = tracker.track(s.frames[f].image(), true);
      boxes.push_back(o.box);
      char stem[32];
      std::snprintf(stem, sizeof(stem), "%04zu", f);
      write_pgm_scaled(dir / ("attn_" + std::string(stem) + ".pgm"), o.attention);
      write_pgm_scaled(dir / ("score_" + std::string(stem) + ".pgm"), o.score);
      std::ofstream csv(dir / ("attn_" + std::string(stem) + ".csv"), std::ios::binary);
      csv << "row,col,value\n";
      for (int r = 0; r < o.attention.height(); ++r) {
        for (int c = 0; c < o.attention.width(); ++c) {
          csv << r << ',' << c << ',' << format_double(o.attention.at(0, r, c)) << '\n';
        }
      }
    }
    write_boxes(dir / "boxes.txt", boxes);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"treg: target transformed regression tracker toolkit"};
  app.require_subcommand(1);
  Flags flags;
  const char* names[] = {"gen", "train", "track", "eval", "ablate", "dump-attn"};
  const char* help[] = {"generate a synthetic sequence suite",
                        "train a model on a dataset",
                        "track every sequence of a dataset",
                        "score box files against ground truth",
                        "train and evaluate the fusion and queue ablations",
                        "write attention and score maps per frame"};
  for (int i = 0; i < 6; ++i) {
    CLI::App* sub = app.add_subcommand(names[i], help[i]);
    sub->add_option("--config", flags.config, "JSON config file");
    sub->add_option("--seed", flags.seed, "random seed");
    sub->add_option("--out", flags.out, "output directory");
    sub->add_option("--fusion", flags.fusion, "tat|dwcorr|pcorr|none");
    sub->add_option("--queue", flags.queue, "static1|static3|static7|fixed|confidence");
    sub->add_flag("--force", flags.force, "overwrite a non-empty output directory");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    const std::string command = app.get_subcommands().front()->get_name();
    const RunConfig cfg = resolve(command, flags);
    if (command == "gen") return cmd_gen(cfg);
    if (command == "train") return cmd_train(cfg);
    if (command == "track") return cmd_track(cfg);
    if (command == "eval") return cmd_eval(cfg);
    if (command == "ablate") return cmd_ablate(cfg);
    return cmd_dump_attn(cfg);
  } catch (const MissingInputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
