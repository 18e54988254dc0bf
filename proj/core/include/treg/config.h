#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "treg/ablation.h"
#include "treg/fusion.h"
#include "treg/tracker.h"
#include "treg/trainer.h"

namespace treg {

// Fully resolved settings of one command-line run. Only the keys that belong
// to the command may appear in its JSON file.
struct RunConfig {
  std::string command;  // gen | train | track | eval | ablate | dump-attn
  std::uint64_t seed = 1;
  std::string out;
  std::string data;        // dataset directory (train, track, eval, dump-attn)
  std::string checkpoint;  // track, dump-attn
  std::string results;     // eval: directory of per-sequence box files
  FusionKind fusion = FusionKind::TargetAwareTransformer;
  bool force = false;

  // gen
  std::string suite = "rigid";  // rigid | scale | deform | mixed
  int sequences = 5;
  int length = 100;

  // train
  TrainConfig train;
  bool tat_cls = false;
  bool average_residual = false;

  // track, dump-attn
  TrackerConfig tracker;
  int max_frames = 0;  // dump-attn: 0 means every frame

  // ablate
  AblationPlan ablation;

  int threads = 1;
};

// Keys accepted for a command (besides the common seed/out/fusion).
std::vector<std::string> allowed_keys(std::string_view command);

// Applies a JSON object to cfg. ConfigError for unknown keys, wrong types or
// out-of-range values.
void apply_json(RunConfig& cfg, std::string_view json_text);
void apply_json_file(RunConfig& cfg, const std::filesystem::path& path);

// Canonical JSON echo of the keys relevant to cfg.command (sorted keys,
// shortest round-trip numbers).
std::string to_json(const RunConfig& cfg);

std::string infer_mode_name(head::InferMode mode);
head::InferMode parse_infer_mode(std::string_view name);

}  // namespace treg
