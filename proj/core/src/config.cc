#include "treg/config.h"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "treg/errors.h"

namespace treg {

using nlohmann::json;

namespace {

const std::vector<std::string>& common_keys() {
  static const std::vector<std::string> keys = {"seed", "out", "fusion", "threads"};
  return keys;
}

template <typename T>
T get_as(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

int get_int(const json& j, const std::string& key, int lo) {
  if (!j.is_number_integer()) throw ConfigError("config key '" + key + "' must be an integer");
  const long long v = j.get<long long>();
  if (v < lo || v > 1'000'000'000) {
    throw ConfigError("config key '" + key + "' out of range: " + std::to_string(v));
  }
  return static_cast<int>(v);
}

double get_double(const json& j, const std::string& key, double lo) {
  if (!j.is_number()) throw ConfigError("config key '" + key + "' must be a number");
  const double v = j.get<double>();
  if (!(v >= lo)) throw ConfigError("config key '" + key + "' out of range");
  return v;
}

std::uint64_t get_seed(const json& j, const std::string& key) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0)) {
    throw ConfigError("config key '" + key + "' must be a non-negative integer");
  }
  return j.get<std::uint64_t>();
}

}  // namespace

std::string infer_mode_name(head::InferMode mode) {
  return mode == head::InferMode::Argmax ? "argmax" : "average";
}

head::InferMode parse_infer_mode(std::string_view name) {
  if (name == "argmax") return head::InferMode::Argmax;
  if (name == "average") return head::InferMode::NeighborhoodAverage;
  throw ConfigError("unknown infer mode '" + std::string(name) + "' (argmax|average)");
}

std::vector<std::string> allowed_keys(std::string_view command) {
  if (command == "gen") return {"suite", "sequences", "length"};
  if (command == "train") {
    return {"data",      "iterations", "batch_size", "learning_rate", "milestones", "decay",
            "cls_weight", "reg_weight", "max_gap",   "tat_cls",       "average_residual"};
  }
  if (command == "track") return {"data", "checkpoint", "queue", "infer", "update_interval"};
  if (command == "eval") return {"data", "results"};
  if (command == "ablate") {
    return {"seeds",      "sequences_per_kind", "train_sequences_per_kind", "length",
            "iterations", "batch_size",         "learning_rate",            "tat_cls"};
  }
  if (command == "dump-attn") return {"data", "checkpoint", "queue", "max_frames"};
  throw ConfigError("unknown command '" + std::string(command) + "'");
}

void apply_json(RunConfig& cfg, std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed config JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  const std::vector<std::string> allowed = allowed_keys(cfg.command);
  for (const auto& [key, value] : j.items()) {
    // An echoed config names its command; it must match the one being run.
    if (key == "command") {
      if (get_as<std::string>(value, key) != cfg.command) {
        throw ConfigError("config is for command '" + value.get<std::string>() + "', not " +
                          cfg.command);
      }
      continue;
    }
    const bool known =
        std::find(common_keys().begin(), common_keys().end(), key) != common_keys().end() ||
        std::find(allowed.begin(), allowed.end(), key) != allowed.end();
    if (!known) {
      throw ConfigError("unknown config key '" + key + "' for command " + cfg.command);
    }
    if (key == "seed") {
      cfg.seed = get_seed(value, key);
    } else if (key == "out") {
      cfg.out = get_as<std::string>(value, key);
    } else if (key == "fusion") {
      cfg.fusion = parse_fusion(get_as<std::string>(value, key));
    } else if (key == "threads") {
      cfg.threads = get_int(value, key, 1);
    } else if (key == "data") {
      cfg.data = get_as<std::string>(value, key);
    } else if (key == "checkpoint") {
      cfg.checkpoint = get_as<std::string>(value, key);
    } else if (key == "results") {
      cfg.results = get_as<std::string>(value, key);
    } else if (key == "suite") {
      cfg.suite = get_as<std::string>(value, key);
      if (cfg.suite != "mixed") parse_suite(cfg.suite);
    } else if (key == "sequences") {
      cfg.sequences = get_int(value, key, 1);
    } else if (key == "length") {
      cfg.length = get_int(value, key, 1);
      cfg.ablation.length = cfg.length;
    } else if (key == "iterations") {
      cfg.train.iterations = get_int(value, key, 0);
      cfg.ablation.train.iterations = cfg.train.iterations;
    } else if (key == "batch_size") {
      cfg.train.batch_size = get_int(value, key, 1);
      cfg.ablation.train.batch_size = cfg.train.batch_size;
    } else if (key == "learning_rate") {
      cfg.train.learning_rate = get_double(value, key, 0.0);
      cfg.ablation.train.learning_rate = cfg.train.learning_rate;
    } else if (key == "milestones") {
      if (!value.is_array()) throw ConfigError("config key 'milestones' must be an array");
      cfg.train.milestones.clear();
      for (const json& m : value) cfg.train.milestones.push_back(get_double(m, key, 0.0));
    } else if (key == "decay") {
      cfg.train.decay = get_double(value, key, 0.0);
    } else if (key == "cls_weight") {
      cfg.train.cls_weight = get_double(value, key, 0.0);
    } else if (key == "reg_weight") {
      cfg.train.reg_weight = get_double(value, key, 0.0);
    } else if (key == "max_gap") {
      cfg.train.max_gap = get_int(value, key, 0);
    } else if (key == "tat_cls") {
      cfg.tat_cls = get_as<bool>(value, key);
      cfg.ablation.tat_cls = cfg.tat_cls;
    } else if (key == "average_residual") {
      cfg.average_residual = get_as<bool>(value, key);
    } else if (key == "queue") {
      cfg.tracker.queue = parse_queue_mode(get_as<std::string>(value, key));
    } else if (key == "infer") {
      cfg.tracker.infer = parse_infer_mode(get_as<std::string>(value, key));
    } else if (key == "update_interval") {
      cfg.tracker.update_interval = get_int(value, key, 0);
    } else if (key == "max_frames") {
      cfg.max_frames = get_int(value, key, 0);
    } else if (key == "seeds") {
      if (!value.is_array() || value.empty()) {
        throw ConfigError("config key 'seeds' must be a non-empty array");
      }
      cfg.ablation.seeds.clear();
      for (const json& s : value) cfg.ablation.seeds.push_back(get_seed(s, key));
    } else if (key == "sequences_per_kind") {
      cfg.ablation.eval_per_kind = get_int(value, key, 1);
    } else if (key == "train_sequences_per_kind") {
      cfg.ablation.train_per_kind = get_int(value, key, 1);
    }
  }
  cfg.train.validate();
}

void apply_json_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("missing config file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  apply_json(cfg, buf.str());
}

std::string to_json(const RunConfig& cfg) {
  json j;  // object keys are kept sorted
  j["command"] = cfg.command;
  j["seed"] = cfg.seed;
  j["out"] = cfg.out;
  j["fusion"] = fusion_name(cfg.fusion);
  j["threads"] = cfg.threads;
  const std::string& c = cfg.command;
  if (c == "gen") {
    j["suite"] = cfg.suite;
    j["sequences"] = cfg.sequences;
    j["length"] = cfg.length;
  } else if (c == "train") {
    j["data"] = cfg.data;
    j["iterations"] = cfg.train.iterations;
    j["batch_size"] = cfg.train.batch_size;
    j["learning_rate"] = cfg.train.learning_rate;
    j["milestones"] = cfg.train.milestones;
    j["decay"] = cfg.train.decay;
    j["cls_weight"] = cfg.train.cls_weight;
    j["reg_weight"] = cfg.train.reg_weight;
    j["max_gap"] = cfg.train.max_gap;
    j["tat_cls"] = cfg.tat_cls;
    j["average_residual"] = cfg.average_residual;
  } else if (c == "track" || c == "dump-attn") {
    j["data"] = cfg.data;
    j["checkpoint"] = cfg.checkpoint;
    j["queue"] = queue_mode_name(cfg.tracker.queue);
    if (c == "track") {
      j["infer"] = infer_mode_name(cfg.tracker.infer);
      j["update_interval"] = cfg.tracker.update_interval;
    } else {
      j["max_frames"] = cfg.max_frames;
    }
  } else if (c == "eval") {
    j["data"] = cfg.data;
    j["results"] = cfg.results;
  } else if (c == "ablate") {
    j["seeds"] = cfg.ablation.seeds;
    j["sequences_per_kind"] = cfg.ablation.eval_per_kind;
    j["train_sequences_per_kind"] = cfg.ablation.train_per_kind;
    j["length"] = cfg.ablation.length;
    j["iterations"] = cfg.ablation.train.iterations;
    j["batch_size"] = cfg.ablation.train.batch_size;
    j["learning_rate"] = cfg.ablation.train.learning_rate;
    j["tat_cls"] = cfg.ablation.tat_cls;
  }
  return j.dump(2) + "\n";
}

}  // namespace treg
