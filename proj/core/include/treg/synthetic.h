#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "treg/bbox.h"
#include "treg/image.h"

namespace treg {

// Everything that defines one synthetic sequence. Same spec, same pixels.
struct SequenceSpec {
  int length = 100;  // frames
  int width = 256;  // image size in pixels
  int height = 256;

  // Initial target box (frame 0 ground truth).
  BBox start{128.0, 128.0, 24.0, 24.0};

  // Motion: per-frame velocity plus Gaussian jitter on it.
  double vx = 0.0;
  double vy = 0.0;
  double accel_jitter = 0.0;

  // Per-frame scale factor drawn uniformly from [scale_min, scale_max].
  double scale_min = 1.0;
  double scale_max = 1.0;

  // Aspect warp: w, h multiplied by exp(+-a sin(2 pi f / period) / 2).
  double warp_amplitude = 0.0;
  double warp_period = 30.0;
  // Uniform per-edge jitter in pixels.
  double boundary_jitter = 0.0;
  // Per-frame random-walk step of the target's two tones.
  double appearance_drift = 0.0;

  int distractors = 0;
  // 0: unrelated texture, 1: same texture as the target.
  double distractor_similarity = 0.5;

  double noise = 0.02;  // Gaussian pixel noise (std, intensity units)
  double blur = 0.0;    // Gaussian blur sigma in pixels, 0 disables

  std::uint64_t seed = 0;

  // SpecError for degenerate ranges.
  void validate() const;
};

struct Sequence {
  std::string name;
  std::vector<Frame> frames;
  std::vector<BBox> boxes;  // exact ground truth per frame
};

// Renders the spec. Throws SpecError when the target would leave the image.
Sequence gen_sequence(const SequenceSpec& spec);

enum class SuiteKind { Rigid, Scale, Deform };

SuiteKind parse_suite(std::string_view name);  // "rigid" | "scale" | "deform"
std::string suite_name(SuiteKind kind);

// Randomized spec of the given kind.
SequenceSpec draw_suite_spec(SuiteKind kind, std::uint64_t seed, int length = 100);

// `count` sequences of one kind. Specs that leave the image are redrawn with
// derived seeds, so the result is still a pure function of (kind, count, seed).
std::vector<Sequence> make_suite(SuiteKind kind, int count, std::uint64_t seed,
                                 int length = 100);

// Directory with frames 0000.pgm, 0001.pgm, ... and groundtruth.txt holding
// one "x1,y1,x2,y2" line per frame.
void save_sequence(const Sequence& seq, const std::filesystem::path& dir);
Sequence load_sequence(const std::filesystem::path& dir);

// Every sequence directory directly under dir (sorted by name), or dir itself
// when it holds a groundtruth.txt. MissingInputError if nothing is found.
std::vector<Sequence> load_dataset(const std::filesystem::path& dir);

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

std::string format_box_line(const BBox& b);
std::vector<BBox> read_groundtruth(const std::filesystem::path& path);

}  // namespace treg
