#include "treg/synthetic.h"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "treg/errors.h"
#include "treg/random.h"

namespace treg {

namespace {

struct Texture {
  double a = 0.0;
  double b = 1.0;
  std::array<bool, 9> pattern{};  // 3x3 in object coordinates, true -> tone b
};

Texture random_texture(Rng& rng) {
  Texture t;
  t.a = rng.uniform(0.05, 0.95);
  const double contrast = rng.uniform(0.25, 0.5);
  t.b = t.a + (t.a < 0.5 ? contrast : -contrast);
  for (bool& p : t.pattern) p = rng.bernoulli(0.5);
  // Keep both tones present.
  t.pattern[static_cast<std::size_t>(rng.uniform_int(0, 8))] = true;
  bool any_a = std::any_of(t.pattern.begin(), t.pattern.end(), [](bool p) { return !p; });
  if (!any_a) t.pattern[4] = false;
  return t;
}

double overlap(double a0, double a1, double b0, double b1) {
  return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

// Anti-aliased textured rectangle blended over the image.
void draw_rect(Image& img, const Corners& c, const Texture& tex) {
  const int x0 = std::max(0, static_cast<int>(std::floor(c.x1)));
  const int y0 = std::max(0, static_cast<int>(std::floor(c.y1)));
  const int x1 = std::min(img.width() - 1, static_cast<int>(std::ceil(c.x2)));
  const int y1 = std::min(img.height() - 1, static_cast<int>(std::ceil(c.y2)));
  const double w = c.x2 - c.x1;
  const double h = c.y2 - c.y1;
  for (int py = y0; py <= y1; ++py) {
    const double cov_y = overlap(py, py + 1.0, c.y1, c.y2);
    if (cov_y <= 0.0) continue;
    const double v = (py + 0.5 - c.y1) / h;
    const int gy = std::clamp(static_cast<int>(std::floor(3.0 * v)), 0, 2);
    for (int px = x0; px <= x1; ++px) {
      const double cov = cov_y * overlap(px, px + 1.0, c.x1, c.x2);
      if (cov <= 0.0) continue;
      const double u = (px + 0.5 - c.x1) / w;
      const int gx = std::clamp(static_cast<int>(std::floor(3.0 * u)), 0, 2);
      const double tone = tex.pattern[static_cast<std::size_t>(gy * 3 + gx)] ? tex.b : tex.a;
      double& p = img.at(0, py, px);
      p = (1.0 - cov) * p + cov * tone;
    }
  }
}

Image mondrian(int width, int height, Rng& rng) {
  Image img(1, height, width, rng.uniform(0.3, 0.7));
  const int patches = 14;
  for (int k = 0; k < patches; ++k) {
    const double pw = rng.uniform(10.0, 70.0);
    const double ph = rng.uniform(10.0, 70.0);
    const double x = rng.uniform(-pw / 2, width - pw / 2);
    const double y = rng.uniform(-ph / 2, height - ph / 2);
    const double level = rng.uniform(0.0, 1.0);
    for (int py = std::max(0, static_cast<int>(y)); py < std::min(height, static_cast<int>(y + ph)); ++py) {
      for (int px = std::max(0, static_cast<int>(x)); px < std::min(width, static_cast<int>(x + pw)); ++px) {
        img.at(0, py, px) = level;
      }
    }
  }
  return img;
}

struct Distractor {
  double cx, cy, w, h, vx, vy;
  Texture tex;
  bool above;
};

void check_range(bool ok, const std::string& what) {
  if (!ok) throw SpecError("invalid sequence spec: " + what);
}

}  // namespace

void SequenceSpec::validate() const {
  check_range(length >= 1, "length must be >= 1");
  check_range(width >= 16 && height >= 16, "image must be at least 16x16");
  check_range(start.valid(), "start box must have positive size");
  check_range(scale_min > 0.0 && scale_min <= scale_max, "need 0 < scale_min <= scale_max");
  check_range(warp_amplitude >= 0.0 && warp_period > 0.0, "warp amplitude >= 0, period > 0");
  check_range(boundary_jitter >= 0.0 && accel_jitter >= 0.0 && appearance_drift >= 0.0,
              "jitter and drift must be non-negative");
  check_range(distractors >= 0, "distractor count must be non-negative");
  check_range(distractor_similarity >= 0.0 && distractor_similarity <= 1.0,
              "distractor similarity must lie in [0, 1]");
  check_range(noise >= 0.0 && blur >= 0.0, "noise and blur must be non-negative");
}

Sequence gen_sequence(const SequenceSpec& spec) {
  spec.validate();
  Rng motion(derive_seed(spec.seed, 1));
  Rng scene(derive_seed(spec.seed, 2));
  Rng pixel_noise(derive_seed(spec.seed, 3));
  Rng appearance(derive_seed(spec.seed, 4));

  // Trajectory first, so an invalid spec fails before any rendering.
  Sequence seq;
  seq.boxes.reserve(static_cast<std::size_t>(spec.length));
  double cx = spec.start.cx;
  double cy = spec.start.cy;
  double vx = spec.vx;
  double vy = spec.vy;
  double base_w = spec.start.w;
  double base_h = spec.start.h;
  for (int f = 0; f < spec.length; ++f) {
    if (f > 0) {
      if (spec.accel_jitter > 0.0) {
        vx += motion.normal(0.0, spec.accel_jitter);
        vy += motion.normal(0.0, spec.accel_jitter);
      }
      cx += vx;
      cy += vy;
      if (spec.scale_max > spec.scale_min || spec.scale_min != 1.0) {
        const double s = motion.uniform(spec.scale_min, std::nextafter(spec.scale_max, 1e9));
        base_w *= s;
        base_h *= s;
      }
    }
    double w = base_w;
    double h = base_h;
    if (spec.warp_amplitude > 0.0) {
      const double r = std::exp(0.5 * spec.warp_amplitude *
                                std::sin(2.0 * std::numbers::pi * f / spec.warp_period));
      w *= r;
      h /= r;
    }
    Corners c{cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0};
    if (f > 0 && spec.boundary_jitter > 0.0) {
      const double jx = std::min(spec.boundary_jitter, 0.2 * w);
      const double jy = std::min(spec.boundary_jitter, 0.2 * h);
      c.x1 += motion.uniform(-jx, jx);
      c.y1 += motion.uniform(-jy, jy);
      c.x2 += motion.uniform(-jx, jx);
      c.y2 += motion.uniform(-jy, jy);
    }
    if (c.x2 - c.x1 < 4.0 || c.y2 - c.y1 < 4.0) {
      throw SpecError("target shrinks below 4 px at frame " + std::to_string(f));
    }
    if (c.x1 < 0.0 || c.y1 < 0.0 || c.x2 > spec.width || c.y2 > spec.height) {
      throw SpecError("target leaves the image at frame " + std::to_string(f) + ": " +
                      to_string(BBox::from_corners(c)));
    }
    seq.boxes.push_back(f == 0 ? spec.start : BBox::from_corners(c));
  }

  const Image background = mondrian(spec.width, spec.height, scene);
  Texture target = random_texture(scene);
  std::vector<Distractor> distractors;
  for (int k = 0; k < spec.distractors; ++k) {
    Distractor d;
    d.w = spec.start.w * scene.uniform(0.7, 1.3);
    d.h = spec.start.h * scene.uniform(0.7, 1.3);
    d.cx = scene.uniform(d.w / 2, spec.width - d.w / 2);
    d.cy = scene.uniform(d.h / 2, spec.height - d.h / 2);
    d.vx = scene.uniform(-2.0, 2.0);
    d.vy = scene.uniform(-2.0, 2.0);
    const Texture other = random_texture(scene);
    const double s = spec.distractor_similarity;
    d.tex.a = s * target.a + (1.0 - s) * other.a;
    d.tex.b = s * target.b + (1.0 - s) * other.b;
    d.tex.pattern = scene.bernoulli(s) ? target.pattern : other.pattern;
    d.above = scene.bernoulli(0.5);
    distractors.push_back(d);
  }

  seq.frames.reserve(static_cast<std::size_t>(spec.length));
  for (int f = 0; f < spec.length; ++f) {
    if (f > 0) {
      if (spec.appearance_drift > 0.0) {
        target.a = std::clamp(target.a + appearance.normal(0.0, spec.appearance_drift), 0.0, 1.0);
        target.b = std::clamp(target.b + appearance.normal(0.0, spec.appearance_drift), 0.0, 1.0);
      }
      for (Distractor& d : distractors) {
        d.cx += d.vx;
        d.cy += d.vy;
        if (d.cx < d.w / 2 || d.cx > spec.width - d.w / 2) d.vx = -d.vx;
        if (d.cy < d.h / 2 || d.cy > spec.height - d.h / 2) d.vy = -d.vy;
      }
    }
    Image img = background;
    auto draw_distractors = [&](bool above) {
      for (const Distractor& d : distractors) {
        if (d.above == above) {
          draw_rect(img, {d.cx - d.w / 2, d.cy - d.h / 2, d.cx + d.w / 2, d.cy + d.h / 2}, d.tex);
        }
      }
    };
    draw_distractors(false);
    draw_rect(img, seq.boxes[static_cast<std::size_t>(f)].corners(), target);
    draw_distractors(true);
    if (spec.blur > 0.0) img = blur(img, spec.blur);
    if (spec.noise > 0.0) {
      for (double& v : img.data()) v += pixel_noise.normal(0.0, spec.noise);
    }
    for (double& v : img.data()) v = std::clamp(v, 0.0, 1.0);
    seq.frames.emplace_back(img);
  }
  return seq;
}

SuiteKind parse_suite(std::string_view name) {
  if (name == "rigid") return SuiteKind::Rigid;
  if (name == "scale") return SuiteKind::Scale;
  if (name == "deform") return SuiteKind::Deform;
  throw ConfigError("unknown suite '" + std::string(name) + "' (rigid|scale|deform)");
}

std::string suite_name(SuiteKind kind) {
  switch (kind) {
    case SuiteKind::Rigid: return "rigid";
    case SuiteKind::Scale: return "scale";
    case SuiteKind::Deform: return "deform";
  }
  return "rigid";
}

SequenceSpec draw_suite_spec(SuiteKind kind, std::uint64_t seed, int length) {
  Rng rng(seed);
  SequenceSpec s;
  s.length = length;
  s.seed = rng.next_u64();
  s.start.w = rng.uniform(18.0, 32.0);
  s.start.h = rng.uniform(18.0, 32.0);
  s.start.cx = rng.uniform(60.0, s.width - 60.0);
  s.start.cy = rng.uniform(60.0, s.height - 60.0);
  const double speed = rng.uniform(0.3, 1.5);
  const double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
  s.vx = speed * std::cos(heading);
  s.vy = speed * std::sin(heading);
  s.accel_jitter = 0.1;
  s.distractors = rng.uniform_int(0, 2);
  s.distractor_similarity = rng.uniform(0.2, 0.7);
  s.noise = 0.02;
  s.blur = rng.bernoulli(0.5) ? rng.uniform(0.5, 1.0) : 0.0;
  switch (kind) {
    case SuiteKind::Rigid:
      break;
    case SuiteKind::Scale: {
      const double trend = rng.uniform(-0.012, 0.012);
      s.scale_min = 1.0 + trend - 0.01;
      s.scale_max = 1.0 + trend + 0.01;
      break;
    }
    case SuiteKind::Deform:
      s.warp_amplitude = rng.uniform(0.3, 0.6);
      s.warp_period = rng.uniform(20.0, 40.0);
      s.boundary_jitter = 1.5;
      s.appearance_drift = 0.01;
      break;
  }
  return s;
}

std::vector<Sequence> make_suite(SuiteKind kind, int count, std::uint64_t seed, int length) {
  if (count < 0) throw SpecError("suite size must be non-negative");
  std::vector<Sequence> out;
  for (int i = 0; i < count; ++i) {
    bool done = false;
    for (int attempt = 0; attempt < 200 && !done; ++attempt) {
      const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(i) * 1000 + attempt);
      try {
        Sequence seq = gen_sequence(draw_suite_spec(kind, s, length));
        char name[32];
        std::snprintf(name, sizeof(name), "%s_%03d", suite_name(kind).c_str(), i);
        seq.name = name;
        out.push_back(std::move(seq));
        done = true;
      } catch (const SpecError&) {
      }
    }
    if (!done) throw SpecError("could not draw a valid " + suite_name(kind) + " sequence");
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string format_box_line(const BBox& b) {
  const Corners c = b.corners();
  return format_double(c.x1) + "," + format_double(c.y1) + "," + format_double(c.x2) +
         "," + format_double(c.y2);
}

void save_sequence(const Sequence& seq, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t f = 0; f < seq.frames.size(); ++f) {
    char name[32];
    std::snprintf(name, sizeof(name), "%04zu.pgm", f);
    write_pgm(dir / name, seq.frames[f].image());
  }
  std::ofstream gt(dir / "groundtruth.txt", std::ios::binary);
  for (const BBox& b : seq.boxes) gt << format_box_line(b) << '\n';
  if (!gt) throw Error("cannot write " + (dir / "groundtruth.txt").string());
}

std::vector<BBox> read_groundtruth(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("missing ground truth file: " + path.string());
  std::vector<BBox> boxes;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::array<double, 4> v{};
    const char* p = line.data();
    const char* end = line.data() + line.size();
    for (int k = 0; k < 4; ++k) {
      const auto res = std::from_chars(p, end, v[static_cast<std::size_t>(k)]);
      if (res.ec != std::errc()) {
        throw SpecError(path.string() + ":" + std::to_string(line_no) + ": malformed box line");
      }
      p = res.ptr;
      if (k < 3) {
        if (p == end || *p != ',') {
          throw SpecError(path.string() + ":" + std::to_string(line_no) + ": expected ','");
        }
        ++p;
      }
    }
    boxes.push_back(BBox::from_corners(v[0], v[1], v[2], v[3]));
  }
  return boxes;
}

Sequence load_sequence(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw MissingInputError("missing sequence directory: " + dir.string());
  }
  Sequence seq;
  seq.name = dir.filename().string();
  seq.boxes = read_groundtruth(dir / "groundtruth.txt");
  for (std::size_t f = 0; f < seq.boxes.size(); ++f) {
    char name[32];
    std::snprintf(name, sizeof(name), "%04zu.pgm", f);
    seq.frames.emplace_back(read_pgm(dir / name));
  }
  return seq;
}

std::vector<Sequence> load_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw MissingInputError("missing dataset directory: " + dir.string());
  }
  if (std::filesystem::exists(dir / "groundtruth.txt")) return {load_sequence(dir)};
  std::vector<std::filesystem::path> dirs;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_directory() && std::filesystem::exists(entry.path() / "groundtruth.txt")) {
      dirs.push_back(entry.path());
    }
  }
  if (dirs.empty()) throw MissingInputError("no sequences found in " + dir.string());
  std::sort(dirs.begin(), dirs.end());
  std::vector<Sequence> out;
  for (const auto& d : dirs) out.push_back(load_sequence(d));
  return out;
}

}  // namespace treg
