#include "treg/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "treg/errors.h"

namespace treg {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  std::string_view take(std::size_t n) {
    need(n);
    std::string_view s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw ConfigError("checkpoint is truncated");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::size_t NamedTensor::element_count() const {
  std::size_t n = 1;
  for (std::uint32_t d : dims) n *= d;
  return n;
}

void Checkpoint::add(std::string name, std::vector<std::uint32_t> dims,
                     std::span<const double> values) {
  NamedTensor t{std::move(name), std::move(dims), {}};
  if (t.element_count() != values.size()) {
    throw ShapeError("checkpoint record '" + t.name + "' declares " +
                     std::to_string(t.element_count()) + " values, got " +
                     std::to_string(values.size()));
  }
  if (contains(t.name)) throw ConfigError("duplicate checkpoint record '" + t.name + "'");
  t.data.assign(values.begin(), values.end());
  tensors_.push_back(std::move(t));
}

void Checkpoint::add_scalar(std::string name, double value) {
  const double v[1] = {value};
  add(std::move(name), {1}, v);
}

bool Checkpoint::contains(std::string_view name) const {
  for (const NamedTensor& t : tensors_) {
    if (t.name == name) return true;
  }
  return false;
}

const NamedTensor& Checkpoint::get(std::string_view name) const {
  for (const NamedTensor& t : tensors_) {
    if (t.name == name) return t;
  }
  throw ConfigError("checkpoint has no record '" + std::string(name) + "'");
}

double Checkpoint::scalar(std::string_view name) const {
  const NamedTensor& t = get(name);
  if (t.data.size() != 1) {
    throw ConfigError("checkpoint record '" + std::string(name) + "' is not a scalar");
  }
  return t.data[0];
}

std::string Checkpoint::serialize() const {
  std::string out(kMagic);
  put_u32(out, static_cast<std::uint32_t>(tensors_.size()));
  for (const NamedTensor& t : tensors_) {
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
    for (std::uint32_t d : t.dims) put_u32(out, d);
    for (float f : t.data) put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

Checkpoint Checkpoint::parse(std::string_view bytes) {
  Reader in(bytes);
  if (in.take(kMagic.size()) != kMagic) {
    throw ConfigError("not a checkpoint (bad magic)");
  }
  Checkpoint ckpt;
  const std::uint32_t count = in.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = std::string(in.take(in.u32()));
    const std::uint32_t rank = in.u32();
    for (std::uint32_t r = 0; r < rank; ++r) t.dims.push_back(in.u32());
    t.data.resize(t.element_count());
    for (float& f : t.data) f = std::bit_cast<float>(in.u32());
    if (ckpt.contains(t.name)) {
      throw ConfigError("duplicate checkpoint record '" + t.name + "'");
    }
    ckpt.tensors_.push_back(std::move(t));
  }
  if (!in.done()) throw ConfigError("trailing bytes after checkpoint records");
  return ckpt;
}

void Checkpoint::write(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write checkpoint " + path.string());
  const std::string bytes = serialize();
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint Checkpoint::read(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingInputError("checkpoint not found: " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse(ss.str());
}

}  // namespace treg
