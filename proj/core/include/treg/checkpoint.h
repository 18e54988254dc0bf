#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace treg {

// One record of the checkpoint container.
struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::size_t element_count() const;
  std::vector<double> as_double() const { return {data.begin(), data.end()}; }
};

// Flat container of named float32 tensors.
//
// Byte layout (all integers little-endian u32, floats little-endian IEEE-754
// binary32):
//   "TREGCKPT1" | record count | records...
//   record = name length | UTF-8 name bytes | rank | dims[rank] | data
class Checkpoint {
 public:
  static constexpr std::string_view kMagic = "TREGCKPT1";

  void add(std::string name, std::vector<std::uint32_t> dims,
           std::span<const double> values);
  void add_scalar(std::string name, double value);

  bool contains(std::string_view name) const;
  // Throws ConfigError when the record is missing.
  const NamedTensor& get(std::string_view name) const;
  double scalar(std::string_view name) const;
  const std::vector<NamedTensor>& tensors() const { return tensors_; }

  std::string serialize() const;
  static Checkpoint parse(std::string_view bytes);

  void write(const std::filesystem::path& path) const;
  // Throws MissingInputError if the file does not exist.
  static Checkpoint read(const std::filesystem::path& path);

 private:
  std::vector<NamedTensor> tensors_;
};

}  // namespace treg
