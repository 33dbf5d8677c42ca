#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace transpol {

/// Named float64 array as stored in a checkpoint container.
struct NamedArray {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::vector<double> data;
};

/// Self-describing little-endian container of named float64 arrays.
///
/// Layout:
///   bytes 0..7   magic "TPOLCKPT"
///   u32          format version (currently 1)
///   u32          array count
///   per array:   u32 name length, name bytes (UTF-8, no terminator),
///                u32 rank, u64 extents[rank], f64 values[prod(extents)]
/// All integers and doubles are little-endian.
class Checkpoint {
 public:
  static constexpr char kMagic[8] = {'T', 'P', 'O', 'L', 'C', 'K', 'P', 'T'};
  static constexpr std::uint32_t kVersion = 1;

  void put(std::string name, std::vector<std::uint64_t> shape, std::vector<double> data);
  void put_scalar(std::string name, double value) { put(std::move(name), {}, {value}); }

  [[nodiscard]] bool contains(const std::string& name) const;
  /// Throws FormatError if absent.
  [[nodiscard]] const NamedArray& get(const std::string& name) const;
  [[nodiscard]] double scalar(const std::string& name) const;
  [[nodiscard]] const std::map<std::string, NamedArray>& arrays() const { return arrays_; }

  void write(const std::filesystem::path& path) const;
  /// Throws FormatError on bad magic, unsupported version or truncation.
  static Checkpoint read(const std::filesystem::path& path);

 private:
  std::map<std::string, NamedArray> arrays_;
};

}  // namespace transpol
