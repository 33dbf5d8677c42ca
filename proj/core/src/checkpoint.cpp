#include "transpol/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>

#include "transpol/errors.hpp"

namespace transpol {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw FormatError("truncated checkpoint: " + path.string());
  return v;
}

std::uint64_t element_count(const std::vector<std::uint64_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::uint64_t{1}, std::multiplies<>());
}

}  // namespace

void Checkpoint::put(std::string name, std::vector<std::uint64_t> shape, std::vector<double> data) {
  if (element_count(shape) != data.size()) {
    throw DimensionError("checkpoint array '" + name + "' has " + std::to_string(data.size()) +
                         " values for its shape");
  }
  NamedArray a{name, std::move(shape), std::move(data)};
  arrays_[std::move(name)] = std::move(a);
}

bool Checkpoint::contains(const std::string& name) const { return arrays_.count(name) > 0; }

const NamedArray& Checkpoint::get(const std::string& name) const {
  auto it = arrays_.find(name);
  if (it == arrays_.end()) throw FormatError("checkpoint has no array named '" + name + "'");
  return it->second;
}

double Checkpoint::scalar(const std::string& name) const {
  const NamedArray& a = get(name);
  if (a.data.size() != 1) throw FormatError("checkpoint array '" + name + "' is not a scalar");
  return a.data[0];
}

void Checkpoint::write(const std::filesystem::path& path) const {
  // Write-then-rename so an interrupted run never leaves a torn checkpoint.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open checkpoint for writing: " + tmp.string());
    out.write(kMagic, sizeof(kMagic));
    write_pod(out, kVersion);
    write_pod(out, static_cast<std::uint32_t>(arrays_.size()));
    for (const auto& [name, a] : arrays_) {
      write_pod(out, static_cast<std::uint32_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      write_pod(out, static_cast<std::uint32_t>(a.shape.size()));
      for (std::uint64_t d : a.shape) write_pod(out, d);
      out.write(reinterpret_cast<const char*>(a.data.data()),
                static_cast<std::streamsize>(a.data.size() * sizeof(double)));
    }
    if (!out) throw FormatError("failed writing checkpoint: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint Checkpoint::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint: " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("not a checkpoint file (bad magic/version header): " + path.string());
  }
  const auto version = read_pod<std::uint32_t>(in, path);
  if (version != kVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version) + " in " +
                      path.string());
  }
  const auto count = read_pod<std::uint32_t>(in, path);
  Checkpoint ckpt;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<std::uint32_t>(in, path);
    if (name_len > 4096) throw FormatError("corrupt array name in " + path.string());
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto rank = read_pod<std::uint32_t>(in, path);
    if (rank > 8) throw FormatError("corrupt array rank in " + path.string());
    std::vector<std::uint64_t> shape(rank);
    for (auto& d : shape) d = read_pod<std::uint64_t>(in, path);
    const std::uint64_t n = element_count(shape);
    if (n > (std::uint64_t{1} << 32)) throw FormatError("corrupt array extents in " + path.string());
    std::vector<double> data(n);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw FormatError("truncated checkpoint: " + path.string());
    ckpt.put(std::move(name), std::move(shape), std::move(data));
  }
  return ckpt;
}

}  // namespace transpol
