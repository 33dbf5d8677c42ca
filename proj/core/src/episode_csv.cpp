#include "transpol/episode_csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "transpol/errors.hpp"

namespace transpol {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool all_nan(const double* v, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isnan(v[i])) return false;
  }
  return true;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
    text.remove_suffix(1);
  }
  if (text == "nan" || text == "-nan") return kNaN;
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw FormatError("not a number: '" + std::string(text) + "'");
  }
  return v;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

void write_episode_csv(std::ostream& out, const EpisodeRecord& episode) {
  out << kEpisodeCsvHeader << '\n';
  const std::size_t T = episode.steps.size();
  const bool has_states = !episode.states.empty();
  const auto row = [&](std::size_t t, const Vec4& x, const Vec2& u, const Vec4& y, const Vec4& target) {
    out << t;
    for (double v : x) out << ',' << format_double(v);
    for (double v : u) out << ',' << format_double(v);
    for (double v : y) out << ',' << format_double(v);
    for (double v : target) out << ',' << format_double(v);
    out << '\n';
  };
  const Vec4 missing{kNaN, kNaN, kNaN, kNaN};
  for (std::size_t t = 0; t < T; ++t) {
    const auto& s = episode.steps[t];
    row(t, has_states ? episode.states[t] : missing, s.u, s.y, s.target);
  }
  if (T > 0) {
    const auto& last = episode.steps.back();
    row(T, has_states ? episode.states[T] : missing, {kNaN, kNaN}, last.y_next, last.target);
  }
}

void write_episode_csv(const std::filesystem::path& path, const EpisodeRecord& episode) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write episode CSV: " + path.string());
  write_episode_csv(out, episode);
}

EpisodeRecord read_episode_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty episode CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kEpisodeCsvHeader) throw FormatError("unexpected episode CSV header: " + line);

  struct Row {
    Vec4 x, y, target;
    Vec2 u;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv(line);
    if (cells.size() != 15) {
      throw FormatError("episode CSV row has " + std::to_string(cells.size()) + " columns, expected 15");
    }
    if (static_cast<std::size_t>(parse_double(cells[0])) != rows.size()) {
      throw FormatError("episode CSV rows out of order at t=" + std::string(cells[0]));
    }
    Row r{};
    for (int i = 0; i < 4; ++i) r.x[i] = parse_double(cells[1 + i]);
    for (int i = 0; i < 2; ++i) r.u[i] = parse_double(cells[5 + i]);
    for (int i = 0; i < 4; ++i) r.y[i] = parse_double(cells[7 + i]);
    for (int i = 0; i < 4; ++i) r.target[i] = parse_double(cells[11 + i]);
    rows.push_back(r);
  }
  EpisodeRecord ep;
  if (rows.empty()) return ep;
  const std::size_t T = rows.size() - 1;
  for (std::size_t t = 0; t < T; ++t) {
    ep.steps.push_back({rows[t].y, rows[t].target, rows[t].u, rows[t + 1].y});
  }
  bool has_states = false;
  for (const auto& r : rows) has_states = has_states || !all_nan(r.x.data(), 4);
  if (has_states) {
    for (const auto& r : rows) ep.states.push_back(r.x);
  }
  return ep;
}

EpisodeRecord read_episode_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open episode CSV: " + path.string());
  return read_episode_csv(in);
}

void save_buffer(const std::filesystem::path& dir, const MemoryBuffer& buffer) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.csv");
  if (!manifest) throw FormatError("cannot write buffer manifest in " + dir.string());
  manifest << "index,file,seed,iteration,variant\n";
  std::size_t index = 0;
  for (const auto& ep : buffer.episodes()) {
    const std::string file = "episode_" + std::to_string(index) + ".csv";
    write_episode_csv(dir / file, *ep);
    manifest << index << ',' << file << ',' << ep->seed << ',' << ep->iteration << ','
             << to_string(ep->variant) << '\n';
    ++index;
  }
}

MemoryBuffer load_buffer(const std::filesystem::path& dir, std::size_t capacity, std::size_t episode_steps) {
  std::ifstream manifest(dir / "manifest.csv");
  if (!manifest) throw FormatError("cannot open buffer manifest in " + dir.string());
  std::string line;
  std::getline(manifest, line);
  MemoryBuffer buffer(capacity, episode_steps);
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 5) throw FormatError("malformed manifest row: " + line);
    EpisodeRecord ep = read_episode_csv(dir / std::string(cells[1]));
    ep.seed = std::stoull(std::string(cells[2]));
    ep.iteration = std::stoull(std::string(cells[3]));
    ep.variant = parse_variant(std::string(cells[4]));
    buffer.push(std::move(ep));
  }
  return buffer;
}

}  // namespace transpol
