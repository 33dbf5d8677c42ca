#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "transpol/episode.hpp"
#include "transpol/replay.hpp"

namespace transpol {

/// Column header of the per-step episode trace format.
inline constexpr std::string_view kEpisodeCsvHeader = "t,x1,x2,v1,v2,u1,u2,y1,y2,vy1,vy2,tx1,tx2,tv1,tv2";

/// Shortest decimal text that parses back to exactly `v` ("nan", "inf", "-inf" for specials).
std::string format_double(double v);
/// Throws FormatError on malformed input.
double parse_double(std::string_view text);
std::vector<std::string_view> split_csv(std::string_view line);

/// Rows t = 0..T-1 hold (x_t, u_t, y_t, target_t); a final row t = T holds the
/// terminal state and observation with u = nan. Missing true states are written as nan.
void write_episode_csv(std::ostream& out, const EpisodeRecord& episode);
void write_episode_csv(const std::filesystem::path& path, const EpisodeRecord& episode);
EpisodeRecord read_episode_csv(std::istream& in);
EpisodeRecord read_episode_csv(const std::filesystem::path& path);

/// One CSV per episode plus manifest.csv (index,file,seed,iteration,variant), oldest first.
void save_buffer(const std::filesystem::path& dir, const MemoryBuffer& buffer);
MemoryBuffer load_buffer(const std::filesystem::path& dir, std::size_t capacity, std::size_t episode_steps);

}  // namespace transpol
