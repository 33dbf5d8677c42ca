#include "transpol/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "transpol/episode_csv.hpp"
#include "transpol/errors.hpp"

namespace transpol {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

double to_double(std::string_view key, std::string_view v) {
  try {
    const double d = parse_double(trim(v));
    if (!std::isfinite(d)) throw FormatError("non-finite");
    return d;
  } catch (const FormatError&) {
    throw ConfigError("config key '" + std::string(key) + "': expected a number, got '" + std::string(v) + "'");
  }
}

std::uint64_t to_uint(std::string_view key, std::string_view v) {
  v = trim(v);
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + std::string(key) + "': expected a non-negative integer, got '" +
                      std::string(v) + "'");
  }
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  v = trim(v);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + std::string(key) + "': expected true or false, got '" + std::string(v) + "'");
}

std::vector<double> to_list(std::string_view key, std::string_view v) {
  std::vector<double> out;
  for (auto part : split_csv(v)) out.push_back(to_double(key, part));
  return out;
}

template <std::size_t N>
void assign_broadcast(std::array<double, N>& dst, std::string_view key, std::string_view v) {
  const auto list = to_list(key, v);
  if (list.size() == 1) {
    dst.fill(list[0]);
  } else if (list.size() == N) {
    std::copy(list.begin(), list.end(), dst.begin());
  } else {
    throw ConfigError("config key '" + std::string(key) + "': expected 1 or " + std::to_string(N) + " values");
  }
}

template <std::size_t N>
std::string join(const std::array<double, N>& a) {
  if (std::all_of(a.begin(), a.end(), [&](double x) { return x == a[0]; })) return format_double(a[0]);
  std::string s;
  for (std::size_t i = 0; i < N; ++i) s += (i ? "," : "") + format_double(a[i]);
  return s;
}

struct Entry {
  std::string name;
  std::function<void(TrainConfig&, std::string_view)> set;
  std::function<std::string(const TrainConfig&)> get;
};

#define TP_SIZE(field)                                                                         \
  Entry {                                                                                      \
    #field, [](TrainConfig& c, std::string_view v) { c.field = to_uint(#field, v); },          \
        [](const TrainConfig& c) { return std::to_string(c.field); }                           \
  }
#define TP_REAL(name, field)                                                                   \
  Entry {                                                                                      \
    name, [](TrainConfig& c, std::string_view v) { c.field = to_double(name, v); },            \
        [](const TrainConfig& c) { return format_double(c.field); }                            \
  }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      TP_SIZE(episode_steps),
      TP_SIZE(episodes_per_iteration),
      TP_SIZE(iterations),
      TP_REAL("time_step", env.dt),
      TP_SIZE(memory_size),
      Entry{"rotation_angle_deg",
            [](TrainConfig& c, std::string_view v) {
              c.env.gamma = to_double("rotation_angle_deg", v) * std::numbers::pi / 180.0;
            },
            [](const TrainConfig& c) { return format_double(c.env.gamma * 180.0 / std::numbers::pi); }},
      TP_REAL("acceleration_constant", env.kappa),
      Entry{"process_noise_std",
            [](TrainConfig& c, std::string_view v) { assign_broadcast(c.env.process_noise, "process_noise_std", v); },
            [](const TrainConfig& c) { return join(c.env.process_noise); }},
      Entry{"observation_noise_std",
            [](TrainConfig& c, std::string_view v) {
              assign_broadcast(c.env.observation_noise, "observation_noise_std", v);
            },
            [](const TrainConfig& c) { return join(c.env.observation_noise); }},
      TP_REAL("position_range", env.x_max),
      TP_REAL("velocity_range", env.v_max),
      TP_REAL("control_range", env.u_max),
      TP_REAL("acceleration_range", env.a_max),
      TP_SIZE(transition_hidden_size),
      TP_REAL("transition_learning_rate", transition_learning_rate),
      TP_SIZE(transition_batches_per_iteration),
      TP_SIZE(transition_batch_size),
      TP_SIZE(policy_hidden_size),
      TP_REAL("policy_learning_rate", policy_learning_rate),
      TP_SIZE(policy_batches_per_iteration),
      TP_SIZE(policy_batch_size),
      TP_SIZE(warmup_steps),
      TP_SIZE(unroll_steps),
      TP_SIZE(seed),
      Entry{"task_variant",
            [](TrainConfig& c, std::string_view v) { c.variant = parse_variant(std::string(trim(v))); },
            [](const TrainConfig& c) { return to_string(c.variant); }},
      TP_REAL("target_radius", target_radius),
      Entry{"target_gain",
            [](TrainConfig& c, std::string_view v) {
              const auto list = to_list("target_gain", v);
              if (list.size() != 4) throw ConfigError("config key 'target_gain': expected 4 values");
              std::copy(list.begin(), list.end(), c.target_gain.weights.begin());
            },
            [](const TrainConfig& c) {
              std::string s;
              for (std::size_t i = 0; i < 4; ++i) s += (i ? "," : "") + format_double(c.target_gain.weights[i]);
              return s;
            }},
      TP_SIZE(micro_batch),
      TP_REAL("logvar_bias", logvar_bias),
      TP_REAL("nll_epsilon", nll_epsilon),
      TP_REAL("clip_norm", clip_norm),
      Entry{"policy_state_source",
            [](TrainConfig& c, std::string_view v) {
              try {
                c.policy_state_source = parse_state_source(std::string(trim(v)));
              } catch (const ConfigError& e) {
                throw ConfigError(std::string("config key 'policy_state_source': ") + e.what());
              }
            },
            [](const TrainConfig& c) { return to_string(c.policy_state_source); }},
      TP_SIZE(heldout_episodes),
      TP_SIZE(heldout_hold_steps),
      TP_SIZE(autoregressive_horizon),
      Entry{"eval_noise", [](TrainConfig& c, std::string_view v) { c.eval_noise = to_bool("eval_noise", v); },
            [](const TrainConfig& c) { return std::string(c.eval_noise ? "true" : "false"); }},
  };
  return table;
}

#undef TP_SIZE
#undef TP_REAL

const Entry* find_entry(std::string_view key) {
  for (const auto& e : entries()) {
    if (e.name == key) return &e;
  }
  return nullptr;
}

[[noreturn]] void unknown_key(std::string_view key, const std::string& where) {
  throw ConfigError(where + "unknown config key '" + std::string(key) + "'; nearest valid key is '" +
                    nearest_config_key(key) + "'");
}

}  // namespace

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& e : entries()) k.push_back(e.name);
    return k;
  }();
  return keys;
}

std::string nearest_config_key(std::string_view key) {
  std::string best;
  std::size_t best_d = std::string::npos;
  for (const auto& k : config_keys()) {
    const std::size_t d = edit_distance(key, k);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

void set_config_value(TrainConfig& config, std::string_view key, std::string_view value) {
  const Entry* e = find_entry(trim(key));
  if (e == nullptr) unknown_key(trim(key), "");
  e->set(config, value);
}

TrainConfig parse_config(std::string_view text, const std::string& source) {
  TrainConfig config;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected 'key = value', got '" + std::string(line) + "'");
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    const Entry* e = find_entry(key);
    if (e == nullptr) unknown_key(key, where);
    if (!seen.insert(std::string(key)).second) throw ConfigError(where + "duplicate config key '" + std::string(key) + "'");
    try {
      e->set(config, value);
    } catch (const ConfigError& err) {
      throw ConfigError(where + err.what());
    }
  }
  return config;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string format_config(const TrainConfig& config) {
  std::string out;
  for (const auto& e : entries()) out += e.name + " = " + e.get(config) + "\n";
  return out;
}

void apply_env_overrides(TrainConfig& config) {
  if (const char* seed = std::getenv("SEED"); seed != nullptr && *seed != '\0') {
    config.seed = to_uint("SEED", seed);
  }
}

TrainConfig desk_config() {
  TrainConfig c;
  c.iterations = 20;
  c.episodes_per_iteration = 10;
  c.transition_hidden_size = 64;
  c.policy_hidden_size = 64;
  c.transition_batch_size = 128;
  c.policy_batch_size = 128;
  c.transition_batches_per_iteration = 10;
  c.policy_batches_per_iteration = 10;
  return c;
}

void write_manifest(const std::filesystem::path& path, const RunManifest& m) {
  nlohmann::json j;
  j["tool_version"] = m.tool_version;
  j["command"] = m.command;
  j["seed"] = m.seed;
  j["out_dir"] = m.out_dir.string();
  j["config"] = m.config_text;
  j["outputs"] = m.outputs;
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write manifest: " + path.string());
  out << j.dump(2) << '\n';
}

RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read manifest: " + path.string());
  RunManifest m;
  try {
    const auto j = nlohmann::json::parse(in);
    m.tool_version = j.at("tool_version").get<std::string>();
    m.command = j.at("command").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.out_dir = j.at("out_dir").get<std::string>();
    m.config_text = j.at("config").get<std::string>();
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed manifest " + path.string() + ": " + e.what());
  }
  return m;
}

}  // namespace transpol
