#pragma once

#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "dyneq/coupled_sim.hpp"
#include "dyneq/error.hpp"
#include "dyneq/nash.hpp"
#include "dyneq/witness.hpp"

// Flat `key = value` configuration files, CSV/JSON emission.
namespace dyneq::io {

#ifdef DYNEQ_VERSION
inline constexpr const char* kVersion = DYNEQ_VERSION;
#else
inline constexpr const char* kVersion = "0.0.0";
#endif

inline constexpr const char* kTrajectoryHeader =
    "t,X1,X2,v1,v2,norm1,norm2,residual1,residual2,net_gain,overlap,distance";

// Shortest decimal string that parses back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

using KeyValues = std::map<std::string, std::string>;

// Parses `key = value` lines; '#' starts a comment.
inline KeyValues parse_key_values(std::istream& in) {
  KeyValues out;
  std::string line;
  int lineno = 0;
  const auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string{};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno),
                        "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty())
      throw ConfigError("line " + std::to_string(lineno), "empty key");
    if (out.count(key)) throw ConfigError(key, "duplicate key");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

inline KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  return parse_key_values(in);
}

namespace detail {

inline double parse_real(const std::string& key, const std::string& text) {
  if (text == "inf" || text == "+inf") return std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (r.ec != std::errc{} || r.ptr != text.data() + text.size())
    throw ConfigError(key, "expected a real number, got '" + text + "'");
  return v;
}

template <typename Int>
Int parse_integer(const std::string& key, const std::string& text) {
  Int v{};
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (r.ec != std::errc{} || r.ptr != text.data() + text.size())
    throw ConfigError(key, "expected an integer, got '" + text + "'");
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError(key, "expected true or false, got '" + text + "'");
}

template <typename Enum>
Enum parse_choice(const std::string& key, const std::string& text,
                  std::initializer_list<std::pair<const char*, Enum>> names) {
  std::string allowed;
  for (const auto& [name, value] : names) {
    if (text == name) return value;
    allowed += (allowed.empty() ? "" : "|") + std::string(name);
  }
  throw ConfigError(key, "expected one of " + allowed + ", got '" + text + "'");
}

template <typename Enum>
std::string choice_name(Enum v,
                        std::initializer_list<std::pair<const char*, Enum>> names) {
  for (const auto& [name, value] : names)
    if (v == value) return name;
  return "?";
}

inline const std::initializer_list<std::pair<const char*, FeedbackSign>>
    kSignNames{{"+", FeedbackSign::plus}, {"-", FeedbackSign::minus}};
inline const std::initializer_list<std::pair<const char*, SecondOrderVariant>>
    kVariantNames{{"printed", SecondOrderVariant::printed},
                  {"analytic", SecondOrderVariant::analytic}};
inline const std::initializer_list<std::pair<const char*, TrajectoryMode>>
    kModeNames{{"guidance", TrajectoryMode::guidance},
               {"vink", TrajectoryMode::vink}};
inline const std::initializer_list<std::pair<const char*, ImpulseMode>>
    kImpulseNames{{"supplement", ImpulseMode::supplement},
                  {"replace", ImpulseMode::replace}};
inline const std::initializer_list<std::pair<const char*, UpdateOrder>>
    kOrderNames{{"simultaneous", UpdateOrder::simultaneous},
                {"sequential", UpdateOrder::sequential}};

// One table drives parsing and emission so the two cannot drift apart.
struct Field {
  const char* key;
  std::function<void(SimulationConfig&, const std::string&)> set;
  std::function<std::string(const SimulationConfig&)> get;
};

#define DYNEQ_REAL_FIELD(name, member)                                   \
  Field {                                                                \
    name,                                                                \
        [](SimulationConfig& c, const std::string& v) {                  \
          c.member = parse_real(name, v);                                \
        },                                                               \
        [](const SimulationConfig& c) { return format_double(c.member); } \
  }

#define DYNEQ_CHOICE_FIELD(name, member, table)                          \
  Field {                                                                \
    name,                                                                \
        [](SimulationConfig& c, const std::string& v) {                  \
          c.member = parse_choice(name, v, table);                       \
        },                                                               \
        [](const SimulationConfig& c) { return choice_name(c.member, table); } \
  }

inline const std::vector<Field>& simulation_fields() {
  static const std::vector<Field> fields{
      {"n_points",
       [](SimulationConfig& c, const std::string& v) {
         c.n_points = parse_integer<std::size_t>("n_points", v);
       },
       [](const SimulationConfig& c) { return std::to_string(c.n_points); }},
      DYNEQ_REAL_FIELD("length", length),
      DYNEQ_REAL_FIELD("dt", dt),
      DYNEQ_REAL_FIELD("total_time", total_time),
      DYNEQ_REAL_FIELD("hbar", constants.hbar),
      DYNEQ_REAL_FIELD("G", constants.G),
      DYNEQ_REAL_FIELD("m1", constants.m1),
      DYNEQ_REAL_FIELD("m2", constants.m2),
      DYNEQ_REAL_FIELD("separation", separation),
      DYNEQ_REAL_FIELD("sigma", sigma),
      DYNEQ_REAL_FIELD("phase1", phase1),
      DYNEQ_REAL_FIELD("phase2", phase2),
      DYNEQ_REAL_FIELD("speed", speed),
      {"direction1",
       [](SimulationConfig& c, const std::string& v) {
         c.direction1 = parse_integer<int>("direction1", v);
       },
       [](const SimulationConfig& c) { return std::to_string(c.direction1); }},
      {"direction2",
       [](SimulationConfig& c, const std::string& v) {
         c.direction2 = parse_integer<int>("direction2", v);
       },
       [](const SimulationConfig& c) { return std::to_string(c.direction2); }},
      DYNEQ_REAL_FIELD("softening", softening),
      DYNEQ_REAL_FIELD("overlap_threshold", overlap_threshold),
      DYNEQ_REAL_FIELD("impulse_gain", impulse_gain),
      DYNEQ_REAL_FIELD("dead_band", dead_band),
      DYNEQ_REAL_FIELD("tau_cap", tau_cap),
      DYNEQ_CHOICE_FIELD("feedback_sign", feedback_sign, kSignNames),
      DYNEQ_CHOICE_FIELD("f2_variant", f2_variant, kVariantNames),
      DYNEQ_CHOICE_FIELD("mode", mode, kModeNames),
      DYNEQ_CHOICE_FIELD("impulse_mode", impulse_mode, kImpulseNames),
      DYNEQ_CHOICE_FIELD("update_order", update_order, kOrderNames),
      DYNEQ_REAL_FIELD("norm_lower", norm_lower),
      DYNEQ_REAL_FIELD("norm_upper", norm_upper),
      {"continuity_diagnostics",
       [](SimulationConfig& c, const std::string& v) {
         c.continuity_diagnostics = parse_bool("continuity_diagnostics", v);
       },
       [](const SimulationConfig& c) {
         return std::string(c.continuity_diagnostics ? "true" : "false");
       }},
      {"seed",
       [](SimulationConfig& c, const std::string& v) {
         c.seed = parse_integer<std::uint64_t>("seed", v);
       },
       [](const SimulationConfig& c) { return std::to_string(c.seed); }},
  };
  return fields;
}

#undef DYNEQ_REAL_FIELD
#undef DYNEQ_CHOICE_FIELD

}  // namespace detail

// Applies key/value overrides on top of `base` and validates the result.
inline SimulationConfig apply_simulation_config(SimulationConfig base,
                                                const KeyValues& kv) {
  const auto& fields = detail::simulation_fields();
  for (const auto& [key, value] : kv) {
    const auto it = std::find_if(fields.begin(), fields.end(),
                                 [&](const auto& f) { return key == f.key; });
    if (it == fields.end()) throw ConfigError(key, "unknown key");
    it->set(base, value);
  }
  validated(base);
  return base;
}

inline SimulationConfig parse_simulation_config(std::istream& in) {
  return apply_simulation_config({}, parse_key_values(in));
}

inline SimulationConfig load_simulation_config(
    const std::filesystem::path& path) {
  return apply_simulation_config({}, read_key_values(path));
}

// Every key with its resolved value; parses back to the same config.
inline std::string emit_simulation_config(const SimulationConfig& c) {
  std::ostringstream out;
  for (const auto& f : detail::simulation_fields())
    out << f.key << " = " << f.get(c) << '\n';
  return out.str();
}

inline witness::WitnessConfig apply_witness_config(witness::WitnessConfig cfg,
                                                   const KeyValues& kv) {
  for (const auto& [key, value] : kv) {
    if (key == "delta_x_wide") {
      cfg.delta_x_wide = detail::parse_real(key, value);
    } else if (key == "delta_x_split") {
      cfg.delta_x_split = detail::parse_real(key, value);
    } else if (key == "r_min") {
      cfg.r_min = detail::parse_real(key, value);
    } else if (key == "r_max") {
      cfg.r_max = detail::parse_real(key, value);
    } else if (key == "r_count") {
      cfg.r_count = detail::parse_integer<std::size_t>(key, value);
    } else if (key == "gamma_values") {
      cfg.gamma_values.clear();
      std::istringstream list(value);
      std::string item;
      while (std::getline(list, item, ',')) {
        const auto b = item.find_first_not_of(' ');
        const auto e = item.find_last_not_of(' ');
        if (b == std::string::npos) throw ConfigError(key, "empty list entry");
        cfg.gamma_values.push_back(
            detail::parse_real(key, item.substr(b, e - b + 1)));
      }
    } else {
      throw ConfigError(key, "unknown key");
    }
  }
  try {
    cfg.validate();
  } catch (const PreconditionError& e) {
    throw ConfigError("witness", e.what());
  }
  return cfg;
}

inline std::string emit_witness_config(const witness::WitnessConfig& cfg) {
  std::ostringstream out;
  out << "delta_x_wide = " << format_double(cfg.delta_x_wide) << '\n'
      << "delta_x_split = " << format_double(cfg.delta_x_split) << '\n'
      << "gamma_values = ";
  for (std::size_t i = 0; i < cfg.gamma_values.size(); ++i)
    out << (i ? "," : "") << format_double(cfg.gamma_values[i]);
  out << '\n'
      << "r_min = " << format_double(cfg.r_min) << '\n'
      << "r_max = " << format_double(cfg.r_max) << '\n'
      << "r_count = " << cfg.r_count << '\n';
  return out.str();
}

inline void write_trajectory_csv(std::ostream& out, const RunRecord& record) {
  out << kTrajectoryHeader << '\n';
  for (const auto& r : record.steps) {
    const double row[] = {r.t,      r.x1,    r.x2,
                          r.v1,     r.v2,    r.norm1,
                          r.norm2,  r.residual_first, r.residual_second,
                          r.net_gain, r.overlap, r.distance};
    for (std::size_t i = 0; i < std::size(row); ++i)
      out << (i ? "," : "") << format_double(row[i]);
    out << '\n';
  }
}

inline std::string witness_header(const std::vector<witness::WitnessCurve>& curves) {
  std::string h = "R";
  for (const auto& c : curves) h += ",W_" + format_double(c.gamma);
  return h + ",threshold";
}

inline void write_witness_csv(std::ostream& out,
                              const std::vector<witness::WitnessCurve>& curves) {
  out << witness_header(curves) << '\n';
  if (curves.empty()) return;
  for (std::size_t i = 0; i < curves.front().separation.size(); ++i) {
    out << format_double(curves.front().separation[i]);
    for (const auto& c : curves) out << ',' << format_double(c.value[i]);
    out << ',' << format_double(witness::kThreshold) << '\n';
  }
}

inline std::string format_profile(const nash::StrategyProfile& p) {
  const auto vec = [](const nash::Vector& v) {
    std::string s = "(";
    for (Eigen::Index i = 0; i < v.size(); ++i)
      s += (i ? ", " : "") + format_double(v[i]);
    return s + ")";
  };
  return vec(p.row.probabilities()) + " " + vec(p.column.probabilities());
}

// Wall-clock stamp; kept out of every data file so those stay reproducible.
inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

struct RunManifest {
  std::string command;
  std::string resolved_config;  // key = value text
  std::uint64_t seed = 0;
  std::string start_time;
  std::string end_time;
  std::string abort_status;
  std::vector<std::string> data_files;
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();
};

inline nlohmann::ordered_json to_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["version"] = kVersion;
  j["command"] = m.command;
  j["seed"] = m.seed;
  j["config"] = m.resolved_config;
  j["start_time"] = m.start_time;
  j["end_time"] = m.end_time;
  j["abort_status"] = m.abort_status.empty() ? nlohmann::ordered_json(nullptr)
                                             : nlohmann::ordered_json(m.abort_status);
  j["data_files"] = m.data_files;
  j["summary"] = m.summary;
  return j;
}

inline nlohmann::ordered_json run_summary(const RunRecord& r) {
  nlohmann::ordered_json s;
  const auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  s["steps"] = r.steps.size();
  s["direction1"] = r.direction1;
  s["direction2"] = r.direction2;
  s["first_interaction_time"] = opt(r.first_interaction_time);
  s["first_impulse_time"] = opt(r.first_impulse_time);
  s["boundary_flag_time"] = opt(r.boundary_flag_time);
  s["node_retries"] = r.node_retries;
  if (r.config.continuity_diagnostics)
    s["continuity_residual_max"] = r.continuity_residual_max;
  return s;
}

inline void write_text(const std::filesystem::path& path,
                       const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::system_error(errno, std::generic_category(),
                                    "cannot write " + path.string());
  out << text;
  if (!out) throw std::system_error(errno, std::generic_category(),
                                    "write failed for " + path.string());
}

// trajectory.csv + manifest.json in out_dir.
inline void emit_run(const RunRecord& record, RunManifest manifest,
                     const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::ostringstream csv;
  write_trajectory_csv(csv, record);
  write_text(out_dir / "trajectory.csv", csv.str());
  manifest.abort_status = record.abort_status;
  manifest.seed = record.config.seed;
  manifest.resolved_config = emit_simulation_config(record.config);
  manifest.data_files.push_back("trajectory.csv");
  manifest.summary = run_summary(record);
  write_text(out_dir / "manifest.json", to_json(manifest).dump(2) + "\n");
}

}  // namespace dyneq::io
