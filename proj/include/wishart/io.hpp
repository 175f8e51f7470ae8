#pragma once

// Experiment-runner plumbing: flat key=value configuration with override
// layering, shortest round-trip numeric formatting, and CSV/JSON table
// emission with a manifest sidecar next to every data file.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include <json.hpp>

#include "wishart/common.hpp"
#include "wishart/diffusion.hpp"

namespace wishart {

// Configuration mistakes (unparseable file, bad value, missing key) exit with
// status 2; they are the caller's problem, not a numerical failure.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

enum class OutputFormat { csv, json };

struct RunConfig {
  std::string command;
  EnsembleParams params;
  std::map<std::string, std::vector<double>> real_grids;
  std::map<std::string, std::vector<Complex>> complex_grids;
  std::map<std::string, std::string> raw;  // resolved key=value view
  std::string output_path;
  OutputFormat format = OutputFormat::csv;

  // Returns the stored value, recording `fallback` first if the key is
  // absent, so the manifest echoes every value the run actually used.
  const std::string& get(const std::string& key, const std::string& fallback) {
    auto it = raw.find(key);
    if (it == raw.end()) it = raw.emplace(key, fallback).first;
    return it->second;
  }

  const std::string& require(const std::string& key) {
    auto it = raw.find(key);
    if (it == raw.end()) throw ConfigError("missing required key '" + key + "'");
    return it->second;
  }

  bool has(const std::string& key) const { return raw.count(key) != 0; }
};

struct RunManifest {
  std::map<std::string, std::string> config_echo;
  std::uint64_t seed = 0;
  std::string tool_version;
  double wall_time = 0.0;  // seconds; sidecar only, never in data files
  std::vector<std::string> warnings;
};

struct DataTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

}  // namespace detail

inline double parse_double(const std::string& text, const std::string& key) {
  const std::string t = detail::trim(text);
  if (!t.empty()) {
    char* end = nullptr;
    double v = std::strtod(t.c_str(), &end);
    if (end == t.c_str() + t.size()) return v;
  }
  throw ConfigError("key '" + key + "': cannot parse '" + text + "' as a number");
}

inline long long parse_int(const std::string& text, const std::string& key) {
  const std::string t = detail::trim(text);
  long long v = 0;
  auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size())
    throw ConfigError("key '" + key + "': cannot parse '" + text + "' as an integer");
  return v;
}

inline std::uint64_t parse_u64(const std::string& text, const std::string& key) {
  const std::string t = detail::trim(text);
  std::uint64_t v = 0;
  auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size())
    throw ConfigError("key '" + key + "': cannot parse '" + text +
                      "' as an unsigned integer");
  return v;
}

// Complex literals: "1.5", "-2e-3", "0.5i", "i", "-i", "1+0.5i", "1e-2-3i".
inline Complex parse_complex(const std::string& text, const std::string& key) {
  std::string t = detail::trim(text);
  if (t.empty()) throw ConfigError("key '" + key + "': empty complex literal");
  if (t.back() != 'i') return Complex(parse_double(t, key), 0.0);
  t.pop_back();
  // search for the sign separating real from imaginary, skipping exponents
  std::size_t cut = std::string::npos;
  for (std::size_t i = t.size(); i-- > 1;) {
    if ((t[i] == '+' || t[i] == '-') && t[i - 1] != 'e' && t[i - 1] != 'E') {
      cut = i;
      break;
    }
  }
  auto imag_of = [&](std::string part) {
    if (part.empty() || part == "+") return 1.0;
    if (part == "-") return -1.0;
    return parse_double(part, key);
  };
  if (cut == std::string::npos) return Complex(0.0, imag_of(t));
  return Complex(parse_double(t.substr(0, cut), key), imag_of(t.substr(cut)));
}

// Real grids: either an inclusive linspace "lo:hi:count" or a comma list.
inline std::vector<double> parse_real_grid(const std::string& text,
                                           const std::string& key) {
  const std::string t = detail::trim(text);
  if (t.find(':') != std::string::npos) {
    auto parts = detail::split(t, ':');
    if (parts.size() != 3)
      throw ConfigError("key '" + key + "': linspace needs lo:hi:count");
    const double lo = parse_double(parts[0], key);
    const double hi = parse_double(parts[1], key);
    const long long n = parse_int(parts[2], key);
    if (n < 1) throw ConfigError("key '" + key + "': count must be >= 1");
    std::vector<double> out(static_cast<std::size_t>(n));
    for (long long i = 0; i < n; ++i)
      out[static_cast<std::size_t>(i)] =
          (n == 1) ? lo : lo + (hi - lo) * static_cast<double>(i) /
                              static_cast<double>(n - 1);
    return out;
  }
  std::vector<double> out;
  for (const auto& item : detail::split(t, ','))
    out.push_back(parse_double(item, key));
  if (out.empty()) throw ConfigError("key '" + key + "': empty grid");
  return out;
}

inline std::vector<Complex> parse_complex_grid(const std::string& text,
                                               const std::string& key) {
  std::vector<Complex> out;
  for (const auto& item : detail::split(detail::trim(text), ','))
    out.push_back(parse_complex(item, key));
  if (out.empty()) throw ConfigError("key '" + key + "': empty grid");
  return out;
}

inline std::vector<int> parse_int_list(const std::string& text,
                                       const std::string& key) {
  std::vector<int> out;
  for (const auto& item : detail::split(detail::trim(text), ','))
    out.push_back(static_cast<int>(parse_int(item, key)));
  if (out.empty()) throw ConfigError("key '" + key + "': empty list");
  return out;
}

// Flat config file: one `key = value` per line, '#' starts a comment.
inline std::map<std::string, std::string> load_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) +
                        ": expected key = value");
    const std::string key = detail::trim(t.substr(0, eq));
    if (key.empty())
      throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key");
    kv[key] = detail::trim(t.substr(eq + 1));
  }
  return kv;
}

namespace detail {

inline nlohmann::ordered_json manifest_json(const RunManifest& m,
                                            bool with_wall_time) {
  nlohmann::ordered_json j;
  j["config_echo"] = m.config_echo;
  j["seed"] = m.seed;
  j["tool_version"] = m.tool_version;
  if (with_wall_time) j["wall_time"] = m.wall_time;
  j["warnings"] = m.warnings;
  return j;
}

}  // namespace detail

inline void write_csv(const std::string& path, const DataTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open output file '" + path + "'");
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    if (c) out << ',';
    out << table.columns[c];
  }
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << ',';
      out << format_double(row[c]);
    }
    out << '\n';
  }
}

// Data files must be byte-identical across reruns of the same config + seed,
// so the embedded manifest omits the wall time; the sidecar carries it.
inline void write_json(const std::string& path, const DataTable& table,
                       const RunManifest& manifest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open output file '" + path + "'");
  nlohmann::ordered_json j;
  j["manifest"] = detail::manifest_json(manifest, false);
  j["columns"] = table.columns;
  j["rows"] = table.rows;
  out << j.dump(2) << '\n';
}

inline void write_manifest_sidecar(const std::string& data_path,
                                   const RunManifest& manifest) {
  const std::string path = data_path + ".manifest.json";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open manifest file '" + path + "'");
  out << detail::manifest_json(manifest, true).dump(2) << '\n';
}

inline void check_output_parent(const std::string& path) {
  const std::filesystem::path parent = std::filesystem::path(path).parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  if (!std::filesystem::is_directory(parent, ec))
    throw ConfigError("output parent directory '" + parent.string() +
                      "' does not exist");
}

}  // namespace wishart
