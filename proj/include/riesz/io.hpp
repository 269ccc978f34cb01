#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "riesz/diagnostics.hpp"
#include "riesz/errors.hpp"
#include "riesz/field.hpp"
#include "riesz/geometry.hpp"
#include "riesz/minimize.hpp"
#include "riesz/model.hpp"

namespace riesz {

using Json = nlohmann::ordered_json;

// Shortest round-trip decimal, independent of the global locale.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, r.ptr};
}

inline double parse_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = b + s.size();
  if (!s.empty() && *b == '+') ++b;
  auto r = std::from_chars(b, e, v);
  if (r.ec != std::errc() || r.ptr != e) throw ValidationError(what + ": not a number: '" + s + "'");
  return v;
}

inline long long parse_int(const std::string& s, const std::string& what) {
  long long v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ValidationError(what + ": not an integer: '" + s + "'");
  return v;
}

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

// Flat key = value configuration. "[section]" headers prefix the following keys with "section.".
class Manifest {
 public:
  Manifest() = default;

  static Manifest parse(const std::string& text) {
    Manifest m;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto hash = line.find_first_of("#;");
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') throw ValidationError("config line " + std::to_string(lineno) + ": unterminated section header");
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      auto eq = line.find('=');
      if (eq == std::string::npos) throw ValidationError("config line " + std::to_string(lineno) + ": expected key = value");
      std::string key = trim(line.substr(0, eq));
      if (key.empty()) throw ValidationError("config line " + std::to_string(lineno) + ": empty key");
      if (!section.empty()) key = section + "." + key;
      if (m.values_.count(key)) throw ValidationError("config: duplicate key '" + key + "'");
      m.values_[key] = trim(line.substr(eq + 1));
    }
    return m;
  }

  static Manifest load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
  }

  bool has(const std::string& k) const { return values_.count(k) != 0; }
  void set(const std::string& k, const std::string& v) { values_[k] = v; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string str(const std::string& k, const std::string& def) const {
    auto it = values_.find(k);
    return it == values_.end() ? def : it->second;
  }
  std::string str(const std::string& k) const {
    auto it = values_.find(k);
    if (it == values_.end()) throw ValidationError("config: missing key '" + k + "'");
    return it->second;
  }
  double num(const std::string& k, double def) const { return has(k) ? parse_double(str(k), k) : def; }
  double num(const std::string& k) const { return parse_double(str(k), k); }
  long long integer(const std::string& k, long long def) const { return has(k) ? parse_int(str(k), k) : def; }
  bool flag(const std::string& k, bool def) const {
    if (!has(k)) return def;
    std::string v = str(k);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ValidationError(k + ": expected a boolean, got '" + v + "'");
  }
  std::vector<double> list(const std::string& k, const std::vector<double>& def) const {
    if (!has(k)) return def;
    std::vector<double> out;
    for (const auto& p : split(str(k), ',')) out.push_back(parse_double(p, k));
    return out;
  }

  // Canonical text: sorted "key=value" lines.
  std::string canonical() const {
    std::string s;
    for (const auto& [k, v] : values_) s += k + "=" + v + "\n";
    return s;
  }

  std::string hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical()) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }

  Json to_json() const {
    Json j = Json::object();
    for (const auto& [k, v] : values_) j[k] = v;
    return j;
  }

 private:
  std::map<std::string, std::string> values_;
};

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::string& hash) : out_(path, std::ios::binary) {
    if (!out_) throw ValidationError("cannot write '" + path + "'");
    out_ << "# manifest-hash: " << hash << '\n';
  }
  void header(const std::vector<std::string>& cols) { row_strings(cols); }
  void row(const std::vector<double>& vals) {
    for (std::size_t i = 0; i < vals.size(); ++i) out_ << (i ? "," : "") << fmt(vals[i]);
    out_ << '\n';
  }
  void row_strings(const std::vector<std::string>& vals) {
    for (std::size_t i = 0; i < vals.size(); ++i) out_ << (i ? "," : "") << vals[i];
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

inline void write_json(const std::string& path, Json j, const std::string& hash) {
  Json out = Json::object();
  out["manifest_hash"] = hash;
  for (auto& [k, v] : j.items()) out[k] = v;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot write '" + path + "'");
  f << out.dump(2) << '\n';
}

inline void write_points_csv(const std::string& path, const Configuration& c, const std::string& hash) {
  CsvWriter w(path, hash);
  std::vector<std::string> cols;
  for (int i = 0; i < c.d; ++i) cols.push_back("x" + std::to_string(i));
  w.header(cols);
  for (int p = 0; p < c.size(); ++p) {
    auto x = c.point(p);
    w.row({x.begin(), x.end()});
  }
}

// Reads a points CSV written by write_points_csv; '#' lines are comments, the header row is skipped.
inline Configuration read_points_csv(const std::string& path, int d, Configuration::Scale scale = Configuration::Scale::macroscopic) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot read points file '" + path + "'");
  std::vector<double> coords;
  std::string line;
  bool header = false;
  while (std::getline(f, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      if (line[0] == 'x') continue;
    }
    auto parts = split(line, ',');
    if (static_cast<int>(parts.size()) != d) throw ValidationError("points file: expected " + std::to_string(d) + " columns");
    for (const auto& p : parts) coords.push_back(parse_double(p, "points file"));
  }
  return Configuration(d, std::move(coords), scale);
}

inline Json to_json(const Hyperrectangle& K) {
  Json lo = Json::array(), hi = Json::array();
  for (int i = 0; i < K.dim(); ++i) {
    lo.push_back(K.lo(i));
    hi.push_back(K.hi(i));
  }
  return {{"lo", lo}, {"hi", hi}};
}

inline Json to_json(const WindowEnergyReport& r) {
  return {{"w_eta", r.w_eta},   {"quad_integral", r.quad_integral}, {"smeared_mass", r.smeared_mass}, {"point_count", r.point_count},
          {"per_volume", r.per_volume}, {"volume", r.volume}, {"eta", r.eta}, {"tail_estimate", r.tail_estimate}};
}

inline Json to_json(const LinearFit& f) { return {{"slope", f.slope}, {"intercept", f.intercept}, {"r2", f.r2}, {"points", f.points}}; }

inline Json to_json(const Summary& s) { return {{"mean", s.mean}, {"stdev", s.stdev}, {"cv", s.cv}, {"count", s.count}}; }

inline Json to_json(const ScanResult& r) {
  Json rows = Json::array();
  for (const auto& w : r.windows) {
    Json row = {{"window", to_json(w.window)}, {"ell", w.ell}, {"count", w.count}, {"discrepancy", w.discrepancy}};
    if (w.energy) row["energy"] = to_json(*w.energy);
    rows.push_back(row);
  }
  return {{"summary", to_json(r.summary)}, {"fit", to_json(r.fit)}, {"ells", r.ells}, {"values", r.values}, {"windows", rows}};
}

// Per-window rows: center..., ell, W_eta, per_volume, count, discrepancy.
inline void write_scan_csv(const std::string& path, const ScanResult& r, const std::string& hash) {
  CsvWriter w(path, hash);
  if (r.windows.empty()) return;
  int d = r.windows.front().window.dim();
  std::vector<std::string> cols;
  for (int i = 0; i < d; ++i) cols.push_back("c" + std::to_string(i));
  for (const char* c : {"ell", "W_eta", "per_volume", "count", "discrepancy"}) cols.push_back(c);
  w.header(cols);
  double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& row : r.windows) {
    std::vector<double> v(row.window.center.begin(), row.window.center.end());
    v.push_back(row.ell);
    v.push_back(row.energy ? row.energy->w_eta : nan);
    v.push_back(row.energy ? row.energy->per_volume : nan);
    v.push_back(row.count);
    v.push_back(row.discrepancy);
    w.row(v);
  }
}

inline Json to_json(const LatticeDecay& f) {
  return {{"exponent", f.exponent}, {"constant", f.constant}, {"r2", f.r2}, {"bound", f.bound}, {"within_bound", f.within_bound}, {"t", f.t}, {"c2", f.c2}};
}

inline Json to_json(const RegimeReport& r) {
  Json checks = Json::array();
  for (const auto& c : r.checks) checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  return {{"pass", r.pass},       {"b_min", r.b_min},       {"delta_max", r.delta_max}, {"theta_lo", r.theta_lo},
          {"theta_hi", r.theta_hi}, {"eps1_min", r.eps1_min}, {"L_min", r.L_min},         {"checks", checks}};
}

}  // namespace riesz
