#pragma once

#include <cerrno>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "met/error.hpp"
#include "met/linalg.hpp"

namespace met::cli {

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"lyapunov", "filtration",      "splitting",    "regularity",
                                              "busemann", "drift",           "ncet",         "tracking",
                                              "direct-integral", "mean-kingman", "mz-check"};
  return names;
}

// Flat "key = value" text. Lines starting with '#' are comments. Families:
// matrix.<name> = <rows>x<cols> <row-major entries>; expect.<q>, tol.<q>,
// bound.<q> are stored as result metadata and checked by the report command.
class Config {
 public:
  static bool known_key(const std::string& key) {
    static const std::set<std::string> plain{
        "experiment", "system",  "probabilities", "angle",    "transition", "stationary", "start",
        "matrices",   "structure", "functor",     "method",   "n",          "seeds",      "probe",
        "dim_e",      "alpha",   "points",        "t_max",    "scale",      "space",      "map",
        "translation", "noise",  "cycle",         "weights",  "p",          "cap",        "integrability_samples",
        "output",     "format",  "schedule",      "probe_k",  "x0"};
    if (plain.count(key)) return true;
    for (const char* prefix : {"matrix.", "expect.", "tol.", "bound."}) {
      const std::string p(prefix);
      if (key.size() > p.size() && key.compare(0, p.size(), p) == 0) return true;
    }
    return false;
  }

  static Config parse(const std::string& text) {
    Config c;
    std::istringstream in(text);
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
      ++number;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw PreconditionError("config line " + std::to_string(number) + ": expected 'key = value'");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (!known_key(key)) throw PreconditionError("config line " + std::to_string(number) + ": unknown key '" + key + "'");
      if (c.values_.count(key)) throw PreconditionError("config line " + std::to_string(number) + ": duplicate key '" + key + "'");
      c.values_[key] = value;
    }
    c.validate();
    return c;
  }

  static Config load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw PreconditionError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
  }

  // canonical form: sorted keys, one per line
  std::string serialize() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
  }

  std::uint64_t hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : serialize()) {
      h ^= ch;
      h *= 1099511628211ULL;
    }
    return h;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::map<std::string, std::string>& values() const { return values_; }
  void set(const std::string& key, const std::string& value) {
    if (!known_key(key)) throw PreconditionError("unknown key '" + key + "'");
    values_[key] = value;
  }

  std::string str(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }
  std::string str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw PreconditionError("config: missing required key '" + key + "'");
    return it->second;
  }

  double real(const std::string& key) const { return to_double(key, str(key)); }
  double real(const std::string& key, double fallback) const { return has(key) ? real(key) : fallback; }

  long integer(const std::string& key) const {
    const std::string v = str(key);
    const double d = to_double(key, v);
    if (d != static_cast<double>(static_cast<long>(d)))
      throw PreconditionError("config: field '" + key + "' must be an integer, got '" + v + "'");
    return static_cast<long>(d);
  }
  long integer(const std::string& key, long fallback) const { return has(key) ? integer(key) : fallback; }

  long positive_integer(const std::string& key) const {
    const long v = integer(key);
    if (v <= 0) throw PreconditionError("config: field '" + key + "' must be positive, got " + std::to_string(v));
    return v;
  }
  long positive_integer(const std::string& key, long fallback) const {
    return has(key) ? positive_integer(key) : fallback;
  }
  double positive_real(const std::string& key) const {
    const double v = real(key);
    if (!(v > 0)) throw PreconditionError("config: field '" + key + "' must be positive");
    return v;
  }
  double positive_real(const std::string& key, double fallback) const {
    return has(key) ? positive_real(key) : fallback;
  }

  std::vector<double> reals(const std::string& key) const {
    std::vector<double> out;
    for (const auto& w : words(str(key))) out.push_back(to_double(key, w));
    return out;
  }
  std::vector<double> reals(const std::string& key, std::vector<double> fallback) const {
    return has(key) ? reals(key) : fallback;
  }
  std::vector<std::string> list(const std::string& key) const { return words(str(key)); }

  std::vector<std::uint64_t> seeds() const {
    std::vector<std::uint64_t> out;
    for (const auto& w : words(str("seeds", "0"))) {
      const double d = to_double("seeds", w);
      if (d < 0 || d != static_cast<double>(static_cast<std::uint64_t>(d)))
        throw PreconditionError("config: field 'seeds' must hold nonnegative integers");
      out.push_back(static_cast<std::uint64_t>(d));
    }
    if (out.empty()) throw PreconditionError("config: field 'seeds' is empty");
    return out;
  }

  // "<rows>x<cols> a11 a12 ..."
  Matrix matrix(const std::string& name) const {
    const std::string key = "matrix." + name;
    const auto w = words(str(key));
    const auto x = w.empty() ? std::string::npos : w[0].find('x');
    if (x == std::string::npos) throw PreconditionError("config: field '" + key + "' must start with <rows>x<cols>");
    const long r = static_cast<long>(to_double(key, w[0].substr(0, x)));
    const long c = static_cast<long>(to_double(key, w[0].substr(x + 1)));
    if (r <= 0 || c <= 0) throw PreconditionError("config: field '" + key + "' has nonpositive dimensions");
    if (static_cast<long>(w.size()) != 1 + r * c)
      throw PreconditionError("config: field '" + key + "' needs " + std::to_string(r * c) + " entries");
    Matrix m(r, c);
    for (long i = 0; i < r; ++i)
      for (long j = 0; j < c; ++j) m(i, j) = to_double(key, w[static_cast<std::size_t>(1 + i * c + j)]);
    return m;
  }

  std::vector<Matrix> matrices(const std::string& key = "matrices") const {
    std::vector<Matrix> out;
    for (const auto& name : list(key)) out.push_back(matrix(name));
    if (out.empty()) throw PreconditionError("config: field '" + key + "' is empty");
    return out;
  }

 private:
  void validate() const {
    const std::string e = str("experiment");
    bool ok = false;
    for (const auto& n : experiment_names()) ok = ok || n == e;
    if (!ok) throw PreconditionError("config: field 'experiment' has unknown value '" + e + "'");
    if (has("n")) positive_integer("n");
    if (has("format") && str("format") != "csv" && str("format") != "json")
      throw PreconditionError("config: field 'format' must be csv or json");
    seeds();
    for (const auto& [k, v] : values_) {
      if (k.rfind("matrix.", 0) == 0) matrix(k.substr(7));
      if (k.rfind("tol.", 0) == 0 || k.rfind("bound.", 0) == 0 || k.rfind("expect.", 0) == 0) reals(k);
    }
  }

  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }

  static std::vector<std::string> words(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    std::string w;
    while (in >> w) out.push_back(w);
    return out;
  }

  static double to_double(const std::string& key, const std::string& s) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE)
      throw PreconditionError("config: field '" + key + "' has a malformed number '" + s + "'");
    return v;
  }

  std::map<std::string, std::string> values_;
};

}  // namespace met::cli
