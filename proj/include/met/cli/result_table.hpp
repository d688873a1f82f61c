#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "met/error.hpp"

namespace met::cli {

struct ResultRow {
  std::uint64_t seed = 0;
  std::string quantity;
  long index = 0;
  double value = 0.0;
  double stderr_ = std::numeric_limits<double>::quiet_NaN();  // NaN when not applicable
};

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw PreconditionError("result: malformed number '" + s + "'");
  return v;
}

class ResultTable {
 public:
  static constexpr const char* kHeader = "seed,quantity,index,value,stderr";

  void add(std::uint64_t seed, const std::string& quantity, long index, double value,
           double err = std::numeric_limits<double>::quiet_NaN()) {
    if (quantity.find_first_of(",\n\"") != std::string::npos)
      throw PreconditionError("result: quantity names may not contain commas, quotes or newlines");
    rows_.push_back({seed, quantity, index, value, err});
  }
  void append(const ResultTable& other) { rows_.insert(rows_.end(), other.rows_.begin(), other.rows_.end()); }

  void set_meta(const std::string& key, const std::string& value) { meta_[key] = value; }
  const std::map<std::string, std::string>& metadata() const { return meta_; }
  std::string meta(const std::string& key, const std::string& fallback = "") const {
    auto it = meta_.find(key);
    return it == meta_.end() ? fallback : it->second;
  }

  const std::vector<ResultRow>& rows() const { return rows_; }

  // (seed, quantity, index); stable for ties
  void sort() {
    std::stable_sort(rows_.begin(), rows_.end(), [](const ResultRow& a, const ResultRow& b) {
      return std::tie(a.seed, a.quantity, a.index) < std::tie(b.seed, b.quantity, b.index);
    });
  }

  std::string to_csv() const {
    std::string out;
    for (const auto& [k, v] : meta_) out += "# " + k + ": " + v + "\n";
    out += std::string(kHeader) + "\n";
    for (const auto& r : rows_) {
      out += std::to_string(r.seed) + "," + r.quantity + "," + std::to_string(r.index) + "," + format_double(r.value) +
             "," + (std::isnan(r.stderr_) ? std::string() : format_double(r.stderr_)) + "\n";
    }
    return out;
  }

  std::string to_json() const {
    nlohmann::ordered_json j;
    j["metadata"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : meta_) j["metadata"][k] = v;
    j["columns"] = {"seed", "quantity", "index", "value", "stderr"};
    j["rows"] = nlohmann::ordered_json::array();
    for (const auto& r : rows_) {
      nlohmann::ordered_json row = nlohmann::ordered_json::array();
      row.push_back(r.seed);
      row.push_back(r.quantity);
      row.push_back(r.index);
      row.push_back(format_double(r.value));
      row.push_back(std::isnan(r.stderr_) ? nlohmann::ordered_json() : nlohmann::ordered_json(format_double(r.stderr_)));
      j["rows"].push_back(row);
    }
    return j.dump(1) + "\n";
  }

  static ResultTable parse(const std::string& text) {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) throw PreconditionError("result file is empty");
    return text[first] == '{' ? parse_json(text) : parse_csv(text);
  }

  static ResultTable load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw PreconditionError("cannot read result file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
  }

  // Writes next to the target and renames, so a failed run leaves no partial file.
  void write(const std::string& path, const std::string& format) const {
    const std::string body = format == "json" ? to_json() : to_csv();
    const std::filesystem::path target(path);
    std::filesystem::path tmp = target;
    tmp += ".tmp";
    {
      std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
      if (!f) throw PreconditionError("cannot write '" + tmp.string() + "'");
      f << body;
      f.flush();
      if (!f) throw PreconditionError("write to '" + tmp.string() + "' failed");
    }
    std::filesystem::rename(tmp, target);
  }

 private:
  static ResultTable parse_csv(const std::string& text) {
    ResultTable t;
    std::istringstream in(text);
    std::string line;
    bool header = false;
    int number = 0;
    while (std::getline(in, line)) {
      ++number;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (line[0] == '#') {
        const auto colon = line.find(": ");
        if (colon == std::string::npos || colon < 2) throw PreconditionError("result line " + std::to_string(number) + ": bad metadata");
        t.meta_[line.substr(2, colon - 2)] = line.substr(colon + 2);
        continue;
      }
      if (!header) {
        if (line != kHeader) throw PreconditionError("result: header must be '" + std::string(kHeader) + "'");
        header = true;
        continue;
      }
      std::vector<std::string> cells;
      std::string cell;
      std::istringstream ls(line);
      while (std::getline(ls, cell, ',')) cells.push_back(cell);
      if (line.back() == ',') cells.emplace_back();
      if (cells.size() != 5) throw PreconditionError("result line " + std::to_string(number) + ": expected 5 columns");
      ResultRow r;
      r.seed = static_cast<std::uint64_t>(parse_double(cells[0]));
      r.quantity = cells[1];
      r.index = static_cast<long>(parse_double(cells[2]));
      r.value = parse_double(cells[3]);
      r.stderr_ = cells[4].empty() ? std::numeric_limits<double>::quiet_NaN() : parse_double(cells[4]);
      t.rows_.push_back(r);
    }
    if (!header) throw PreconditionError("result: missing header row");
    return t;
  }

  static ResultTable parse_json(const std::string& text) {
    ResultTable t;
    try {
      auto j = nlohmann::json::parse(text);
      for (auto& [k, v] : j.at("metadata").items()) t.meta_[k] = v.get<std::string>();
      for (auto& row : j.at("rows")) {
        ResultRow r;
        r.seed = row.at(0).get<std::uint64_t>();
        r.quantity = row.at(1).get<std::string>();
        r.index = row.at(2).get<long>();
        r.value = parse_double(row.at(3).get<std::string>());
        r.stderr_ = row.at(4).is_null() ? std::numeric_limits<double>::quiet_NaN() : parse_double(row.at(4).get<std::string>());
        t.rows_.push_back(r);
      }
    } catch (const nlohmann::json::exception& e) {
      throw PreconditionError(std::string("result: malformed JSON: ") + e.what());
    }
    return t;
  }

  std::vector<ResultRow> rows_;
  std::map<std::string, std::string> meta_;
};

// ---- report

struct QuantitySummary {
  std::string quantity;
  long index = 0;
  double mean = 0.0;
  double stderr_ = 0.0;
  int seeds = 0;
};

inline std::vector<QuantitySummary> summarize(const ResultTable& t) {
  std::map<std::pair<std::string, long>, std::vector<double>> groups;
  for (const auto& r : t.rows()) groups[{r.quantity, r.index}].push_back(r.value);
  std::vector<QuantitySummary> out;
  for (const auto& [key, vals] : groups) {
    QuantitySummary s;
    s.quantity = key.first;
    s.index = key.second;
    s.seeds = static_cast<int>(vals.size());
    double m = 0;
    for (double v : vals) m += v;
    m /= static_cast<double>(vals.size());
    double var = 0;
    for (double v : vals) var += (v - m) * (v - m);
    s.mean = m;
    s.stderr_ = vals.size() > 1 ? std::sqrt(var / static_cast<double>(vals.size() - 1) / static_cast<double>(vals.size())) : 0.0;
    out.push_back(s);
  }
  return out;
}

struct CheckOutcome {
  std::string description;
  bool pass = true;
};

inline std::vector<double> split_reals(const std::string& s) {
  std::istringstream in(s);
  std::vector<double> out;
  std::string w;
  while (in >> w) out.push_back(parse_double(w));
  return out;
}

// expect.<q> with one value checks each seed's terminal (largest index) row; with
// k values it checks the k smallest indices in order. bound.<q> caps the terminal row.
inline std::vector<CheckOutcome> evaluate_checks(const ResultTable& t) {
  // NaN counts as the worst possible value
  auto worse = [](double a, double b) {
    return std::isnan(a) || std::isnan(b) ? std::numeric_limits<double>::quiet_NaN() : std::max(a, b);
  };
  std::vector<CheckOutcome> out;
  std::map<std::string, std::map<std::uint64_t, std::map<long, double>>> by;
  for (const auto& r : t.rows()) by[r.quantity][r.seed][r.index] = r.value;
  auto terminal_rows = [&](const std::string& q) {
    std::vector<std::pair<std::uint64_t, double>> v;
    for (const auto& [seed, idx] : by[q])
      if (!idx.empty()) v.emplace_back(seed, idx.rbegin()->second);
    return v;
  };
  for (const auto& [key, val] : t.metadata()) {
    if (key.rfind("expect.", 0) == 0) {
      const std::string q = key.substr(7);
      const auto expect = split_reals(val);
      const auto tol_list = split_reals(t.meta("tol." + q, "0"));
      const double tol = tol_list.empty() ? 0.0 : tol_list[0];
      CheckOutcome c;
      std::ostringstream d;
      if (!by.count(q)) {
        c.pass = false;
        d << q << ": no rows";
      } else if (expect.size() == 1) {
        double worst = 0;
        for (auto [seed, v] : terminal_rows(q)) worst = worse(worst, std::abs(v - expect[0]));
        c.pass = worst <= tol;
        d << q << ": |value - " << format_double(expect[0]) << "| max " << format_double(worst) << " <= " << format_double(tol);
      } else {
        double worst = 0;
        for (const auto& [seed, idx] : by[q]) {
          std::size_t k = 0;
          for (const auto& [i, v] : idx) {
            if (k >= expect.size()) break;
            worst = worse(worst, std::abs(v - expect[k++]));
          }
          if (k < expect.size()) worst = std::numeric_limits<double>::infinity();
        }
        c.pass = worst <= tol;
        d << q << ": max deviation over " << expect.size() << " indices " << format_double(worst) << " <= " << format_double(tol);
      }
      c.description = d.str();
      out.push_back(c);
    } else if (key.rfind("bound.", 0) == 0) {
      const std::string q = key.substr(6);
      const auto b = split_reals(val);
      CheckOutcome c;
      std::ostringstream d;
      double worst = -std::numeric_limits<double>::infinity();
      for (auto [seed, v] : terminal_rows(q)) worst = worse(worst, v);
      c.pass = by.count(q) && !b.empty() && !terminal_rows(q).empty() && worst < b[0];
      d << q << ": terminal max " << format_double(worst) << " < " << (b.empty() ? "?" : format_double(b[0]));
      c.description = d.str();
      out.push_back(c);
    }
  }
  return out;
}

}  // namespace met::cli
