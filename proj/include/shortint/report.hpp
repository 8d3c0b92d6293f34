#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "shortint/error.hpp"

namespace shortint {

using json = nlohmann::ordered_json;

enum class Status { pass, recorded, fail };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::pass: return "pass";
    case Status::recorded: return "recorded";
    case Status::fail: return "fail";
  }
  return "fail";
}

/// identity: exact equality, fails hard. constant: a pinned value within a
/// tolerance, fails hard. bound: lhs/rhs against an envelope constant; an
/// exceedance is recorded, and fails only under --strict. trend: a finite-X
/// measurement of an asymptotic claim, always recorded.
enum class CheckKind { identity, constant, bound, trend };

inline const char* to_string(CheckKind k) {
  switch (k) {
    case CheckKind::identity: return "identity";
    case CheckKind::constant: return "constant";
    case CheckKind::bound: return "bound";
    case CheckKind::trend: return "trend";
  }
  return "trend";
}

struct CheckRow {
  std::string id;
  CheckKind kind = CheckKind::trend;
  double lhs = 0, rhs = 0, ratio = 0;
  double envelope = std::numeric_limits<double>::quiet_NaN();
  Status status = Status::recorded;
  std::string note;
};

inline CheckRow make_row(std::string id, CheckKind kind, double lhs, double rhs, double ratio) {
  CheckRow r;
  r.id = std::move(id);
  r.kind = kind;
  r.lhs = lhs;
  r.rhs = rhs;
  r.ratio = ratio;
  return r;
}

inline CheckRow identity_row(std::string id, bool ok, double lhs, double rhs, std::string note = {}) {
  CheckRow r = make_row(std::move(id), CheckKind::identity, lhs, rhs, lhs == rhs ? 1.0 : (rhs != 0 ? lhs / rhs : 0.0));
  r.status = ok ? Status::pass : Status::fail;
  r.note = std::move(note);
  return r;
}

inline CheckRow constant_row(std::string id, double value, double target, double tol, std::string note = {}) {
  CheckRow r = make_row(std::move(id), CheckKind::constant, value, target, target != 0 ? value / target : 0.0);
  r.envelope = tol;
  r.status = std::abs(value - target) <= tol ? Status::pass : Status::fail;
  r.note = std::move(note);
  return r;
}

inline CheckRow bound_row(std::string id, double lhs, double rhs, double envelope, bool strict,
                          std::string note = {}) {
  CheckRow r = make_row(std::move(id), CheckKind::bound, lhs, rhs, rhs > 0 ? lhs / rhs : std::numeric_limits<double>::infinity());
  r.envelope = envelope;
  if (r.ratio <= envelope) r.status = Status::pass;
  else r.status = strict ? Status::fail : Status::recorded;
  r.note = std::move(note);
  return r;
}

inline CheckRow trend_row(std::string id, double value, double reference, std::string note) {
  CheckRow r = make_row(std::move(id), CheckKind::trend, value, reference, reference != 0 ? value / reference : 0.0);
  r.note = std::move(note);
  return r;
}

inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json to_json(const CheckRow& r) {
  return json{{"id", r.id},
              {"kind", to_string(r.kind)},
              {"lhs", finite_or_null(r.lhs)},
              {"rhs", finite_or_null(r.rhs)},
              {"ratio", finite_or_null(r.ratio)},
              {"envelope", finite_or_null(r.envelope)},
              {"status", to_string(r.status)},
              {"note", r.note}};
}

using Cell = std::variant<std::int64_t, std::uint64_t, double, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row) {
    if (row.size() != columns.size()) throw InvariantError("table row width differs from the header");
    rows.push_back(std::move(row));
  }
};

/// Shortest round-trip formatting, so equal doubles always print equally.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw FormatError("cannot format double");
  return std::string(buf, end);
}

inline std::string format_cell(const Cell& c) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, double>) return format_double(v);
        else if constexpr (std::is_same_v<T, std::string>) {
          if (v.find_first_of(",\"\n") == std::string::npos) return v;
          std::string q = "\"";
          for (char ch : v) {
            if (ch == '"') q += '"';
            q += ch;
          }
          return q + '"';
        } else return std::to_string(v);
      },
      c);
}

/// Header line always; one line per row. An empty table is header-only.
inline void write_csv(const std::filesystem::path& path, const Table& t) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
  os << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_cell(row[i]);
    os << '\n';
  }
  if (!os) throw FormatError("write failed for " + path.string());
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  os << j.dump(2) << '\n';
  if (!os) throw FormatError("write failed for " + path.string());
}

/// Everything an experiment produces. Tables are keyed by file stem.
struct ExperimentResult {
  std::string experiment;
  json summary = json::object();
  std::vector<CheckRow> checks;
  std::map<std::string, Table> tables;

  bool hard_failure() const {
    for (const auto& c : checks) {
      if (c.status == Status::fail) return true;
    }
    return false;
  }
};

/// Tidy long form: one row per (X, h, statistic).
inline Table tidy_table() { return Table{{"X", "h", "statistic", "value"}, {}}; }

}  // namespace shortint
