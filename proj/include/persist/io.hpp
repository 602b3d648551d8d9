#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <system_error>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "persist/chains.hpp"
#include "persist/errors.hpp"

namespace persist {

using Json = nlohmann::json;

enum class OutputFormat { csv, jsonl };

inline OutputFormat parse_output_format(const std::string& s) {
  if (s == "csv") return OutputFormat::csv;
  if (s == "jsonl") return OutputFormat::jsonl;
  throw ValidationError("format must be csv or jsonl, got \"" + s + "\"");
}

inline std::string to_string(OutputFormat f) { return f == OutputFormat::csv ? "csv" : "jsonl"; }

/// Shortest decimal string that parses back to exactly x.
inline std::string format_double(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// Tables
// ---------------------------------------------------------------------------

using Cell = std::variant<std::monostate, std::int64_t, double, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row) {
    if (row.size() != columns.size()) throw DomainError("table row width does not match the header");
    rows.push_back(std::move(row));
  }
  std::size_t column(const std::string& name) const {
    for (std::size_t c = 0; c < columns.size(); ++c)
      if (columns[c] == name) return c;
    throw DomainError("table has no column \"" + name + "\"");
  }
};

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

inline std::string cell_text(const Cell& c) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::monostate>) return "";
        else if constexpr (std::is_same_v<T, std::int64_t>) return std::to_string(v);
        else if constexpr (std::is_same_v<T, double>) return format_double(v);
        else return csv_field(v);
      },
      c);
}

inline Json cell_json(const Cell& c) {
  return std::visit(
      [](const auto& v) -> Json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::monostate>) return nullptr;
        else return v;
      },
      c);
}

}  // namespace detail

inline void write_csv(std::ostream& out, const Table& t) {
  for (std::size_t c = 0; c < t.columns.size(); ++c) out << (c ? "," : "") << detail::csv_field(t.columns[c]);
  out << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << detail::cell_text(row[c]);
    out << '\n';
  }
}

/// One JSON object per row. Doubles are written in shortest round-trip form.
inline void write_jsonl(std::ostream& out, const Table& t) {
  for (const auto& row : t.rows) {
    out << '{';
    for (std::size_t c = 0; c < row.size(); ++c) {
      out << (c ? "," : "") << Json(t.columns[c]).dump() << ':';
      if (const double* d = std::get_if<double>(&row[c])) out << format_double(*d);
      else out << detail::cell_json(row[c]).dump();
    }
    out << "}\n";
  }
}

inline void write_table(std::ostream& out, const Table& t, OutputFormat f) {
  f == OutputFormat::csv ? write_csv(out, t) : write_jsonl(out, t);
}

// ---------------------------------------------------------------------------
// Trajectory JSONL
// ---------------------------------------------------------------------------

inline Json delta_to_json(const Delta& d) {
  return std::visit(
      [](const auto& v) -> Json {
        using T = std::decay_t<decltype(v)>;
        auto edges = [](const std::vector<Edge>& es) {
          Json a = Json::array();
          for (const Edge& e : es) a.push_back({e.i, e.j});
          return a;
        };
        if constexpr (std::is_same_v<T, std::monostate>) return nullptr;
        else if constexpr (std::is_same_v<T, UrnDraw>) return {{"draw", v.red ? "red" : "blue"}};
        else if constexpr (std::is_same_v<T, RecordBit>) return {{"record", v.record ? 1 : 0}};
        else if constexpr (std::is_same_v<T, EdgeAdditions>) return {{"edges", edges(v.edges)}};
        else if constexpr (std::is_same_v<T, RelabeledAdditions>) {
          return {{"edges", edges(v.edges)}, {"perm", std::vector<Vertex>(v.perm.begin() + 1, v.perm.end())}};
        } else {
          return {{"word", v.word.str()}};
        }
      },
      d);
}

inline Delta delta_from_json(ChainKind kind, const Json& j) {
  auto edges = [&] {
    std::vector<Edge> es;
    for (const auto& e : j.at("edges")) es.push_back({e.at(0).get<Vertex>(), e.at(1).get<Vertex>()});
    return es;
  };
  switch (kind) {
    case ChainKind::polya: {
      const auto draw = j.at("draw").get<std::string>();
      if (draw != "red" && draw != "blue") throw ValidationError("trajectory: draw must be red or blue");
      return UrnDraw{draw == "red"};
    }
    case ChainKind::records: return RecordBit{j.at("record").get<int>() == 1};
    case ChainKind::uniform_attachment:
    case ChainKind::er_memory: return EdgeAdditions{edges()};
    case ChainKind::er_relabel: {
      std::vector<Vertex> perm{0};
      for (const auto& v : j.at("perm")) perm.push_back(v.get<Vertex>());
      return RelabeledAdditions{edges(), std::move(perm)};
    }
    case ChainKind::bst: return ChosenExternal{Word(j.at("word").get<std::string>())};
  }
  throw ValidationError("trajectory: unknown chain");
}

/// Record n = 1 carries the chain, theta and seed; later records carry the
/// randomness of the step into time n.
inline void write_trajectory_jsonl(std::ostream& out, const Trajectory& tr) {
  Json head = {{"n", 1}, {"kind", std::string(to_string(tr.spec().kind))}, {"seed", tr.seed()}, {"delta", nullptr}};
  if (tr.spec().theta) head["theta"] = *tr.spec().theta;
  out << head.dump() << '\n';
  for (std::uint64_t n = 2; n <= tr.horizon(); ++n) {
    out << Json{{"n", n}, {"delta", delta_to_json(tr.delta(n))}}.dump() << '\n';
  }
}

inline Trajectory read_trajectory_jsonl(std::istream& in) {
  std::string line;
  std::uint64_t expected = 1;
  std::optional<Trajectory> tr;
  try {
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const Json j = Json::parse(line);
      if (j.at("n").get<std::uint64_t>() != expected) throw ValidationError("trajectory: records out of order");
      if (expected == 1) {
        ChainSpec spec{parse_chain_kind(j.at("kind").get<std::string>()), std::nullopt};
        if (j.contains("theta")) spec.theta = j.at("theta").get<double>();
        spec.validate();
        tr.emplace(spec, j.at("seed").get<std::uint64_t>());
      } else {
        tr->push(delta_from_json(tr->spec().kind, j.at("delta")));
      }
      ++expected;
    }
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("trajectory: ") + e.what());
  } catch (const DomainError& e) {
    throw ValidationError(std::string("trajectory: ") + e.what());
  }
  if (!tr) throw ValidationError("trajectory: empty input");
  return std::move(*tr);
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open \"" + path + "\" for reading");
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open \"" + path + "\" for writing");
  return out;
}

}  // namespace persist
