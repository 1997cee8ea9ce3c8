#include "mvtc/csv.hpp"

#include "mvtc/errors.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace mvtc {
namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    const auto b = field.find_first_not_of(" \t");
    const auto e = field.find_last_not_of(" \t");
    fields.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ArgumentError("cannot open " + path);
  return f;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ArgumentError("cannot open " + path + " for writing");
  return f;
}

}  // namespace

CsvTable read_csv(std::istream& in, const std::vector<std::string>& columns,
                  bool header_optional) {
  CsvTable table;
  std::string line;
  std::size_t lineno = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto fields = split_fields(line);
    if (first) {
      first = false;
      if (fields == columns) {
        table.header = std::move(fields);
        continue;
      }
      if (!header_optional) {
        throw IngestError(lineno, "expected header '" + [&] {
          std::string h;
          for (const auto& c : columns) h += (h.empty() ? "" : ",") + c;
          return h;
        }() + "'");
      }
      table.header = columns;
    }
    if (fields.size() != columns.size()) {
      throw IngestError(lineno, "expected " + std::to_string(columns.size()) + " fields, got " +
                                    std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
    table.lines.push_back(lineno);
  }
  if (first && !header_optional) throw IngestError(0, "empty CSV, header missing");
  return table;
}

CsvTable read_csv(const std::string& path, const std::vector<std::string>& columns,
                  bool header_optional) {
  auto f = open_in(path);
  try {
    return read_csv(f, columns, header_optional);
  } catch (const IngestError& e) {
    throw IngestError(e.record(), path + ": " + e.what());
  }
}

std::size_t parse_index(const std::string& field, std::size_t line) {
  std::size_t v = 0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw IngestError(line, "bad index '" + field + "'");
  }
  return v;
}

std::int64_t parse_int(const std::string& field, std::size_t line) {
  std::int64_t v = 0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw IngestError(line, "bad integer '" + field + "'");
  }
  return v;
}

double parse_real(const std::string& field, std::size_t line) {
  double v = 0.0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw IngestError(line, "bad number '" + field + "'");
  }
  return v;
}

std::string format_real(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

// ---------------------------------------------------------------------------

std::vector<UpdateEvent> read_events(std::istream& in) {
  const CsvTable t = read_csv(in, {"location", "feature", "gd", "ld", "count"});
  std::vector<UpdateEvent> events;
  events.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& f = t.rows[r];
    const auto line = t.lines[r];
    UpdateEvent e{parse_index(f[0], line), parse_index(f[1], line), parse_int(f[2], line),
                  parse_int(f[3], line), parse_real(f[4], line)};
    if (e.count < 0.0) throw IngestError(line, "negative count");
    if (e.ld < e.gd) throw IngestError(line, "loading date precedes generation date");
    events.push_back(e);
  }
  return events;
}

std::vector<UpdateEvent> read_events(const std::string& path) {
  auto f = open_in(path);
  try {
    return read_events(f);
  } catch (const IngestError& e) {
    throw IngestError(e.record(), path + ": " + e.what());
  }
}

void write_events(std::ostream& out, const std::vector<UpdateEvent>& events) {
  out << "location,feature,gd,ld,count\n";
  for (const auto& e : events) {
    out << e.location << ',' << e.feature << ',' << e.gd << ',' << e.ld << ','
        << format_real(e.count) << '\n';
  }
}

void write_events(const std::string& path, const std::vector<UpdateEvent>& events) {
  auto f = open_out(path);
  write_events(f, events);
}

std::vector<CellValue> read_truth(const std::string& path) {
  const CsvTable t = read_csv(path, {"location", "feature", "gd", "true_count"});
  std::vector<CellValue> cells;
  cells.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& f = t.rows[r];
    const auto line = t.lines[r];
    cells.push_back({parse_index(f[0], line), parse_index(f[1], line), parse_int(f[2], line),
                     parse_real(f[3], line)});
  }
  return cells;
}

void write_truth(const std::string& path, const std::vector<CellValue>& cells) {
  auto f = open_out(path);
  f << "location,feature,gd,true_count\n";
  for (const auto& c : cells) {
    f << c.location << ',' << c.feature << ',' << c.gd << ',' << format_real(c.value) << '\n';
  }
}

std::vector<CellValue> read_estimates(const std::string& path) {
  const CsvTable t = read_csv(path, {"gd", "location", "feature", "estimate"});
  std::vector<CellValue> cells;
  cells.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& f = t.rows[r];
    const auto line = t.lines[r];
    cells.push_back({parse_index(f[1], line), parse_index(f[2], line), parse_int(f[0], line),
                     parse_real(f[3], line)});
  }
  return cells;
}

void write_estimates(std::ostream& out, const std::vector<CellValue>& cells) {
  out << "gd,location,feature,estimate\n";
  for (const auto& c : cells) {
    out << c.gd << ',' << c.location << ',' << c.feature << ',' << format_real(c.value) << '\n';
  }
}

void write_estimates(const std::string& path, const std::vector<CellValue>& cells) {
  auto f = open_out(path);
  write_estimates(f, cells);
}

std::vector<CellValue> tensor_cells(const Tensor3& z, std::int64_t epoch, std::size_t first_slab,
                                    std::size_t last_slab) {
  std::vector<CellValue> cells;
  if (last_slab > z.S()) last_slab = z.S();
  for (std::size_t s = first_slab; s < last_slab; ++s)
    for (std::size_t i = 0; i < z.I(); ++i)
      for (std::size_t j = 0; j < z.J(); ++j)
        cells.push_back({i, j, epoch + static_cast<std::int64_t>(s), z(i, j, s)});
  return cells;
}

}  // namespace mvtc
