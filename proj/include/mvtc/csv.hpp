#pragma once

#include "mvtc/multiversion.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace mvtc {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;  ///< 1-based source line of each row
};

/// Reads a comma-separated file whose header must equal `columns`. With
/// `header_optional`, a first line that does not match is treated as data.
/// Blank lines are skipped; a wrong field count raises IngestError(line).
CsvTable read_csv(std::istream& in, const std::vector<std::string>& columns,
                  bool header_optional = false);
CsvTable read_csv(const std::string& path, const std::vector<std::string>& columns,
                  bool header_optional = false);

std::size_t parse_index(const std::string& field, std::size_t line);
std::int64_t parse_int(const std::string& field, std::size_t line);
double parse_real(const std::string& field, std::size_t line);

/// Shortest decimal text that reads back to the same double.
std::string format_real(double value);

// Event CSV: location,feature,gd,ld,count
std::vector<UpdateEvent> read_events(std::istream& in);
std::vector<UpdateEvent> read_events(const std::string& path);
void write_events(std::ostream& out, const std::vector<UpdateEvent>& events);
void write_events(const std::string& path, const std::vector<UpdateEvent>& events);

/// One (location, feature, gd) value: a true count or an estimate.
struct CellValue {
  std::size_t location = 0;
  std::size_t feature = 0;
  std::int64_t gd = 0;
  double value = 0.0;
};

// Truth CSV: location,feature,gd,true_count
std::vector<CellValue> read_truth(const std::string& path);
void write_truth(const std::string& path, const std::vector<CellValue>& cells);

// Estimate CSV: gd,location,feature,estimate
std::vector<CellValue> read_estimates(const std::string& path);
void write_estimates(std::ostream& out, const std::vector<CellValue>& cells);
void write_estimates(const std::string& path, const std::vector<CellValue>& cells);

/// Cells of a 3-way tensor for GD slabs [first_slab, last_slab), GD of slab
/// s being epoch + s. Ordered by gd, then location, then feature.
std::vector<CellValue> tensor_cells(const Tensor3& z, std::int64_t epoch, std::size_t first_slab,
                                    std::size_t last_slab);

}  // namespace mvtc
