#pragma once

#include "zibr/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace zibr {

/// Covariate selection for ingest; nullopt takes every covariate column, an empty list none.
struct CsvOptions {
  std::optional<std::vector<std::string>> x_cols;
  std::optional<std::vector<std::string>> z_cols;
};

/// Long format: header `subject,time,y,<covariates...>`, one row per observation.
/// Lines starting with '#' and blank lines are skipped. Rows are grouped by subject in order of
/// first appearance and sorted by time. Errors cite the 1-based file line.
Dataset parse_csv(std::istream& in, const CsvOptions& options = {});
Dataset ingest_csv(const std::string& path, const CsvOptions& options = {});

/// Canonical long-format output: x columns, then z columns whose names are not already present.
void emit_csv(const Dataset& data, std::ostream& out);
void write_csv(const Dataset& data, const std::string& path);

/// Shortest decimal that round-trips to the same double.
std::string format_double(double value);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

}  // namespace zibr
