#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace con2da {

using Field = std::variant<std::int64_t, double, std::string>;

/// One row of a report: named fields in a fixed order.
struct Record {
  std::vector<std::pair<std::string, Field>> fields;

  Record& add(std::string name, Field value);
  const Field* find(std::string_view name) const;
};

enum class ReportFormat { csv, json };

ReportFormat parse_report_format(std::string_view name);

inline constexpr int kReportSchemaVersion = 1;

/// Formats a double with 6 significant digits; the text is stable across runs.
std::string format_number(double v);

/// CSV: header row from the first record, then one row per record. JSON: a single document
/// {"schema_version": 1, "records": [...]}. Every record must carry the same field names
/// in the same order. Identical records always produce identical bytes.
std::string render_report(const std::vector<Record>& records, ReportFormat format);
/// Writes render_report() to `path`. Throws IoError naming the path on failure.
void emit_report(const std::vector<Record>& records, ReportFormat format,
                 const std::filesystem::path& path);
/// Reads a JSON report written by emit_report.
std::vector<Record> read_json_report(const std::filesystem::path& path);

}  // namespace con2da
