#include "con2da/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "con2da/errors.hpp"

namespace con2da {

Record& Record::add(std::string name, Field value) {
  fields.emplace_back(std::move(name), std::move(value));
  return *this;
}

const Field* Record::find(std::string_view name) const {
  for (const auto& [key, value] : fields) {
    if (key == name) return &value;
  }
  return nullptr;
}

ReportFormat parse_report_format(std::string_view name) {
  if (name == "csv") return ReportFormat::csv;
  if (name == "json") return ReportFormat::json;
  throw ConfigError("report format must be csv or json, got '" + std::string(name) + "'");
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

namespace {

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void check_layout(const std::vector<Record>& records) {
  if (records.empty()) throw ContractViolation("emit_report: no records");
  const auto& first = records.front().fields;
  for (const Record& r : records) {
    bool same = r.fields.size() == first.size();
    for (std::size_t i = 0; same && i < first.size(); ++i) same = r.fields[i].first == first[i].first;
    if (!same) throw ContractViolation("emit_report: records differ in field layout");
  }
}

nlohmann::ordered_json to_json(const Field& f) {
  if (const auto* i = std::get_if<std::int64_t>(&f)) return *i;
  if (const auto* d = std::get_if<double>(&f)) {
    if (!std::isfinite(*d)) return format_number(*d);
    // Round to 6 significant digits so the shortest round-trip form is the 6-digit text.
    return std::stod(format_number(*d));
  }
  return std::get<std::string>(f);
}

}  // namespace

std::string render_report(const std::vector<Record>& records, ReportFormat format) {
  check_layout(records);
  if (format == ReportFormat::csv) {
    std::ostringstream out;
    const auto& header = records.front().fields;
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << csv_escape(header[i].first);
    out << '\n';
    for (const Record& r : records) {
      for (std::size_t i = 0; i < r.fields.size(); ++i) {
        if (i) out << ',';
        const Field& f = r.fields[i].second;
        if (const auto* n = std::get_if<std::int64_t>(&f)) {
          out << *n;
        } else if (const auto* d = std::get_if<double>(&f)) {
          out << format_number(*d);
        } else {
          out << csv_escape(std::get<std::string>(f));
        }
      }
      out << '\n';
    }
    return out.str();
  }
  nlohmann::ordered_json doc;
  doc["schema_version"] = kReportSchemaVersion;
  doc["records"] = nlohmann::ordered_json::array();
  for (const Record& r : records) {
    nlohmann::ordered_json row = nlohmann::ordered_json::object();
    for (const auto& [key, value] : r.fields) row[key] = to_json(value);
    doc["records"].push_back(std::move(row));
  }
  return doc.dump(2) + "\n";
}

void emit_report(const std::vector<Record>& records, ReportFormat format,
                 const std::filesystem::path& path) {
  const std::string text = render_report(records, format);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::vector<Record> read_json_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
  if (!doc.is_object() || !doc.contains("schema_version") || !doc.contains("records") ||
      !doc["records"].is_array()) {
    throw IoError("'" + path.string() + "' is not a report document");
  }
  if (doc["schema_version"] != kReportSchemaVersion) {
    throw IoError("'" + path.string() + "' has an unsupported schema_version");
  }
  std::vector<Record> records;
  for (const auto& row : doc["records"]) {
    Record r;
    for (const auto& [key, value] : row.items()) {
      if (value.is_number_integer()) {
        r.add(key, value.get<std::int64_t>());
      } else if (value.is_number()) {
        r.add(key, value.get<double>());
      } else if (value.is_string()) {
        r.add(key, value.get<std::string>());
      } else {
        throw IoError("'" + path.string() + "': field '" + key + "' has an unsupported type");
      }
    }
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace con2da
