#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace bsvie {

inline constexpr int kReportSchemaVersion = 1;

// 17 significant digits round-trip a double exactly, so identical runs emit
// byte-identical numeric content.
std::string format_g17(double v);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    std::string to_text() const;
};

// Writes go to a sibling temp file first and are renamed into place, so a
// crash cannot leave a truncated artifact under the final name.
void write_text_atomic(const std::string& path, const std::string& content);
void write_csv(const std::string& path, const CsvTable& table);
void write_report(const std::string& path, const nlohmann::json& report);

// Envelope every report shares: schema version, command, resolved config.
nlohmann::json report_envelope(const std::string& command, const nlohmann::json& resolved_config);

} // namespace bsvie
