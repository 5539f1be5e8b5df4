#include "bsvie/report_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <system_error>

#include "bsvie/errors.hpp"

namespace bsvie {

std::string format_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string CsvTable::to_text() const {
    std::string out;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c) out += ',';
        out += header[c];
    }
    out += '\n';
    for (const auto& row : rows) {
        if (row.size() != header.size())
            throw ValidationError("csv row width does not match the header");
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out += ',';
            out += format_g17(row[c]);
        }
        out += '\n';
    }
    return out;
}

void write_text_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(target.parent_path(), ec); // failures surface on open
    }
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("failed while writing " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec)
        throw std::runtime_error("failed to move " + tmp.string() + " into place: " +
                                 ec.message());
}

void write_csv(const std::string& path, const CsvTable& table) {
    write_text_atomic(path, table.to_text());
}

void write_report(const std::string& path, const nlohmann::json& report) {
    write_text_atomic(path, report.dump(2) + "\n");
}

nlohmann::json report_envelope(const std::string& command,
                               const nlohmann::json& resolved_config) {
    nlohmann::json env;
    env["schema_version"] = kReportSchemaVersion;
    env["command"] = command;
    env["config"] = resolved_config;
    return env;
}

} // namespace bsvie
