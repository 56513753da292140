#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "normlab/errors.hpp"
#include "normlab/experiments/summary.hpp"

namespace normlab::io {

/// File-system failure while writing an artifact.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Format { kCsv, kJson, kSvg };

inline Format parse_format(std::string_view name)
{
    if (name == "csv") {
        return Format::kCsv;
    }
    if (name == "json") {
        return Format::kJson;
    }
    if (name == "svg") {
        return Format::kSvg;
    }
    throw InvalidArgument("unknown format '" + std::string(name) + "' (expected csv, json or svg)");
}

struct OutputSpec {
    std::filesystem::path path;
    Format format = Format::kCsv;
    bool overwrite = true;
};

inline constexpr std::string_view kCsvHeader = "metric,layer_or_width,mean,std,count";
inline constexpr std::string_view kConfigPrefix = "# config: ";

/// 17 significant digits, enough to round-trip any double.
inline std::string format_double(double value)
{
    char buffer[40];
    std::snprintf(buffer, sizeof buffer, "%.17g", value);
    return buffer;
}

inline void check_metric_name(const std::string& metric)
{
    if (metric.find_first_of(",\n\r\"") != std::string::npos) {
        throw InvalidArgument("metric name '" + metric + "' must not contain commas, quotes or newlines");
    }
}

inline std::string to_csv(const SummaryTable& table)
{
    std::string out;
    out += kConfigPrefix;
    out += table.config.dump();
    out += '\n';
    out += kCsvHeader;
    out += '\n';
    for (const auto& row : table.rows) {
        check_metric_name(row.metric);
        out += row.metric;
        out += ',';
        out += std::to_string(row.layer_or_width);
        out += ',';
        out += format_double(row.mean);
        out += ',';
        out += format_double(row.std);
        out += ',';
        out += std::to_string(row.count);
        out += '\n';
    }
    return out;
}

inline SummaryTable parse_csv(std::string_view text)
{
    SummaryTable table;
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line) || !line.starts_with(kConfigPrefix)) {
        throw InvalidArgument("csv: missing '# config:' line");
    }
    try {
        table.config = nlohmann::json::parse(line.substr(kConfigPrefix.size()));
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("csv: bad config json: ") + e.what());
    }
    if (!std::getline(in, line) || line != kCsvHeader) {
        throw InvalidArgument("csv: missing header row");
    }
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> fields;
        std::size_t start = 0;
        for (std::size_t comma = line.find(','); comma != std::string::npos; comma = line.find(',', start)) {
            fields.push_back(line.substr(start, comma - start));
            start = comma + 1;
        }
        fields.push_back(line.substr(start));
        if (fields.size() != 5) {
            throw InvalidArgument("csv: expected 5 fields in '" + line + "'");
        }
        try {
            table.rows.push_back({fields[0], std::stoll(fields[1]), std::stod(fields[2]), std::stod(fields[3]),
                                  std::stoull(fields[4])});
        } catch (const std::logic_error&) {
            throw InvalidArgument("csv: malformed number in '" + line + "'");
        }
    }
    return table;
}

inline std::string to_json(const SummaryTable& table)
{
    auto number = [](double v) { return std::isfinite(v) ? format_double(v) : std::string("null"); };
    std::string out = "{\"config\":" + table.config.dump() + ",\"rows\":[";
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        if (i > 0) {
            out += ',';
        }
        out += "{\"metric\":" + nlohmann::json(row.metric).dump() +
               ",\"layer_or_width\":" + std::to_string(row.layer_or_width) + ",\"mean\":" + number(row.mean) +
               ",\"std\":" + number(row.std) + ",\"count\":" + std::to_string(row.count) + "}";
    }
    out += "]}\n";
    return out;
}

inline SummaryTable parse_json(std::string_view text)
{
    SummaryTable table;
    try {
        const auto doc = nlohmann::json::parse(text);
        table.config = doc.at("config");
        for (const auto& row : doc.at("rows")) {
            auto number = [&](const char* key) {
                const auto& v = row.at(key);
                return v.is_null() ? std::nan("") : v.get<double>();
            };
            table.rows.push_back({row.at("metric").get<std::string>(), row.at("layer_or_width").get<std::int64_t>(),
                                  number("mean"), number("std"), row.at("count").get<std::uint64_t>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("json: ") + e.what());
    }
    return table;
}

inline void write_text(const std::string& text, const OutputSpec& spec)
{
    if (!spec.overwrite && std::filesystem::exists(spec.path)) {
        throw IoError("refusing to overwrite existing file " + spec.path.string());
    }
    std::ofstream file(spec.path, std::ios::binary | std::ios::trunc);
    if (!file) {
        throw IoError("cannot open " + spec.path.string() + " for writing");
    }
    file << text;
    file.flush();
    if (!file) {
        throw IoError("failed writing " + spec.path.string());
    }
}

/// Writes a table as CSV or JSON. SVG needs plot information and goes through render_svg.
inline void write_table(const SummaryTable& table, const OutputSpec& spec)
{
    switch (spec.format) {
    case Format::kCsv:
        write_text(to_csv(table), spec);
        return;
    case Format::kJson:
        write_text(to_json(table), spec);
        return;
    case Format::kSvg:
        break;
    }
    throw InvalidArgument("write_table: svg output requires a plot specification");
}

inline std::string read_text(const std::filesystem::path& path)
{
    std::ifstream file(path, std::ios::binary);
    if (!file) {
        throw IoError("cannot open " + path.string());
    }
    std::ostringstream buffer;
    buffer << file.rdbuf();
    return buffer.str();
}

} // namespace normlab::io
