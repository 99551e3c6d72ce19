#pragma once

// Machine-readable and plain-text reports of a KPS test run.

#include <filesystem>
#include <string>

#include "json.hpp"
#include "kpst/kps.hpp"

namespace kpst {

/// Library version string, e.g. "0.1.0".
std::string_view version() noexcept;

struct TestReport {
    KpsResult result;
    double level = 0.05;
    std::string input_sha256;
    std::string timestamp;  ///< ISO 8601 UTC
    nlohmann::ordered_json options = nlohmann::ordered_json::object();
    Index dropped_rows = 0;
};

/// Schema "kps-report/1". The documented fields are always present;
/// timestamp, options and dropped_rows are additional.
nlohmann::ordered_json to_json(const TestReport& report);
TestReport report_from_json(const nlohmann::ordered_json& j);

/// Header line plus one data row with the scalar fields.
std::string to_csv(const TestReport& report);
std::string to_text(const TestReport& report);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);
std::string utc_timestamp();

}  // namespace kpst
