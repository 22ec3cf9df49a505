#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

namespace qldp {

/// Shortest round-trip decimal form of a double (17 significant digits).
std::string format_double(double v);

void write_text_file(const std::filesystem::path& path, const std::string& contents);
void write_json_file(const std::filesystem::path& path, const nlohmann::ordered_json& j);
void ensure_directory(const std::filesystem::path& dir);

}  // namespace qldp
