#pragma once

// Shared helpers for the TSV-style text formats used across the project.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vfuse::textio {

// Shortest form that still round-trips: 17 significant digits, %g style.
std::string format_real(double value);

// Appends values separated by single spaces.
void append_reals(std::string& out, std::span<const double> values);

// Parses one finite decimal real; throws DataError naming `context` otherwise.
double parse_real(std::string_view token, std::string_view context);

// Whitespace-separated reals.
std::vector<double> parse_reals(std::string_view text, std::string_view context);

long long parse_integer(std::string_view token, std::string_view context);
std::uint64_t parse_unsigned(std::string_view token, std::string_view context);

std::vector<std::string_view> split(std::string_view text, char sep);

std::string_view trim(std::string_view text);

// Reads header tokens of the form `#key=value` separated by whitespace.
std::map<std::string, std::string> parse_header(std::string_view line);

std::string read_file(const std::filesystem::path& path);

// Lines without their terminators; a trailing empty line is dropped.
std::vector<std::string_view> lines(std::string_view text);

// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace vfuse::textio
