#include "vfuse/textio.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "vfuse/error.hpp"

namespace vfuse::textio {

std::string format_real(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

void append_reals(std::string& out, std::span<const double> values) {
  char buf[64];
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out.push_back(' ');
    auto res = std::to_chars(buf, buf + sizeof(buf), values[i], std::chars_format::general, 17);
    out.append(buf, res.ptr);
  }
}

double parse_real(std::string_view token, std::string_view context) {
  double value = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (!token.empty() && *first == '+') ++first;
  auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc{} || res.ptr != last) {
    throw DataError(std::string(context) + ": cannot parse real '" + std::string(token) + "'");
  }
  if (!std::isfinite(value)) {
    throw DataError(std::string(context) + ": non-finite value '" + std::string(token) + "'");
  }
  return value;
}

std::vector<double> parse_reals(std::string_view text, std::string_view context) {
  std::vector<double> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
    if (i >= text.size()) break;
    std::size_t j = i;
    while (j < text.size() && text[j] != ' ' && text[j] != '\t') ++j;
    out.push_back(parse_real(text.substr(i, j - i), context));
    i = j;
  }
  return out;
}

long long parse_integer(std::string_view token, std::string_view context) {
  long long value = 0;
  auto res = std::from_chars(token.data(), token.data() + token.size(), value);
  if (res.ec != std::errc{} || res.ptr != token.data() + token.size()) {
    throw DataError(std::string(context) + ": cannot parse integer '" + std::string(token) + "'");
  }
  return value;
}

std::uint64_t parse_unsigned(std::string_view token, std::string_view context) {
  std::uint64_t value = 0;
  auto res = std::from_chars(token.data(), token.data() + token.size(), value);
  if (res.ec != std::errc{} || res.ptr != token.data() + token.size()) {
    throw DataError(std::string(context) + ": cannot parse unsigned integer '" + std::string(token) + "'");
  }
  return value;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(text.substr(start));
      return parts;
    }
    parts.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view trim(std::string_view text) {
  const auto ws = " \t\r\n";
  const auto b = text.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = text.find_last_not_of(ws);
  return text.substr(b, e - b + 1);
}

std::map<std::string, std::string> parse_header(std::string_view line) {
  std::map<std::string, std::string> fields;
  std::istringstream in{std::string(line)};
  std::string token;
  while (in >> token) {
    if (token.empty() || token[0] != '#') continue;
    const auto eq = token.find('=');
    if (eq == std::string::npos) continue;
    fields[token.substr(1, eq - 1)] = token.substr(eq + 1);
  }
  return fields;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string_view> lines(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t pos = text.find('\n', start);
    if (pos == std::string_view::npos) pos = text.size();
    std::string_view line = text.substr(start, pos - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back(line);
    start = pos + 1;
  }
  return out;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace vfuse::textio
