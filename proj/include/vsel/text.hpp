#pragma once

#include <string>
#include <vector>

namespace vsel {

std::string trim(const std::string& s);
std::vector<std::string> split_csv_line(const std::string& line);
std::vector<std::string> split(const std::string& s, char sep);

/// Shortest round-trip decimal representation; identical bits give
/// identical text.
std::string format_number(double v);

}  // namespace vsel

namespace vsel {

/// "x, y" with shortest round-trip formatting.
inline std::string format_point(double x, double y) {
  return format_number(x) + ", " + format_number(y);
}

}  // namespace vsel
