#pragma once

#include <string>
#include <vector>

namespace oedheat {

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

/// Parses a comma separated line of numbers.
std::vector<double> parse_csv_numbers(const std::string& line);

}  // namespace oedheat
