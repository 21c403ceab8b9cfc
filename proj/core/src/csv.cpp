#include "oedheat/csv.hpp"

#include <charconv>
#include <sstream>
#include <stdexcept>

namespace oedheat {

std::string format_double(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (result.ec != std::errc()) throw std::runtime_error("failed to format number");
  return std::string(buffer, result.ptr);
}

std::vector<double> parse_csv_numbers(const std::string& line) {
  std::vector<double> values;
  std::size_t start = 0;
  while (start <= line.size()) {
    std::size_t end = line.find(',', start);
    if (end == std::string::npos) end = line.size();
    double value = 0.0;
    const char* first = line.data() + start;
    const char* last = line.data() + end;
    const auto result = std::from_chars(first, last, value);
    if (result.ec != std::errc() || result.ptr != last) {
      throw std::invalid_argument("not a number: '" + line.substr(start, end - start) + "'");
    }
    values.push_back(value);
    start = end + 1;
  }
  return values;
}

}  // namespace oedheat
