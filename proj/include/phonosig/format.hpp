#pragma once

// Number and text helpers shared by the file writers.

#include <string>
#include <string_view>
#include <vector>

namespace phonosig {

// Shortest text that parses back to the same double.
std::string format_shortest(double v);
// printf "%.6g"; NaN is written "NA".
std::string format_g6(double v);

// Splits on `sep` exactly; "a,,b" gives three fields.
std::vector<std::string> split(std::string_view text, char sep);

// Quotes a CSV field if it contains a comma, quote or newline.
std::string csv_field(std::string_view text);

}  // namespace phonosig
