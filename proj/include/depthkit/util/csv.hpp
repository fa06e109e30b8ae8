#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace depthkit::csv {

/// Nine significant digits; "nan" for undefined values.
std::string number(double value);

/// Shortest text that parses back to exactly `value`; "nan" for undefined values.
std::string exact(double value);

/// Quotes the field when it contains a comma, quote or newline.
std::string field(std::string_view text);

std::string join(const std::vector<std::string>& fields);

/// Splits one CSV record, honoring double-quoted fields.
std::vector<std::string> split(std::string_view line);

/// Parses a number written by `number` or `exact`; "nan" and "" give NaN.
double parse_number(std::string_view text);

}  // namespace depthkit::csv
