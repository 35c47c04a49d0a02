#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "woodfit/pnm.hpp"

namespace woodfit {

/// Raised for syntactically valid files whose contents violate a format contract.
class FormatError : public IoError {
 public:
  using IoError::IoError;
};

using KeyValueList = std::vector<std::pair<std::string, std::string>>;

/// Parses `key = value` lines. Blank lines and lines starting with '#' are
/// ignored; duplicate keys are rejected.
std::map<std::string, std::string> parse_key_values(std::string_view text);
std::string format_key_values(const KeyValueList& entries);

/// Shortest decimal representation that round-trips exactly.
std::string format_double(double v);
/// Fixed notation with the given number of decimals.
std::string format_fixed(double v, int decimals);

double parse_double(std::string_view text, std::string_view what);
long parse_int(std::string_view text, std::string_view what);
bool parse_bool(std::string_view text, std::string_view what);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

/// Splits on a delimiter and trims surrounding whitespace from each field.
std::vector<std::string> split_fields(std::string_view line, char delim);
std::string_view trim(std::string_view s);

}  // namespace woodfit
