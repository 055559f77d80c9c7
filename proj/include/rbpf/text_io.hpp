#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rbpf/observation.hpp"

namespace rbpf {

/// Malformed input; the message carries "file:line: ..." when known.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
/// Exact "whole.nnnnnnnnn" text of a carrier phase.
std::string format_carrier(CarrierPhase cp);

double parse_double(std::string_view s);
std::int64_t parse_int(std::string_view s);
/// Inverse of format_carrier; accepts any decimal with up to 9 fractional digits.
CarrierPhase parse_carrier(std::string_view s);

std::vector<std::string_view> split_csv_line(std::string_view line);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// Parses JSON text, turning syntax errors into "path:line:column: message".
nlohmann::json parse_json_text(const std::string& text, const std::string& origin);
nlohmann::json read_json_file(const std::filesystem::path& path);

/// Calls `fn` for each data row of a CSV file with its 1-based line number,
/// after checking that the header matches `expected_header`. Exceptions
/// thrown by `fn` are rethrown as ParseError with file:line context.
template <typename Fn>
void for_each_csv_row(const std::filesystem::path& path, std::string_view expected_header,
                      Fn&& fn);

}  // namespace rbpf

#include "rbpf/text_io_impl.hpp"
