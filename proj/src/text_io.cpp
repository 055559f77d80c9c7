#include "rbpf/text_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace rbpf {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string format_carrier(CarrierPhase cp) {
  const std::int64_t t = cp.ticks();
  const std::uint64_t mag = t < 0 ? static_cast<std::uint64_t>(-(t + 1)) + 1u
                                  : static_cast<std::uint64_t>(t);
  const std::uint64_t per = static_cast<std::uint64_t>(CarrierPhase::kTicksPerCycle);
  char frac[16];
  std::snprintf(frac, sizeof(frac), "%09llu", static_cast<unsigned long long>(mag % per));
  return (t < 0 ? "-" : "") + std::to_string(mag / per) + "." + frac;
}

double parse_double(std::string_view s) {
  if (s == "nan") return std::nan("");
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ParseError("not a number: '" + std::string(s) + "'");
  }
  return v;
}

std::int64_t parse_int(std::string_view s) {
  std::int64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ParseError("not an integer: '" + std::string(s) + "'");
  }
  return v;
}

CarrierPhase parse_carrier(std::string_view s) {
  const std::string original(s);
  bool negative = false;
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  const std::size_t dot = s.find('.');
  const std::string_view whole = s.substr(0, dot);
  std::string_view frac = dot == std::string_view::npos ? std::string_view{} : s.substr(dot + 1);
  if (whole.empty() || frac.size() > 9) {
    throw ParseError("bad carrier phase '" + original + "' (at most 9 decimals)");
  }
  std::int64_t w = 0;
  auto res = std::from_chars(whole.data(), whole.data() + whole.size(), w);
  if (res.ec != std::errc() || res.ptr != whole.data() + whole.size()) {
    throw ParseError("bad carrier phase '" + original + "'");
  }
  std::int64_t f = 0;
  for (char c : frac) {
    if (c < '0' || c > '9') throw ParseError("bad carrier phase '" + original + "'");
    f = f * 10 + (c - '0');
  }
  for (std::size_t i = frac.size(); i < 9; ++i) f *= 10;
  const std::int64_t ticks = w * CarrierPhase::kTicksPerCycle + f;
  return CarrierPhase::from_ticks(negative ? -ticks : ticks);
}

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string() + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out << text;
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

nlohmann::json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t upto = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < upto; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) +
                     ": JSON syntax error: " + e.what());
  }
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  return parse_json_text(read_text_file(path), path.string());
}

}  // namespace rbpf
