#pragma once


namespace rbpf {

template <typename Fn>
void for_each_csv_row(const std::filesystem::path& path, std::string_view expected_header,
                      Fn&& fn) {
  const std::string text = read_text_file(path);
  std::size_t pos = 0;
  int line_no = 0;
  bool header_seen = false;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != expected_header) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) +
                         ": unexpected header, expected '" + std::string(expected_header) + "'");
      }
      header_seen = true;
      continue;
    }
    try {
      fn(split_csv_line(line), line_no);
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!header_seen) throw ParseError(path.string() + ": empty file");
}

}  // namespace rbpf
