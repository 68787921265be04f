#pragma once

#include <charconv>
#include <cstddef>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "hflvne/errors.hpp"

namespace hflvne::text {

/// Shortest decimal form that parses back to the same double.
inline std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string fmt(long long v) { return std::to_string(v); }
inline std::string fmt(int v) { return std::to_string(v); }
inline std::string fmt(std::size_t v) { return std::to_string(v); }

inline bool parse_int(std::string_view tok, long long& v) {
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  return res.ec == std::errc() && res.ptr == tok.data() + tok.size();
}

inline bool parse_real(std::string_view tok, double& v) {
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  return res.ec == std::errc() && res.ptr == tok.data() + tok.size();
}

/// Reads a whitespace-separated numeric text file, skipping blank and `#` lines.
/// Each call to next() yields the tokens of one significant line.
class LineReader {
 public:
  LineReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  /// Returns false at end of input.
  bool next(std::vector<std::string>& tokens) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      tokens.clear();
      std::istringstream ss(line);
      std::string tok;
      while (ss >> tok) tokens.push_back(tok);
      return true;
    }
    return false;
  }

  std::vector<std::string> expect(std::size_t count, std::string_view what) {
    std::vector<std::string> tokens;
    if (!next(tokens)) fail("unexpected end of file, expected " + std::string(what));
    if (tokens.size() != count)
      fail("expected " + std::to_string(count) + " fields for " + std::string(what) + ", got " +
           std::to_string(tokens.size()));
    return tokens;
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(source_, line_no_, what); }

  long long to_int(const std::string& tok) const {
    long long v = 0;
    if (!parse_int(tok, v)) fail("not an integer: '" + tok + "'");
    return v;
  }

  double to_real(const std::string& tok) const {
    double v = 0;
    if (!parse_real(tok, v)) fail("not a number: '" + tok + "'");
    return v;
  }

  bool at_end() {
    std::vector<std::string> tokens;
    return !next(tokens);
  }

  std::size_t line() const { return line_no_; }
  const std::string& source() const { return source_; }

 private:
  std::istream& in_;
  std::string source_;
  std::size_t line_no_ = 0;
};

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  return out;
}

}  // namespace hflvne::text
