// Number formatting, tokenised line reading and atomic file writes shared by the
// on-disk formats.
#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "flightrl/error.hpp"

namespace flightrl::textio {

/// 17 significant digits: round-trips every finite double exactly.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

/// Shortest representation that round-trips; used for human-facing CSV columns.
inline std::string format_short(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline bool parse_double(std::string_view s, double &out) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

template <typename Int>
bool parse_int(std::string_view s, Int &out) {
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

inline std::vector<std::string> split_ws(std::string_view line) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
        if (j > i) out.emplace_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

inline std::vector<std::string> split(std::string_view line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(sep, start);
        out.emplace_back(trim(line.substr(start, pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

/// Line-oriented reader that tracks the 1-based line number for diagnostics.
class LineReader {
  public:
    LineReader(std::istream &in, std::string source) : in_(in), source_(std::move(source)) {}

    /// Next non-empty line split on whitespace; false at end of input.
    bool next_tokens(std::vector<std::string> &tokens) {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_;
            tokens = split_ws(line);
            if (!tokens.empty()) return true;
        }
        return false;
    }

    std::vector<std::string> expect_tokens(const char *what) {
        std::vector<std::string> tokens;
        if (!next_tokens(tokens)) fail(std::string("unexpected end of file, expected ") + what);
        return tokens;
    }

    double to_double(const std::string &tok) const {
        double v = 0.0;
        if (!parse_double(tok, v)) fail("invalid number '" + tok + "'");
        return v;
    }

    long long to_int(const std::string &tok) const {
        long long v = 0;
        if (!parse_int(tok, v)) fail("invalid integer '" + tok + "'");
        return v;
    }

    [[noreturn]] void fail(const std::string &what) const { throw ParseError(source_, line_, what); }

    std::size_t line() const { return line_; }
    const std::string &source() const { return source_; }

  private:
    std::istream &in_;
    std::string source_;
    std::size_t line_ = 0;
};

inline std::string read_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Writes to a sibling temporary file and renames it over the target.
inline void write_file_atomic(const std::filesystem::path &path, std::string_view contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

} // namespace flightrl::textio
