// Schema-versioned CSV: a `# flightrl <kind> v<version>` line, a header, then rows.
#pragma once

#include <cstddef>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "flightrl/error.hpp"
#include "flightrl/textio.hpp"

namespace flightrl::csv {

inline constexpr int kVersion = 1;

struct Table {
    std::string kind;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string &name) const {
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (columns[i] == name) return i;
        }
        throw ParseError(kind, 0, "missing column '" + name + "'");
    }

    std::vector<double> numbers(const std::string &name) const {
        const std::size_t c = column(name);
        std::vector<double> out;
        out.reserve(rows.size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            double v = 0.0;
            if (!textio::parse_double(rows[r][c], v)) {
                throw ParseError(kind, r + 3, "column '" + name + "' is not numeric");
            }
            out.push_back(v);
        }
        return out;
    }
};

inline std::string schema_line(const std::string &kind) {
    return "# flightrl " + kind + " v" + std::to_string(kVersion);
}

/// Streams rows of a fixed schema.
class Writer {
  public:
    Writer(std::ostream &out, const std::string &kind, const std::vector<std::string> &columns)
        : out_(out), width_(columns.size()) {
        out_ << schema_line(kind) << '\n';
        row(columns);
    }

    void row(const std::vector<std::string> &cells) {
        if (cells.size() != width_) throw ContractViolation("csv::Writer: row width mismatch");
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

  private:
    std::ostream &out_;
    std::size_t width_;
};

inline std::string cell(double v) { return textio::format_double(v); }
inline std::string cell(int v) { return std::to_string(v); }
inline std::string cell(long long v) { return std::to_string(v); }
inline std::string cell(bool v) { return v ? "1" : "0"; }

inline Table read(std::istream &in, const std::string &source) {
    std::string line;
    std::size_t n = 0;
    auto next = [&]() -> bool {
        if (!std::getline(in, line)) return false;
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
    };

    if (!next()) throw ParseError(source, 0, "empty file");
    const auto head = textio::split_ws(line);
    if (head.size() != 4 || head[0] != "#" || head[1] != "flightrl") {
        throw ParseError(source, n, "missing '# flightrl <kind> v<N>' schema line");
    }
    if (head[3] != "v" + std::to_string(kVersion)) {
        throw ParseError(source, n, "unsupported schema version '" + head[3] + "'");
    }
    Table t;
    t.kind = head[2];
    if (!next()) throw ParseError(source, n, "missing header row");
    t.columns = textio::split(line, ',');
    while (next()) {
        if (textio::trim(line).empty()) continue;
        auto cells = textio::split(line, ',');
        if (cells.size() != t.columns.size()) {
            throw ParseError(source, n, "expected " + std::to_string(t.columns.size()) +
                                            " fields, found " + std::to_string(cells.size()));
        }
        t.rows.push_back(std::move(cells));
    }
    return t;
}

} // namespace flightrl::csv
