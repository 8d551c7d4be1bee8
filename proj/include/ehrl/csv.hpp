#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ehrl/error.hpp"

namespace ehrl::csv {

// Shortest text that reads back to the same double.
inline std::string num(double v) {
    char buf[64];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}
inline std::string num(std::int64_t v) { return std::to_string(v); }
inline std::string num(int v) { return std::to_string(v); }
inline std::string num(std::uint64_t v) { return std::to_string(v); }

inline std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream s(line);
    while (std::getline(s, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw IoError("missing column '" + name + "'");
    }
    double number(std::size_t row, const std::string& name) const {
        const auto& cell = rows.at(row).at(column(name));
        try {
            return std::stod(cell);
        } catch (const std::logic_error&) {
            throw IoError("row " + std::to_string(row + 2) + ": '" + name + "' is not a number");
        }
    }
};

inline Table read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    Table t;
    std::string line;
    if (!std::getline(in, line)) throw IoError(path + ": empty file");
    t.header = split(line);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto cells = split(line);
        if (cells.size() != t.header.size())
            throw IoError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) + " columns");
        t.rows.push_back(std::move(cells));
    }
    return t;
}

class Writer {
public:
    explicit Writer(const std::string& path) : path_(path), out_(path) {
        if (!out_) throw IoError("cannot write " + path);
    }
    template <typename... Cells>
    void row(const Cells&... cells) {
        bool first = true;
        ((out_ << (first ? "" : ",") << cells, first = false), ...);
        out_ << '\n';
    }
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
        out_ << '\n';
    }
    void close() {
        out_.close();
        if (!out_) throw IoError("failed writing " + path_);
    }

private:
    std::string path_;
    std::ofstream out_;
};

} // namespace ehrl::csv
