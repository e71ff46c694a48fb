// SPDX-License-Identifier: Apache-2.0
#include "moesl/table.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace moesl {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string format_cell(const Cell& c) {
    if (std::holds_alternative<std::int64_t>(c)) return std::to_string(std::get<std::int64_t>(c));
    if (std::holds_alternative<double>(c)) return format_double(std::get<double>(c));
    return std::get<std::string>(c);
}

void TableArtifact::add_row(std::vector<Cell> row) {
    if (row.size() != columns.size())
        throw std::logic_error("TableArtifact: row width does not match header");
    rows.push_back(std::move(row));
}

std::string TableArtifact::to_csv() const {
    std::ostringstream out;
    out << "# " << provenance << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i)
        out << columns[i] << (i + 1 < columns.size() ? "," : "");
    out << "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            out << format_cell(row[i]) << (i + 1 < row.size() ? "," : "");
        out << "\n";
    }
    return out.str();
}

std::uint64_t config_hash(const std::string& canonical_args) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : canonical_args) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string make_provenance(const std::string& command, const std::string& canonical_args) {
    std::ostringstream out;
    out << "moesl " << command;
    if (!canonical_args.empty()) out << " " << canonical_args;
    out << " config_hash=" << std::hex << config_hash(command + "\x1f" + canonical_args);
    return out.str();
}

}  // namespace moesl
