// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace moesl {

/// A table cell: integers are kept exact, reals printed with shortest
/// round-trip formatting, strings passed through.
using Cell = std::variant<std::int64_t, double, std::string>;

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);
std::string format_cell(const Cell& c);

/// Rectangular CSV table with a single leading provenance comment.
struct TableArtifact {
    std::string provenance;  // emitted as "# <provenance>"
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add_row(std::vector<Cell> row);
    std::string to_csv() const;
};

/// FNV-1a over the canonical argument string; stamped into provenance so
/// outputs are traceable to the exact invocation.
std::uint64_t config_hash(const std::string& canonical_args);

std::string make_provenance(const std::string& command, const std::string& canonical_args);

}  // namespace moesl
