#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "med/density.hpp"
#include "med/design.hpp"

namespace med {

/// Shortest decimal string that parses back to exactly `v`.
std::string format_double(double v);

/// Writes `content` to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

/// design.csv: header x1..xp,logf,stage.
std::string design_csv(const Design& d);
/// ledger.csv: header seq,stage,x1..xp,logf,duration_ms, rows in completion order.
std::string ledger_csv(const EvaluationLedger& ledger, std::size_t dim);
/// samples.csv: header x1..xp,chain.
std::string samples_csv(const PointSet& samples, const std::vector<int>& chain);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    /// Column index by name; throws MedError when absent.
    std::size_t column(const std::string& name) const;
};

/// Parses a numeric CSV with a header row. Errors name the line (1-based, header = 1)
/// and the column.
CsvTable parse_csv(const std::string& text, const std::string& source = "input");

/// Reads a design file. Columns x1..xp are required; logf and stage are optional (0 when
/// absent).
Design read_design(const std::filesystem::path& path);

struct LedgerRow {
    std::uint64_t seq = 0;
    int stage = 0;
    Point x;
    double logf = 0.0;
};
std::vector<LedgerRow> read_ledger(const std::filesystem::path& path);

}  // namespace med
