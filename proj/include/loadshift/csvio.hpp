#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace loadshift::csvio {

// One tolerated problem in an input file (bad field, short row, ...).
struct RowIssue {
    std::size_t line;  // 1-based, header is line 1
    std::string message;
};

struct ParseStats {
    std::size_t rows_total = 0;     // data rows seen
    std::size_t rows_rejected = 0;  // data rows dropped
    std::vector<RowIssue> issues;
};

// Maps a required column name to its index in the file's header.
using ColumnMap = std::vector<std::size_t>;

// Opens `path`, validates the header against `columns` and streams data rows
// to `on_row` as raw fields in header order (already split on commas; no
// quoting support; the formats are documented as quote-free).
//
// strict: the header must equal `columns` exactly. Non-strict: the named
// columns may appear in any order with extras ignored.
//
// Throws on: missing file, empty file, unknown/missing header columns.
void read_csv(const std::filesystem::path& path,
              const std::vector<std::string>& columns, bool strict,
              const std::function<void(std::size_t line,
                                       const std::vector<std::string>& fields,
                                       const ColumnMap& col)>& on_row);

std::optional<double> parse_double(const std::string& field);
std::optional<long long> parse_int(const std::string& field);

// Line-buffered CSV writer with "\n" line endings and deterministic number
// formatting (util::fmt_double).
class CsvWriter {
public:
    explicit CsvWriter(const std::filesystem::path& path,
                       const std::vector<std::string>& header);
    ~CsvWriter();
    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;

    void row(const std::vector<std::string>& fields);
    void close();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::string csv_field(double v);
std::string csv_field(std::int64_t v);
std::string csv_field(std::size_t v);
std::string csv_field(int v);

}  // namespace loadshift::csvio
