#include "loadshift/csvio.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "loadshift/util.hpp"

namespace loadshift::csvio {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(util::trim(line.substr(start)));
            break;
        }
        out.push_back(util::trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

}  // namespace

void read_csv(const std::filesystem::path& path,
              const std::vector<std::string>& columns, bool strict,
              const std::function<void(std::size_t line,
                                       const std::vector<std::string>& fields,
                                       const ColumnMap& col)>& on_row) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error(path.string() + ": empty file");
    }
    const std::vector<std::string> header = split_line(line);

    ColumnMap col(columns.size());
    if (strict) {
        if (header != columns) {
            throw std::runtime_error(path.string() + ": header mismatch, expected \"" +
                                     util::join(columns, ",") + "\" got \"" +
                                     util::join(header, ",") + "\"");
        }
        for (std::size_t i = 0; i < columns.size(); ++i) col[i] = i;
    } else {
        for (std::size_t i = 0; i < columns.size(); ++i) {
            auto it = std::find(header.begin(), header.end(), columns[i]);
            if (it == header.end()) {
                throw std::runtime_error(path.string() + ": missing column \"" +
                                         columns[i] + "\"");
            }
            col[i] = static_cast<std::size_t>(it - header.begin());
        }
    }

    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        on_row(lineno, split_line(line), col);
    }
}

std::optional<double> parse_double(const std::string& field) {
    if (field.empty()) return std::nullopt;
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (end != field.c_str() + field.size() || errno == ERANGE) return std::nullopt;
    return v;
}

std::optional<long long> parse_int(const std::string& field) {
    if (field.empty()) return std::nullopt;
    errno = 0;
    char* end = nullptr;
    const long long v = std::strtoll(field.c_str(), &end, 10);
    if (end != field.c_str() + field.size() || errno == ERANGE) return std::nullopt;
    return v;
}

struct CsvWriter::Impl {
    std::ofstream out;
    std::filesystem::path path;
    std::size_t ncols = 0;
};

CsvWriter::CsvWriter(const std::filesystem::path& path,
                     const std::vector<std::string>& header)
    : impl_(std::make_unique<Impl>()) {
    impl_->path = path;
    impl_->ncols = header.size();
    impl_->out.open(path, std::ios::binary);  // binary: "\n" endings everywhere
    if (!impl_->out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    impl_->out << util::join(header, ",") << '\n';
}

CsvWriter::~CsvWriter() {
    if (impl_ && impl_->out.is_open()) impl_->out.close();
}

void CsvWriter::row(const std::vector<std::string>& fields) {
    if (fields.size() != impl_->ncols) {
        throw std::logic_error(impl_->path.string() + ": row has " +
                               std::to_string(fields.size()) + " fields, header has " +
                               std::to_string(impl_->ncols));
    }
    impl_->out << util::join(fields, ",") << '\n';
}

void CsvWriter::close() {
    impl_->out.close();
    if (impl_->out.fail()) {
        throw std::runtime_error("write failed: " + impl_->path.string());
    }
}

std::string csv_field(double v) { return util::fmt_double(v); }
std::string csv_field(std::int64_t v) { return std::to_string(v); }
std::string csv_field(std::size_t v) { return std::to_string(v); }
std::string csv_field(int v) { return std::to_string(v); }

}  // namespace loadshift::csvio
