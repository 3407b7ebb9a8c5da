#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "loadshift/series.hpp"
#include "loadshift/timeutil.hpp"

namespace testutil {

// Fresh scratch directory per test; removed up-front so reruns start clean.
inline std::filesystem::path test_dir(const std::string& name) {
    const auto p =
        std::filesystem::temp_directory_path() / ("loadshift_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in),
                       std::istreambuf_iterator<char>());
}

// Contiguous hourly series starting at `start`, one value per hour.
inline loadshift::HourlySeries make_series(loadshift::timeutil::HourIndex start,
                                           const std::vector<double>& values) {
    std::vector<std::pair<loadshift::timeutil::HourIndex, double>> pairs;
    pairs.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        pairs.emplace_back(start + static_cast<loadshift::timeutil::HourIndex>(i),
                           values[i]);
    return loadshift::HourlySeries::from_pairs(std::move(pairs));
}

}  // namespace testutil
