#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "loadshift/csvio.hpp"

using namespace loadshift::csvio;

TEST_CASE("read_csv delivers fields with a column map") {
    const auto dir = testutil::test_dir("csvio_map");
    const auto path = dir / "t.csv";
    testutil::write_file(path, "b,a\n1,2\n3,4\n");

    std::vector<std::vector<std::string>> rows;
    std::vector<ColumnMap> maps;
    read_csv(path, {"a", "b"}, false,
             [&](std::size_t, const std::vector<std::string>& fields,
                 const ColumnMap& col) {
                 rows.push_back(fields);
                 maps.push_back(col);
             });
    REQUIRE(rows.size() == 2);
    // Fields arrive in file order; the map locates the requested columns.
    CHECK(rows[0][maps[0][0]] == "2");  // column "a"
    CHECK(rows[0][maps[0][1]] == "1");  // column "b"
    CHECK(rows[1][maps[1][0]] == "4");
}

TEST_CASE("strict mode pins the exact header") {
    const auto dir = testutil::test_dir("csvio_strict");
    const auto ok = dir / "ok.csv";
    const auto reordered = dir / "re.csv";
    const auto extra = dir / "ex.csv";
    testutil::write_file(ok, "a,b\n1,2\n");
    testutil::write_file(reordered, "b,a\n1,2\n");
    testutil::write_file(extra, "a,b,c\n1,2,3\n");

    CHECK_NOTHROW(read_csv(ok, {"a", "b"}, true, [](auto, auto&, auto&) {}));
    CHECK_THROWS_AS(read_csv(reordered, {"a", "b"}, true, [](auto, auto&, auto&) {}),
                    std::runtime_error);
    CHECK_THROWS_AS(read_csv(extra, {"a", "b"}, true, [](auto, auto&, auto&) {}),
                    std::runtime_error);
    // Non-strict tolerates both.
    CHECK_NOTHROW(read_csv(reordered, {"a", "b"}, false, [](auto, auto&, auto&) {}));
    CHECK_NOTHROW(read_csv(extra, {"a", "b"}, false, [](auto, auto&, auto&) {}));
}

TEST_CASE("read_csv rejects missing files, empty files and bad headers") {
    const auto dir = testutil::test_dir("csvio_bad");
    CHECK_THROWS(read_csv(dir / "absent.csv", {"a"}, false, [](auto, auto&, auto&) {}));
    const auto empty = dir / "empty.csv";
    testutil::write_file(empty, "");
    CHECK_THROWS(read_csv(empty, {"a"}, false, [](auto, auto&, auto&) {}));
    const auto wrong = dir / "wrong.csv";
    testutil::write_file(wrong, "x,y\n1,2\n");
    CHECK_THROWS(read_csv(wrong, {"a"}, false, [](auto, auto&, auto&) {}));
}

TEST_CASE("line numbers are 1-based with the header on line 1") {
    const auto dir = testutil::test_dir("csvio_lines");
    const auto path = dir / "t.csv";
    testutil::write_file(path, "a\n10\n20\n");
    std::vector<std::size_t> lines;
    read_csv(path, {"a"}, false,
             [&](std::size_t line, auto&, auto&) { lines.push_back(line); });
    CHECK(lines == std::vector<std::size_t>{2, 3});
}

TEST_CASE("field parsers reject junk and accept nan") {
    CHECK(parse_double("1.5") == 1.5);
    CHECK(parse_double("-2e3") == -2000.0);
    CHECK(!parse_double("").has_value());
    CHECK(!parse_double("1.5x").has_value());
    CHECK(!parse_double("one").has_value());
    auto nan = parse_double("nan");
    REQUIRE(nan.has_value());
    CHECK(std::isnan(*nan));

    CHECK(parse_int("42") == 42);
    CHECK(parse_int("-7") == -7);
    CHECK(!parse_int("4.2").has_value());
    CHECK(!parse_int("").has_value());
}

TEST_CASE("writer round trips through the reader") {
    const auto dir = testutil::test_dir("csvio_roundtrip");
    const auto path = dir / "t.csv";
    {
        CsvWriter w(path, {"hour", "value"});
        w.row({csv_field(std::int64_t{42}), csv_field(0.1)});
        w.row({csv_field(std::int64_t{-3}), csv_field(1.0 / 3.0)});
        w.close();
    }
    std::vector<double> values;
    std::vector<long long> hours;
    read_csv(path, {"hour", "value"}, true,
             [&](std::size_t, const std::vector<std::string>& f, const ColumnMap& c) {
                 hours.push_back(*parse_int(f[c[0]]));
                 values.push_back(*parse_double(f[c[1]]));
             });
    REQUIRE(values.size() == 2);
    CHECK(hours[0] == 42);
    CHECK(values[0] == 0.1);       // exact: fmt_double round trips
    CHECK(values[1] == 1.0 / 3.0);
    // Unix line endings regardless of platform.
    const std::string raw = testutil::read_file(path);
    CHECK(raw.find('\r') == std::string::npos);
    CHECK(raw.back() == '\n');
}
