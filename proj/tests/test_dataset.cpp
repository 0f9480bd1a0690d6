// Dataset model and CSV codec tests.
//
// Round trips are checked two ways: value equality after parse(write(d)),
// and byte equality after write(parse(write(d))). Error cases are built by
// mangling a known-good CSV one cell at a time, so each test pins both the
// error type and the row/column naming in the message.

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vinispec/dataset.hpp"
#include "vinispec/errors.hpp"
#include "vinispec/synth.hpp"

using namespace vinispec;

namespace {

Dataset tiny_dataset() {
    synth::SynthConfig config = synth::default_synth_config(11);
    config.n_juices = 3;
    config.replicates_per_juice = 2;
    config.n_regions = 2;
    config.n_vineyards = 2;
    return synth::generate_synthetic_dataset(config);
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        lines.push_back(line);
    }
    return lines;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) {
        fields.push_back(field);
    }
    if (!line.empty() && line.back() == ',') {
        fields.push_back("");
    }
    return fields;
}

std::string join(const std::vector<std::string>& parts, char sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) {
            out += sep;
        }
        out += parts[i];
    }
    return out;
}

/// Rewrites one cell of a dataset CSV; row 0 is the header.
std::string with_cell(const std::string& csv, std::size_t row,
                      std::size_t col, const std::string& value) {
    std::vector<std::string> lines = split_lines(csv);
    std::vector<std::string> fields = split_fields(lines[row]);
    fields[col] = value;
    lines[row] = join(fields, ',');
    return join(lines, '\n') + "\n";
}

std::size_t column_index(const std::string& name) {
    const auto& columns = dataset_csv_columns();
    const auto it = std::find(columns.begin(), columns.end(), name);
    REQUIRE(it != columns.end());
    return static_cast<std::size_t>(it - columns.begin());
}

} // namespace

TEST_SUITE("dataset") {

TEST_CASE("wavelength grid covers 200-600 nm in 2 nm steps") {
    const WavelengthGrid grid;
    CHECK(grid.size() == 201);
    CHECK(grid.wavelength_at(0) == 200);
    CHECK(grid.wavelength_at(2) == 204);
    CHECK(grid.wavelength_at(200) == 600);
}

TEST_CASE("wavelength column names are zero-padded and reversible") {
    CHECK(wavelength_column_name(204) == "a0204");
    CHECK(wavelength_column_name(200) == "a0200");
    CHECK(wavelength_column_name(600) == "a0600");
    const WavelengthGrid grid;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const int nm = grid.wavelength_at(i);
        const std::string name = wavelength_column_name(nm);
        CHECK(is_wavelength_column(name));
        CHECK(wavelength_of_column(name) == nm);
    }
    CHECK_FALSE(is_wavelength_column("tss"));
    CHECK_FALSE(is_wavelength_column("a204"));
    CHECK_FALSE(is_wavelength_column("a02040"));
    CHECK_FALSE(is_wavelength_column("b0204"));
    CHECK_FALSE(is_wavelength_column("a02x4"));
}

TEST_CASE("canonical header is 14 metadata columns then 201 wavelengths") {
    const auto& columns = dataset_csv_columns();
    REQUIRE(columns.size() == 215);
    const std::vector<std::string> meta = {
        "sample_id", "juice_id",  "variety",     "region",
        "vineyard",  "block",     "harvest_type", "replicate",
        "tss",       "ph",        "ta",          "astringency",
        "bitterness", "herbaceous"};
    for (std::size_t i = 0; i < meta.size(); ++i) {
        CHECK(columns[i] == meta[i]);
    }
    CHECK(columns[14] == "a0200");
    CHECK(columns[214] == "a0600");
}

TEST_CASE("parse(write(d)) reproduces the dataset by value") {
    const Dataset d = tiny_dataset();
    const Dataset back = parse_dataset_csv(write_dataset_csv(d));
    CHECK(back == d);
}

TEST_CASE("write(parse(write(d))) reproduces the bytes") {
    const Dataset d = tiny_dataset();
    const std::string once = write_dataset_csv(d);
    const std::string twice = write_dataset_csv(parse_dataset_csv(once));
    CHECK(once == twice);
}

TEST_CASE("absent sensory labels survive a round trip as absent") {
    Dataset d = tiny_dataset();
    d.samples[0].labels.astringency.reset();
    d.samples[1].labels = SensoryLabels{};
    const Dataset back = parse_dataset_csv(write_dataset_csv(d));
    CHECK_FALSE(back.samples[0].labels.astringency.has_value());
    CHECK(back.samples[0].labels.bitterness.has_value());
    CHECK_FALSE(back.samples[1].labels.herbaceous.has_value());
    CHECK(back == d);
}

TEST_CASE("empty input is a missing-header error") {
    CHECK_THROWS_AS(parse_dataset_csv(std::string_view{}),
                    MissingColumnError);
}

TEST_CASE("a dropped header column is reported by name") {
    const std::string csv = write_dataset_csv(tiny_dataset());
    std::vector<std::string> lines = split_lines(csv);
    std::vector<std::string> header = split_fields(lines[0]);
    header.erase(header.begin() + static_cast<long>(column_index("ph")));
    lines[0] = join(header, ',');
    // Data rows keep 215 fields, so the header length check fires first.
    for (std::size_t i = 1; i < lines.size(); ++i) {
        std::vector<std::string> fields = split_fields(lines[i]);
        fields.pop_back();
        lines[i] = join(fields, ',');
    }
    try {
        parse_dataset_csv(join(lines, '\n') + "\n");
        FAIL("expected MissingColumnError");
    } catch (const MissingColumnError& e) {
        CHECK(std::string(e.what()).find("ph") != std::string::npos);
    }
}

TEST_CASE("a malformed numeric cell names its row and column") {
    const std::string csv = write_dataset_csv(tiny_dataset());
    try {
        parse_dataset_csv(with_cell(csv, 1, column_index("tss"), "abc"));
        FAIL("expected MalformedValueError");
    } catch (const MalformedValueError& e) {
        const std::string what = e.what();
        CHECK(what.find("tss") != std::string::npos);
        CHECK(what.find("abc") != std::string::npos);
    }
}

TEST_CASE("out-of-range cells are rejected") {
    const std::string csv = write_dataset_csv(tiny_dataset());
    CHECK_THROWS_AS(
        parse_dataset_csv(with_cell(csv, 1, column_index("replicate"), "0")),
        OutOfRangeError);
    CHECK_THROWS_AS(
        parse_dataset_csv(with_cell(csv, 1, column_index("ph"), "15")),
        OutOfRangeError);
    CHECK_THROWS_AS(
        parse_dataset_csv(with_cell(csv, 1, column_index("tss"), "-1")),
        OutOfRangeError);
    CHECK_THROWS_AS(
        parse_dataset_csv(with_cell(csv, 2, column_index("a0204"), "-0.2")),
        OutOfRangeError);
    CHECK_THROWS_AS(
        parse_dataset_csv(with_cell(csv, 1, column_index("astringency"), "9.5")),
        OutOfRangeError);
}

TEST_CASE("absorbance exactly at the floor is accepted") {
    const std::string csv = write_dataset_csv(tiny_dataset());
    const Dataset d =
        parse_dataset_csv(with_cell(csv, 1, column_index("a0300"), "-0.05"));
    CHECK(d.samples[0].spectrum.absorbance[50] == doctest::Approx(-0.05));
}

TEST_CASE("duplicate sample ids are rejected") {
    Dataset d = tiny_dataset();
    d.samples[1].sample_id = d.samples[0].sample_id;
    CHECK_THROWS_AS(parse_dataset_csv(write_dataset_csv(d)),
                    DuplicateSampleIdError);
    CHECK_THROWS_AS(validate_dataset(d), DuplicateSampleIdError);
}

TEST_CASE("a short data row is rejected with its field count") {
    const std::string csv = write_dataset_csv(tiny_dataset());
    std::vector<std::string> lines = split_lines(csv);
    std::vector<std::string> fields = split_fields(lines[3]);
    fields.pop_back();
    lines[3] = join(fields, ',');
    CHECK_THROWS_AS(parse_dataset_csv(join(lines, '\n') + "\n"),
                    MalformedValueError);
}

TEST_CASE("validate_dataset rejects a wrong-length spectrum") {
    Dataset d = tiny_dataset();
    d.samples[2].spectrum.absorbance.pop_back();
    CHECK_THROWS_AS(validate_dataset(d), DimensionMismatchError);
}

TEST_CASE("group_by_juice partitions indices in first-appearance order") {
    Dataset d = tiny_dataset();
    // Interleave juices so first-appearance order differs from sorted order.
    std::swap(d.samples[1], d.samples[4]);
    const auto groups = group_by_juice(d);
    REQUIRE(groups.size() == 3);
    CHECK(groups[0].juice_id == d.samples[0].metadata.juice_id);

    std::set<std::size_t> seen;
    for (const JuiceGroup& group : groups) {
        for (std::size_t index : group.indices) {
            CHECK(d.samples[index].metadata.juice_id == group.juice_id);
            CHECK(seen.insert(index).second);
        }
    }
    CHECK(seen.size() == d.samples.size());
}

TEST_CASE("file payloads round trip through read/write") {
    namespace fs = std::filesystem;
    const Dataset d = tiny_dataset();
    const fs::path path =
        fs::temp_directory_path() / "vinispec_dataset_roundtrip.csv";
    write_dataset_file(d, path.string());
    const Dataset back = read_dataset_file(path.string());
    CHECK(back == d);
    fs::remove(path);
    CHECK_THROWS_AS(read_dataset_file(path.string()), IoError);
}

} // TEST_SUITE
