#include "vinispec/dataset.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "vinispec/errors.hpp"
#include "vinispec/fsio.hpp"
#include "vinispec/textio.hpp"

namespace vinispec {

namespace {

constexpr const char* kMetaColumns[] = {
    "sample_id", "juice_id",  "variety",     "region",    "vineyard",
    "block",     "harvest_type", "replicate", "tss",       "ph",
    "ta",        "astringency",  "bitterness", "herbaceous"};
constexpr std::size_t kNumMetaColumns = std::size(kMetaColumns);

std::string cell_ref(std::size_t row, std::string_view column) {
    return "row " + std::to_string(row) + ", column '" + std::string(column) +
           "'";
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

double parse_double_cell(std::string_view cell, std::size_t row,
                         std::string_view column) {
    double value = 0.0;
    const char* end = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(cell.data(), end, value);
    if (ec != std::errc{} || ptr != end || cell.empty()) {
        throw MalformedValueError(cell_ref(row, column) + ": '" +
                                  std::string(cell) + "' is not a number");
    }
    return value;
}

int parse_int_cell(std::string_view cell, std::size_t row,
                   std::string_view column) {
    int value = 0;
    const char* end = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(cell.data(), end, value);
    if (ec != std::errc{} || ptr != end || cell.empty()) {
        throw MalformedValueError(cell_ref(row, column) + ": '" +
                                  std::string(cell) + "' is not an integer");
    }
    return value;
}

std::optional<double> parse_label_cell(std::string_view cell, std::size_t row,
                                       std::string_view column) {
    if (cell.empty()) {
        return std::nullopt;
    }
    double value = parse_double_cell(cell, row, column);
    if (!(value >= 0.0 && value <= 9.0)) {
        throw OutOfRangeError(cell_ref(row, column) + ": " +
                              std::string(cell) + " is outside [0, 9]");
    }
    return value;
}

// Strings are written verbatim, so field separators cannot appear in them.
void require_writable(const std::string& value, std::string_view column) {
    if (value.find_first_of(",\n\r") != std::string::npos) {
        throw MalformedValueError("column '" + std::string(column) +
                                  "': value contains a separator character");
    }
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t nl = text.find('\n', start);
        std::string_view line = nl == std::string_view::npos
                                    ? text.substr(start)
                                    : text.substr(start, nl - start);
        if (line.ends_with('\r')) {
            line.remove_suffix(1);
        }
        lines.push_back(line);
        if (nl == std::string_view::npos) {
            break;
        }
        start = nl + 1;
    }
    return lines;
}

Dataset parse_dataset_text(std::string_view text) {
    const std::vector<std::string>& columns = dataset_csv_columns();
    std::vector<std::string_view> lines = split_lines(text);
    if (lines.empty()) {
        throw MissingColumnError("empty input: header row is missing");
    }

    std::vector<std::string_view> header = split_fields(lines[0]);
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (i >= header.size()) {
            throw MissingColumnError("missing column '" + columns[i] + "'");
        }
        if (header[i] != columns[i]) {
            bool present = false;
            for (std::string_view h : header) {
                if (h == columns[i]) {
                    present = true;
                    break;
                }
            }
            if (!present) {
                throw MissingColumnError("missing column '" + columns[i] +
                                         "'");
            }
            throw MalformedValueError(
                "header position " + std::to_string(i + 1) + ": expected '" +
                columns[i] + "', found '" + std::string(header[i]) + "'");
        }
    }
    if (header.size() > columns.size()) {
        throw MalformedValueError("header has " +
                                  std::to_string(header.size()) +
                                  " columns, expected " +
                                  std::to_string(columns.size()));
    }

    Dataset dataset;
    const std::size_t n_points = dataset.grid.size();
    dataset.samples.reserve(lines.size() - 1);
    std::unordered_set<std::string> seen_ids;

    for (std::size_t li = 1; li < lines.size(); ++li) {
        const std::size_t row = li; // 1-based data row index
        std::vector<std::string_view> fields = split_fields(lines[li]);
        if (fields.size() != columns.size()) {
            throw MalformedValueError(
                "row " + std::to_string(row) + ": expected " +
                std::to_string(columns.size()) + " fields, found " +
                std::to_string(fields.size()));
        }

        Sample s;
        s.sample_id = std::string(fields[0]);
        if (s.sample_id.empty()) {
            throw MalformedValueError(cell_ref(row, "sample_id") +
                                      ": must be non-empty");
        }
        s.metadata.juice_id = std::string(fields[1]);
        if (s.metadata.juice_id.empty()) {
            throw MalformedValueError(cell_ref(row, "juice_id") +
                                      ": must be non-empty");
        }
        s.metadata.variety = std::string(fields[2]);
        s.metadata.region = std::string(fields[3]);
        s.metadata.vineyard = std::string(fields[4]);
        s.metadata.block = std::string(fields[5]);
        s.metadata.harvest_type = std::string(fields[6]);

        s.metadata.replicate = parse_int_cell(fields[7], row, "replicate");
        if (s.metadata.replicate < 1) {
            throw OutOfRangeError(cell_ref(row, "replicate") +
                                  ": must be >= 1");
        }
        s.metadata.tss = parse_double_cell(fields[8], row, "tss");
        if (!(s.metadata.tss >= 0.0) || !std::isfinite(s.metadata.tss)) {
            throw OutOfRangeError(cell_ref(row, "tss") + ": must be >= 0");
        }
        s.metadata.ph = parse_double_cell(fields[9], row, "ph");
        if (!(s.metadata.ph > 0.0 && s.metadata.ph < 14.0)) {
            throw OutOfRangeError(cell_ref(row, "ph") +
                                  ": must lie in (0, 14)");
        }
        s.metadata.ta = parse_double_cell(fields[10], row, "ta");
        if (!(s.metadata.ta >= 0.0) || !std::isfinite(s.metadata.ta)) {
            throw OutOfRangeError(cell_ref(row, "ta") + ": must be >= 0");
        }

        s.labels.astringency = parse_label_cell(fields[11], row, "astringency");
        s.labels.bitterness = parse_label_cell(fields[12], row, "bitterness");
        s.labels.herbaceous = parse_label_cell(fields[13], row, "herbaceous");

        s.spectrum.absorbance.resize(n_points);
        for (std::size_t j = 0; j < n_points; ++j) {
            const std::string& column = columns[kNumMetaColumns + j];
            double a =
                parse_double_cell(fields[kNumMetaColumns + j], row, column);
            if (!std::isfinite(a) || a < kMinAbsorbanceAu) {
                throw OutOfRangeError(cell_ref(row, column) +
                                      ": absorbance must be finite and >= " +
                                      format_significant(kMinAbsorbanceAu, 6));
            }
            s.spectrum.absorbance[j] = a;
        }

        if (!seen_ids.insert(s.sample_id).second) {
            throw DuplicateSampleIdError("row " + std::to_string(row) +
                                         ": duplicate sample_id '" +
                                         s.sample_id + "'");
        }
        dataset.samples.push_back(std::move(s));
    }
    return dataset;
}

} // namespace

std::string wavelength_column_name(int nm) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "a%04d", nm);
    return buf;
}

bool is_wavelength_column(std::string_view name) {
    if (name.size() != 5 || name[0] != 'a') {
        return false;
    }
    for (std::size_t i = 1; i < 5; ++i) {
        if (name[i] < '0' || name[i] > '9') {
            return false;
        }
    }
    return true;
}

int wavelength_of_column(std::string_view name) {
    int nm = 0;
    std::from_chars(name.data() + 1, name.data() + name.size(), nm);
    return nm;
}

const std::vector<std::string>& dataset_csv_columns() {
    static const std::vector<std::string> columns = [] {
        std::vector<std::string> c(kMetaColumns,
                                   kMetaColumns + kNumMetaColumns);
        WavelengthGrid grid;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            c.push_back(wavelength_column_name(grid.wavelength_at(i)));
        }
        return c;
    }();
    return columns;
}

void validate_dataset(const Dataset& dataset) {
    const WavelengthGrid& g = dataset.grid;
    if (g.step_nm <= 0 || g.start_nm >= g.end_nm ||
        (g.end_nm - g.start_nm) % g.step_nm != 0) {
        throw OutOfRangeError("wavelength grid is not a valid range");
    }
    std::unordered_set<std::string> seen_ids;
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        const Sample& s = dataset.samples[i];
        const std::size_t row = i + 1;
        if (s.sample_id.empty()) {
            throw MalformedValueError(cell_ref(row, "sample_id") +
                                      ": must be non-empty");
        }
        if (!seen_ids.insert(s.sample_id).second) {
            throw DuplicateSampleIdError("row " + std::to_string(row) +
                                         ": duplicate sample_id '" +
                                         s.sample_id + "'");
        }
        if (s.metadata.juice_id.empty()) {
            throw MalformedValueError(cell_ref(row, "juice_id") +
                                      ": must be non-empty");
        }
        if (s.metadata.replicate < 1) {
            throw OutOfRangeError(cell_ref(row, "replicate") +
                                  ": must be >= 1");
        }
        if (!(s.metadata.tss >= 0.0) || !std::isfinite(s.metadata.tss)) {
            throw OutOfRangeError(cell_ref(row, "tss") + ": must be >= 0");
        }
        if (!(s.metadata.ph > 0.0 && s.metadata.ph < 14.0)) {
            throw OutOfRangeError(cell_ref(row, "ph") +
                                  ": must lie in (0, 14)");
        }
        if (!(s.metadata.ta >= 0.0) || !std::isfinite(s.metadata.ta)) {
            throw OutOfRangeError(cell_ref(row, "ta") + ": must be >= 0");
        }
        const std::optional<double>* labels[] = {&s.labels.astringency,
                                                 &s.labels.bitterness,
                                                 &s.labels.herbaceous};
        const char* label_names[] = {"astringency", "bitterness",
                                     "herbaceous"};
        for (std::size_t k = 0; k < 3; ++k) {
            if (labels[k]->has_value() &&
                !(**labels[k] >= 0.0 && **labels[k] <= 9.0)) {
                throw OutOfRangeError(cell_ref(row, label_names[k]) +
                                      ": outside [0, 9]");
            }
        }
        if (s.spectrum.absorbance.size() != g.size()) {
            throw DimensionMismatchError(
                "row " + std::to_string(row) + ": spectrum has " +
                std::to_string(s.spectrum.absorbance.size()) +
                " points, grid has " + std::to_string(g.size()));
        }
        for (std::size_t j = 0; j < s.spectrum.absorbance.size(); ++j) {
            double a = s.spectrum.absorbance[j];
            if (!std::isfinite(a) || a < kMinAbsorbanceAu) {
                throw OutOfRangeError(
                    cell_ref(row, wavelength_column_name(
                                      g.wavelength_at(j))) +
                    ": absorbance must be finite and >= " +
                    format_significant(kMinAbsorbanceAu, 6));
            }
        }
    }
}

Dataset parse_dataset_csv(std::istream& source) {
    std::ostringstream buf;
    buf << source.rdbuf();
    return parse_dataset_text(std::move(buf).str());
}

Dataset parse_dataset_csv(std::string_view text) {
    return parse_dataset_text(text);
}

void write_dataset_csv(const Dataset& dataset, std::ostream& out) {
    out << write_dataset_csv(dataset);
}

std::string write_dataset_csv(const Dataset& dataset) {
    validate_dataset(dataset);
    if (dataset.grid != WavelengthGrid{}) {
        throw DimensionMismatchError(
            "only the canonical 200-600 nm / 2 nm grid can be serialized");
    }
    const std::vector<std::string>& columns = dataset_csv_columns();

    std::string out;
    out.reserve(64 + dataset.samples.size() * 1800);
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (i != 0) {
            out += ',';
        }
        out += columns[i];
    }
    out += '\n';

    for (const Sample& s : dataset.samples) {
        const std::string* strings[] = {
            &s.sample_id,        &s.metadata.juice_id, &s.metadata.variety,
            &s.metadata.region,  &s.metadata.vineyard, &s.metadata.block,
            &s.metadata.harvest_type};
        for (std::size_t k = 0; k < std::size(strings); ++k) {
            require_writable(*strings[k], columns[k]);
            if (k != 0) {
                out += ',';
            }
            out += *strings[k];
        }
        out += ',';
        out += std::to_string(s.metadata.replicate);
        out += ',';
        out += format_significant(s.metadata.tss, 6);
        out += ',';
        out += format_significant(s.metadata.ph, 6);
        out += ',';
        out += format_significant(s.metadata.ta, 6);
        const std::optional<double> labels[] = {
            s.labels.astringency, s.labels.bitterness, s.labels.herbaceous};
        for (const std::optional<double>& label : labels) {
            out += ',';
            if (label.has_value()) {
                out += format_significant(*label, 6);
            }
        }
        for (double a : s.spectrum.absorbance) {
            out += ',';
            out += format_significant(a, 6);
        }
        out += '\n';
    }
    return out;
}

Dataset read_dataset_file(const std::string& path) {
    return parse_dataset_text(read_text_file(path));
}

void write_dataset_file(const Dataset& dataset, const std::string& path) {
    write_text_file_atomic(path, write_dataset_csv(dataset));
}

std::vector<JuiceGroup> group_by_juice(const Dataset& dataset) {
    std::vector<JuiceGroup> groups;
    std::unordered_map<std::string, std::size_t> index_of;
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        const std::string& id = dataset.samples[i].metadata.juice_id;
        auto [it, inserted] = index_of.try_emplace(id, groups.size());
        if (inserted) {
            groups.push_back(JuiceGroup{id, {}});
        }
        groups[it->second].indices.push_back(i);
    }
    return groups;
}

} // namespace vinispec
