#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace vinispec {

/// Acquisition grid: absorbance sampled every step_nm from start_nm to
/// end_nm inclusive.
struct WavelengthGrid {
    int start_nm = 200;
    int end_nm = 600;
    int step_nm = 2;

    std::size_t size() const {
        return static_cast<std::size_t>((end_nm - start_nm) / step_nm) + 1;
    }
    int wavelength_at(std::size_t index) const {
        return start_nm + step_nm * static_cast<int>(index);
    }

    bool operator==(const WavelengthGrid&) const = default;
};

/// Values below this are instrument error; small negatives are baseline noise.
inline constexpr double kMinAbsorbanceAu = -0.05;

/// One absorbance value per grid point, in AU, ascending wavelength.
struct Spectrum {
    std::vector<double> absorbance;

    bool operator==(const Spectrum&) const = default;
};

struct SampleMetadata {
    std::string juice_id;
    std::string variety;
    std::string region;
    std::string vineyard;
    std::string block;
    std::string harvest_type;
    int replicate = 1;
    double tss = 0.0; // °Brix
    double ph = 7.0;
    double ta = 0.0; // g/L

    bool operator==(const SampleMetadata&) const = default;
};

/// Panel-mean sensory scores on the 0-9 scale; each attribute may be absent.
struct SensoryLabels {
    std::optional<double> astringency;
    std::optional<double> bitterness;
    std::optional<double> herbaceous;

    bool operator==(const SensoryLabels&) const = default;
};

struct Sample {
    std::string sample_id;
    Spectrum spectrum;
    SampleMetadata metadata;
    SensoryLabels labels;

    bool operator==(const Sample&) const = default;
};

struct Dataset {
    WavelengthGrid grid;
    std::vector<Sample> samples;

    bool operator==(const Dataset&) const = default;
};

/// Column name for a wavelength, e.g. 204 -> "a0204".
std::string wavelength_column_name(int nm);

/// True for names of the form 'a' followed by exactly four digits.
bool is_wavelength_column(std::string_view name);

/// Wavelength encoded in a column name; requires is_wavelength_column(name).
int wavelength_of_column(std::string_view name);

/// The canonical CSV header, in order.
const std::vector<std::string>& dataset_csv_columns();

/// Checks every documented invariant; throws on the first violation.
void validate_dataset(const Dataset& dataset);

/// Parses the canonical CSV format. Either returns a fully valid Dataset or
/// throws an error naming the offending row and column.
Dataset parse_dataset_csv(std::istream& source);
Dataset parse_dataset_csv(std::string_view text);

/// Writes the canonical CSV format: exact header, 6 significant digits,
/// absent labels as empty cells. Equal datasets produce identical bytes.
void write_dataset_csv(const Dataset& dataset, std::ostream& out);
std::string write_dataset_csv(const Dataset& dataset);

/// Reads/writes a dataset CSV file. The writer replaces the file atomically.
Dataset read_dataset_file(const std::string& path);
void write_dataset_file(const Dataset& dataset, const std::string& path);

/// Samples sharing a juice_id, in first-appearance order.
struct JuiceGroup {
    std::string juice_id;
    std::vector<std::size_t> indices;

    bool operator==(const JuiceGroup&) const = default;
};

/// Partitions sample indices by juice_id. Every index lands in exactly one
/// group; groups are ordered by first appearance in the dataset.
std::vector<JuiceGroup> group_by_juice(const Dataset& dataset);

} // namespace vinispec
