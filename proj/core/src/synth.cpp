#include "vinispec/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "vinispec/errors.hpp"

namespace vinispec::synth {

namespace {

constexpr std::uint64_t kJuiceStream = 1;
constexpr std::uint64_t kNoiseStream = 2;

std::string padded_id(char prefix, std::size_t index_1based, int width) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%c%0*zu", prefix, width, index_1based);
    return buf;
}

/// Centered position of index i among n siblings, in [−1, 1].
double centered_position(std::size_t i, std::size_t n) {
    if (n < 2) {
        return 0.0;
    }
    return 2.0 * static_cast<double>(i) / static_cast<double>(n - 1) - 1.0;
}

double clip(double v, double lo, double hi) {
    return std::min(std::max(v, lo), hi);
}

double apply_response(const AffineResponse& response, double concentration) {
    return clip(response.intercept + response.slope * concentration, 0.0, 9.0);
}

std::size_t component_index(const SynthConfig& config,
                            const std::string& name) {
    for (std::size_t i = 0; i < config.components.size(); ++i) {
        if (config.components[i].component.name == name) {
            return i;
        }
    }
    throw ConfigInfeasibleError("label response references unknown component '" +
                                name + "'");
}

} // namespace

std::vector<double> epsilon_curve(const Component& component,
                                  const WavelengthGrid& grid) {
    std::vector<double> curve(grid.size(), 0.0);
    for (std::size_t i = 0; i < curve.size(); ++i) {
        const double nm = grid.wavelength_at(i);
        double eps = 0.0;
        for (const GaussianPeak& peak : component.peaks) {
            const double z = (nm - peak.center_nm) / peak.width_nm;
            eps += peak.height * std::exp(-0.5 * z * z);
        }
        curve[i] = eps;
    }
    return curve;
}

void validate_mixture(const MixtureSpec& spec) {
    if (spec.components.empty()) {
        throw ConfigInfeasibleError("mixture needs at least one component");
    }
    for (const auto& [component, concentration] : spec.components) {
        if (!(concentration >= 0.0) || !std::isfinite(concentration)) {
            throw ConfigInfeasibleError("component '" + component.name +
                                        "': concentration must be finite and >= 0");
        }
        for (const GaussianPeak& peak : component.peaks) {
            if (!(peak.width_nm > 0.0) || !(peak.height >= 0.0) ||
                !std::isfinite(peak.center_nm)) {
                throw ConfigInfeasibleError("component '" + component.name +
                                            "': invalid peak");
            }
        }
    }
    if (!(spec.path_length_cm > 0.0) || !std::isfinite(spec.path_length_cm)) {
        throw ConfigInfeasibleError("path length must be > 0");
    }
    if (!(spec.noise_sd >= 0.0) || !std::isfinite(spec.noise_sd)) {
        throw ConfigInfeasibleError("noise sd must be >= 0");
    }
}

Spectrum beer_lambert_absorbance(const MixtureSpec& spec, Rng& rng,
                                 const WavelengthGrid& grid) {
    validate_mixture(spec);
    Spectrum spectrum;
    spectrum.absorbance.assign(grid.size(), 0.0);
    for (const auto& [component, concentration] : spec.components) {
        const std::vector<double> eps = epsilon_curve(component, grid);
        for (std::size_t i = 0; i < spectrum.absorbance.size(); ++i) {
            spectrum.absorbance[i] += eps[i] * spec.path_length_cm * concentration;
        }
    }
    if (spec.noise_sd > 0.0) {
        for (double& a : spectrum.absorbance) {
            a += rng.normal(0.0, spec.noise_sd);
            // Clamp to the instrument floor so the output is always a valid
            // spectrum.
            a = std::max(a, kMinAbsorbanceAu);
        }
    }
    return spectrum;
}

Spectrum beer_lambert_absorbance(const MixtureSpec& spec,
                                 const WavelengthGrid& grid) {
    if (spec.noise_sd != 0.0) {
        throw ConfigInfeasibleError(
            "noisy mixture requires an explicit random source");
    }
    Rng unused(0);
    return beer_lambert_absorbance(spec, unused, grid);
}

SynthConfig default_synth_config(std::uint64_t seed) {
    SynthConfig config;
    config.seed = seed;

    // Narrow label-driving band: varies strongly per juice, carries no
    // origin signal. The 1 nm width keeps the 202/206 neighbors at 13.5%
    // of the peak amplitude, so the band center stays identifiable.
    ComponentModel phenolic;
    phenolic.component.name = "phenolic";
    phenolic.component.peaks = {GaussianPeak{204.0, 1.0, 1.2}};
    phenolic.base_concentration = 1.0;
    phenolic.juice_variation = 0.55;

    // Broad mid-UV band: separates regions.
    ComponentModel anthocyanin;
    anthocyanin.component.name = "anthocyanin";
    anthocyanin.component.peaks = {GaussianPeak{320.0, 28.0, 0.9}};
    anthocyanin.base_concentration = 1.0;
    anthocyanin.juice_variation = 0.10;
    anthocyanin.region_contrast = 0.50;
    anthocyanin.vineyard_contrast = 0.15;

    // Broad visible band: separates vineyards within a region.
    ComponentModel pigment;
    pigment.component.name = "pigment";
    pigment.component.peaks = {GaussianPeak{520.0, 40.0, 0.7}};
    pigment.base_concentration = 1.0;
    pigment.juice_variation = 0.10;
    pigment.vineyard_contrast = 0.50;

    config.components = {phenolic, anthocyanin, pigment};
    config.label_response.astringency = AffineResponse{"phenolic", 0.5, 3.8};
    config.label_response.bitterness = AffineResponse{"phenolic", -1.0, 4.5};
    config.label_response.herbaceous = AffineResponse{"phenolic", 7.5, -3.0};
    return config;
}

void validate_config(const SynthConfig& config) {
    if (config.n_juices < 1 || config.replicates_per_juice < 1 ||
        config.n_regions < 1 || config.n_vineyards < 1) {
        throw ConfigInfeasibleError("all counts must be >= 1");
    }
    if (config.n_vineyards < config.n_regions) {
        throw ConfigInfeasibleError(
            "cannot nest " + std::to_string(config.n_vineyards) +
            " vineyards into " + std::to_string(config.n_regions) +
            " regions");
    }
    if (config.components.empty()) {
        throw ConfigInfeasibleError("config needs at least one component");
    }
    MixtureSpec probe;
    probe.path_length_cm = config.path_length_cm;
    probe.noise_sd = config.noise_sd;
    for (const ComponentModel& model : config.components) {
        if (!(model.base_concentration >= 0.0) ||
            !std::isfinite(model.base_concentration)) {
            throw ConfigInfeasibleError("component '" + model.component.name +
                                        "': base concentration must be >= 0");
        }
        probe.components.emplace_back(model.component,
                                      model.base_concentration);
    }
    validate_mixture(probe);
    component_index(config, config.label_response.astringency.component);
    component_index(config, config.label_response.bitterness.component);
    component_index(config, config.label_response.herbaceous.component);
}

Dataset generate_synthetic_dataset(const SynthConfig& config) {
    validate_config(config);

    const std::size_t n_components = config.components.size();
    const std::size_t astringency_ix =
        component_index(config, config.label_response.astringency.component);
    const std::size_t bitterness_ix =
        component_index(config, config.label_response.bitterness.component);
    const std::size_t herbaceous_ix =
        component_index(config, config.label_response.herbaceous.component);

    // Vineyard v belongs to region v % n_regions; juice j farms vineyard
    // j % n_vineyards. Both assignments are balanced round-robins.
    std::vector<std::size_t> region_of_vineyard(config.n_vineyards);
    std::vector<std::size_t> rank_in_region(config.n_vineyards);
    std::vector<std::size_t> vineyards_in_region(config.n_regions, 0);
    for (std::size_t v = 0; v < config.n_vineyards; ++v) {
        const std::size_t r = v % config.n_regions;
        region_of_vineyard[v] = r;
        rank_in_region[v] = vineyards_in_region[r]++;
    }

    Dataset dataset;
    dataset.samples.reserve(config.n_juices * config.replicates_per_juice);

    const std::uint64_t juice_master = derive_seed(config.seed, kJuiceStream);
    const std::uint64_t noise_master = derive_seed(config.seed, kNoiseStream);
    std::size_t sample_index = 0;

    static const char* kVarieties[] = {"crimson", "gordo", "sultana"};

    for (std::size_t j = 0; j < config.n_juices; ++j) {
        Rng juice_rng(derive_seed(juice_master, j));

        const std::size_t vineyard = j % config.n_vineyards;
        const std::size_t region = region_of_vineyard[vineyard];
        const double region_pos = centered_position(region, config.n_regions);
        const double vineyard_pos = centered_position(
            rank_in_region[vineyard], vineyards_in_region[region]);

        std::vector<double> concentrations(n_components);
        for (std::size_t k = 0; k < n_components; ++k) {
            const ComponentModel& model = config.components[k];
            const double u = juice_rng.uniform(-1.0, 1.0);
            double c = model.base_concentration *
                       (1.0 + model.region_contrast * region_pos) *
                       (1.0 + model.vineyard_contrast * vineyard_pos) *
                       (1.0 + model.juice_variation * u);
            concentrations[k] = std::max(c, 0.0);
        }

        SensoryLabels labels;
        labels.astringency = apply_response(config.label_response.astringency,
                                            concentrations[astringency_ix]);
        labels.bitterness = apply_response(config.label_response.bitterness,
                                           concentrations[bitterness_ix]);
        labels.herbaceous = apply_response(config.label_response.herbaceous,
                                           concentrations[herbaceous_ix]);

        SampleMetadata metadata;
        metadata.juice_id = padded_id('J', j + 1, 3);
        metadata.variety = kVarieties[j % std::size(kVarieties)];
        metadata.region = "R" + std::to_string(region + 1);
        metadata.vineyard = "V" + std::to_string(vineyard + 1);
        metadata.block = "B" + std::to_string(1 + j % 5);
        metadata.harvest_type = (j % 2 == 0) ? "hand" : "machine";
        metadata.tss = 16.0 + 6.0 * juice_rng.uniform01();
        metadata.ph = 3.0 + 0.8 * juice_rng.uniform01();
        metadata.ta = 5.0 + 3.0 * juice_rng.uniform01();

        MixtureSpec mixture;
        mixture.path_length_cm = config.path_length_cm;
        mixture.noise_sd = config.noise_sd;
        for (std::size_t k = 0; k < n_components; ++k) {
            mixture.components.emplace_back(config.components[k].component,
                                            concentrations[k]);
        }

        for (std::size_t rep = 0; rep < config.replicates_per_juice; ++rep) {
            Rng noise_rng(derive_seed(noise_master, sample_index));
            Sample sample;
            sample.sample_id = padded_id('S', sample_index + 1, 4);
            sample.metadata = metadata;
            sample.metadata.replicate = static_cast<int>(rep + 1);
            sample.labels = labels;
            sample.spectrum =
                beer_lambert_absorbance(mixture, noise_rng, dataset.grid);
            dataset.samples.push_back(std::move(sample));
            ++sample_index;
        }
    }
    return dataset;
}

} // namespace vinispec::synth
