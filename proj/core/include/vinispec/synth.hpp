#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vinispec/dataset.hpp"
#include "vinispec/rng.hpp"

namespace vinispec::synth {

struct GaussianPeak {
    double center_nm = 0.0;
    double width_nm = 1.0; // Gaussian sigma
    double height = 0.0;   // L·mol⁻¹·cm⁻¹ at the peak
};

/// An absorbing species. Its attenuation curve is a sum of Gaussian peaks.
struct Component {
    std::string name;
    std::vector<GaussianPeak> peaks;
};

/// The attenuation coefficient evaluated at every grid point.
std::vector<double> epsilon_curve(const Component& component,
                                  const WavelengthGrid& grid);

/// A mixture to be measured: concentrations in mol/L, path length in cm,
/// additive Gaussian instrument noise in AU.
struct MixtureSpec {
    std::vector<std::pair<Component, double>> components;
    double path_length_cm = 1.0;
    double noise_sd = 0.0;
};

void validate_mixture(const MixtureSpec& spec);

/// A(λ) = Σ over components of ε(λ)·l·c, plus Gaussian noise of sd noise_sd
/// drawn from rng. Noise is omitted entirely when noise_sd is 0.
Spectrum beer_lambert_absorbance(const MixtureSpec& spec, Rng& rng,
                                 const WavelengthGrid& grid = {});

/// Noise-free variant; requires spec.noise_sd == 0.
Spectrum beer_lambert_absorbance(const MixtureSpec& spec,
                                 const WavelengthGrid& grid = {});

/// One component of the generative model: how a species' concentration
/// varies across juices and origins. Each factor is a relative contrast;
/// the per-juice draw u is uniform in [−1, 1].
struct ComponentModel {
    Component component;
    double base_concentration = 1.0; // mol/L
    double juice_variation = 0.0;    // c ∝ 1 + juice_variation·u
    double region_contrast = 0.0;    // c ∝ 1 + region_contrast·s(region)
    double vineyard_contrast = 0.0;  // c ∝ 1 + vineyard_contrast·s(vineyard)
};

/// label = clip(intercept + slope · concentration(component), 0, 9)
struct AffineResponse {
    std::string component;
    double intercept = 0.0;
    double slope = 0.0;
};

struct LabelResponse {
    AffineResponse astringency;
    AffineResponse bitterness;
    AffineResponse herbaceous;
};

struct SynthConfig {
    std::size_t n_juices = 31;
    std::size_t replicates_per_juice = 3;
    std::size_t n_regions = 2;
    std::size_t n_vineyards = 4;
    double path_length_cm = 1.0;
    double noise_sd = 0.03; // AU
    std::uint64_t seed = 0;
    std::vector<ComponentModel> components;
    LabelResponse label_response;
};

/// The demo configuration: 31 juices × 3 replicates over 2 regions and
/// 4 vineyards, three absorbing species, and a narrow label-driving band
/// centered at 204 nm.
SynthConfig default_synth_config(std::uint64_t seed = 0);

void validate_config(const SynthConfig& config);

/// Deterministic function of config.seed. Replicates of a juice share one
/// concentration profile and differ only by instrument noise; region and
/// vineyard assignments are nested and class-separable by construction.
Dataset generate_synthetic_dataset(const SynthConfig& config);

} // namespace vinispec::synth
