// Synthetic-data generator tests.
//
// The attenuation and absorbance oracles are recomputed inline from the
// defining formulas (Gaussian peaks, A = sum of eps*l*c), so the generator
// is checked against the math rather than against itself. Determinism and
// dataset-shape properties cover the full generator.

#include <doctest.h>

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "vinispec/dataset.hpp"
#include "vinispec/errors.hpp"
#include "vinispec/rng.hpp"
#include "vinispec/synth.hpp"

using namespace vinispec;
using namespace vinispec::synth;

namespace {

Component single_peak(double center, double width, double height) {
    Component c;
    c.name = "test";
    c.peaks = {GaussianPeak{center, width, height}};
    return c;
}

} // namespace

TEST_SUITE("synth") {

TEST_CASE("epsilon_curve evaluates Gaussian peaks pointwise") {
    const WavelengthGrid grid;
    const Component c = single_peak(300.0, 10.0, 2.0);
    const std::vector<double> curve = epsilon_curve(c, grid);
    REQUIRE(curve.size() == grid.size());
    // index of 300 nm is (300-200)/2 = 50
    CHECK(curve[50] == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(curve[55] == doctest::Approx(2.0 * std::exp(-0.5)).epsilon(1e-15));
    CHECK(curve[40] == doctest::Approx(2.0 * std::exp(-2.0)).epsilon(1e-15));
    for (std::size_t i = 0; i < curve.size(); ++i) {
        const double nm = grid.wavelength_at(i);
        const double z = (nm - 300.0) / 10.0;
        CHECK(curve[i] == doctest::Approx(2.0 * std::exp(-0.5 * z * z))
                              .epsilon(1e-14));
    }
}

TEST_CASE("epsilon_curve adds peaks of one component") {
    const WavelengthGrid grid;
    Component c = single_peak(250.0, 5.0, 1.0);
    c.peaks.push_back(GaussianPeak{400.0, 20.0, 3.0});
    const std::vector<double> combined = epsilon_curve(c, grid);
    const std::vector<double> a =
        epsilon_curve(single_peak(250.0, 5.0, 1.0), grid);
    const std::vector<double> b =
        epsilon_curve(single_peak(400.0, 20.0, 3.0), grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(combined[i] == doctest::Approx(a[i] + b[i]).epsilon(1e-15));
    }
}

TEST_CASE("noise-free absorbance is additive over components within 1e-12") {
    const WavelengthGrid grid;
    MixtureSpec first;
    first.components = {{single_peak(260.0, 8.0, 1.5), 0.7}};
    MixtureSpec second;
    second.components = {{single_peak(420.0, 30.0, 0.9), 1.3}};
    MixtureSpec both;
    both.components = {first.components[0], second.components[0]};

    const Spectrum sa = beer_lambert_absorbance(first, grid);
    const Spectrum sb = beer_lambert_absorbance(second, grid);
    const Spectrum sum = beer_lambert_absorbance(both, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(std::abs(sum.absorbance[i] -
                       (sa.absorbance[i] + sb.absorbance[i])) < 1e-12);
    }
}

TEST_CASE("absorbance scales with path length and concentration") {
    const WavelengthGrid grid;
    MixtureSpec spec;
    spec.components = {{single_peak(300.0, 10.0, 2.0), 0.5}};
    spec.path_length_cm = 2.0;
    const Spectrum s = beer_lambert_absorbance(spec, grid);
    // A(300) = eps * l * c = 2.0 * 2.0 * 0.5
    CHECK(s.absorbance[50] == doctest::Approx(2.0).epsilon(1e-15));

    spec.path_length_cm = 4.0;
    const Spectrum doubled = beer_lambert_absorbance(spec, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(doubled.absorbance[i] ==
              doctest::Approx(2.0 * s.absorbance[i]).epsilon(1e-14));
    }
}

TEST_CASE("the noise-free overload rejects a noisy mixture") {
    MixtureSpec spec;
    spec.components = {{single_peak(300.0, 10.0, 2.0), 1.0}};
    spec.noise_sd = 0.01;
    CHECK_THROWS_AS(beer_lambert_absorbance(spec), ConfigInfeasibleError);
}

TEST_CASE("invalid mixtures are rejected") {
    MixtureSpec empty;
    CHECK_THROWS_AS(validate_mixture(empty), ConfigInfeasibleError);

    MixtureSpec negative;
    negative.components = {{single_peak(300.0, 10.0, 2.0), -0.1}};
    CHECK_THROWS_AS(validate_mixture(negative), ConfigInfeasibleError);

    MixtureSpec zero_width;
    zero_width.components = {{single_peak(300.0, 0.0, 2.0), 1.0}};
    CHECK_THROWS_AS(validate_mixture(zero_width), ConfigInfeasibleError);

    MixtureSpec bad_path;
    bad_path.components = {{single_peak(300.0, 10.0, 2.0), 1.0}};
    bad_path.path_length_cm = 0.0;
    CHECK_THROWS_AS(validate_mixture(bad_path), ConfigInfeasibleError);
}

TEST_CASE("noisy absorbance never falls below the instrument floor") {
    MixtureSpec spec;
    spec.components = {{single_peak(300.0, 10.0, 0.01), 0.01}};
    spec.noise_sd = 5.0; // absurd noise to force clamping
    Rng rng(3);
    const Spectrum s = beer_lambert_absorbance(spec, rng);
    bool clamped = false;
    for (double a : s.absorbance) {
        CHECK(a >= kMinAbsorbanceAu);
        clamped = clamped || a == kMinAbsorbanceAu;
    }
    CHECK(clamped);
}

TEST_CASE("the default config generates the documented shape") {
    const Dataset d = generate_synthetic_dataset(default_synth_config(0));
    validate_dataset(d);
    CHECK(d.samples.size() == 93);
    CHECK(group_by_juice(d).size() == 31);

    std::set<std::string> regions;
    std::set<std::string> vineyards;
    std::set<std::string> harvests;
    for (const Sample& s : d.samples) {
        regions.insert(s.metadata.region);
        vineyards.insert(s.metadata.vineyard);
        harvests.insert(s.metadata.harvest_type);
        REQUIRE(s.labels.astringency.has_value());
        REQUIRE(s.labels.bitterness.has_value());
        REQUIRE(s.labels.herbaceous.has_value());
        CHECK(*s.labels.astringency >= 0.0);
        CHECK(*s.labels.astringency <= 9.0);
        CHECK(*s.labels.bitterness >= 0.0);
        CHECK(*s.labels.bitterness <= 9.0);
        CHECK(*s.labels.herbaceous >= 0.0);
        CHECK(*s.labels.herbaceous <= 9.0);
    }
    CHECK(regions.size() == 2);
    CHECK(vineyards.size() == 4);
    CHECK(harvests == std::set<std::string>{"hand", "machine"});
}

TEST_CASE("identical seeds reproduce the dataset, different seeds do not") {
    const Dataset a = generate_synthetic_dataset(default_synth_config(42));
    const Dataset b = generate_synthetic_dataset(default_synth_config(42));
    const Dataset c = generate_synthetic_dataset(default_synth_config(43));
    CHECK(a == b);
    CHECK(a != c);
}

TEST_CASE("replicates share labels and chemistry but differ by noise") {
    const Dataset d = generate_synthetic_dataset(default_synth_config(7));
    const auto groups = group_by_juice(d);
    for (const JuiceGroup& group : groups) {
        REQUIRE(group.indices.size() == 3);
        const Sample& first = d.samples[group.indices[0]];
        for (std::size_t k = 1; k < group.indices.size(); ++k) {
            const Sample& rep = d.samples[group.indices[k]];
            CHECK(rep.labels == first.labels);
            CHECK(rep.metadata.tss == first.metadata.tss);
            CHECK(rep.metadata.region == first.metadata.region);
            CHECK(rep.metadata.vineyard == first.metadata.vineyard);
            CHECK(rep.metadata.replicate == static_cast<int>(k + 1));
            CHECK(rep.spectrum != first.spectrum);
        }
    }
}

TEST_CASE("zero noise makes replicates spectrally identical") {
    SynthConfig config = default_synth_config(5);
    config.n_juices = 4;
    config.noise_sd = 0.0;
    const Dataset d = generate_synthetic_dataset(config);
    const auto groups = group_by_juice(d);
    for (const JuiceGroup& group : groups) {
        const Sample& first = d.samples[group.indices[0]];
        for (std::size_t k = 1; k < group.indices.size(); ++k) {
            CHECK(d.samples[group.indices[k]].spectrum == first.spectrum);
        }
    }
}

TEST_CASE("infeasible configs are rejected") {
    SynthConfig zero_juices = default_synth_config(0);
    zero_juices.n_juices = 0;
    CHECK_THROWS_AS(validate_config(zero_juices), ConfigInfeasibleError);

    SynthConfig folded = default_synth_config(0);
    folded.n_regions = 5;
    folded.n_vineyards = 3;
    CHECK_THROWS_AS(validate_config(folded), ConfigInfeasibleError);

    SynthConfig no_components = default_synth_config(0);
    no_components.components.clear();
    CHECK_THROWS_AS(validate_config(no_components), ConfigInfeasibleError);

    SynthConfig dangling = default_synth_config(0);
    dangling.label_response.bitterness.component = "unicorn";
    CHECK_THROWS_AS(validate_config(dangling), ConfigInfeasibleError);
}

TEST_CASE("vineyards nest inside regions") {
    const Dataset d = generate_synthetic_dataset(default_synth_config(1));
    std::set<std::pair<std::string, std::string>> pairs;
    for (const Sample& s : d.samples) {
        pairs.insert({s.metadata.vineyard, s.metadata.region});
    }
    std::set<std::string> seen;
    for (const auto& [vineyard, region] : pairs) {
        CHECK(seen.insert(vineyard).second); // one region per vineyard
    }
}

} // TEST_SUITE
