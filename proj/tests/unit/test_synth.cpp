#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace elastika;
using namespace elastika::testing;

TEST(Synth, DegenerateConfigReproducesTemplate) {
    SynthConfig cfg;
    cfg.n_subjects = 3;
    cfg.warp_strength = 0.0;
    cfg.amplitude_sd = 0.0;
    cfg.noise_sd = 0.0;
    auto [ds, truth] = generate(cfg);
    for (const auto& c : ds.curves()) EXPECT_LE((c.values() - truth.typical_template).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Synth, RandomWarpsAreValid) {
    std::mt19937_64 rng(90);
    for (int k = 0; k < 1000; ++k) {
        const Warp w = synth::random_warp(rng, 101, 0.5);
        for (Index j = 1; j < w.size(); ++j) ASSERT_GT(w.gamma()(j), w.gamma()(j - 1));
        const auto psi = warp_to_sphere(w).psi;
        EXPECT_NEAR(psi.cwiseProduct(psi).dot(detail::trapezoid_weights(101)), 1.0, 1e-8);
    }
}

TEST(Synth, MixedCorpusContainsUnimodalCurves) {
    SynthConfig cfg;
    cfg.shape = SynthTemplate::mixed;
    auto [ds, truth] = generate(cfg);
    int atypical = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        // count local maxima of vGRF above half its peak
        const RowVector v = ds[i].channel("vGRF");
        int peaks = 0;
        for (Index j = 1; j + 1 < v.size(); ++j)
            if (v(j) > v(j - 1) && v(j) >= v(j + 1) && v(j) > 0.5 * v.maxCoeff()) ++peaks;
        if (truth.atypical[i]) {
            ++atypical;
            EXPECT_EQ(peaks, 1);
        } else {
            EXPECT_GE(peaks, 2);
        }
    }
    EXPECT_GE(atypical, 1);
    // subjects are either entirely typical or entirely atypical
    for (const auto& [sid, rows] : ds.subjects())
        for (std::size_t r : rows) EXPECT_EQ(truth.atypical[r], truth.atypical[rows.front()]);
}

TEST(Synth, DeterministicAndPhysical) {
    SynthConfig cfg;
    cfg.shape = SynthTemplate::mixed;
    cfg.seed = 17;
    const auto a = generate(cfg).first, b = generate(cfg).first;
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].values(), b[i].values());
        const RowVector v = a[i].channel("vGRF");
        EXPECT_GE(v.minCoeff(), 0.0);
        EXPECT_EQ(v(0), 0.0);
        EXPECT_EQ(v(v.size() - 1), 0.0);
    }
    cfg.seed = 18;
    EXPECT_NE(generate(cfg).first[0].values(), a[0].values());
}

TEST(Synth, RawTrialsPreprocessBackToTheCorpus) {
    SynthConfig cfg;
    cfg.n_subjects = 3;
    const auto ds = generate(cfg).first;
    const auto raw = to_raw_trials(ds, 4);
    const Dataset back = preprocess(raw);
    ASSERT_EQ(back.size(), ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const double scale = ds[i].values().cwiseAbs().maxCoeff();
        // resampling a dense trace back to 101 points loses little
        EXPECT_LE((back[i].values() - ds[i].values()).cwiseAbs().maxCoeff(), 0.02 * scale);
    }
}

TEST(Synth, TraitsCoverEveryKind) {
    SynthConfig cfg;
    cfg.n_subjects = 40;
    auto [ds, truth] = generate(cfg);
    const auto t = synthetic_traits(ds, truth, 3);
    EXPECT_EQ(t.subject_ids.size(), 40u);
    EXPECT_EQ(t.types[t.trait_index("atypical")], TraitType::binary);
    EXPECT_EQ(t.types[t.trait_index("klg")], TraitType::ordinal);
    EXPECT_EQ(t.types[t.trait_index("loading")], TraitType::continuous);
    EXPECT_TRUE(t.values.col(static_cast<Index>(t.trait_index("jsw"))).array().isNaN().any());
    EXPECT_THROW(parse_synth_template("flat"), ConfigError);
    cfg.n_subjects = 0;
    EXPECT_THROW(generate(cfg), ConfigError);
}
