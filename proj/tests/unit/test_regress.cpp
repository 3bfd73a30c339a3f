#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace elastika;
using namespace elastika::testing;

namespace {

Matrix gaussian(std::mt19937_64& rng, Index r, Index c) {
    std::normal_distribution<double> z;
    Matrix m(r, c);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = z(rng);
    return m;
}

Vector gaussian(std::mt19937_64& rng, Index n) { return gaussian(rng, n, 1).col(0); }

std::vector<std::string> subjects_of(Index rows, Index per) {
    std::vector<std::string> s;
    for (Index i = 0; i < rows; ++i) s.push_back("S" + std::to_string(i / per));
    return s;
}

} // namespace

TEST(Ols, ExactLinearFit) {
    std::mt19937_64 rng(70);
    const Matrix x = gaussian(rng, 30, 3);
    const Vector y = (x * Vector::LinSpaced(3, 1, 3)).array() + 0.5;
    const auto f = fit_ols(x, y);
    EXPECT_NEAR(f.r_squared, 1.0, 1e-10);
    EXPECT_NEAR(f.coefficients(0), 0.5, 1e-10);
}

TEST(Ols, NoiseHasSmallRSquared) {
    std::mt19937_64 rng(71);
    EXPECT_LE(fit_ols(gaussian(rng, 1000, 3), gaussian(rng, 1000)).r_squared, 0.02);
}

TEST(Ols, MatchesNormalEquations) {
    std::mt19937_64 rng(72);
    const Matrix x = gaussian(rng, 10, 3);
    const Vector y = gaussian(rng, 10);
    Matrix d(10, 4);
    d.col(0).setOnes();
    d.rightCols(3) = x;
    const Vector beta = (d.transpose() * d).inverse() * (d.transpose() * y);
    EXPECT_LE((fit_ols(x, y).coefficients - beta).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Ols, DegenerateAndUnderdetermined) {
    std::mt19937_64 rng(73);
    const auto f = fit_ols(gaussian(rng, 10, 2), Vector::Constant(10, 3.0));
    EXPECT_TRUE(f.degenerate_response);
    EXPECT_EQ(f.r_squared, 0.0);
    EXPECT_THROW(fit_ols(gaussian(rng, 3, 2), gaussian(rng, 3)), ConfigError);
    EXPECT_THROW(fit_ols(gaussian(rng, 5, 2), gaussian(rng, 4)), SizeMismatch);
}

TEST(NestedF, IdenticalModelsGiveZero) {
    std::mt19937_64 rng(74);
    const auto f = fit_ols(gaussian(rng, 20, 2), gaussian(rng, 20));
    EXPECT_EQ(nested_f(f, f), 0.0);
}

TEST(NestedF, ManualArithmetic) {
    // 12 observations, full model on two predictors, reduced on the first.
    const std::vector<double> x1{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
    const std::vector<double> x2{2, 1, 4, 3, 6, 5, 8, 7, 10, 9, 12, 11};
    const std::vector<double> yv{3.1, 3.9, 7.2, 7.8, 11.1, 11.8, 15.2, 16.1, 18.9, 20.2, 23.1, 23.8};
    Matrix xf(12, 2);
    Vector y(12);
    for (int i = 0; i < 12; ++i) {
        xf(i, 0) = x1[static_cast<std::size_t>(i)];
        xf(i, 1) = x2[static_cast<std::size_t>(i)];
        y(i) = yv[static_cast<std::size_t>(i)];
    }
    // manual SSR of each model through the 2x2 / 3x3 normal equations
    auto ssr = [&](const Matrix& x) {
        Matrix d(12, x.cols() + 1);
        d.col(0).setOnes();
        d.rightCols(x.cols()) = x;
        const Vector b = (d.transpose() * d).ldlt().solve(d.transpose() * y);
        return (y - d * b).squaredNorm();
    };
    const double s_full = ssr(xf), s_red = ssr(xf.leftCols(1));
    const double manual = ((s_red - s_full) / 1.0) / (s_full / (12 - 2 - 1));
    const auto full = fit_ols(xf, y, {"x1", "x2"});
    const auto red = fit_ols(xf.leftCols(1), y, {"x1"});
    EXPECT_NEAR(nested_f(full, red), manual, 1e-10 * std::max(1.0, manual));
    EXPECT_THROW(nested_f(red, full), NotNested);
    EXPECT_THROW(nested_f(full, fit_ols(xf.rightCols(1) * 2.0, y, {"x3"})), NotNested);
}

TEST(NestedF, NoiseColumnGivesModerateF) {
    std::mt19937_64 rng(75);
    const Matrix x = gaussian(rng, 1000, 3);
    const Vector y = x.col(0) * 2.0 + x.col(1) + 0.1 * gaussian(rng, 1000);
    const double f = nested_f(fit_ols(x, y), fit_ols(x.leftCols(2), y));
    EXPECT_GE(f, 0.0);
    EXPECT_LE(f, 6.0);
}

TEST(NestedF, InvariantUnderBlockReparameterization) {
    std::mt19937_64 rng(76);
    const Matrix a = gaussian(rng, 60, 3), b = gaussian(rng, 60, 2);
    const Vector y = a.col(0) + 0.5 * b.col(1) + gaussian(rng, 60);
    Matrix t = gaussian(rng, 3, 3) + 3.0 * Matrix::Identity(3, 3);
    Matrix full(60, 5), full2(60, 5);
    full << a, b;
    full2 << a * t, b;
    EXPECT_NEAR(nested_f(fit_ols(full, y), fit_ols(b, y)), nested_f(fit_ols(full2, y), fit_ols(b, y)), 1e-8);
    EXPECT_NEAR(nested_f(fit_ols(full, y), fit_ols(a, y)), nested_f(fit_ols(full2, y), fit_ols(a * t, y)), 1e-8);
}

TEST(RSquared, MonotoneUnderNesting) {
    std::mt19937_64 rng(77);
    const Matrix x = gaussian(rng, 40, 6);
    const Vector y = gaussian(rng, 40);
    double prev = 0.0;
    for (Index k = 0; k <= 6; ++k) {
        const double r2 = fit_ols(x.leftCols(k), y).r_squared;
        EXPECT_GE(r2, prev - 1e-12);
        prev = r2;
    }
}

TEST(BootstrapP, FloorAndTies) {
    EXPECT_EQ(bootstrap_p_value(std::vector<double>(1000, 0.5), 2.0), 0.0005);
    EXPECT_EQ(bootstrap_p_value(std::vector<double>(10, 2.0), 2.0), 1.0);
    std::vector<double> f{1, 2, 3, 4};
    EXPECT_EQ(bootstrap_p_value(f, 3.0), 0.5);
}

TEST(ClusterBootstrap, PValuesOnLatticeAndDeterministic) {
    std::mt19937_64 rng(78);
    const Matrix x = gaussian(rng, 60, 2);
    const Vector y = gaussian(rng, 60);
    const auto subj = subjects_of(60, 3);
    BootstrapOptions o;
    o.n_boot = 99;
    o.seed = 5;
    for (auto null : {BootstrapNull::imposed, BootstrapNull::percentile}) {
        o.null = null;
        const auto a = cluster_bootstrap_test(x, y, subj, {}, o);
        const auto b = cluster_bootstrap_test(x, y, subj, {}, o);
        EXPECT_EQ(a.p_value, b.p_value);
        EXPECT_EQ(a.f_boot, b.f_boot);
        const double k = a.p_value * o.n_boot;
        EXPECT_TRUE(std::abs(k - std::round(k)) < 1e-9 || a.p_value == 1.0 / (2.0 * o.n_boot));
        o.threads = 3;
        EXPECT_EQ(cluster_bootstrap_test(x, y, subj, {}, o).f_boot, a.f_boot);
        o.threads = 1;
    }
}

TEST(ClusterBootstrap, ResamplesWholeSubjects) {
    std::vector<std::vector<Index>> members{{0, 1, 2}, {3}, {4, 5}, {6, 7, 8, 9}};
    std::mt19937_64 rng(79);
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<int> drawn;
        const auto rows = detail::resample_clusters(members, rng, &drawn);
        ASSERT_EQ(drawn.size(), members.size());
        std::size_t expect = 0;
        for (int c : drawn) expect += members[static_cast<std::size_t>(c)].size();
        EXPECT_EQ(rows.size(), expect);
    }
}

TEST(ClusterBootstrap, StrongSignalGivesSmallP) {
    std::mt19937_64 rng(80);
    const Matrix x = gaussian(rng, 90, 2);
    const Vector y = 2.0 * x.col(0) + 0.2 * gaussian(rng, 90);
    BootstrapOptions o;
    o.n_boot = 200;
    const auto r = cluster_bootstrap_test(x, y, subjects_of(90, 3), {1}, o);
    EXPECT_EQ(r.p_value, 1.0 / 400.0);
    EXPECT_EQ(r.exceedances, 0);
}

TEST(Traits, TypeInference) {
    EXPECT_EQ(infer_trait_type(Vector::LinSpaced(5, 0, 1).array().round()), TraitType::binary);
    Vector o(6);
    o << 0, 1, 2, 3, 4, 2;
    EXPECT_EQ(infer_trait_type(o), TraitType::ordinal);
    Vector c(3);
    c << 0.5, 1.25, 3;
    EXPECT_EQ(infer_trait_type(c), TraitType::continuous);
}

TEST(Traits, MeanImputation) {
    TraitTable t;
    t.subject_ids = {"a", "b", "c"};
    t.traits = {"womac", "jsw"};
    t.values.resize(3, 2);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    t.values << 1, 5, nan, nan, 3, 7;
    validate_traits(t);
    const auto out = impute_means(t, {"womac"});
    EXPECT_EQ(out.values(1, 0), 2.0);
    EXPECT_TRUE(std::isnan(out.values(1, 1)));
    EXPECT_EQ(out.imputed_counts.at("womac"), 1);
    EXPECT_NEAR(out.values.col(0).mean(), 2.0, 1e-12);
    const auto same = impute_means(out, {"womac"});
    EXPECT_EQ(same.values.col(0), out.values.col(0));
    EXPECT_THROW(impute_means(t, {"missing"}), SchemaError);
}

TEST(Compare, NestingAndDegenerateTraits) {
    std::mt19937_64 rng(81);
    const Index n = 60;
    FeatureMatrix curve, lm;
    curve.columns = {"a", "b", "c"};
    lm.columns = {"l1", "l2"};
    curve.values = gaussian(rng, n, 3);
    lm.values = gaussian(rng, n, 2);
    for (Index i = 0; i < n; ++i) {
        const std::string s = "S" + std::to_string(i / 3), t = "T" + std::to_string(i);
        curve.subject_ids.push_back(s);
        curve.trial_ids.push_back(t);
        lm.subject_ids.push_back(s);
        lm.trial_ids.push_back(t);
    }
    TraitTable traits;
    traits.traits = {"signal", "flat"};
    for (int s = 0; s < 20; ++s) traits.subject_ids.push_back("S" + std::to_string(s));
    traits.values.resize(20, 2);
    traits.values.col(0) = gaussian(rng, 20);
    traits.values.col(1).setConstant(4.0);
    validate_traits(traits);
    CompareOptions o;
    o.bootstrap.n_boot = 50;
    const auto reps = compare_predictor_sets(curve, lm, traits, o);
    ASSERT_EQ(reps.size(), 2u);
    const auto& r = reps[0];
    EXPECT_GE(r.combined.r_squared, std::max(r.full_curve.r_squared, r.landmark.r_squared));
    EXPECT_EQ(r.n_obs, n);
    EXPECT_EQ(r.n_subjects, 20);
    EXPECT_FALSE(r.degenerate_response);
    EXPECT_TRUE(reps[1].degenerate_response);
    // determinism
    const auto again = compare_predictor_sets(curve, lm, traits, o);
    EXPECT_EQ(again[0].reduced_landmark.bootstrap_p, r.reduced_landmark.bootstrap_p);
}
