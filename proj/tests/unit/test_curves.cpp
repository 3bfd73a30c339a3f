#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace elastika;
using namespace elastika::testing;

namespace {

RawTrial one_channel(std::vector<double> v, const std::string& name = "vGRF") {
    RawTrial t;
    t.trial_id = "t";
    t.subject_id = "s";
    t.channels = {name};
    t.samples = {std::move(v)};
    t.sample_rate = 100.0;
    return t;
}

// Reference linear interpolation written independently of the library.
double pl_interp(const std::vector<double>& s, double x) {
    const double pos = x * static_cast<double>(s.size() - 1);
    const auto lo = std::min<std::size_t>(static_cast<std::size_t>(pos), s.size() - 2);
    const double w = pos - static_cast<double>(lo);
    return s[lo] + w * (s[lo + 1] - s[lo]);
}

} // namespace

TEST(TrimZeros, KeepsOneZeroOnEachSide) {
    const auto out = trim_zeros(one_channel({0, 0, 0, 1, 2, 1, 0, 0}), "vGRF");
    EXPECT_EQ(out.samples[0], (std::vector<double>{0, 1, 2, 1, 0}));
}

TEST(TrimZeros, NoPaddingIsUnchanged) {
    const auto out = trim_zeros(one_channel({1, 2, 1}), "vGRF");
    EXPECT_EQ(out.samples[0], (std::vector<double>{1, 2, 1}));
}

TEST(TrimZeros, AllChannelsCutAtReferenceIndices) {
    RawTrial t;
    t.trial_id = "t";
    t.subject_id = "s";
    t.channels = {"vGRF", "apGRF"};
    t.samples = {{0, 0, 3, 4, 0, 0}, {9, 8, 7, 6, 5, 4}};
    const auto out = trim_zeros(t, "vGRF");
    EXPECT_EQ(out.samples[1], (std::vector<double>{8, 7, 6, 5}));
}

TEST(TrimZeros, MatchesExhaustiveScanOracle) {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> len(1, 30), pad(0, 10);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    for (int rep = 0; rep < 300; ++rep) {
        std::vector<double> v(static_cast<std::size_t>(pad(rng)), 0.0);
        const int body = len(rng);
        for (int k = 0; k < body; ++k) v.push_back(rng() % 5 == 0 ? 0.0 : u(rng));
        v.resize(v.size() + static_cast<std::size_t>(pad(rng)), 0.0);
        // oracle: first/last nonzero by exhaustive scan
        int first = -1, last = -1;
        for (int k = 0; k < static_cast<int>(v.size()); ++k)
            if (v[static_cast<std::size_t>(k)] != 0.0) {
                if (first < 0) first = k;
                last = k;
            }
        if (first < 0) {
            EXPECT_THROW(trim_zeros(one_channel(v), "vGRF"), AllZeroChannel);
            continue;
        }
        const int lo = std::max(first - 1, 0);
        const int hi = std::min(last + 1, static_cast<int>(v.size()) - 1);
        const std::vector<double> expect(v.begin() + lo, v.begin() + hi + 1);
        const auto out = trim_zeros(one_channel(v), "vGRF");
        EXPECT_EQ(out.samples[0], expect);
        EXPECT_EQ(trim_zeros(out, "vGRF").samples[0], out.samples[0]);  // idempotent
    }
}

TEST(TrimZeros, ToleranceTreatsDustAsZero) {
    const auto out = trim_zeros(one_channel({1e-12, 0, 0, 1, 2, 0, 1e-10}), "vGRF");
    EXPECT_EQ(out.samples[0], (std::vector<double>{0, 1, 2, 0}));
    EXPECT_THROW(trim_zeros(one_channel({1, 2}), "missing"), ChannelNotFound);
}

TEST(NormalizeTime, LineOfTwoSamples) {
    const Curve c = normalize_time(one_channel({0, 4}), 5);
    for (Index j = 0; j < 5; ++j) EXPECT_NEAR(c.values()(0, j), static_cast<double>(j), 1e-12);
}

TEST(NormalizeTime, IdentityResampling) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z;
    std::vector<double> v(57);
    for (auto& x : v) x = z(rng);
    const Curve c = normalize_time(one_channel(v), v.size());
    for (Index j = 0; j < c.grid_length(); ++j) EXPECT_NEAR(c.values()(0, j), v[static_cast<std::size_t>(j)], 1e-12);
}

TEST(NormalizeTime, SineMatchesPiecewiseLinearOracle) {
    std::vector<double> v(101);
    for (int k = 0; k <= 100; ++k) v[static_cast<std::size_t>(k)] = std::sin(2.0 * kPi * k / 100.0);
    const Curve c = normalize_time(one_channel(v), 201);
    for (Index j = 0; j < 201; ++j) EXPECT_NEAR(c.values()(0, j), pl_interp(v, j / 200.0), 1e-12);
}

TEST(NormalizeTime, ExtremaWithinLipschitzBound) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> z;
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> v(37 + rep);
        for (auto& x : v) x = z(rng);
        double lip = 0.0;
        for (std::size_t k = 1; k < v.size(); ++k) lip = std::max(lip, std::abs(v[k] - v[k - 1]) * (v.size() - 1));
        const Curve c = normalize_time(one_channel(v), 101);
        const double h = 1.0 / 100.0;
        EXPECT_LE(std::abs(c.values().maxCoeff() - *std::max_element(v.begin(), v.end())), lip * h + 1e-12);
        EXPECT_LE(std::abs(c.values().minCoeff() - *std::min_element(v.begin(), v.end())), lip * h + 1e-12);
    }
}

TEST(RawTrialValidation, RejectsBadShapes) {
    RawTrial t = one_channel({1, 2, 3, 4});
    EXPECT_NO_THROW(validate_raw_trial(t));
    EXPECT_THROW(validate_raw_trial(one_channel({1, 2, 3})), InvariantViolation);
    RawTrial ragged = t;
    ragged.channels.push_back("apGRF");
    ragged.samples.push_back({1, 2, 3});
    EXPECT_THROW(validate_raw_trial(ragged), SchemaError);
    RawTrial dup = t;
    dup.channels.push_back("vGRF");
    dup.samples.push_back({1, 2, 3, 4});
    EXPECT_THROW(validate_raw_trial(dup), InvariantViolation);
    EXPECT_THROW(normalize_time(one_channel({1.0})), TooFewSamples);
}

TEST(CurveInvariants, RejectsNonFiniteAndUnevenGrid) {
    Matrix v = Matrix::Ones(1, 5);
    v(0, 2) = std::nan("");
    EXPECT_THROW(Curve("a", "s", {"x"}, v), InvariantViolation);
    Vector grid = detail::uniform_grid(5);
    grid(2) += 1e-6;
    EXPECT_THROW(Curve("a", "s", {"x"}, grid, Matrix::Ones(1, 5)), InvariantViolation);
}

TEST(DatasetInvariants, GroupsSubjectsAndChecksGrid) {
    Dataset ds({Curve("t1", "A", {"x"}, Matrix::Ones(1, 5)), Curve("t2", "B", {"x"}, Matrix::Ones(1, 5)),
                Curve("t3", "A", {"x"}, Matrix::Ones(1, 5))});
    ASSERT_EQ(ds.subjects().size(), 2u);
    EXPECT_EQ(ds.subjects().at("A"), (std::vector<std::size_t>{0, 2}));
    EXPECT_THROW(Dataset({Curve("t1", "A", {"x"}, Matrix::Ones(1, 5)), Curve("t2", "A", {"x"}, Matrix::Ones(1, 6))}),
                 InvariantViolation);
    EXPECT_THROW(Dataset({Curve("t1", "A", {"x"}, Matrix::Ones(1, 5)), Curve("t2", "A", {"y"}, Matrix::Ones(1, 5))}),
                 InvariantViolation);
    EXPECT_THROW(Dataset({Curve("t1", "A", {"x"}, Matrix::Ones(1, 5)), Curve("t1", "A", {"x"}, Matrix::Ones(1, 5))}),
                 InvariantViolation);
}

TEST(Preprocess, TrimsThenNormalizes) {
    RawTrial t;
    t.trial_id = "t";
    t.subject_id = "s";
    t.channels = {"vGRF", "apGRF"};
    t.samples = {{0, 0, 0, 2, 4, 2, 0, 0}, {5, 5, 0, -1, 0, 1, 0, 5}};
    const Dataset ds = preprocess({t}, {"vGRF", 1e-9, 9});
    ASSERT_EQ(ds.size(), 1u);
    // trimmed vGRF is [0,2,4,2,0] over 5 samples -> 9-point grid
    const RowVector v = ds[0].channel("vGRF");
    EXPECT_NEAR(v(0), 0.0, 1e-12);
    EXPECT_NEAR(v(4), 4.0, 1e-12);
    EXPECT_NEAR(v(3), 3.0, 1e-12);
    EXPECT_NEAR(ds[0].channel("apGRF")(8), 0.0, 1e-12);
}
