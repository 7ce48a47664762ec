#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "stt/dfc.hpp"
#include "stt/errors.hpp"

using namespace stt;

namespace {

// textbook PCC in extended precision, independent of pearson_matrix
double oracle_pcc(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    long double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    long double sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    return static_cast<double>(sxy / (std::sqrt(sxx) * std::sqrt(syy)));
}

Tensor random_window(std::mt19937_64& rng, std::size_t len, std::size_t n) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Tensor w = Tensor::zeros(len, n);
    for (auto& v : w.mutable_values()) v = dist(rng);
    return w;
}

std::vector<double> column(const Tensor& t, std::size_t j) {
    std::vector<double> out(t.rows());
    for (std::size_t i = 0; i < t.rows(); ++i) out[i] = t.at(i, j);
    return out;
}

void check_fc_invariants(const Tensor& fc) {
    const std::size_t n = fc.rows();
    REQUIRE(fc.cols() == n);
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(fc.at(i, i) == 1.0);
        for (std::size_t j = 0; j < n; ++j) {
            CHECK(std::abs(fc.at(i, j) - fc.at(j, i)) <= 1e-12);
            CHECK(fc.at(i, j) >= -1.0);
            CHECK(fc.at(i, j) <= 1.0);
        }
    }
}

}  // namespace

TEST_CASE("window_count formula, single window, too-short series") {
    WindowSpec spec;  // L=70, S=2
    CHECK(window_count(140, spec) == 36);
    CHECK(window_count(70, spec) == 1);
    CHECK_THROWS_AS(window_count(69, spec), DataError);
}

TEST_CASE("window_count property sweep against a direct loop") {
    WindowSpec spec;
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 300; ++trial) {
        spec.length = 1 + rng() % 90;
        spec.stride = 1 + rng() % spec.length;
        const std::size_t total = spec.length + rng() % 500;
        std::size_t expect = 0;
        for (std::size_t start = 0; start + spec.length <= total; start += spec.stride) ++expect;
        CHECK(window_count(total, spec) == expect);
    }
}

TEST_CASE("pearson_matrix self and anti correlation") {
    Tensor w = Tensor::zeros(5, 3);
    for (std::size_t t = 0; t < 5; ++t) {
        const double v = std::sin(0.7 * static_cast<double>(t)) + 0.2 * static_cast<double>(t);
        w.set(t, 0, v);
        w.set(t, 1, v);            // duplicate column
        w.set(t, 2, -v + 3.0);     // anticorrelated plus constant offset
    }
    Tensor fc = pearson_matrix(w);
    CHECK(fc.at(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fc.at(0, 2) == doctest::Approx(-1.0).epsilon(1e-12));
    check_fc_invariants(fc);
}

TEST_CASE("pearson_matrix matches the textbook oracle value") {
    Tensor w = Tensor::from_rows({{1, 1}, {2, 2}, {3, 2}, {4, 5}});
    Tensor fc = pearson_matrix(w);
    const double expect = oracle_pcc({1, 2, 3, 4}, {1, 2, 2, 5});
    CHECK(fc.at(0, 1) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(expect == doctest::Approx(0.8944271909999159).epsilon(1e-12));
}

TEST_CASE("pearson_matrix matches oracle on random windows") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        Tensor w = random_window(rng, 20 + rng() % 60, 2 + rng() % 6);
        Tensor fc = pearson_matrix(w);
        check_fc_invariants(fc);
        for (std::size_t i = 0; i < fc.rows(); ++i)
            for (std::size_t j = i + 1; j < fc.cols(); ++j)
                CHECK(std::abs(fc.at(i, j) - oracle_pcc(column(w, i), column(w, j))) <= 1e-12);
    }
}

TEST_CASE("pearson_matrix names the degenerate ROI") {
    Tensor w = Tensor::zeros(6, 3);
    for (std::size_t t = 0; t < 6; ++t) {
        w.set(t, 0, static_cast<double>(t));
        w.set(t, 1, 7.0);  // constant
        w.set(t, 2, static_cast<double>(t * t));
    }
    CHECK_THROWS_WITH_AS(pearson_matrix(w), doctest::Contains("ROI 1"), DataError);
}

TEST_CASE("build_dfc on a planted two-state series") {
    // state A in [0,60), state B in [60,120); windows of 30 with stride 30
    std::mt19937_64 rng(23);
    const std::size_t n = 4;
    BoldSeries series;
    series.samples = Tensor::zeros(120, n);
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<double> shared(120);
    for (auto& v : shared) v = dist(rng);
    for (std::size_t t = 0; t < 120; ++t)
        for (std::size_t j = 0; j < n; ++j) {
            const bool early = t < 60;
            // early: ROI pairs (0,1) move together; late: (0,2) move together
            double v = dist(rng) * 0.3;
            if (early && (j == 0 || j == 1)) v += shared[t];
            if (!early && (j == 0 || j == 2)) v += shared[t];
            series.samples.set(t, j, v);
        }
    WindowSpec spec{30, 30};
    DfcSequence seq = build_dfc(series, spec);
    REQUIRE(seq.count() == 4);
    CHECK(seq.window_starts == std::vector<std::size_t>{0, 30, 60, 90});
    for (const auto& m : seq.matrices) check_fc_invariants(m);
    // windows equal the per-segment oracle computed directly
    for (std::size_t t = 0; t < 4; ++t) {
        Tensor window = Tensor::zeros(30, n);
        for (std::size_t u = 0; u < 30; ++u)
            for (std::size_t j = 0; j < n; ++j)
                window.set(u, j, series.samples.at(t * 30 + u, j));
        for (std::size_t j = 1; j < n; ++j) {
            const double expect = oracle_pcc(column(window, 0), column(window, j));
            CHECK(seq.matrices[t].at(0, j) == doctest::Approx(expect).epsilon(1e-12));
        }
    }
    // early windows correlate (0,1), late windows correlate (0,2)
    CHECK(seq.matrices[0].at(0, 1) > 0.8);
    CHECK(seq.matrices[3].at(0, 2) > 0.8);
    CHECK(std::abs(seq.matrices[0].at(0, 2)) < 0.5);
}

TEST_CASE("build_dfc single window equals static FC") {
    std::mt19937_64 rng(31);
    BoldSeries series;
    series.samples = random_window(rng, 70, 5);
    WindowSpec spec{70, 2};
    DfcSequence seq = build_dfc(series, spec);
    REQUIRE(seq.count() == 1);
    Tensor fc = static_fc(series);
    CHECK(seq.matrices[0].values() == fc.values());
}

TEST_CASE("time reversal reverses window order when windows tile symmetrically") {
    std::mt19937_64 rng(37);
    BoldSeries fwd, rev;
    fwd.samples = random_window(rng, 40, 3);  // (40-10) divisible by stride 5
    rev.samples = Tensor::zeros(40, 3);
    for (std::size_t t = 0; t < 40; ++t)
        for (std::size_t j = 0; j < 3; ++j) rev.samples.set(t, j, fwd.samples.at(39 - t, j));
    WindowSpec spec{10, 5};
    DfcSequence a = build_dfc(fwd, spec), b = build_dfc(rev, spec);
    REQUIRE(a.count() == b.count());
    for (std::size_t t = 0; t < a.count(); ++t)
        for (std::size_t i = 0; i < 9; ++i)
            CHECK(a.matrices[t].values()[i] ==
                  doctest::Approx(b.matrices[a.count() - 1 - t].values()[i]).epsilon(1e-12));
}

TEST_CASE("node_strength identity, all-ones, hand-placed off-diagonals") {
    for (double v : node_strength(Tensor::identity(4))) CHECK(v == 0.0);
    for (double v : node_strength(Tensor::constant(3, 3, 1.0))) CHECK(v == 1.0);

    Tensor fc = Tensor::identity(3);
    fc.set(0, 1, 0.5);
    fc.set(1, 0, 0.5);
    fc.set(0, 2, -0.5);
    fc.set(2, 0, -0.5);
    const auto s = node_strength(fc);
    CHECK(s[0] == doctest::Approx(0.5).epsilon(1e-15));   // (0.5 + 0.5)/2
    CHECK(s[1] == doctest::Approx(0.25).epsilon(1e-15));  // (0.5 + 0)/2
    CHECK(s[2] == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("build_features shapes and exact transposition") {
    std::mt19937_64 rng(41);
    BoldSeries series;
    series.samples = random_window(rng, 90, 6);
    WindowSpec spec{30, 10};
    FeatureMatrices f = build_features(build_dfc(series, spec));
    REQUIRE(f.temporal.rows() == 7);
    REQUIRE(f.temporal.cols() == 6);
    REQUIRE(f.spatial.rows() == 6);
    REQUIRE(f.spatial.cols() == 7);
    for (std::size_t t = 0; t < 7; ++t)
        for (std::size_t j = 0; j < 6; ++j) CHECK(f.spatial.at(j, t) == f.temporal.at(t, j));

    // single window: 1xN and Nx1
    BoldSeries one;
    one.samples = random_window(rng, 30, 6);
    FeatureMatrices f1 = build_features(build_dfc(one, spec));
    CHECK(f1.temporal.rows() == 1);
    CHECK(f1.spatial.cols() == 1);
}

TEST_CASE("static_fc equals oracle and flags duplicated columns as perfectly correlated") {
    std::mt19937_64 rng(43);
    BoldSeries series;
    series.samples = random_window(rng, 100, 4);
    for (std::size_t t = 0; t < 100; ++t) series.samples.set(t, 3, series.samples.at(t, 0));
    Tensor fc = static_fc(series);
    CHECK(fc.at(0, 3) == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = i + 1; j < 4; ++j)
            CHECK(std::abs(fc.at(i, j) -
                           oracle_pcc(column(series.samples, i), column(series.samples, j))) <=
                  1e-12);
}
