#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "hdmi/error.hpp"
#include "hdmi/estimators.hpp"
#include "hdmi/pik.hpp"
#include "support.hpp"

using namespace hdmi::estimators;
using hdmi::DivergenceError;
using hdmi::DomainError;
namespace models = hdmi::models;

namespace {

ConfusionMatrix random_matrix(int k, std::int64_t r, unsigned seed, double diag_weight) {
    std::mt19937_64 rng(seed);
    std::vector<std::int64_t> c(static_cast<std::size_t>(k) * k, 0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < k; ++i)
        for (std::int64_t t = 0; t < r; ++t) {
            int j = u(rng) < diag_weight ? i : static_cast<int>(u(rng) * k);
            c[static_cast<std::size_t>(i) * k + std::min(j, k - 1)] += 1;
        }
    return ConfusionMatrix(k, c);
}

std::vector<std::vector<double>> to_table(const ConfusionMatrix& m) {
    std::vector<std::vector<double>> t(m.k(), std::vector<double>(m.k()));
    for (int i = 0; i < m.k(); ++i)
        for (int j = 0; j < m.k(); ++j) t[i][j] = static_cast<double>(m(i, j));
    return t;
}

}  // namespace

TEST_CASE("confusion matrix validation") {
    CHECK_THROWS_AS(ConfusionMatrix(1, {5}), DomainError);
    CHECK_THROWS_AS(ConfusionMatrix::from_rows({{1, 2}, {3, 1}}), DomainError);
    CHECK_THROWS_AS(ConfusionMatrix::from_rows({{1, -1}, {0, 0}}), DomainError);
    CHECK_THROWS_AS(ConfusionMatrix::from_rows({{0, 0}, {0, 0}}), DomainError);
    CHECK_THROWS_AS(ConfusionMatrix::from_rows({{1, 2}, {3}}), DomainError);
    const auto m = ConfusionMatrix::from_rows({{9, 1}, {2, 8}});
    CHECK(m.r() == 10);
    CHECK(m.trace() == 17);
}

TEST_CASE("test error") {
    CHECK(test_error(ConfusionMatrix::diagonal(5, 40)) == 0.0);
    CHECK(test_error(ConfusionMatrix::uniform(4, 40)) == doctest::Approx(0.75));
    const auto m = ConfusionMatrix::from_rows({{7, 2, 1}, {1, 8, 1}, {2, 2, 6}});
    CHECK(test_error(m) == doctest::Approx(9.0 / 30.0));
}

TEST_CASE("smoothing") {
    CHECK(smooth_error(0.5, 0.1, 2).value == doctest::Approx(0.5));
    CHECK(smooth_error(0.0, 0.1, 20).value == doctest::Approx(0.095));
    CHECK(smooth_error(0.2, 0.0, 5).value == 0.2);
    for (double a : {0.0, 0.3, 1.0}) CHECK(smooth_error(0.8, a, 5).value == doctest::Approx(0.8));
    CHECK(default_alpha(1000) == doctest::Approx(1.0 / 1001));
    CHECK_THROWS_AS(smooth_error(0.1, 1.5, 3), DomainError);
    CHECK_THROWS_AS(smooth_error(-0.1, 0.5, 3), DomainError);
}

TEST_CASE("method names round-trip") {
    for (auto m : {Method::HD, Method::Fano, Method::CM, Method::Naive, Method::MLE})
        CHECK(parse_method(to_string(m)) == m);
    CHECK(parse_method("HD") == Method::HD);
    CHECK(parse_methods("hd, fano,cm").size() == 3);
    CHECK_THROWS_AS(parse_method("knn"), hdmi::ConfigError);
}

TEST_CASE("HD estimator") {
    for (int k : {2, 5, 20}) CHECK(estimate_hd(smooth_error((k - 1.0) / k, 0.0, k)).value == 0.0);
    CHECK(estimate_hd(smooth_error(0.23975006109347669, 0.0, 2)).value == doctest::Approx(0.5).epsilon(1e-8));
    CHECK_THROWS_AS(estimate_hd(smooth_error(0.0, 0.0, 5)), DivergenceError);

    // Independent root finder: bisection against the adaptive-quadrature reference.
    double lo = 0.0, hi = 10.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (test_support::pi_k_reference(20, mid) > 0.5 ? lo : hi) = mid;
    }
    const double c = 0.5 * (lo + hi);
    CHECK(estimate_hd(smooth_error(0.5, 0.0, 20)).value == doctest::Approx(0.5 * c * c).epsilon(1e-8));

    const auto rec = estimate_hd(smooth_error(0.1, 0.2, 10));
    CHECK(rec.method == Method::HD);
    CHECK(rec.k == 10);
    CHECK(*rec.alpha == 0.2);
    CHECK(*rec.error == doctest::Approx(0.8 * 0.1 + 0.2 * 0.9));
}

TEST_CASE("Fano estimator") {
    CHECK(estimate_fano(smooth_error(0.0, 0.0, 20)).value == doctest::Approx(std::log(20.0)));
    CHECK(std::abs(std::log(20.0) - 2.9957) < 1e-4);
    CHECK(estimate_fano(smooth_error(0.0, 0.0, 2)).value == doctest::Approx(std::log(2.0)));
    // At chance e = (k-1)/k: log k - H(e) - e log(k-1) = 0 algebraically.
    const double e = 0.8;
    const double raw = std::log(5.0) + e * std::log(e) + (1 - e) * std::log(1 - e) - e * std::log(4.0);
    CHECK(std::abs(raw) < 1e-14);
    CHECK(estimate_fano(smooth_error(e, 0.0, 5)).value == 0.0);
    CHECK(fano_value(0.95, 5) == 0.0);
    const double mid = 0.3;
    CHECK(fano_value(mid, 7) ==
          doctest::Approx(std::log(7.0) + mid * std::log(mid) + (1 - mid) * std::log(1 - mid) - mid * std::log(6.0)));
}

TEST_CASE("CM estimator") {
    CHECK(estimate_cm(ConfusionMatrix::diagonal(4, 25)).value == doctest::Approx(std::log(4.0)));
    CHECK(estimate_cm(ConfusionMatrix::uniform(4, 40)).value == doctest::Approx(0.0).epsilon(1e-15));
    const auto m = ConfusionMatrix::from_rows({{9, 1}, {1, 9}});
    CHECK(estimate_cm(m).value == doctest::Approx(test_support::plugin_mi(to_table(m))).epsilon(1e-14));
    const auto big = random_matrix(12, 50, 3, 0.4);
    CHECK(estimate_cm(big).value == doctest::Approx(test_support::plugin_mi(to_table(big))).epsilon(1e-12));
}

TEST_CASE("naive plug-in estimator") {
    models::LabeledDataset d;
    d.k = 2;
    auto add = [&](int z, double y, int times) {
        for (int t = 0; t < times; ++t) d.records.push_back({z, {y}});
    };
    add(0, 0, 8);
    add(0, 1, 2);
    add(1, 0, 3);
    add(1, 1, 7);
    CHECK(estimate_naive(d).value ==
          doctest::Approx(test_support::plugin_mi({{8, 2}, {3, 7}})).epsilon(1e-14));

    models::LabeledDataset constant;
    constant.k = 3;
    for (int z = 0; z < 3; ++z) constant.records.push_back({z, {1.0, 0.0}});
    CHECK(estimate_naive(constant).value == 0.0);

    models::LabeledDataset ident;
    ident.k = 4;
    for (int z = 0; z < 4; ++z)
        for (int t = 0; t < 3; ++t) ident.records.push_back({z, {double(z & 1), double(z >> 1)}});
    CHECK(estimate_naive(ident).value == doctest::Approx(std::log(4.0)));

    models::LabeledDataset cont;
    cont.k = 2;
    cont.records = {{0, {0.5}}, {1, {1.0}}};
    CHECK_THROWS_AS(estimate_naive(cont), hdmi::UnsupportedModelError);
}

TEST_CASE("chance collapse") {
    for (int k : {2, 4, 20}) {
        const auto u = ConfusionMatrix::uniform(k, 20 * k);
        const auto se = smooth_error(test_error(u), default_alpha(u.r()), k);
        CHECK(estimate_hd(se).value == 0.0);
        CHECK(estimate_fano(se).value == 0.0);
        CHECK(estimate_cm(u).value == doctest::Approx(0.0).epsilon(1e-14));
    }
}

TEST_CASE("permutation invariance") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        const int k = 3 + trial % 10;
        const auto m = random_matrix(k, 30, trial, 0.5);
        std::vector<int> perm(k);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        const auto p = m.permuted(perm);
        const auto a = default_alpha(m.r());
        CHECK(test_error(p) == test_error(m));
        CHECK(estimate_hd(smooth_error(test_error(p), a, k)).value ==
              estimate_hd(smooth_error(test_error(m), a, k)).value);
        CHECK(estimate_cm(p).value == doctest::Approx(estimate_cm(m).value).epsilon(1e-13));
    }
    CHECK_THROWS_AS(ConfusionMatrix::diagonal(3, 2).permuted(std::vector<int>{0, 0, 1}), DomainError);
}

TEST_CASE("HD exceeds Fano below a per-k threshold") {
    for (int k : {2, 5, 10, 20, 50}) {
        const double chance = (k - 1.0) / k;
        // First crossing scanning up from small errors.
        double e0 = chance;
        for (double e = 1e-3; e < chance; e += 1e-3)
            if (hd_value(e, k) <= fano_value(e, k)) {
                e0 = e;
                break;
            }
        CHECK(e0 > 0.01);
        for (int i = 1; i <= 200; ++i) {
            const double e = e0 * i / 201.0;
            CHECK(hd_value(e, k) > fano_value(e, k));
        }
    }
}

TEST_CASE("HD and Fano are nonincreasing in the error") {
    for (int k : {2, 7, 20}) {
        const double chance = (k - 1.0) / k;
        double prev_hd = INFINITY, prev_fano = INFINITY;
        for (int i = 1; i <= 500; ++i) {
            const double e = chance * i / 500.0;
            const double h = hd_value(e, k), f = fano_value(e, k);
            CHECK(h <= prev_hd + 1e-9);
            CHECK(f <= prev_fano + 1e-12);
            CHECK(f <= std::log(double(k)) + 1e-12);
            prev_hd = h;
            prev_fano = f;
        }
    }
}

TEST_CASE("logistic fit recovers coefficients and satisfies the score equations") {
    const auto model = models::StimulusResponseModel::scaled_identity_logistic(3, 1.0);
    const auto ex = models::sample_exemplars(model, 20, 4);
    const auto data = models::sample_responses(model, ex, 2000, 5);
    const auto fit = fit_multi_logistic(data, ex);
    CHECK(fit.max_gradient_norm < 1e-8);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(std::abs(fit.B(i, j) - (i == j ? 1.0 : 0.0)) < 0.15);
    // Score equations recomputed record by record.
    for (int m = 0; m < 3; ++m) {
        std::vector<double> g(3, 0.0);
        for (const auto& r : data.records) {
            const auto& x = ex.exemplars[r.z];
            double eta = 0.0;
            for (int i = 0; i < 3; ++i) eta += x[i] * fit.B(i, m);
            const double resid = r.y[m] - 1.0 / (1.0 + std::exp(-eta));
            for (int i = 0; i < 3; ++i) g[i] += resid * x[i];
        }
        for (double gi : g) CHECK(std::abs(gi) / data.records.size() < 1e-7);
    }
}

TEST_CASE("MLE estimate") {
    SUBCASE("null fit gives zero") {
        models::ExemplarSet ex;
        ex.exemplars = {{0.5}, {-1.0}, {2.0}};
        models::LabeledDataset d;
        d.k = 3;
        for (int z = 0; z < 3; ++z)
            for (int t = 0; t < 10; ++t) d.records.push_back({z, {double(t % 2)}});
        CHECK(estimate_mle_logistic(d, ex, 1000, 1).value == 0.0);
    }
    SUBCASE("p = q = 1 matches the 1-d oracle at the fitted coefficient") {
        Eigen::MatrixXd B(1, 1);
        B << 1.5;
        const auto model = models::StimulusResponseModel::multi_logistic(B);
        const auto ex = models::sample_exemplars(model, 10, 8);
        const auto data = models::sample_responses(model, ex, 500, 9);
        const auto fit = fit_multi_logistic(data, ex);
        const auto rec = estimate_mle_logistic(data, ex, 1000, 3);
        CHECK(rec.value == doctest::Approx(test_support::logistic_mi_hermite(fit.B(0, 0))).epsilon(1e-4));
        CHECK(rec.method == Method::MLE);
    }
    SUBCASE("separated data fails with the gradient norm") {
        models::ExemplarSet ex;
        ex.exemplars = {{1.0}, {-1.0}};
        models::LabeledDataset d;
        d.k = 2;
        for (int t = 0; t < 5; ++t) {
            d.records.push_back({0, {1.0}});
            d.records.push_back({1, {0.0}});
        }
        try {
            fit_multi_logistic(d, ex);
            FAIL("expected FitError");
        } catch (const hdmi::FitError& e) {
            CHECK(e.iterations() == 100);
            CHECK(e.gradient_norm() >= 0.0);
            CHECK(std::string(e.what()).find("separable") != std::string::npos);
        }
    }
}

TEST_CASE("k-subsampling diagnostic") {
    const auto m = random_matrix(10, 100, 21, 0.5);
    const auto a = default_alpha(m.r());
    const std::vector<int> full{10};
    const auto id = k_subsample_diagnostic(m, full, Method::HD, 5, 1);
    REQUIRE(id.size() == 1);
    CHECK(id[0].mean == doctest::Approx(estimate_hd(smooth_error(test_error(m), a, 10)).value).epsilon(1e-12));
    CHECK(id[0].sd == doctest::Approx(0.0).epsilon(1e-12));
    const auto idc = k_subsample_diagnostic(m, full, Method::CM, 2, 1);
    CHECK(idc[0].mean == doctest::Approx(estimate_cm(m).value).epsilon(1e-12));

    const auto chance = ConfusionMatrix::uniform(10, 100);
    const std::vector<int> ks{2, 4, 6, 8, 10};
    const auto flat = k_subsample_diagnostic(chance, ks, Method::HD, 10, 3);
    for (const auto& pt : flat) {
        CHECK(pt.mean == 0.0);
        CHECK(pt.values.size() == 10);
    }

    const auto s1 = k_subsample_diagnostic(m, ks, Method::Fano, 20, 7);
    const auto s2 = k_subsample_diagnostic(m, ks, Method::Fano, 20, 7);
    for (std::size_t i = 0; i < ks.size(); ++i) CHECK(s1[i].values == s2[i].values);

    // A 2 x 2 restriction computed by hand.
    const auto small = ConfusionMatrix::from_rows({{6, 2, 2}, {1, 8, 1}, {3, 3, 4}});
    const std::vector<int> two{2};
    const auto pairs = k_subsample_diagnostic(small, two, Method::CM, 30, 2);
    for (double v : pairs[0].values) {
        // Every restriction is one of three pairs; CM must match one of them.
        std::vector<double> cand;
        for (auto [i, j] : {std::pair{0, 1}, {0, 2}, {1, 2}}) {
            const double a00 = small(i, i), a01 = small(i, j), a10 = small(j, i), a11 = small(j, j);
            cand.push_back(test_support::plugin_mi(
                {{a00 / (a00 + a01), a01 / (a00 + a01)}, {a10 / (a10 + a11), a11 / (a10 + a11)}}));
        }
        CHECK(std::any_of(cand.begin(), cand.end(), [&](double c) { return std::abs(c - v) < 1e-12; }));
    }

    CHECK_THROWS_AS(k_subsample_diagnostic(m, std::vector<int>{1}, Method::HD, 1, 0), DomainError);
    CHECK_THROWS_AS(k_subsample_diagnostic(m, std::vector<int>{11}, Method::HD, 1, 0), DomainError);
    CHECK_THROWS_AS(k_subsample_diagnostic(m, full, Method::MLE, 1, 0), DomainError);
}
