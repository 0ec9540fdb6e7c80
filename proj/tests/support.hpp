#pragma once

// Test-only oracles. Nothing here calls into the library's numerical paths.

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace test_support {

inline double Phi(double z) { return boost::math::cdf(boost::math::normal(), z); }
inline double phi(double z) { return boost::math::pdf(boost::math::normal(), z); }

/// Adaptive Gauss-Kronrod over the real line.
template <class F>
double adaptive_integral(F f, double a = -std::numeric_limits<double>::infinity(),
                         double b = std::numeric_limits<double>::infinity()) {
    double err = 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-13, &err);
}

/// pi_k by Gauss-Kronrod on the untransformed definition.
inline double pi_k_reference(int k, double c) {
    return 1.0 - adaptive_integral([&](double z) { return phi(z - c) * std::pow(Phi(z), k - 1); },
                                   c - 15.0, c + 15.0);
}

/// Probabilists' Gauss-Hermite rule by Golub-Welsch.
struct HermiteRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

inline HermiteRule gauss_hermite(int n) {
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd sub(n - 1);
    for (int i = 1; i < n; ++i) sub(i - 1) = std::sqrt(static_cast<double>(i));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(diag, sub);
    HermiteRule r;
    for (int i = 0; i < n; ++i) {
        r.nodes.push_back(solver.eigenvalues()(i));
        const double v0 = solver.eigenvectors()(0, i);
        r.weights.push_back(v0 * v0);
    }
    return r;
}

template <class F>
double hermite_expectation(F f, int n = 120) {
    static const HermiteRule rule = gauss_hermite(120);
    const HermiteRule& r = n == 120 ? rule : gauss_hermite(n);
    double s = 0.0;
    for (std::size_t i = 0; i < r.nodes.size(); ++i) s += r.weights[i] * f(r.nodes[i]);
    return s;
}

inline double h2(double p) {
    if (p <= 0.0 || p >= 1.0) return 0.0;
    return -p * std::log(p) - (1 - p) * std::log(1 - p);
}

/// I(X; Y) for X ~ N(0,1), Y | X ~ Bernoulli(sigmoid(b X)).
inline double logistic_mi_hermite(double b) {
    return std::log(2.0) -
           hermite_expectation([&](double x) { return h2(1.0 / (1.0 + std::exp(-b * x))); });
}

/// Plug-in mutual information of a joint count table (rows x cols).
inline double plugin_mi(const std::vector<std::vector<double>>& counts) {
    double n = 0.0;
    std::vector<double> row(counts.size(), 0.0), col(counts.at(0).size(), 0.0);
    for (std::size_t i = 0; i < counts.size(); ++i)
        for (std::size_t j = 0; j < counts[i].size(); ++j) {
            n += counts[i][j];
            row[i] += counts[i][j];
            col[j] += counts[i][j];
        }
    double mi = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i)
        for (std::size_t j = 0; j < counts[i].size(); ++j) {
            const double c = counts[i][j];
            if (c > 0) mi += c / n * std::log(c * n / (row[i] * col[j]));
        }
    return mi;
}

struct MeanSe {
    double mean;
    double se;
};

template <class V>
MeanSe mean_se(const V& xs) {
    double m = 0.0;
    for (double x : xs) m += x;
    m /= xs.size();
    double v = 0.0;
    for (double x : xs) v += (x - m) * (x - m);
    v /= (xs.size() - 1);
    return {m, std::sqrt(v / xs.size())};
}

}  // namespace test_support
