#pragma once

// Error rate of the k-class "orthogonal constellation" problem and its inverse.
//
//   pi_k(c) = 1 - \int phi(z - c) Phi(z)^{k-1} dz
//
// is the probability that a N(c, 1) variate falls below the maximum of k-1
// independent standard normals. In the high-dimensional limit the average
// Bayes error of a k-class exemplar task equals pi_k(sqrt(2 I)), which is
// what makes the inverse usable as a mutual-information estimator.

namespace hdmi::pik {

struct PikQuery {
    int k = 2;
    double c = 0.0;
};

/// Moment structure of a jointly Gaussian (Z_1, ..., Z_k) with exchangeable
/// Z_2..Z_k: alpha = E[Z_1 - Z_i], beta = Var Z_1, gamma = Cov(Z_1, Z_i),
/// delta = Var Z_i, epsilon = Cov(Z_i, Z_j).
struct GaussianMaxProblem {
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
    double delta = 1.0;
    double epsilon = 0.0;
    int k = 2;
};

/// Standardized location and squared scale of the reduced problem
/// Pr[W < max of k-1 standard normals], W ~ N(mu, nu2).
struct ReducedMaxProblem {
    double mu = 0.0;
    double nu2 = 1.0;
};

/// Absolute accuracy of pi_k and gaussian_max_exceedance.
inline constexpr double kAccuracy = 1e-10;

double pi_k(int k, double c);
inline double pi_k(const PikQuery& q) { return pi_k(q.k, q.c); }

/// Separation c >= 0 with pi_k(c) = e. Returns 0 for e >= 1 - 1/k (at or
/// worse than chance). Throws DomainError for e <= 0, e > 1 or NaN: the
/// inverse diverges at zero error, so callers must smooth or floor first.
double pi_k_inverse(double e, int k);

/// 1 - \int N(w; mu, nu2) Phi(w)^{k-1} dw.
double gaussian_max_exceedance(double mu, double nu2, int k);

/// Throws DomainError naming the violated inequality.
ReducedMaxProblem reduce(const GaussianMaxProblem& p);

/// Pr[Z_1 < max_{i >= 2} Z_i] for the moment structure `p`.
double lemma1_exceedance(const GaussianMaxProblem& p);

}  // namespace hdmi::pik
