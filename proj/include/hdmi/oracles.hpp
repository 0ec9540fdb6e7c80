#pragma once

// Monte Carlo and analytic reference computations used to check the
// asymptotic theory: average Bayes error, limiting moments of the
// log-likelihood-ratio statistics, and the staircase collision error.

#include <cstdint>
#include <string>
#include <vector>

#include "hdmi/models.hpp"
#include "hdmi/pik.hpp"

namespace hdmi::oracles {

struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
    long n_samples = 0;
    std::uint64_t seed = 0;
};

/// Average Bayes error of the k-exemplar identification task. Each of
/// `n_exemplar_sets` draws a fresh exemplar set and classifies
/// `n_responses_per_set` responses of class 0 with the Bayes rule; exact
/// score ties count as a fractional error 1 - 1/(number tied). std_error is
/// the standard error of the mean over sets (binomial and between-set
/// variation combined).
McEstimate mc_average_bayes_error(const models::StimulusResponseModel& model, int k, int n_exemplar_sets,
                                  int n_responses_per_set, std::uint64_t seed);

struct MomentCheck {
    std::string name;
    double estimate = 0.0;
    double std_error = 0.0;
    double target = 0.0;

    /// |estimate - target| / std_error (infinite if std_error is 0 and they differ).
    double deviation_se() const;
    bool within(double n_se) const { return deviation_se() <= n_se; }
};

struct ZMomentReport {
    double iota = 0.0;
    int k = 0;
    long n = 0;
    std::uint64_t seed = 0;
    /// mean_Z, var_Z, cov_Z, mean_u, var_u with limits -2i, 4i, 2i, -i, 2i.
    std::vector<MomentCheck> moments;

    bool all_within(double n_se = 3.0) const;
};

/// Moments of Z_i = log p(Y | X_i) - log p(Y | X_1), i = 2..k, with Y drawn
/// from p(y | X_1) and a fresh exemplar set per draw, and of
/// u = log p(Y | X_2) - log p(Y) where X_2 is independent of Y. Needs the
/// model's marginal density and an analytic true MI.
ZMomentReport z_moment_check(const models::StimulusResponseModel& model, int k, long n, std::uint64_t seed);

struct MarginalShape {
    int index = 0;  // i in Z_i, 2..k
    double skewness = 0.0;
    double skewness_se = 0.0;
    double excess_kurtosis = 0.0;
    double excess_kurtosis_se = 0.0;
};

struct NormalityReport {
    int k = 0;
    long n = 0;
    std::uint64_t seed = 0;
    std::vector<MarginalShape> marginals;
};

/// Skewness and excess kurtosis of each Z_i with the normal-theory standard
/// errors sqrt(6/n) and sqrt(24/n). Throws DomainError for n < 1.
NormalityReport normality_diagnostic(const models::StimulusResponseModel& model, int k, long n,
                                     std::uint64_t seed);

/// Pr[Z_1 < max_{i >= 2} Z_i] by direct simulation of the full k-dimensional
/// Gaussian (symmetric square root of its covariance), mean (0, -alpha, ..., -alpha).
McEstimate gaussian_max_monte_carlo(const pik::GaussianMaxProblem& p, long n, std::uint64_t seed);

/// A random valid moment tuple: Z_1 = rho S + sigma e_1, Z_i = lambda S + tau e_i - alpha
/// for a shared standard normal S, with k in [2, 30].
pik::GaussianMaxProblem random_gaussian_max_problem(Rng& rng);

enum class StaircaseMode { PoissonFormula, MonteCarlo };

/// PoissonFormula: (1/e) sum_{j>=1} 1/(j j!), the large-k limit of the
/// error when each exemplar shares its bin with a Poisson(1) number of
/// others. MonteCarlo: k_bins exemplars uniform on [0, 1); colliding
/// exemplars split the posterior uniformly, so the Bayes error of a set is
/// 1 - (occupied bins) / k_bins.
McEstimate staircase_collision_abe(int k_bins, StaircaseMode mode, long mc_n = 0, std::uint64_t seed = 0);

/// Expected value of the Monte Carlo mode: (1 - 1/k)^k for k = k_bins >= 2, 0 for k = 1.
double staircase_exact_abe(int k_bins);

enum class ModelFamily { Gaussian, Logistic };

/// Member of `family` in dimension d whose true MI is exactly iota:
/// Gaussian: sigma_e = 1, sigma_x^2 = exp(2 iota / d) - 1 in every coordinate;
/// Logistic: B = b I_d with d * I_1(b) = iota.
models::StimulusResponseModel held_iota_model(ModelFamily family, int d, double iota);

struct SweepBudget {
    int n_exemplar_sets = 1000;
    int n_responses_per_set = 200;
};

struct ConvergenceRow {
    int d = 0;
    McEstimate estimate;
    double prediction = 0.0;  // pi_k(sqrt(2 iota))
    double gap = 0.0;         // |estimate - prediction|
};

std::vector<ConvergenceRow> convergence_sweep(ModelFamily family, const std::vector<int>& dims, int k, double iota,
                                              SweepBudget budget, std::uint64_t seed);

}  // namespace hdmi::oracles
