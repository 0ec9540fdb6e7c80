#include "hdmi/oracles.hpp"

#include <algorithm>
#include <Eigen/Dense>
#include <boost/math/statistics/univariate_statistics.hpp>
#include <cmath>
#include <limits>
#include <numeric>

#include "hdmi/error.hpp"
#include "hdmi/pik.hpp"
#include "hdmi/rng.hpp"

namespace hdmi::oracles {

namespace {

McEstimate mean_and_se(const std::vector<double>& xs, std::uint64_t seed) {
    const auto [mean, var] = boost::math::statistics::mean_and_sample_variance(xs);
    const double n = static_cast<double>(xs.size());
    return {mean, xs.size() > 1 ? std::sqrt(var / n) : 0.0, static_cast<long>(xs.size()), seed};
}

constexpr long kChunk = 1024;

/// Draws n samples of (Z_2..Z_k) and, if `with_u`, u = log p(Y|X_2) - log p(Y).
/// Rows are laid out contiguously: z[t * (k - 1) + (i - 2)].
void sample_z(const models::StimulusResponseModel& model, int k, long n, std::uint64_t seed, bool with_u,
              std::vector<double>& z, std::vector<double>& u) {
    if (k < 2) throw DomainError("k must be >= 2");
    if (n < 1) throw DomainError("sample size n must be >= 1");
    z.assign(static_cast<std::size_t>(n) * (k - 1), 0.0);
    if (with_u) u.assign(n, 0.0);
    const long chunks = (n + kChunk - 1) / kChunk;
    parallel_for(chunks, [&](std::size_t c) {
        Rng rng(derive_seed(seed, c));
        models::ExemplarSet ex;
        ex.exemplars.assign(k, models::Vector(model.stimulus_dim()));
        models::Vector y(model.response_dim()), scores(k);
        const long begin = static_cast<long>(c) * kChunk;
        const long end = std::min(n, begin + kChunk);
        for (long t = begin; t < end; ++t) {
            for (auto& x : ex.exemplars) models::sample_stimulus(model, rng, x);
            models::sample_response(model, ex.exemplars[0], rng, y);
            for (int i = 0; i < k; ++i) scores[i] = models::log_conditional_density(model, ex.exemplars[i], y);
            for (int i = 1; i < k; ++i) z[static_cast<std::size_t>(t) * (k - 1) + (i - 1)] = scores[i] - scores[0];
            if (with_u) u[t] = scores[1] - models::log_marginal_density(model, y);
        }
    });
}

}  // namespace

// ---------------------------------------------------------------------------

McEstimate mc_average_bayes_error(const models::StimulusResponseModel& model, int k, int n_exemplar_sets,
                                  int n_responses_per_set, std::uint64_t seed) {
    if (k < 2) throw DomainError("k must be >= 2");
    if (n_exemplar_sets < 1 || n_responses_per_set < 1)
        throw DomainError("exemplar-set and response counts must be >= 1");
    std::vector<double> per_set(n_exemplar_sets);
    parallel_for(n_exemplar_sets, [&](std::size_t s) {
        const auto ex = models::sample_exemplars(model, k, derive_seed(seed, 2 * s));
        const models::ConditionalScorer scorer(model, ex);
        Rng rng(derive_seed(seed, 2 * s + 1));
        models::Vector y(model.response_dim()), scores(k);
        double errors = 0.0;
        for (int t = 0; t < n_responses_per_set; ++t) {
            models::sample_response(model, ex.exemplars[0], rng, y);
            scorer.score(y, scores);
            const double top = *std::max_element(scores.begin(), scores.end());
            if (scores[0] < top) {
                errors += 1.0;
            } else {
                const auto tied = std::count(scores.begin(), scores.end(), top);
                errors += 1.0 - 1.0 / static_cast<double>(tied);
            }
        }
        per_set[s] = errors / n_responses_per_set;
    });
    auto est = mean_and_se(per_set, seed);
    if (n_exemplar_sets == 1) {
        const double e = est.value;
        est.std_error = std::sqrt(e * (1.0 - e) / n_responses_per_set);
    }
    est.n_samples = static_cast<long>(n_exemplar_sets) * n_responses_per_set;
    return est;
}

// ---------------------------------------------------------------------------

double MomentCheck::deviation_se() const {
    const double diff = std::abs(estimate - target);
    if (std_error > 0.0) return diff / std_error;
    return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}

bool ZMomentReport::all_within(double n_se) const {
    return std::all_of(moments.begin(), moments.end(), [&](const MomentCheck& m) { return m.within(n_se); });
}

ZMomentReport z_moment_check(const models::StimulusResponseModel& model, int k, long n, std::uint64_t seed) {
    if (k < 3) throw DomainError("z_moment_check needs k >= 3 to estimate covariances");
    const double iota = models::true_mi(model).value;
    std::vector<double> z, u;
    sample_z(model, k, n, seed, true, z, u);
    const int m = k - 1;

    double mu = 0.0;
    for (double v : z) mu += v;
    mu /= static_cast<double>(z.size());

    // Per-draw averages make the draws independent units for the standard errors.
    std::vector<double> means(n), sq(n), cross(n);
    for (long t = 0; t < n; ++t) {
        const double* row = &z[static_cast<std::size_t>(t) * m];
        double s = 0.0, s2 = 0.0, raw = 0.0;
        for (int i = 0; i < m; ++i) {
            raw += row[i];
            const double dv = row[i] - mu;
            s += dv;
            s2 += dv * dv;
        }
        means[t] = raw / m;
        sq[t] = s2 / m;
        cross[t] = (s * s - s2) / (static_cast<double>(m) * (m - 1));
    }
    std::vector<double> u2(n);
    const double u_mean = std::accumulate(u.begin(), u.end(), 0.0) / static_cast<double>(n);
    for (long t = 0; t < n; ++t) u2[t] = (u[t] - u_mean) * (u[t] - u_mean);

    auto check = [&](const char* name, const std::vector<double>& xs, double target) {
        const auto e = mean_and_se(xs, seed);
        return MomentCheck{name, e.value, e.std_error, target};
    };
    ZMomentReport r{iota, k, n, seed, {}};
    r.moments.push_back(check("mean_Z", means, -2.0 * iota));
    r.moments.push_back(check("var_Z", sq, 4.0 * iota));
    r.moments.push_back(check("cov_Z", cross, 2.0 * iota));
    r.moments.push_back(check("mean_u", u, -iota));
    r.moments.push_back(check("var_u", u2, 2.0 * iota));
    return r;
}

NormalityReport normality_diagnostic(const models::StimulusResponseModel& model, int k, long n, std::uint64_t seed) {
    if (n < 1) throw DomainError("normality diagnostic needs n >= 1 samples");
    std::vector<double> z, unused;
    sample_z(model, k, n, seed, false, z, unused);
    const int m = k - 1;
    NormalityReport r{k, n, seed, {}};
    std::vector<double> col(n);
    for (int i = 0; i < m; ++i) {
        for (long t = 0; t < n; ++t) col[t] = z[static_cast<std::size_t>(t) * m + i];
        MarginalShape s;
        s.index = i + 2;
        s.skewness = boost::math::statistics::skewness(col);
        s.excess_kurtosis = boost::math::statistics::excess_kurtosis(col);
        s.skewness_se = std::sqrt(6.0 / static_cast<double>(n));
        s.excess_kurtosis_se = std::sqrt(24.0 / static_cast<double>(n));
        r.marginals.push_back(s);
    }
    return r;
}

// ---------------------------------------------------------------------------

McEstimate gaussian_max_monte_carlo(const pik::GaussianMaxProblem& p, long n, std::uint64_t seed) {
    if (p.k < 2) throw DomainError("k must be >= 2");
    if (n < 1) throw DomainError("n must be >= 1");
    const int k = p.k;
    Eigen::MatrixXd cov(k, k);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
            if (i == 0 && j == 0)
                cov(i, j) = p.beta;
            else if (i == 0 || j == 0)
                cov(i, j) = p.gamma;
            else
                cov(i, j) = i == j ? p.delta : p.epsilon;
        }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff()))
        throw DomainError("moment tuple does not define a valid covariance matrix");
    const Eigen::MatrixXd root = es.operatorSqrt();
    const long chunks = (n + kChunk - 1) / kChunk;
    std::vector<long> hits(chunks, 0);
    parallel_for(chunks, [&](std::size_t c) {
        Rng rng(derive_seed(seed, c));
        std::normal_distribution<double> n01;
        Eigen::VectorXd g(k), z(k);
        const long begin = static_cast<long>(c) * kChunk;
        const long end = std::min(n, begin + kChunk);
        for (long t = begin; t < end; ++t) {
            for (int i = 0; i < k; ++i) g(i) = n01(rng);
            z.noalias() = root * g;
            const double top = (z.tail(k - 1).array() - p.alpha).maxCoeff();
            hits[c] += z(0) < top;
        }
    });
    const double phat = static_cast<double>(std::accumulate(hits.begin(), hits.end(), 0L)) / n;
    return {phat, std::sqrt(phat * (1.0 - phat) / n), n, seed};
}

pik::GaussianMaxProblem random_gaussian_max_problem(Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double lambda = 1.5 * u(rng), tau = 0.3 + 1.7 * u(rng);
    const double rho = -1.0 + 2.5 * u(rng), sigma = 0.1 + 1.4 * u(rng);
    pik::GaussianMaxProblem p;
    p.alpha = -1.0 + 4.0 * u(rng);
    p.beta = rho * rho + sigma * sigma;
    p.gamma = rho * lambda;
    p.delta = lambda * lambda + tau * tau;
    p.epsilon = lambda * lambda;
    p.k = 2 + static_cast<int>(29 * u(rng));
    return p;
}

// ---------------------------------------------------------------------------

McEstimate staircase_collision_abe(int k_bins, StaircaseMode mode, long mc_n, std::uint64_t seed) {
    if (k_bins < 1) throw DomainError("k_bins must be >= 1");
    if (mode == StaircaseMode::PoissonFormula) {
        double sum = 0.0, factorial = 1.0;
        for (int j = 1;; ++j) {
            factorial *= j;
            const double term = 1.0 / (j * factorial);
            sum += term;
            if (term < 1e-15) break;
        }
        return {std::exp(-1.0) * sum, 0.0, 0, seed};
    }
    if (mc_n < 1) throw DomainError("monte_carlo mode needs mc_n >= 1");
    if (k_bins == 1) return {0.0, 0.0, mc_n, seed};
    std::vector<double> errors(mc_n);
    const long chunks = (mc_n + kChunk - 1) / kChunk;
    parallel_for(chunks, [&](std::size_t c) {
        Rng rng(derive_seed(seed, c));
        std::uniform_real_distribution<double> u01;
        std::vector<char> hit(k_bins);
        const long begin = static_cast<long>(c) * kChunk;
        const long end = std::min(mc_n, begin + kChunk);
        for (long t = begin; t < end; ++t) {
            std::fill(hit.begin(), hit.end(), 0);
            int occupied = 0;
            for (int i = 0; i < k_bins; ++i) {
                const int b = std::min(static_cast<int>(u01(rng) * k_bins), k_bins - 1);
                occupied += !hit[b];
                hit[b] = 1;
            }
            errors[t] = 1.0 - static_cast<double>(occupied) / k_bins;
        }
    });
    return mean_and_se(errors, seed);
}

double staircase_exact_abe(int k_bins) {
    if (k_bins < 1) throw DomainError("k_bins must be >= 1");
    if (k_bins == 1) return 0.0;
    return std::pow(1.0 - 1.0 / k_bins, k_bins);
}

// ---------------------------------------------------------------------------

models::StimulusResponseModel held_iota_model(ModelFamily family, int d, double iota) {
    if (d < 1) throw DomainError("dimension must be >= 1");
    if (!(iota >= 0.0)) throw DomainError("iota must be >= 0");
    if (family == ModelFamily::Gaussian) {
        if (iota == 0.0) throw DomainError("the Gaussian family needs iota > 0 (sigma_x must be positive)");
        const double sx = std::sqrt(std::expm1(2.0 * iota / d));
        return models::StimulusResponseModel::gaussian_sequence(d, sx, 1.0);
    }
    return models::StimulusResponseModel::scaled_identity_logistic(d, models::logistic_scale_for_mi(d, iota));
}

std::vector<ConvergenceRow> convergence_sweep(ModelFamily family, const std::vector<int>& dims, int k, double iota,
                                              SweepBudget budget, std::uint64_t seed) {
    if (dims.empty()) throw DomainError("dims must be nonempty");
    const double prediction = pik::pi_k(k, std::sqrt(2.0 * iota));
    std::vector<ConvergenceRow> rows;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        const auto model = held_iota_model(family, dims[i], iota);
        ConvergenceRow row;
        row.d = dims[i];
        row.estimate = mc_average_bayes_error(model, k, budget.n_exemplar_sets, budget.n_responses_per_set,
                                              derive_seed(seed, i));
        row.prediction = prediction;
        row.gap = std::abs(row.estimate.value - prediction);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace hdmi::oracles
