#pragma once

// Mutual-information estimates from a classifier's confusion matrix, plus the
// nonparametric and parametric comparison estimators.

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hdmi/models.hpp"

namespace hdmi::estimators {

/// k x k counts; M(i, j) = test items of true class i assigned to class j.
/// Every row sums to the per-class test count r.
class ConfusionMatrix {
public:
    /// Throws DomainError if k < 2, a count is negative, or row sums differ or are 0.
    ConfusionMatrix(int k, std::vector<std::int64_t> counts_row_major);
    static ConfusionMatrix from_rows(const std::vector<std::vector<std::int64_t>>& rows);
    static ConfusionMatrix diagonal(int k, std::int64_t r);
    /// Requires r divisible by k.
    static ConfusionMatrix uniform(int k, std::int64_t r);

    int k() const { return k_; }
    std::int64_t r() const { return r_; }
    std::int64_t operator()(int i, int j) const { return counts_[static_cast<std::size_t>(i) * k_ + j]; }
    std::int64_t trace() const;
    const std::vector<std::int64_t>& counts() const { return counts_; }

    /// Relabels classes: entry (i, j) of the result is entry (perm[i], perm[j]) of this.
    ConfusionMatrix permuted(std::span<const int> perm) const;

    bool operator==(const ConfusionMatrix&) const = default;

private:
    int k_;
    std::int64_t r_ = 0;
    std::vector<std::int64_t> counts_;
};

/// Fraction of off-diagonal counts.
double test_error(const ConfusionMatrix& m);

struct SmoothedError {
    double value = 0.0;
    double alpha = 0.0;
    int k = 2;
    double e_test = 0.0;
};

/// (1 - alpha) e_test + alpha (k - 1) / k.
SmoothedError smooth_error(double e_test, double alpha, int k);

/// 1 / (r + 1).
double default_alpha(std::int64_t r);

enum class Method { HD, Fano, CM, Naive, MLE };

std::string_view to_string(Method m);
/// Accepts "hd", "fano", "cm", "naive", "mle" (case-insensitive); throws ConfigError otherwise.
Method parse_method(std::string_view name);
/// Comma-separated list of method names.
std::vector<Method> parse_methods(std::string_view list);

struct EstimateRecord {
    Method method = Method::HD;
    double value = 0.0;  // nats
    int k = 2;
    std::optional<double> alpha;
    std::optional<double> error;  // smoothed error the estimate was computed from
    std::optional<std::uint64_t> seed;
    std::optional<std::string> model_tag;
};

/// 0.5 * pi_k^{-1}(e)^2; zero at or above chance. Throws DivergenceError for e = 0.
double hd_value(double e, int k);
/// log k - H(e) - e log(k - 1), clamped below at 0.
double fano_value(double e, int k);
/// Plug-in mutual information of a nonnegative joint table (normalised internally).
double plugin_mi(const Eigen::MatrixXd& joint);

EstimateRecord estimate_hd(const SmoothedError& e);
EstimateRecord estimate_fano(const SmoothedError& e);
EstimateRecord estimate_cm(const ConfusionMatrix& m);
/// Plug-in MI between class label and the (discrete) response vector.
/// Throws UnsupportedModelError if any response coordinate is non-integral.
EstimateRecord estimate_naive(const models::LabeledDataset& data);

struct LogisticFit {
    Eigen::MatrixXd B;  // p x q
    std::vector<int> iterations;
    double max_gradient_norm = 0.0;
};

/// Per-response logistic regression (no intercept) of y_m on the exemplar of
/// each record, by Newton-Raphson / IRLS with step halving. Converges when the
/// per-observation log-likelihood gradient has Euclidean norm below `tol`.
/// Throws FitError after `max_iter` iterations.
LogisticFit fit_multi_logistic(const models::LabeledDataset& data, const models::ExemplarSet& ex,
                               double tol = 1e-8, int max_iter = 100);

/// True MI of the fitted multi-logistic model (nested Monte Carlo with `mc_n`
/// outer draws unless the fit is separable).
EstimateRecord estimate_mle_logistic(const models::LabeledDataset& data, const models::ExemplarSet& ex,
                                     int mc_n, std::uint64_t seed);

struct KSeriesPoint {
    int k = 2;
    double mean = 0.0;
    double sd = 0.0;
    std::vector<double> values;
};

/// For each k' draws `replicates` random class subsets of size k', restricts
/// the matrix to those rows and columns, renormalises each row, and
/// re-estimates with HD, Fano or CM. alpha defaults to 1 / (r + 1).
std::vector<KSeriesPoint> k_subsample_diagnostic(const ConfusionMatrix& m, std::span<const int> k_values,
                                                 Method method, int replicates, std::uint64_t seed,
                                                 std::optional<double> alpha = std::nullopt);

/// The same diagnostic computed from the classifier's scores: each subset
/// is re-classified by the argmax over its own classes (lowest class index
/// wins ties), which is what a k'-class experiment would have produced.
/// The matrix-only version above cannot see where an item misclassified
/// into an excluded class would land, and so understates the k'-class error.
/// `scores` is n x k; `labels` holds the true class of each row and must
/// contain every class equally often.
std::vector<KSeriesPoint> k_subsample_rescored(const Eigen::MatrixXd& scores, std::span<const int> labels,
                                               std::span<const int> k_values, Method method, int replicates,
                                               std::uint64_t seed, std::optional<double> alpha = std::nullopt);

}  // namespace hdmi::estimators
