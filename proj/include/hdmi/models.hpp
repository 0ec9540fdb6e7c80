#pragma once

// Generative stimulus-response channels sampled under stratified sampling:
// k exemplar stimuli are drawn from the marginal G, then responses are drawn
// repeatedly from p(y | exemplar).

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "hdmi/rng.hpp"

namespace hdmi::models {

using Vector = std::vector<double>;

/// X ~ N(0, diag sigma_x^2), Y = X + E, E ~ N(0, diag sigma_e^2).
struct GaussianSequenceParams {
    Vector sigma_x;
    Vector sigma_e;
};

/// X ~ N(0, I_p), Y_m | X = x ~ Bernoulli(sigmoid(x^T B_m)) for each column m of B.
struct MultiLogisticParams {
    Eigen::MatrixXd B;  // p x q
};

enum class ExpFamilyInstance { GaussianProduct, LogisticProduct };

/// d independent blocks with joint density proportional to
/// b_x(x) b_y(y) exp(kappa t(x, y)); both instances use a standard normal b_x.
///   GaussianProduct: b_y standard normal, t = x y (requires |kappa| < 1).
///   LogisticProduct: b_y uniform on {0, 1}, t = x (2y - 1).
struct ExpFamilySequenceParams {
    ExpFamilyInstance instance = ExpFamilyInstance::GaussianProduct;
    int d = 1;
    double kappa = 0.0;
};

/// Uniform stimulus on [0, 1); response uniform on the stimulus' bin of width 1/k_bins.
struct StaircaseParams {
    int k_bins = 1;
};

enum class ModelKind { GaussianSequence, MultiLogistic, ExpFamilySequence, Staircase };

class StimulusResponseModel {
public:
    using Params = std::variant<GaussianSequenceParams, MultiLogisticParams,
                                ExpFamilySequenceParams, StaircaseParams>;

    /// Validates parameters; throws DomainError.
    explicit StimulusResponseModel(Params params);

    static StimulusResponseModel gaussian_sequence(Vector sigma_x, Vector sigma_e);
    /// Equal per-coordinate variances in d dimensions.
    static StimulusResponseModel gaussian_sequence(int d, double sigma_x, double sigma_e);
    static StimulusResponseModel multi_logistic(Eigen::MatrixXd B);
    static StimulusResponseModel scaled_identity_logistic(int p, double s);
    static StimulusResponseModel exp_family(ExpFamilyInstance instance, int d, double kappa);
    static StimulusResponseModel staircase(int k_bins);

    ModelKind kind() const;
    const Params& params() const { return params_; }
    int stimulus_dim() const;
    int response_dim() const;
    /// Responses take finitely many values (binary or bin-free discrete).
    bool discrete_responses() const;
    /// Short human-readable description, e.g. "multi_logistic(p=10,q=10)".
    std::string tag() const;

    template <class T>
    const T* get() const { return std::get_if<T>(&params_); }

private:
    Params params_;
};

struct ExemplarSet {
    std::vector<Vector> exemplars;
    std::uint64_t seed = 0;

    int k() const { return static_cast<int>(exemplars.size()); }
};

struct Record {
    int z = 0;  // class index, 0-based
    Vector y;
};

struct LabeledDataset {
    int k = 0;
    std::vector<Record> records;
    bool balanced = false;
    int per_class = 0;  // meaningful when balanced

    std::vector<int> class_counts() const;
    /// Recomputes `balanced` and `per_class` from the records.
    void refresh_balance();
};

void sample_stimulus(const StimulusResponseModel& m, Rng& rng, std::span<double> out);
void sample_response(const StimulusResponseModel& m, std::span<const double> x, Rng& rng,
                     std::span<double> out);

/// k i.i.d. draws from the stimulus marginal; deterministic in `seed`.
ExemplarSet sample_exemplars(const StimulusResponseModel& m, int k, std::uint64_t seed);

/// Balanced: exactly n_per_class responses per exemplar, grouped by class.
/// Unbalanced: k * n_per_class responses with uniformly drawn class labels.
LabeledDataset sample_responses(const StimulusResponseModel& m, const ExemplarSet& ex,
                                int n_per_class, std::uint64_t seed, bool balanced = true);

/// log p(y | x) including all normalizing constants. Staircase returns -inf
/// off the stimulus' bin.
double log_conditional_density(const StimulusResponseModel& m, std::span<const double> x,
                               std::span<const double> y);

/// log p(y). Available in closed form for every kind except non-separable
/// MultiLogistic, which throws UnsupportedModelError.
double log_marginal_density(const StimulusResponseModel& m, std::span<const double> y);

/// log of the exponential-family normalizer Z_d.
double exp_family_log_normalizer(const ExpFamilySequenceParams& p);

/// log p(x, y) of the exponential-family sequence model from its carrier,
/// sufficient statistic and normalizer.
double exp_family_log_joint(const ExpFamilySequenceParams& p, std::span<const double> x,
                            std::span<const double> y);

/// Precomputes per-exemplar quantities so that log p(y | x_i) for all i can be
/// evaluated quickly. Agrees with log_conditional_density.
class ConditionalScorer {
public:
    ConditionalScorer(const StimulusResponseModel& m, const ExemplarSet& ex);

    int k() const { return k_; }
    void score(std::span<const double> y, std::span<double> out) const;

private:
    ModelKind kind_;
    int k_;
    // Binary kinds: per exemplar, log P(y_m = 1 | x) and log P(y_m = 0 | x).
    std::vector<Vector> log_p1_;
    std::vector<Vector> log_p0_;
    // Gaussian kinds: per exemplar, the conditional mean of y; shared precisions.
    std::vector<Vector> centres_;
    Vector half_precision_;
    double log_norm_ = 0.0;
    // Staircase: bin of each exemplar.
    std::vector<int> bins_;
    int k_bins_ = 1;
};

/// B has at most one non-zero per row and per column, so responses depend on
/// disjoint stimulus coordinates and the model factorizes.
bool is_separable(const Eigen::MatrixXd& B);

/// I(X; Y) for scalar X ~ N(0,1), Y ~ Bernoulli(sigmoid(b X)).
double logistic_block_mi(double b);
/// I(X; Y) for scalar X ~ N(0, sx^2), Y = X + N(0, se^2).
double gaussian_block_mi(double sigma_x, double sigma_e);

enum class MiMethod { Auto, Analytic, NestedMonteCarlo };

struct MiValue {
    double value = 0.0;
    double std_error = 0.0;
    /// Nested Monte Carlo only: outer and inner sample sizes. The inner
    /// log-average is biased low by O(1 / inner), so `value` is biased high by
    /// the same order.
    int outer_samples = 0;
    int inner_samples = 0;
};

/// Mutual information in nats. Closed form or quadrature where available
/// (std_error 0); nested Monte Carlo for non-separable MultiLogistic, which
/// requires mc_n. `inner` overrides the default inner sample size ceil(sqrt(mc_n)).
MiValue true_mi(const StimulusResponseModel& m, std::optional<int> mc_n = std::nullopt,
                std::optional<std::uint64_t> seed = std::nullopt, MiMethod method = MiMethod::Auto,
                std::optional<int> inner = std::nullopt);

/// Coefficient b >= 0 with p * logistic_block_mi(b) = target (target < p log 2).
double logistic_scale_for_mi(int p, double target);

}  // namespace hdmi::models
