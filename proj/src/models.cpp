#include "hdmi/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "hdmi/error.hpp"
#include "hdmi/normal.hpp"
#include "hdmi/quadrature.hpp"

namespace hdmi::models {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require(bool ok, const char* what) {
    if (!ok) throw DomainError(what);
}

int staircase_bin(double v, int k_bins) {
    if (!(v >= 0.0 && v < 1.0)) return -1;
    return std::min(static_cast<int>(std::floor(v * k_bins)), k_bins - 1);
}

/// Entropy of Bernoulli(sigmoid(t)), stable for large |t|.
double sigmoid_entropy(double t) {
    const double p = sigmoid(t);
    return -p * log_sigmoid(t) - (1.0 - p) * log_sigmoid(-t);
}

double log_normal_density(double y, double mean, double var) {
    const double r = y - mean;
    return -0.5 * (kLog2Pi + std::log(var)) - 0.5 * r * r / var;
}

void check_dim(std::span<const double> v, int expected, const char* what) {
    if (static_cast<int>(v.size()) != expected)
        throw DomainError(std::string(what) + " has dimension " + std::to_string(v.size()) +
                          ", expected " + std::to_string(expected));
}

}  // namespace

// ---------------------------------------------------------------------------
// StimulusResponseModel

StimulusResponseModel::StimulusResponseModel(Params params) : params_(std::move(params)) {
    std::visit(Overloaded{
                   [](const GaussianSequenceParams& p) {
                       require(!p.sigma_x.empty(), "gaussian_sequence: dimension must be >= 1");
                       require(p.sigma_x.size() == p.sigma_e.size(),
                               "gaussian_sequence: sigma_x and sigma_e differ in length");
                       for (double v : p.sigma_x)
                           require(v > 0.0 && std::isfinite(v), "gaussian_sequence: sigma_x must be > 0");
                       for (double v : p.sigma_e)
                           require(v > 0.0 && std::isfinite(v), "gaussian_sequence: sigma_e must be > 0");
                   },
                   [](const MultiLogisticParams& p) {
                       require(p.B.rows() >= 1 && p.B.cols() >= 1, "multi_logistic: p and q must be >= 1");
                       require(p.B.allFinite(), "multi_logistic: coefficients must be finite");
                   },
                   [](const ExpFamilySequenceParams& p) {
                       require(p.d >= 1, "exp_family: block count d must be >= 1");
                       require(std::isfinite(p.kappa), "exp_family: kappa must be finite");
                       if (p.instance == ExpFamilyInstance::GaussianProduct)
                           require(std::abs(p.kappa) < 1.0,
                                   "exp_family: gaussian_product requires |kappa| < 1");
                   },
                   [](const StaircaseParams& p) { require(p.k_bins >= 1, "staircase: k_bins must be >= 1"); },
               },
               params_);
}

StimulusResponseModel StimulusResponseModel::gaussian_sequence(Vector sigma_x, Vector sigma_e) {
    return StimulusResponseModel(GaussianSequenceParams{std::move(sigma_x), std::move(sigma_e)});
}

StimulusResponseModel StimulusResponseModel::gaussian_sequence(int d, double sigma_x, double sigma_e) {
    require(d >= 1, "gaussian_sequence: dimension must be >= 1");
    return gaussian_sequence(Vector(d, sigma_x), Vector(d, sigma_e));
}

StimulusResponseModel StimulusResponseModel::multi_logistic(Eigen::MatrixXd B) {
    return StimulusResponseModel(MultiLogisticParams{std::move(B)});
}

StimulusResponseModel StimulusResponseModel::scaled_identity_logistic(int p, double s) {
    require(p >= 1, "multi_logistic: p must be >= 1");
    return multi_logistic(s * Eigen::MatrixXd::Identity(p, p));
}

StimulusResponseModel StimulusResponseModel::exp_family(ExpFamilyInstance instance, int d, double kappa) {
    return StimulusResponseModel(ExpFamilySequenceParams{instance, d, kappa});
}

StimulusResponseModel StimulusResponseModel::staircase(int k_bins) {
    return StimulusResponseModel(StaircaseParams{k_bins});
}

ModelKind StimulusResponseModel::kind() const {
    return static_cast<ModelKind>(params_.index());
}

int StimulusResponseModel::stimulus_dim() const {
    return std::visit(Overloaded{
                          [](const GaussianSequenceParams& p) { return static_cast<int>(p.sigma_x.size()); },
                          [](const MultiLogisticParams& p) { return static_cast<int>(p.B.rows()); },
                          [](const ExpFamilySequenceParams& p) { return p.d; },
                          [](const StaircaseParams&) { return 1; },
                      },
                      params_);
}

int StimulusResponseModel::response_dim() const {
    return std::visit(Overloaded{
                          [](const GaussianSequenceParams& p) { return static_cast<int>(p.sigma_x.size()); },
                          [](const MultiLogisticParams& p) { return static_cast<int>(p.B.cols()); },
                          [](const ExpFamilySequenceParams& p) { return p.d; },
                          [](const StaircaseParams&) { return 1; },
                      },
                      params_);
}

bool StimulusResponseModel::discrete_responses() const {
    if (kind() == ModelKind::MultiLogistic) return true;
    if (const auto* e = get<ExpFamilySequenceParams>())
        return e->instance == ExpFamilyInstance::LogisticProduct;
    return false;
}

std::string StimulusResponseModel::tag() const {
    std::ostringstream os;
    std::visit(Overloaded{
                   [&](const GaussianSequenceParams& p) { os << "gaussian_sequence(d=" << p.sigma_x.size() << ")"; },
                   [&](const MultiLogisticParams& p) {
                       os << "multi_logistic(p=" << p.B.rows() << ",q=" << p.B.cols() << ")";
                   },
                   [&](const ExpFamilySequenceParams& p) {
                       os << "exp_family("
                          << (p.instance == ExpFamilyInstance::GaussianProduct ? "gaussian_product"
                                                                                : "logistic_product")
                          << ",d=" << p.d << ",kappa=" << p.kappa << ")";
                   },
                   [&](const StaircaseParams& p) { os << "staircase(k_bins=" << p.k_bins << ")"; },
               },
               params_);
    return os.str();
}

// ---------------------------------------------------------------------------
// Datasets

std::vector<int> LabeledDataset::class_counts() const {
    std::vector<int> counts(k, 0);
    for (const auto& r : records) {
        if (r.z < 0 || r.z >= k) throw DomainError("class index out of range");
        ++counts[r.z];
    }
    return counts;
}

void LabeledDataset::refresh_balance() {
    const auto counts = class_counts();
    balanced = !counts.empty() &&
               std::all_of(counts.begin(), counts.end(), [&](int c) { return c == counts.front(); });
    per_class = balanced ? counts.front() : 0;
}

// ---------------------------------------------------------------------------
// Sampling

void sample_stimulus(const StimulusResponseModel& m, Rng& rng, std::span<double> out) {
    std::normal_distribution<double> n01;
    std::uniform_real_distribution<double> u01;
    std::visit(Overloaded{
                   [&](const GaussianSequenceParams& p) {
                       for (std::size_t i = 0; i < p.sigma_x.size(); ++i) out[i] = p.sigma_x[i] * n01(rng);
                   },
                   [&](const MultiLogisticParams& p) {
                       for (Eigen::Index i = 0; i < p.B.rows(); ++i) out[i] = n01(rng);
                   },
                   [&](const ExpFamilySequenceParams& p) {
                       if (p.instance == ExpFamilyInstance::GaussianProduct) {
                           const double sd = 1.0 / std::sqrt(1.0 - p.kappa * p.kappa);
                           for (int i = 0; i < p.d; ++i) out[i] = sd * n01(rng);
                       } else {
                           // Marginal is the mixture 0.5 N(kappa, 1) + 0.5 N(-kappa, 1).
                           for (int i = 0; i < p.d; ++i) {
                               const double sign = u01(rng) < 0.5 ? -1.0 : 1.0;
                               out[i] = sign * p.kappa + n01(rng);
                           }
                       }
                   },
                   [&](const StaircaseParams&) { out[0] = u01(rng); },
               },
               m.params());
}

void sample_response(const StimulusResponseModel& m, std::span<const double> x, Rng& rng,
                     std::span<double> out) {
    std::normal_distribution<double> n01;
    std::uniform_real_distribution<double> u01;
    std::visit(Overloaded{
                   [&](const GaussianSequenceParams& p) {
                       for (std::size_t i = 0; i < p.sigma_e.size(); ++i) out[i] = x[i] + p.sigma_e[i] * n01(rng);
                   },
                   [&](const MultiLogisticParams& p) {
                       const Eigen::Map<const Eigen::VectorXd> xv(x.data(), p.B.rows());
                       const Eigen::VectorXd eta = p.B.transpose() * xv;
                       for (Eigen::Index j = 0; j < eta.size(); ++j) out[j] = u01(rng) < sigmoid(eta(j)) ? 1.0 : 0.0;
                   },
                   [&](const ExpFamilySequenceParams& p) {
                       if (p.instance == ExpFamilyInstance::GaussianProduct) {
                           for (int i = 0; i < p.d; ++i) out[i] = p.kappa * x[i] + n01(rng);
                       } else {
                           for (int i = 0; i < p.d; ++i)
                               out[i] = u01(rng) < sigmoid(2.0 * p.kappa * x[i]) ? 1.0 : 0.0;
                       }
                   },
                   [&](const StaircaseParams& p) {
                       const int bin = staircase_bin(x[0], p.k_bins);
                       out[0] = (bin + u01(rng)) / p.k_bins;
                   },
               },
               m.params());
}

ExemplarSet sample_exemplars(const StimulusResponseModel& m, int k, std::uint64_t seed) {
    if (k < 2) throw DomainError("exemplar count k must be >= 2");
    Rng rng(seed);
    ExemplarSet ex;
    ex.seed = seed;
    ex.exemplars.assign(k, Vector(m.stimulus_dim()));
    for (auto& x : ex.exemplars) sample_stimulus(m, rng, x);
    return ex;
}

LabeledDataset sample_responses(const StimulusResponseModel& m, const ExemplarSet& ex,
                                int n_per_class, std::uint64_t seed, bool balanced) {
    if (n_per_class < 1) throw DomainError("n_per_class must be >= 1");
    const int k = ex.k();
    Rng rng(seed);
    LabeledDataset data;
    data.k = k;
    const std::size_t total = static_cast<std::size_t>(k) * n_per_class;
    data.records.reserve(total);
    const int q = m.response_dim();
    if (balanced) {
        for (int i = 0; i < k; ++i)
            for (int r = 0; r < n_per_class; ++r) {
                Record rec{i, Vector(q)};
                sample_response(m, ex.exemplars[i], rng, rec.y);
                data.records.push_back(std::move(rec));
            }
    } else {
        std::uniform_int_distribution<int> label(0, k - 1);
        for (std::size_t t = 0; t < total; ++t) {
            Record rec{label(rng), Vector(q)};
            sample_response(m, ex.exemplars[rec.z], rng, rec.y);
            data.records.push_back(std::move(rec));
        }
    }
    data.refresh_balance();
    return data;
}

// ---------------------------------------------------------------------------
// Densities

double log_conditional_density(const StimulusResponseModel& m, std::span<const double> x,
                               std::span<const double> y) {
    check_dim(x, m.stimulus_dim(), "stimulus");
    check_dim(y, m.response_dim(), "response");
    return std::visit(
        Overloaded{
            [&](const GaussianSequenceParams& p) {
                double s = 0.0;
                for (std::size_t i = 0; i < p.sigma_e.size(); ++i)
                    s += log_normal_density(y[i], x[i], p.sigma_e[i] * p.sigma_e[i]);
                return s;
            },
            [&](const MultiLogisticParams& p) {
                const Eigen::Map<const Eigen::VectorXd> xv(x.data(), p.B.rows());
                const Eigen::VectorXd eta = p.B.transpose() * xv;
                double s = 0.0;
                for (Eigen::Index j = 0; j < eta.size(); ++j)
                    s += y[j] * log_sigmoid(eta(j)) + (1.0 - y[j]) * log_sigmoid(-eta(j));
                return s;
            },
            [&](const ExpFamilySequenceParams& p) {
                double s = 0.0;
                for (int i = 0; i < p.d; ++i) {
                    if (p.instance == ExpFamilyInstance::GaussianProduct)
                        s += log_normal_density(y[i], p.kappa * x[i], 1.0);
                    else
                        s += log_sigmoid(2.0 * p.kappa * x[i] * (2.0 * y[i] - 1.0));
                }
                return s;
            },
            [&](const StaircaseParams& p) {
                const int bx = staircase_bin(x[0], p.k_bins);
                const int by = staircase_bin(y[0], p.k_bins);
                return (bx >= 0 && bx == by) ? std::log(static_cast<double>(p.k_bins)) : kNegInf;
            },
        },
        m.params());
}

double log_marginal_density(const StimulusResponseModel& m, std::span<const double> y) {
    check_dim(y, m.response_dim(), "response");
    return std::visit(
        Overloaded{
            [&](const GaussianSequenceParams& p) {
                double s = 0.0;
                for (std::size_t i = 0; i < p.sigma_e.size(); ++i)
                    s += log_normal_density(y[i], 0.0, p.sigma_x[i] * p.sigma_x[i] + p.sigma_e[i] * p.sigma_e[i]);
                return s;
            },
            [&](const MultiLogisticParams& p) {
                if (!is_separable(p.B))
                    throw UnsupportedModelError(
                        "log_marginal_density: no closed form for non-separable multi_logistic");
                // Each Y_m is Bernoulli(1/2) by symmetry of X and they are independent.
                return -static_cast<double>(p.B.cols()) * std::numbers::ln2;
            },
            [&](const ExpFamilySequenceParams& p) {
                if (p.instance == ExpFamilyInstance::LogisticProduct) return -p.d * std::numbers::ln2;
                const double var = 1.0 / (1.0 - p.kappa * p.kappa);
                double s = 0.0;
                for (int i = 0; i < p.d; ++i) s += log_normal_density(y[i], 0.0, var);
                return s;
            },
            [&](const StaircaseParams& p) { return staircase_bin(y[0], p.k_bins) >= 0 ? 0.0 : kNegInf; },
        },
        m.params());
}

double exp_family_log_normalizer(const ExpFamilySequenceParams& p) {
    if (p.instance == ExpFamilyInstance::GaussianProduct) return -0.5 * p.d * std::log1p(-p.kappa * p.kappa);
    return 0.5 * p.d * p.kappa * p.kappa;
}

double exp_family_log_joint(const ExpFamilySequenceParams& p, std::span<const double> x,
                            std::span<const double> y) {
    double s = -exp_family_log_normalizer(p);
    for (int i = 0; i < p.d; ++i) {
        s += -0.5 * (kLog2Pi + x[i] * x[i]);
        if (p.instance == ExpFamilyInstance::GaussianProduct) {
            s += -0.5 * (kLog2Pi + y[i] * y[i]) + p.kappa * x[i] * y[i];
        } else {
            s += -std::numbers::ln2 + p.kappa * x[i] * (2.0 * y[i] - 1.0);
        }
    }
    return s;
}

// ---------------------------------------------------------------------------
// ConditionalScorer

ConditionalScorer::ConditionalScorer(const StimulusResponseModel& m, const ExemplarSet& ex)
    : kind_(m.kind()), k_(ex.k()) {
    const int q = m.response_dim();
    std::visit(Overloaded{
                   [&](const GaussianSequenceParams& p) {
                       centres_ = ex.exemplars;
                       half_precision_.resize(q);
                       log_norm_ = 0.0;
                       for (int i = 0; i < q; ++i) {
                           const double var = p.sigma_e[i] * p.sigma_e[i];
                           half_precision_[i] = 0.5 / var;
                           log_norm_ += -0.5 * (kLog2Pi + std::log(var));
                       }
                   },
                   [&](const MultiLogisticParams& p) {
                       for (const auto& x : ex.exemplars) {
                           const Eigen::Map<const Eigen::VectorXd> xv(x.data(), p.B.rows());
                           const Eigen::VectorXd eta = p.B.transpose() * xv;
                           Vector l1(q), l0(q);
                           for (int j = 0; j < q; ++j) {
                               l1[j] = log_sigmoid(eta(j));
                               l0[j] = log_sigmoid(-eta(j));
                           }
                           log_p1_.push_back(std::move(l1));
                           log_p0_.push_back(std::move(l0));
                       }
                   },
                   [&](const ExpFamilySequenceParams& p) {
                       if (p.instance == ExpFamilyInstance::GaussianProduct) {
                           for (const auto& x : ex.exemplars) {
                               Vector c(q);
                               for (int i = 0; i < q; ++i) c[i] = p.kappa * x[i];
                               centres_.push_back(std::move(c));
                           }
                           half_precision_.assign(q, 0.5);
                           log_norm_ = -0.5 * kLog2Pi * q;
                       } else {
                           for (const auto& x : ex.exemplars) {
                               Vector l1(q), l0(q);
                               for (int j = 0; j < q; ++j) {
                                   l1[j] = log_sigmoid(2.0 * p.kappa * x[j]);
                                   l0[j] = log_sigmoid(-2.0 * p.kappa * x[j]);
                               }
                               log_p1_.push_back(std::move(l1));
                               log_p0_.push_back(std::move(l0));
                           }
                       }
                   },
                   [&](const StaircaseParams& p) {
                       k_bins_ = p.k_bins;
                       for (const auto& x : ex.exemplars) bins_.push_back(staircase_bin(x[0], p.k_bins));
                   },
               },
               m.params());
}

void ConditionalScorer::score(std::span<const double> y, std::span<double> out) const {
    if (!log_p1_.empty()) {
        const std::size_t q = y.size();
        for (int i = 0; i < k_; ++i) {
            const double* l1 = log_p1_[i].data();
            const double* l0 = log_p0_[i].data();
            double s = 0.0;
            for (std::size_t j = 0; j < q; ++j) s += y[j] > 0.5 ? l1[j] : l0[j];
            out[i] = s;
        }
    } else if (!centres_.empty()) {
        const std::size_t q = y.size();
        for (int i = 0; i < k_; ++i) {
            const double* c = centres_[i].data();
            double s = 0.0;
            for (std::size_t j = 0; j < q; ++j) {
                const double r = y[j] - c[j];
                s += half_precision_[j] * r * r;
            }
            out[i] = log_norm_ - s;
        }
    } else {
        const int by = staircase_bin(y[0], k_bins_);
        const double hit = std::log(static_cast<double>(k_bins_));
        for (int i = 0; i < k_; ++i) out[i] = (by >= 0 && bins_[i] == by) ? hit : kNegInf;
    }
}

// ---------------------------------------------------------------------------
// Mutual information

bool is_separable(const Eigen::MatrixXd& B) {
    for (Eigen::Index i = 0; i < B.rows(); ++i)
        if ((B.row(i).array() != 0.0).count() > 1) return false;
    for (Eigen::Index j = 0; j < B.cols(); ++j)
        if ((B.col(j).array() != 0.0).count() > 1) return false;
    return true;
}

double logistic_block_mi(double b) {
    if (b == 0.0) return 0.0;
    const double ab = std::abs(b);
    const double h = standard_normal_expectation([&](double z) { return sigmoid_entropy(ab * z); },
                                                 1.0 / ab);
    return std::max(0.0, std::numbers::ln2 - h);
}

double gaussian_block_mi(double sigma_x, double sigma_e) {
    return 0.5 * std::log1p((sigma_x * sigma_x) / (sigma_e * sigma_e));
}

namespace {

MiValue nested_monte_carlo_mi(const StimulusResponseModel& m, int mc_n, std::uint64_t seed,
                              std::optional<int> inner) {
    if (m.kind() == ModelKind::Staircase)
        throw UnsupportedModelError("nested Monte Carlo MI needs a positive conditional density");
    const int outer = mc_n;
    const int pool = inner.value_or(static_cast<int>(std::ceil(std::sqrt(static_cast<double>(mc_n)))));
    if (pool < 1) throw DomainError("inner sample size must be >= 1");

    Rng pool_rng(derive_seed(seed, 0));
    ExemplarSet stimuli;
    stimuli.exemplars.assign(pool, Vector(m.stimulus_dim()));
    for (auto& x : stimuli.exemplars) sample_stimulus(m, pool_rng, x);
    const ConditionalScorer scorer(m, stimuli);

    Rng rng(derive_seed(seed, 1));
    Vector x(m.stimulus_dim()), y(m.response_dim()), scores(pool);
    const double log_pool = std::log(static_cast<double>(pool));
    double sum = 0.0, sum_sq = 0.0;
    for (int t = 0; t < outer; ++t) {
        sample_stimulus(m, rng, x);
        sample_response(m, x, rng, y);
        const double cond = log_conditional_density(m, x, y);
        scorer.score(y, scores);
        const double top = *std::max_element(scores.begin(), scores.end());
        double acc = 0.0;
        for (double s : scores) acc += std::exp(s - top);
        const double log_marginal = top + std::log(acc) - log_pool;
        const double u = cond - log_marginal;
        sum += u;
        sum_sq += u * u;
    }
    const double mean = sum / outer;
    const double var = outer > 1 ? std::max(0.0, (sum_sq - outer * mean * mean) / (outer - 1)) : 0.0;
    return {std::max(0.0, mean), std::sqrt(var / outer), outer, pool};
}

}  // namespace

MiValue true_mi(const StimulusResponseModel& m, std::optional<int> mc_n,
                std::optional<std::uint64_t> seed, MiMethod method, std::optional<int> inner) {
    if (method == MiMethod::NestedMonteCarlo) {
        if (!mc_n || *mc_n < 2) throw DomainError("nested Monte Carlo MI requires mc_n >= 2");
        return nested_monte_carlo_mi(m, *mc_n, seed.value_or(0), inner);
    }
    return std::visit(
        Overloaded{
            [&](const GaussianSequenceParams& p) {
                double s = 0.0;
                for (std::size_t i = 0; i < p.sigma_x.size(); ++i) s += gaussian_block_mi(p.sigma_x[i], p.sigma_e[i]);
                return MiValue{s, 0.0};
            },
            [&](const MultiLogisticParams& p) {
                if (is_separable(p.B)) {
                    double s = 0.0;
                    for (Eigen::Index j = 0; j < p.B.cols(); ++j) s += logistic_block_mi(p.B.col(j).cwiseAbs().maxCoeff());
                    return MiValue{s, 0.0};
                }
                if (method == MiMethod::Analytic)
                    throw UnsupportedModelError("no analytic MI for non-separable multi_logistic");
                if (!mc_n || *mc_n < 2)
                    throw DomainError("non-separable multi_logistic MI requires nested Monte Carlo: pass mc_n");
                return nested_monte_carlo_mi(m, *mc_n, seed.value_or(0), inner);
            },
            [&](const ExpFamilySequenceParams& p) {
                if (p.instance == ExpFamilyInstance::GaussianProduct)
                    return MiValue{-0.5 * p.d * std::log1p(-p.kappa * p.kappa), 0.0};
                if (p.kappa == 0.0) return MiValue{0.0, 0.0};
                // X is a +-kappa mixture; by symmetry condition on the +kappa component.
                const double a = 2.0 * std::abs(p.kappa);
                const double h = standard_normal_expectation(
                    [&](double z) { return sigmoid_entropy(a * (z + std::abs(p.kappa))); }, 1.0 / a);
                return MiValue{p.d * std::max(0.0, std::numbers::ln2 - h), 0.0};
            },
            [&](const StaircaseParams& p) { return MiValue{std::log(static_cast<double>(p.k_bins)), 0.0}; },
        },
        m.params());
}

double logistic_scale_for_mi(int p, double target) {
    if (p < 1) throw DomainError("p must be >= 1");
    if (!(target >= 0.0) || target >= p * std::numbers::ln2)
        throw DomainError("target MI must lie in [0, p log 2)");
    if (target == 0.0) return 0.0;
    double lo = 0.0, hi = 1.0;
    while (p * logistic_block_mi(hi) < target) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e8) throw DomainError("target MI too close to p log 2");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-13 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (p * logistic_block_mi(mid) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace hdmi::models
