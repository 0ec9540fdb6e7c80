#include "hdmi/estimators.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>

#include "hdmi/error.hpp"
#include "hdmi/normal.hpp"
#include "hdmi/pik.hpp"
#include "hdmi/rng.hpp"

namespace hdmi::estimators {

// ---------------------------------------------------------------------------
// ConfusionMatrix

ConfusionMatrix::ConfusionMatrix(int k, std::vector<std::int64_t> counts) : k_(k), counts_(std::move(counts)) {
    if (k < 2) throw DomainError("confusion matrix needs k >= 2");
    if (counts_.size() != static_cast<std::size_t>(k) * k)
        throw DomainError("confusion matrix must have k * k entries");
    for (int i = 0; i < k; ++i) {
        std::int64_t row = 0;
        for (int j = 0; j < k; ++j) {
            const auto c = (*this)(i, j);
            if (c < 0) throw DomainError("confusion matrix counts must be nonnegative");
            row += c;
        }
        if (i == 0) r_ = row;
        if (row != r_)
            throw DomainError("confusion matrix rows must have equal sums (row " + std::to_string(i + 1) + " sums to " +
                              std::to_string(row) + ", row 1 to " + std::to_string(r_) + ")");
    }
    if (r_ < 1) throw DomainError("confusion matrix rows must sum to r >= 1");
}

ConfusionMatrix ConfusionMatrix::from_rows(const std::vector<std::vector<std::int64_t>>& rows) {
    const int k = static_cast<int>(rows.size());
    std::vector<std::int64_t> flat;
    flat.reserve(rows.size() * rows.size());
    for (const auto& row : rows) {
        if (static_cast<int>(row.size()) != k) throw DomainError("confusion matrix must be square");
        flat.insert(flat.end(), row.begin(), row.end());
    }
    return ConfusionMatrix(k, std::move(flat));
}

ConfusionMatrix ConfusionMatrix::diagonal(int k, std::int64_t r) {
    std::vector<std::int64_t> c(static_cast<std::size_t>(k) * k, 0);
    for (int i = 0; i < k; ++i) c[static_cast<std::size_t>(i) * k + i] = r;
    return ConfusionMatrix(k, std::move(c));
}

ConfusionMatrix ConfusionMatrix::uniform(int k, std::int64_t r) {
    if (k < 1 || r % k != 0) throw DomainError("uniform confusion matrix needs r divisible by k");
    return ConfusionMatrix(k, std::vector<std::int64_t>(static_cast<std::size_t>(k) * k, r / k));
}

std::int64_t ConfusionMatrix::trace() const {
    std::int64_t t = 0;
    for (int i = 0; i < k_; ++i) t += (*this)(i, i);
    return t;
}

ConfusionMatrix ConfusionMatrix::permuted(std::span<const int> perm) const {
    if (static_cast<int>(perm.size()) != k_) throw DomainError("permutation length must equal k");
    std::vector<int> seen(k_, 0);
    for (int p : perm) {
        if (p < 0 || p >= k_ || seen[p]++) throw DomainError("not a permutation of 0..k-1");
    }
    std::vector<std::int64_t> out(counts_.size());
    for (int i = 0; i < k_; ++i)
        for (int j = 0; j < k_; ++j) out[static_cast<std::size_t>(i) * k_ + j] = (*this)(perm[i], perm[j]);
    return ConfusionMatrix(k_, std::move(out));
}

// ---------------------------------------------------------------------------
// Errors

double test_error(const ConfusionMatrix& m) {
    const double total = static_cast<double>(m.k()) * static_cast<double>(m.r());
    return static_cast<double>(static_cast<std::int64_t>(m.k()) * m.r() - m.trace()) / total;
}

SmoothedError smooth_error(double e_test, double alpha, int k) {
    if (!(e_test >= 0.0 && e_test <= 1.0)) throw DomainError("test error must lie in [0, 1]");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in [0, 1]");
    if (k < 2) throw DomainError("k must be >= 2");
    const double chance = static_cast<double>(k - 1) / k;
    // Written as a step towards chance so that e_test = chance maps to chance exactly.
    return {e_test + alpha * (chance - e_test), alpha, k, e_test};
}

double default_alpha(std::int64_t r) {
    if (r < 0) throw DomainError("r must be nonnegative");
    return 1.0 / (static_cast<double>(r) + 1.0);
}

// ---------------------------------------------------------------------------
// Method names

std::string_view to_string(Method m) {
    switch (m) {
        case Method::HD: return "hd";
        case Method::Fano: return "fano";
        case Method::CM: return "cm";
        case Method::Naive: return "naive";
        case Method::MLE: return "mle";
    }
    return "?";
}

Method parse_method(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    for (Method m : {Method::HD, Method::Fano, Method::CM, Method::Naive, Method::MLE})
        if (lower == to_string(m)) return m;
    throw ConfigError("unknown estimator method '" + std::string(name) + "' (expected hd, fano, cm, naive, mle)");
}

std::vector<Method> parse_methods(std::string_view list) {
    std::vector<Method> out;
    std::size_t start = 0;
    while (start <= list.size()) {
        const auto end = std::min(list.find(',', start), list.size());
        auto item = list.substr(start, end - start);
        while (!item.empty() && std::isspace(static_cast<unsigned char>(item.front()))) item.remove_prefix(1);
        while (!item.empty() && std::isspace(static_cast<unsigned char>(item.back()))) item.remove_suffix(1);
        if (!item.empty()) out.push_back(parse_method(item));
        start = end + 1;
    }
    if (out.empty()) throw ConfigError("empty estimator method list");
    return out;
}

// ---------------------------------------------------------------------------
// Error-based and plug-in estimators

double hd_value(double e, int k) {
    const double c = pik::pi_k_inverse(e, k);
    return 0.5 * c * c;
}

double fano_value(double e, int k) {
    if (!(e >= 0.0 && e <= 1.0)) throw DomainError("error rate must lie in [0, 1]");
    if (k < 2) throw DomainError("k must be >= 2");
    if (e >= static_cast<double>(k - 1) / k) return 0.0;
    const double v = std::log(static_cast<double>(k)) - binary_entropy(e) - e * std::log(static_cast<double>(k - 1));
    return std::max(0.0, v);
}

double plugin_mi(const Eigen::MatrixXd& joint) {
    const double total = joint.sum();
    if (!(total > 0.0)) throw DomainError("joint table has no mass");
    const Eigen::VectorXd rows = joint.rowwise().sum();
    const Eigen::RowVectorXd cols = joint.colwise().sum();
    // Ratios of unnormalised products: exact for integer counts, so an
    // independent table gives log(1) = 0 with no rounding residue.
    double mi = 0.0;
    for (Eigen::Index i = 0; i < joint.rows(); ++i)
        for (Eigen::Index j = 0; j < joint.cols(); ++j) {
            const double n = joint(i, j);
            if (n > 0.0) mi += n * std::log((n * total) / (rows(i) * cols(j)));
        }
    mi /= total;
    return std::max(0.0, mi);
}

EstimateRecord estimate_hd(const SmoothedError& e) {
    return {.method = Method::HD, .value = hd_value(e.value, e.k), .k = e.k, .alpha = e.alpha, .error = e.value};
}

EstimateRecord estimate_fano(const SmoothedError& e) {
    return {.method = Method::Fano, .value = fano_value(e.value, e.k), .k = e.k, .alpha = e.alpha, .error = e.value};
}

EstimateRecord estimate_cm(const ConfusionMatrix& m) {
    Eigen::MatrixXd joint(m.k(), m.k());
    for (int i = 0; i < m.k(); ++i)
        for (int j = 0; j < m.k(); ++j) joint(i, j) = static_cast<double>(m(i, j));
    const double v = std::min(plugin_mi(joint), std::log(static_cast<double>(m.k())));
    return {.method = Method::CM, .value = v, .k = m.k()};
}

EstimateRecord estimate_naive(const models::LabeledDataset& data) {
    if (data.records.empty()) throw DomainError("naive estimate needs a nonempty dataset");
    std::map<std::vector<double>, int> support;
    std::vector<int> column(data.records.size());
    for (std::size_t t = 0; t < data.records.size(); ++t) {
        const auto& y = data.records[t].y;
        for (double v : y)
            if (v != std::floor(v))
                throw UnsupportedModelError("naive plug-in estimator needs discrete responses");
        column[t] = support.try_emplace(y, static_cast<int>(support.size())).first->second;
    }
    Eigen::MatrixXd joint = Eigen::MatrixXd::Zero(data.k, static_cast<Eigen::Index>(support.size()));
    for (std::size_t t = 0; t < data.records.size(); ++t) {
        const int z = data.records[t].z;
        if (z < 0 || z >= data.k) throw DomainError("class index out of range");
        joint(z, column[t]) += 1.0;
    }
    const double v = std::min(plugin_mi(joint), std::log(static_cast<double>(data.k)));
    return {.method = Method::Naive, .value = v, .k = data.k};
}

// ---------------------------------------------------------------------------
// Logistic MLE

namespace {

struct BinomialDesign {
    Eigen::MatrixXd X;           // k x p
    Eigen::VectorXd trials;      // per exemplar
    Eigen::MatrixXd successes;   // k x q
    double total = 0.0;
};

BinomialDesign aggregate(const models::LabeledDataset& data, const models::ExemplarSet& ex) {
    const int k = ex.k();
    if (data.k != k) throw DomainError("dataset and exemplar set disagree on k");
    if (data.records.empty()) throw DomainError("logistic fit needs data");
    const int p = static_cast<int>(ex.exemplars.front().size());
    const int q = static_cast<int>(data.records.front().y.size());
    BinomialDesign d{Eigen::MatrixXd(k, p), Eigen::VectorXd::Zero(k), Eigen::MatrixXd::Zero(k, q)};
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < p; ++j) d.X(i, j) = ex.exemplars[i][j];
    for (const auto& r : data.records) {
        if (r.z < 0 || r.z >= k) throw DomainError("class index out of range");
        if (static_cast<int>(r.y.size()) != q) throw DomainError("ragged response vectors");
        d.trials(r.z) += 1.0;
        for (int m = 0; m < q; ++m) {
            if (r.y[m] != 0.0 && r.y[m] != 1.0) throw DomainError("logistic fit needs binary responses");
            d.successes(r.z, m) += r.y[m];
        }
    }
    d.total = static_cast<double>(data.records.size());
    return d;
}

double log_likelihood(const BinomialDesign& d, const Eigen::VectorXd& s, const Eigen::VectorXd& eta) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i)
        ll += s(i) * log_sigmoid(eta(i)) + (d.trials(i) - s(i)) * log_sigmoid(-eta(i));
    return ll;
}

}  // namespace

LogisticFit fit_multi_logistic(const models::LabeledDataset& data, const models::ExemplarSet& ex, double tol,
                               int max_iter) {
    const BinomialDesign d = aggregate(data, ex);
    const Eigen::Index p = d.X.cols();
    const Eigen::Index q = d.successes.cols();
    LogisticFit fit{Eigen::MatrixXd::Zero(p, q), std::vector<int>(q, 0), 0.0};

    for (Eigen::Index m = 0; m < q; ++m) {
        const Eigen::VectorXd s = d.successes.col(m);
        Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
        Eigen::VectorXd eta = d.X * beta;
        double ll = log_likelihood(d, s, eta);
        double gnorm = 0.0;
        int iter = 0;
        for (;; ++iter) {
            Eigen::VectorXd mu(eta.size()), w(eta.size());
            for (Eigen::Index i = 0; i < eta.size(); ++i) {
                mu(i) = sigmoid(eta(i));
                w(i) = d.trials(i) * mu(i) * (1.0 - mu(i));
            }
            const Eigen::VectorXd grad = d.X.transpose() * (s - d.trials.cwiseProduct(mu));
            gnorm = grad.norm() / d.total;
            const Eigen::MatrixXd H = d.X.transpose() * w.asDiagonal() * d.X;
            Eigen::VectorXd step = H.ldlt().solve(grad);
            if (!step.allFinite()) step = H.completeOrthogonalDecomposition().solve(grad);
            // On separable data the gradient vanishes while Newton keeps taking
            // unit-size steps, so both must be small.
            if (gnorm < tol && step.norm() <= 1e-6 * (1.0 + beta.norm())) break;
            if (iter >= max_iter)
                throw FitError("logistic fit for response " + std::to_string(m + 1) + " did not converge after " +
                                   std::to_string(max_iter) + " iterations (gradient norm " +
                                   std::to_string(gnorm) + "); the data may be separable",
                               gnorm, iter);
            double t = 1.0;
            for (int halve = 0; halve < 40; ++halve, t *= 0.5) {
                const Eigen::VectorXd cand = beta + t * step;
                const Eigen::VectorXd cand_eta = d.X * cand;
                const double cand_ll = log_likelihood(d, s, cand_eta);
                if (cand_ll >= ll - 1e-12 * std::abs(ll)) {
                    beta = cand;
                    eta = cand_eta;
                    ll = cand_ll;
                    break;
                }
            }
        }
        fit.B.col(m) = beta;
        fit.iterations[m] = iter;
        fit.max_gradient_norm = std::max(fit.max_gradient_norm, gnorm);
    }
    return fit;
}

EstimateRecord estimate_mle_logistic(const models::LabeledDataset& data, const models::ExemplarSet& ex, int mc_n,
                                     std::uint64_t seed) {
    const LogisticFit fit = fit_multi_logistic(data, ex);
    const auto model = models::StimulusResponseModel::multi_logistic(fit.B);
    const auto mi = models::true_mi(model, mc_n, seed);
    return {.method = Method::MLE, .value = mi.value, .k = data.k, .seed = seed};
}

// ---------------------------------------------------------------------------
// k-subsampling

namespace {

void check_subsample_args(int k, std::span<const int> k_values, Method method, int replicates) {
    if (method != Method::HD && method != Method::Fano && method != Method::CM)
        throw DomainError("k-subsampling supports the hd, fano and cm methods only");
    if (replicates < 1) throw DomainError("replicates must be >= 1");
    if (k_values.empty()) throw DomainError("k_values must be nonempty");
    for (int kp : k_values) {
        if (kp < 2) throw DomainError("subsampled k must be >= 2");
        if (kp > k) throw DomainError("subsampled k exceeds the matrix size");
    }
}

// Estimate from a k' x k' table of (possibly fractional) counts with equal row sums.
double subset_estimate(const Eigen::MatrixXd& table, Method method, double alpha) {
    const auto kp = static_cast<int>(table.rows());
    if (method == Method::CM) return std::min(plugin_mi(table), std::log(static_cast<double>(kp)));
    const double e = std::clamp(1.0 - table.trace() / table.sum(), 0.0, 1.0);
    const auto se = smooth_error(e, alpha, kp);
    return method == Method::HD ? hd_value(se.value, kp) : fano_value(se.value, kp);
}

// For each k' draws `replicates` uniform k'-subsets (partial Fisher-Yates
// with Rng(derive_seed(seed, index of k'))) and evaluates `value` on each.
template <class Fn>
std::vector<KSeriesPoint> subset_series(int k, std::span<const int> k_values, int replicates, std::uint64_t seed,
                                        Fn&& value) {
    std::vector<KSeriesPoint> out(k_values.size());
    parallel_for(k_values.size(), [&](std::size_t idx) {
        const int kp = k_values[idx];
        Rng rng(derive_seed(seed, idx));
        std::vector<int> classes(k);
        KSeriesPoint& pt = out[idx];
        pt.k = kp;
        for (int rep = 0; rep < replicates; ++rep) {
            std::iota(classes.begin(), classes.end(), 0);
            for (int i = 0; i < kp; ++i) {
                std::uniform_int_distribution<int> pick(i, k - 1);
                std::swap(classes[i], classes[pick(rng)]);
            }
            std::vector<int> subset(classes.begin(), classes.begin() + kp);
            std::sort(subset.begin(), subset.end());
            pt.values.push_back(value(subset));
        }
        double mean = 0.0;
        for (double v : pt.values) mean += v;
        mean /= replicates;
        double ss = 0.0;
        for (double v : pt.values) ss += (v - mean) * (v - mean);
        pt.mean = mean;
        pt.sd = replicates > 1 ? std::sqrt(ss / (replicates - 1)) : 0.0;
    });
    return out;
}

}  // namespace

std::vector<KSeriesPoint> k_subsample_diagnostic(const ConfusionMatrix& m, std::span<const int> k_values,
                                                 Method method, int replicates, std::uint64_t seed,
                                                 std::optional<double> alpha) {
    check_subsample_args(m.k(), k_values, method, replicates);
    const double a = alpha.value_or(default_alpha(m.r()));
    return subset_series(m.k(), k_values, replicates, seed, [&](const std::vector<int>& cls) {
        // Row-renormalised restriction; rows with no mass on the subset fall back to chance.
        const auto kp = static_cast<int>(cls.size());
        Eigen::MatrixXd cond(kp, kp);
        for (int i = 0; i < kp; ++i) {
            double row = 0.0;
            for (int j = 0; j < kp; ++j) row += static_cast<double>(m(cls[i], cls[j]));
            for (int j = 0; j < kp; ++j)
                cond(i, j) = row > 0.0 ? static_cast<double>(m(cls[i], cls[j])) / row : 1.0 / kp;
        }
        return subset_estimate(cond, method, a);
    });
}

std::vector<KSeriesPoint> k_subsample_rescored(const Eigen::MatrixXd& scores, std::span<const int> labels,
                                               std::span<const int> k_values, Method method, int replicates,
                                               std::uint64_t seed, std::optional<double> alpha) {
    const auto k = static_cast<int>(scores.cols());
    if (static_cast<std::size_t>(scores.rows()) != labels.size())
        throw DomainError("scores and labels disagree on the number of records");
    check_subsample_args(k, k_values, method, replicates);
    std::vector<std::int64_t> per_class(k, 0);
    for (int z : labels) {
        if (z < 0 || z >= k) throw DomainError("label out of range");
        ++per_class[z];
    }
    if (per_class[0] == 0 || std::any_of(per_class.begin(), per_class.end(), [&](auto n) { return n != per_class[0]; }))
        throw DomainError("k-subsampling needs a balanced test set (equal records per class)");
    const double a = alpha.value_or(default_alpha(per_class[0]));
    return subset_series(k, k_values, replicates, seed, [&](const std::vector<int>& cls) {
        const auto kp = static_cast<int>(cls.size());
        std::vector<int> slot(k, -1);
        for (int i = 0; i < kp; ++i) slot[cls[i]] = i;
        Eigen::MatrixXd table = Eigen::MatrixXd::Zero(kp, kp);
        for (std::size_t t = 0; t < labels.size(); ++t) {
            if (slot[labels[t]] < 0) continue;
            int best = 0;
            for (int j = 1; j < kp; ++j)
                if (scores(static_cast<Eigen::Index>(t), cls[j]) > scores(static_cast<Eigen::Index>(t), cls[best])) best = j;
            table(slot[labels[t]], best) += 1.0;
        }
        return subset_estimate(table, method, a);
    });
}

}  // namespace hdmi::estimators
