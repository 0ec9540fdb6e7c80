#include "hdmi/classify.hpp"

#include <algorithm>
#include <cmath>

#include "hdmi/error.hpp"
#include "hdmi/rng.hpp"

namespace hdmi::classify {

std::string_view to_string(RuleKind kind) {
    return kind == RuleKind::BayesOracle ? "bayes_oracle" : "naive_bayes";
}

int ClassificationRule::operator()(std::span<const double> y) const {
    thread_local std::vector<double> scores;
    scores.resize(k_);
    scorer_(y, scores);
    // max_element returns the first maximum, which is the lowest-index tie-break.
    const auto best = std::max_element(scores.begin(), scores.end());
    if (std::isinf(*best) && *best < 0)
        throw DomainError("response has zero density under every class");
    return static_cast<int>(best - scores.begin());
}

void ClassificationRule::scores(std::span<const double> y, std::span<double> out) const {
    if (static_cast<int>(out.size()) != k_) throw DomainError("score buffer must have k entries");
    scorer_(y, out);
}

std::pair<models::LabeledDataset, models::LabeledDataset> split(const models::LabeledDataset& data,
                                                                double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw DomainError("train_fraction must lie in (0, 1)");
    std::vector<std::vector<std::size_t>> by_class(data.k);
    for (std::size_t t = 0; t < data.records.size(); ++t) {
        const int z = data.records[t].z;
        if (z < 0 || z >= data.k) throw DomainError("class index out of range");
        by_class[z].push_back(t);
    }
    models::LabeledDataset train, test;
    train.k = test.k = data.k;
    for (int i = 0; i < data.k; ++i) {
        auto& idx = by_class[i];
        const auto n = static_cast<long>(idx.size());
        if (n < 2)
            throw DomainError("class " + std::to_string(i + 1) + " has " + std::to_string(n) +
                              " records; split needs at least 2 per class");
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
        std::shuffle(idx.begin(), idx.end(), rng);
        const long n_train = std::clamp(std::lround(train_fraction * static_cast<double>(n)), 1L, n - 1);
        // Keep the original record order within each part.
        std::sort(idx.begin(), idx.begin() + n_train);
        std::sort(idx.begin() + n_train, idx.end());
        for (long t = 0; t < n; ++t) (t < n_train ? train : test).records.push_back(data.records[idx[t]]);
    }
    train.refresh_balance();
    test.refresh_balance();
    return {std::move(train), std::move(test)};
}

ClassificationRule bayes_oracle_rule(const models::ExemplarSet& ex, const models::StimulusResponseModel& model) {
    auto scorer = std::make_shared<const models::ConditionalScorer>(model, ex);
    return ClassificationRule(ex.k(), RuleKind::BayesOracle, 0, ex.seed,
                              [scorer](std::span<const double> y, std::span<double> out) { scorer->score(y, out); });
}

ClassificationRule train_naive_bayes(const models::LabeledDataset& train, std::uint64_t seed) {
    const int k = train.k;
    if (k < 2) throw DomainError("naive Bayes needs k >= 2");
    if (train.records.empty()) throw DomainError("naive Bayes needs training data");
    const std::size_t q = train.records.front().y.size();
    std::vector<double> n(k, 0.0);
    std::vector<std::vector<double>> ones(k, std::vector<double>(q, 0.0));
    for (const auto& r : train.records) {
        if (r.z < 0 || r.z >= k) throw DomainError("class index out of range");
        if (r.y.size() != q) throw DomainError("ragged response vectors");
        n[r.z] += 1.0;
        for (std::size_t m = 0; m < q; ++m) {
            if (r.y[m] != 0.0 && r.y[m] != 1.0)
                throw UnsupportedModelError("naive Bayes needs binary response coordinates");
            ones[r.z][m] += r.y[m];
        }
    }
    auto log1 = std::make_shared<std::vector<std::vector<double>>>(k, std::vector<double>(q));
    auto log0 = std::make_shared<std::vector<std::vector<double>>>(k, std::vector<double>(q));
    for (int i = 0; i < k; ++i) {
        if (n[i] == 0.0) throw DomainError("class " + std::to_string(i + 1) + " has no training records");
        for (std::size_t m = 0; m < q; ++m) {
            const double theta = (ones[i][m] + 1.0) / (n[i] + 2.0);
            (*log1)[i][m] = std::log(theta);
            (*log0)[i][m] = std::log1p(-theta);
        }
    }
    return ClassificationRule(k, RuleKind::NaiveBayes, train.records.size(), seed,
                              [log1, log0, q](std::span<const double> y, std::span<double> out) {
                                  if (y.size() != q) throw DomainError("response dimension mismatch");
                                  for (std::size_t i = 0; i < out.size(); ++i) {
                                      const double* l1 = (*log1)[i].data();
                                      const double* l0 = (*log0)[i].data();
                                      double s = 0.0;
                                      for (std::size_t m = 0; m < q; ++m) s += y[m] > 0.5 ? l1[m] : l0[m];
                                      out[i] = s;
                                  }
                              });
}

estimators::ConfusionMatrix evaluate(const ClassificationRule& rule, const models::LabeledDataset& test) {
    if (test.k != rule.k()) throw DomainError("rule and test set disagree on k");
    const auto counts = test.class_counts();
    if (counts.empty() || !std::all_of(counts.begin(), counts.end(), [&](int c) { return c == counts.front(); }))
        throw DomainError("evaluate needs a balanced test set (equal records per class)");
    const int k = test.k;
    std::vector<int> predicted(test.records.size());
    parallel_for(test.records.size(), [&](std::size_t t) { predicted[t] = rule(test.records[t].y); });
    std::vector<std::int64_t> m(static_cast<std::size_t>(k) * k, 0);
    for (std::size_t t = 0; t < test.records.size(); ++t)
        ++m[static_cast<std::size_t>(test.records[t].z) * k + predicted[t]];
    return estimators::ConfusionMatrix(k, std::move(m));
}

Eigen::MatrixXd score_matrix(const ClassificationRule& rule, const models::LabeledDataset& test) {
    if (test.k != rule.k()) throw DomainError("rule and test set disagree on k");
    Eigen::MatrixXd s(static_cast<Eigen::Index>(test.records.size()), rule.k());
    parallel_for(test.records.size(), [&](std::size_t t) {
        std::vector<double> row(rule.k());
        rule.scores(test.records[t].y, row);
        for (int i = 0; i < rule.k(); ++i) s(static_cast<Eigen::Index>(t), i) = row[i];
    });
    return s;
}

}  // namespace hdmi::classify
