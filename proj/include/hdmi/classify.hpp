#pragma once

// Classification rules for the exemplar-identification task and their
// evaluation on held-out data.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hdmi/estimators.hpp"
#include "hdmi/models.hpp"

namespace hdmi::classify {

enum class RuleKind { BayesOracle, NaiveBayes };

std::string_view to_string(RuleKind kind);

/// Immutable map from a response vector to a class index in [0, k).
/// Ties always go to the lowest index.
class ClassificationRule {
public:
    int k() const { return k_; }
    RuleKind kind() const { return kind_; }
    std::size_t training_size() const { return training_size_; }
    std::uint64_t seed() const { return seed_; }

    int operator()(std::span<const double> y) const;
    /// Per-class scores whose argmax is the decision; `out` has size k.
    void scores(std::span<const double> y, std::span<double> out) const;

private:
    friend ClassificationRule bayes_oracle_rule(const models::ExemplarSet&, const models::StimulusResponseModel&);
    friend ClassificationRule train_naive_bayes(const models::LabeledDataset&, std::uint64_t);

    using Scorer = std::function<void(std::span<const double>, std::span<double>)>;
    ClassificationRule(int k, RuleKind kind, std::size_t training_size, std::uint64_t seed, Scorer scorer)
        : k_(k), kind_(kind), training_size_(training_size), seed_(seed), scorer_(std::move(scorer)) {}

    int k_;
    RuleKind kind_;
    std::size_t training_size_;
    std::uint64_t seed_;
    Scorer scorer_;
};

/// Stratified split: within each class, a seeded shuffle assigns
/// round(train_fraction * n_i) records (at least 1, at most n_i - 1) to training.
std::pair<models::LabeledDataset, models::LabeledDataset> split(const models::LabeledDataset& data,
                                                                double train_fraction, std::uint64_t seed);

/// argmax_i log p(y | x_i).
ClassificationRule bayes_oracle_rule(const models::ExemplarSet& ex, const models::StimulusResponseModel& model);

/// Bernoulli naive Bayes with add-one smoothing on binary responses.
/// `seed` is recorded as provenance only.
ClassificationRule train_naive_bayes(const models::LabeledDataset& train, std::uint64_t seed = 0);

/// n x k matrix of rule scores for each test record, in record order.
Eigen::MatrixXd score_matrix(const ClassificationRule& rule, const models::LabeledDataset& test);

/// Confusion matrix of `rule` on a balanced test set.
estimators::ConfusionMatrix evaluate(const ClassificationRule& rule, const models::LabeledDataset& test);

}  // namespace hdmi::classify
