#pragma once

// The simulation pipeline: sample -> split -> train -> evaluate -> estimate,
// repeated over replicates and, for sweeps, over a grid of signal strengths.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hdmi/classify.hpp"
#include "hdmi/estimators.hpp"
#include "hdmi/io.hpp"
#include "hdmi/models.hpp"

namespace hdmi::experiment {

enum class GridKind { Scale, MutualInformation };

struct Grid {
    GridKind kind = GridKind::MutualInformation;
    std::vector<double> values;
};

struct ExperimentConfig {
    models::StimulusResponseModel model = models::StimulusResponseModel::staircase(1);
    int k = 20;
    int train_per_class = 1000;
    int test_per_class = 1000;
    classify::RuleKind classifier = classify::RuleKind::NaiveBayes;
    std::optional<double> alpha;  // default 1 / (test_per_class + 1)
    std::vector<estimators::Method> methods{estimators::Method::HD, estimators::Method::Fano,
                                            estimators::Method::CM};
    int replicates = 1;
    std::uint64_t seed = 0;
    int mle_mc_n = 20000;  // outer draws for the fitted model's MI
    std::optional<std::filesystem::path> output;
    std::optional<Grid> grid;  // sweeps only
};

/// Reads the JSON config format documented in the README. Throws ConfigError.
ExperimentConfig parse_config(const io::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Checks model/classifier/method compatibility and sizes. Throws ConfigError.
void validate(const ExperimentConfig& c);

/// Seed of replicate j under base seed b: derive_seed(b, j).
std::uint64_t replicate_seed(std::uint64_t base, int replicate);

struct ReplicateResult {
    int replicate = 0;
    std::uint64_t seed = 0;
    estimators::ConfusionMatrix confusion = estimators::ConfusionMatrix::diagonal(2, 1);
    estimators::SmoothedError error;
    std::vector<estimators::EstimateRecord> estimates;
    /// Methods that failed (e.g. a separable logistic fit), with the reason.
    std::vector<std::pair<estimators::Method, std::string>> failures;
};

/// One replicate of the pipeline for `model` (which overrides c.model).
ReplicateResult run_replicate(const ExperimentConfig& c, const models::StimulusResponseModel& model, int replicate,
                              std::uint64_t seed);

/// Test-set scores of the trained rule for one replicate (same sampling and
/// seeds as run_replicate), for diagnostics that re-classify subsets.
struct ScoredReplicate {
    estimators::ConfusionMatrix confusion = estimators::ConfusionMatrix::diagonal(2, 1);
    Eigen::MatrixXd scores;  // n_test x k
    std::vector<int> labels;
};

ScoredReplicate score_replicate(const ExperimentConfig& c, const models::StimulusResponseModel& model,
                                std::uint64_t seed);

struct SimulationResult {
    std::string model_tag;
    models::MiValue true_mi;
    std::vector<ReplicateResult> replicates;
};

SimulationResult simulate(const ExperimentConfig& c);

/// Writes summary.json, estimates.jsonl and confusion_<replicate>.csv into `dir`.
void write_simulation(const ExperimentConfig& c, const SimulationResult& r, const std::filesystem::path& dir);
io::json simulation_summary(const ExperimentConfig& c, const SimulationResult& r);

struct SweepRow {
    double s = 0.0;
    double true_mi = 0.0;
    double true_mi_se = 0.0;
    estimators::Method method = estimators::Method::HD;
    int replicate = 0;
    std::optional<double> estimate;  // empty when the method failed
    std::uint64_t seed = 0;
};

/// Grid over B = s I_p for a square multi_logistic model; grid point g and
/// replicate j use seed derive_seed(derive_seed(base, g), j).
std::vector<SweepRow> sweep(const ExperimentConfig& c);

/// Columns s,true_mi,true_mi_se,method,replicate,estimate,seed; failed estimates are "nan".
std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace hdmi::experiment
