#include "hdmi/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "hdmi/error.hpp"
#include "hdmi/rng.hpp"

namespace hdmi::experiment {

using estimators::Method;

namespace {

int positive_int(const io::json& j, const char* key, int fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 1 || v.get<long long>() > 1'000'000'000)
        throw ConfigError(std::string("config field '") + key + "' must be a positive integer");
    return v.get<int>();
}

bool binary_responses(const models::StimulusResponseModel& m) { return m.discrete_responses(); }

}  // namespace

ExperimentConfig parse_config(const io::json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    static const std::vector<std::string> known{"schema_version", "model",      "k",          "train_per_class",
                                                "test_per_class", "classifier", "alpha",      "methods",
                                                "replicates",     "seed",       "mle_mc_n",   "output",
                                                "grid"};
    for (const auto& [key, _] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError("unknown config field '" + key + "'");
    if (!j.contains("model")) throw ConfigError("config is missing 'model'");

    ExperimentConfig c;
    try {
        c.model = io::parse_model(j.at("model"));
    } catch (const DomainError& e) {
        throw ConfigError(std::string("invalid model: ") + e.what());
    }
    c.k = positive_int(j, "k", c.k);
    c.train_per_class = positive_int(j, "train_per_class", c.train_per_class);
    c.test_per_class = positive_int(j, "test_per_class", c.test_per_class);
    c.replicates = positive_int(j, "replicates", c.replicates);
    c.mle_mc_n = positive_int(j, "mle_mc_n", c.mle_mc_n);
    if (j.contains("classifier")) {
        const auto& v = j.at("classifier");
        if (v == "naive_bayes")
            c.classifier = classify::RuleKind::NaiveBayes;
        else if (v == "bayes_oracle")
            c.classifier = classify::RuleKind::BayesOracle;
        else
            throw ConfigError("'classifier' must be naive_bayes or bayes_oracle");
    }
    if (j.contains("alpha") && !j.at("alpha").is_null()) {
        if (!j.at("alpha").is_number()) throw ConfigError("'alpha' must be a number or null");
        c.alpha = j.at("alpha").get<double>();
        if (!(*c.alpha >= 0.0 && *c.alpha <= 1.0)) throw ConfigError("'alpha' must lie in [0, 1]");
    }
    if (j.contains("methods")) {
        const auto& v = j.at("methods");
        if (v.is_string()) {
            c.methods = estimators::parse_methods(v.get<std::string>());
        } else if (v.is_array()) {
            c.methods.clear();
            for (const auto& m : v) {
                if (!m.is_string()) throw ConfigError("'methods' entries must be strings");
                c.methods.push_back(estimators::parse_method(m.get<std::string>()));
            }
            if (c.methods.empty()) throw ConfigError("'methods' must not be empty");
        } else {
            throw ConfigError("'methods' must be a list or a comma-separated string");
        }
    }
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_unsigned()) throw ConfigError("'seed' must be a nonnegative integer");
        c.seed = j.at("seed").get<std::uint64_t>();
    }
    if (j.contains("output") && !j.at("output").is_null()) {
        if (!j.at("output").is_string()) throw ConfigError("'output' must be a path string");
        c.output = j.at("output").get<std::string>();
    }
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        if (!g.is_object() || !g.contains("kind") || !g.contains("values") || !g.at("values").is_array())
            throw ConfigError("'grid' must be {\"kind\": \"mi\" | \"scale\", \"values\": [...]}");
        Grid grid;
        if (g.at("kind") == "mi")
            grid.kind = GridKind::MutualInformation;
        else if (g.at("kind") == "scale")
            grid.kind = GridKind::Scale;
        else
            throw ConfigError("grid 'kind' must be mi or scale");
        for (const auto& v : g.at("values")) {
            if (!v.is_number()) throw ConfigError("grid values must be numbers");
            grid.values.push_back(v.get<double>());
        }
        c.grid = std::move(grid);
    }
    validate(c);
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    return parse_config(io::parse_json(io::read_text(path), "config file"));
}

void validate(const ExperimentConfig& c) {
    if (c.k < 2) throw ConfigError("'k' must be >= 2");
    if (c.train_per_class < 1 || c.test_per_class < 1)
        throw ConfigError("train_per_class and test_per_class must be >= 1");
    const bool binary = binary_responses(c.model);
    if (c.classifier == classify::RuleKind::NaiveBayes && !binary)
        throw ConfigError("naive_bayes needs binary responses; use bayes_oracle for " + c.model.tag());
    for (Method m : c.methods) {
        if (m == Method::Naive && !binary)
            throw ConfigError("the naive plug-in estimator needs discrete responses; " + c.model.tag() +
                              " has continuous responses");
        if (m == Method::MLE && c.model.kind() != models::ModelKind::MultiLogistic)
            throw ConfigError("the mle estimator is defined for multi_logistic models only");
    }
    if (c.grid) {
        if (c.grid->values.empty()) throw ConfigError("grid must have at least one value");
        const auto* l = c.model.get<models::MultiLogisticParams>();
        if (!l || l->B.rows() != l->B.cols())
            throw ConfigError("sweeps vary B = s I and need a square multi_logistic model");
        const double cap = static_cast<double>(l->B.rows()) * std::log(2.0);
        for (double v : c.grid->values) {
            if (!std::isfinite(v) || v < 0.0) throw ConfigError("grid values must be finite and >= 0");
            if (c.grid->kind == GridKind::MutualInformation && v >= cap)
                throw ConfigError("grid MI values must be below p log 2 = " + io::format_double(cap));
        }
    }
}

std::uint64_t replicate_seed(std::uint64_t base, int replicate) {
    return derive_seed(base, static_cast<std::uint64_t>(replicate));
}

namespace {

struct Pipeline {
    models::ExemplarSet ex;
    models::LabeledDataset data, test;
    classify::ClassificationRule rule;
};

// Sub-streams of a replicate seed: 0 exemplars, 1 responses, 2 split, 3 MLE.
Pipeline prepare(const ExperimentConfig& c, const models::StimulusResponseModel& model, std::uint64_t seed) {
    auto ex = models::sample_exemplars(model, c.k, derive_seed(seed, 0));
    const int per_class = c.train_per_class + c.test_per_class;
    auto data = models::sample_responses(model, ex, per_class, derive_seed(seed, 1));
    const double fraction = static_cast<double>(c.train_per_class) / per_class;
    auto [train, test] = classify::split(data, fraction, derive_seed(seed, 2));
    auto rule = c.classifier == classify::RuleKind::NaiveBayes ? classify::train_naive_bayes(train, seed)
                                                                : classify::bayes_oracle_rule(ex, model);
    return {std::move(ex), std::move(data), std::move(test), std::move(rule)};
}

}  // namespace

ScoredReplicate score_replicate(const ExperimentConfig& c, const models::StimulusResponseModel& model,
                                std::uint64_t seed) {
    const Pipeline pl = prepare(c, model, seed);
    ScoredReplicate s;
    s.confusion = classify::evaluate(pl.rule, pl.test);
    s.scores = classify::score_matrix(pl.rule, pl.test);
    for (const auto& rec : pl.test.records) s.labels.push_back(rec.z);
    return s;
}

ReplicateResult run_replicate(const ExperimentConfig& c, const models::StimulusResponseModel& model, int replicate,
                              std::uint64_t seed) {
    const Pipeline pl = prepare(c, model, seed);
    const auto& [ex, data, test, rule] = pl;
    ReplicateResult r;
    r.replicate = replicate;
    r.seed = seed;
    r.confusion = classify::evaluate(rule, test);
    const double alpha = c.alpha.value_or(estimators::default_alpha(r.confusion.r()));
    r.error = estimators::smooth_error(estimators::test_error(r.confusion), alpha, c.k);

    for (Method m : c.methods) {
        try {
            estimators::EstimateRecord rec;
            switch (m) {
                case Method::HD: rec = estimators::estimate_hd(r.error); break;
                case Method::Fano: rec = estimators::estimate_fano(r.error); break;
                case Method::CM: rec = estimators::estimate_cm(r.confusion); break;
                case Method::Naive: rec = estimators::estimate_naive(data); break;
                case Method::MLE: rec = estimators::estimate_mle_logistic(data, ex, c.mle_mc_n, derive_seed(seed, 3)); break;
            }
            rec.seed = seed;
            rec.model_tag = model.tag();
            r.estimates.push_back(std::move(rec));
        } catch (const FitError& e) {
            r.failures.emplace_back(m, e.what());
        } catch (const DivergenceError& e) {
            r.failures.emplace_back(m, e.what());
        }
    }
    return r;
}

namespace {

models::MiValue oracle_mi(const ExperimentConfig& c, const models::StimulusResponseModel& model) {
    return models::true_mi(model, c.mle_mc_n, derive_seed(c.seed, 0xC0FFEE));
}

}  // namespace

SimulationResult simulate(const ExperimentConfig& c) {
    validate(c);
    SimulationResult out;
    out.model_tag = c.model.tag();
    out.true_mi = oracle_mi(c, c.model);
    out.replicates.resize(c.replicates);
    parallel_for(c.replicates, [&](std::size_t j) {
        out.replicates[j] = run_replicate(c, c.model, static_cast<int>(j), replicate_seed(c.seed, static_cast<int>(j)));
    });
    return out;
}

io::json simulation_summary(const ExperimentConfig& c, const SimulationResult& r) {
    io::json methods = io::json::object();
    for (Method m : c.methods) {
        std::vector<double> vals;
        for (const auto& rep : r.replicates)
            for (const auto& e : rep.estimates)
                if (e.method == m) vals.push_back(e.value);
        double mean = 0.0, ss = 0.0;
        for (double v : vals) mean += v;
        if (!vals.empty()) mean /= static_cast<double>(vals.size());
        for (double v : vals) ss += (v - mean) * (v - mean);
        const double sd = vals.size() > 1 ? std::sqrt(ss / static_cast<double>(vals.size() - 1)) : 0.0;
        methods[std::string(estimators::to_string(m))] = {
            {"n", vals.size()},
            {"mean", vals.empty() ? io::json(nullptr) : io::json(mean)},
            {"sd", sd},
            {"se_of_mean", vals.size() > 1 ? sd / std::sqrt(static_cast<double>(vals.size())) : 0.0},
            {"failures", r.replicates.size() - vals.size()}};
    }
    io::json reps = io::json::array();
    for (const auto& rep : r.replicates) {
        io::json fails = io::json::array();
        for (const auto& [m, why] : rep.failures) fails.push_back({{"method", estimators::to_string(m)}, {"reason", why}});
        reps.push_back({{"replicate", rep.replicate},
                        {"seed", rep.seed},
                        {"error", io::to_json(rep.error)},
                        {"failures", fails}});
    }
    return {{"schema_version", io::kSchemaVersion},
            {"model", io::model_to_json(c.model)},
            {"model_tag", r.model_tag},
            {"k", c.k},
            {"train_per_class", c.train_per_class},
            {"test_per_class", c.test_per_class},
            {"classifier", classify::to_string(c.classifier)},
            {"base_seed", c.seed},
            {"true_mi", {{"value", r.true_mi.value}, {"std_error", r.true_mi.std_error}}},
            {"methods", methods},
            {"replicates", reps}};
}

void write_simulation(const ExperimentConfig& c, const SimulationResult& r, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "'");
    std::string lines;
    for (const auto& rep : r.replicates)
        for (const auto& e : rep.estimates) {
            auto j = io::to_json(e);
            j["replicate"] = rep.replicate;
            lines += j.dump() + '\n';
        }
    io::write_atomic(dir / "estimates.jsonl", lines);
    for (const auto& rep : r.replicates) {
        char name[32];
        std::snprintf(name, sizeof name, "confusion_%03d.csv", rep.replicate);
        io::write_atomic(dir / name, io::format_confusion_csv(rep.confusion));
    }
    io::write_atomic(dir / "summary.json", simulation_summary(c, r).dump(2) + '\n');
}

std::vector<SweepRow> sweep(const ExperimentConfig& c) {
    validate(c);
    if (!c.grid) throw ConfigError("sweep needs a 'grid'");
    const int p = static_cast<int>(c.model.get<models::MultiLogisticParams>()->B.rows());
    const std::size_t G = c.grid->values.size();
    const std::size_t R = static_cast<std::size_t>(c.replicates);

    std::vector<double> scales(G);
    std::vector<models::MiValue> truth(G);
    for (std::size_t g = 0; g < G; ++g) {
        const double v = c.grid->values[g];
        scales[g] = c.grid->kind == GridKind::Scale ? v : models::logistic_scale_for_mi(p, v);
        truth[g] = models::true_mi(models::StimulusResponseModel::scaled_identity_logistic(p, scales[g]));
    }
    std::vector<ReplicateResult> results(G * R);
    parallel_for(G * R, [&](std::size_t idx) {
        const std::size_t g = idx / R, j = idx % R;
        const auto model = models::StimulusResponseModel::scaled_identity_logistic(p, scales[g]);
        results[idx] = run_replicate(c, model, static_cast<int>(j), derive_seed(derive_seed(c.seed, g), j));
    });

    std::vector<SweepRow> rows;
    rows.reserve(G * R * c.methods.size());
    for (std::size_t g = 0; g < G; ++g)
        for (std::size_t j = 0; j < R; ++j) {
            const auto& res = results[g * R + j];
            for (Method m : c.methods) {
                SweepRow row{scales[g], truth[g].value, truth[g].std_error, m, static_cast<int>(j), std::nullopt,
                             res.seed};
                for (const auto& e : res.estimates)
                    if (e.method == m) row.estimate = e.value;
                rows.push_back(row);
            }
        }
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "s,true_mi,true_mi_se,method,replicate,estimate,seed\n";
    for (const auto& r : rows) {
        out += io::format_double(r.s) + ',' + io::format_double(r.true_mi) + ',' + io::format_double(r.true_mi_se) +
               ',' + std::string(estimators::to_string(r.method)) + ',' + std::to_string(r.replicate) + ',' +
               (r.estimate ? io::format_double(*r.estimate) : "nan") + ',' + std::to_string(r.seed) + '\n';
    }
    return out;
}

}  // namespace hdmi::experiment
