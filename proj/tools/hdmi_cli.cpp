// hdmi: estimate mutual information from classification performance,
// run simulation sweeps and check the asymptotic theory by Monte Carlo.
#include <CLI11.hpp>

#include <boost/math/statistics/linear_regression.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hdmi/error.hpp"
#include "hdmi/estimators.hpp"
#include "hdmi/experiment.hpp"
#include "hdmi/io.hpp"
#include "hdmi/models.hpp"
#include "hdmi/oracles.hpp"
#include "hdmi/pik.hpp"
#include "hdmi/rng.hpp"

namespace {

using namespace hdmi;
using io::json;

std::string fmt12(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void emit(const std::string& text, const std::optional<std::string>& out) {
    if (out)
        io::write_atomic(*out, text);
    else
        std::cout << text;
}

// ---------------------------------------------------------------------------
// pik

struct PikArgs {
    int k = 2;
    std::optional<double> c, e;
};

void run_pik(const PikArgs& a) {
    if (a.c.has_value() == a.e.has_value()) throw ConfigError("pik needs exactly one of --c or --e");
    if (a.c)
        std::cout << fmt12(pik::pi_k(a.k, *a.c)) << '\n';
    else
        std::cout << fmt12(pik::pi_k_inverse(*a.e, a.k)) << '\n';
}

// ---------------------------------------------------------------------------
// estimate

struct EstimateArgs {
    std::string file;
    std::optional<int> k;
    std::optional<double> alpha;
    std::string methods = "hd,fano,cm";
    std::optional<std::string> out;
};

void run_estimate(const EstimateArgs& a) {
    using namespace estimators;
    const auto m = io::read_confusion_csv(a.file);
    if (a.k && *a.k != m.k())
        throw ConfigError("--k " + std::to_string(*a.k) + " does not match the " + std::to_string(m.k()) +
                          "x" + std::to_string(m.k()) + " confusion matrix");
    const auto methods = parse_methods(a.methods);
    for (Method x : methods)
        if (x != Method::HD && x != Method::Fano && x != Method::CM)
            throw ConfigError("estimate supports hd, fano and cm; '" + std::string(to_string(x)) +
                              "' needs the raw data (use simulate)");
    const double alpha = a.alpha.value_or(default_alpha(m.r()));
    const auto se = smooth_error(test_error(m), alpha, m.k());
    std::string text;
    {
        json h{{"schema_version", io::kSchemaVersion}, {"record", "smoothed_error"}};
        const json body = io::to_json(se);
        for (auto& [key, v] : body.items()) h[key] = v;
        text += h.dump() + '\n';
    }
    for (Method x : methods) {
        const auto rec = x == Method::HD ? estimate_hd(se) : x == Method::Fano ? estimate_fano(se) : estimate_cm(m);
        json j = io::to_json(rec);
        j["e_test"] = se.e_test;
        text += j.dump() + '\n';
    }
    emit(text, a.out);
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
    std::string config;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<int> replicates;
    std::optional<std::string> methods;
};

void apply_overrides(experiment::ExperimentConfig& c, const std::optional<std::uint64_t>& seed,
                     const std::optional<int>& replicates, const std::optional<std::string>& methods) {
    if (seed) c.seed = *seed;
    if (replicates) c.replicates = *replicates;
    if (methods) c.methods = estimators::parse_methods(*methods);
}

void run_simulate(const SimulateArgs& a) {
    auto c = experiment::load_config(a.config);
    apply_overrides(c, a.seed, a.replicates, a.methods);
    if (a.out) c.output = *a.out;
    experiment::validate(c);
    const auto r = experiment::simulate(c);
    if (c.output) experiment::write_simulation(c, r, *c.output);
    std::cout << experiment::simulation_summary(c, r).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// sweep

struct SweepArgs {
    std::optional<std::string> config;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<int> replicates;
    std::optional<std::string> methods;
};

// p = q = 10, k = 20, B = s I, r = 1000, naive Bayes, nine MI targets on [0, 4].
experiment::ExperimentConfig reference_sweep_config() {
    experiment::ExperimentConfig c;
    c.model = models::StimulusResponseModel::scaled_identity_logistic(10, 1.0);
    c.k = 20;
    c.train_per_class = 1000;
    c.test_per_class = 1000;
    c.classifier = classify::RuleKind::NaiveBayes;
    c.methods = estimators::parse_methods("hd,fano,cm,naive,mle");
    c.replicates = 20;
    c.grid = experiment::Grid{experiment::GridKind::MutualInformation, {0, 0.5, 1, 1.5, 2, 2.5, 3, 3.5, 4}};
    return c;
}

void run_sweep(const SweepArgs& a) {
    auto c = a.config ? experiment::load_config(*a.config) : reference_sweep_config();
    apply_overrides(c, a.seed, a.replicates, a.methods);
    if (!c.grid || c.grid->values.empty()) throw ConfigError("sweep needs a nonempty 'grid'");
    const auto csv = experiment::sweep_csv(experiment::sweep(c));
    emit(csv, a.out ? a.out : c.output ? std::optional<std::string>(c.output->string()) : std::nullopt);
}

// ---------------------------------------------------------------------------
// diagnose-k

struct DiagnoseArgs {
    std::optional<std::string> file;
    std::optional<std::string> config;
    std::string k_values;
    std::string method = "hd";
    int replicates = 50;
    std::uint64_t seed = 0;
    std::optional<double> alpha;
    int bootstrap = 1000;
    std::optional<std::string> out;
};

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> v;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        int x = 0;
        try {
            x = std::stoi(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size()) throw ConfigError("not an integer list: '" + s + "'");
        v.push_back(x);
    }
    if (v.empty()) throw ConfigError("empty integer list");
    return v;
}

std::pair<double, double> ols(const std::vector<double>& x, const std::vector<double>& y) {
    using boost::math::statistics::simple_ordinary_least_squares;
    bool flat_x = std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); });
    if (flat_x) return {y.front(), 0.0};
    return simple_ordinary_least_squares(x, y);
}

double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

void run_diagnose(const DiagnoseArgs& a) {
    using namespace estimators;
    if (a.file.has_value() == a.config.has_value())
        throw ConfigError("diagnose-k needs exactly one of a confusion file or --config");
    if (a.bootstrap < 1) throw DomainError("--bootstrap must be >= 1");
    const auto ks = parse_int_list(a.k_values);
    const auto method = parse_method(a.method);
    std::vector<KSeriesPoint> series;
    if (a.file) {
        const auto m = io::read_confusion_csv(*a.file);
        series = k_subsample_diagnostic(m, ks, method, a.replicates, a.seed, a.alpha);
    } else {
        // With the raw scores available, each subset is re-classified among its own classes.
        auto c = experiment::load_config(*a.config);
        experiment::validate(c);
        const auto scored = experiment::score_replicate(c, c.model, experiment::replicate_seed(c.seed, 0));
        series = k_subsample_rescored(scored.scores, scored.labels, ks, method, a.replicates, a.seed, a.alpha);
    }

    std::vector<double> x, y;
    for (const auto& p : series) {
        x.push_back(p.k);
        y.push_back(p.mean);
    }
    const double slope = ols(x, y).second;
    // Percentile bootstrap: resample the replicate values within each k.
    std::vector<double> boot(a.bootstrap);
    Rng rng(derive_seed(a.seed, 0xB007));
    for (int b = 0; b < a.bootstrap; ++b) {
        std::vector<double> yb;
        for (const auto& p : series) {
            std::uniform_int_distribution<std::size_t> pick(0, p.values.size() - 1);
            double s = 0.0;
            for (std::size_t i = 0; i < p.values.size(); ++i) s += p.values[pick(rng)];
            yb.push_back(s / static_cast<double>(p.values.size()));
        }
        boot[b] = ols(x, yb).second;
    }
    const double lo = quantile(boot, 0.025), hi = quantile(boot, 0.975);

    std::string csv = "k,mean,sd,replicates,slope,slope_ci_low,slope_ci_high\n";
    for (const auto& p : series)
        csv += std::to_string(p.k) + ',' + io::format_double(p.mean) + ',' + io::format_double(p.sd) + ',' +
               std::to_string(p.values.size()) + ',' + io::format_double(slope) + ',' + io::format_double(lo) +
               ',' + io::format_double(hi) + '\n';
    emit(csv, a.out);
}

// ---------------------------------------------------------------------------
// verify-theory

struct VerifyArgs {
    std::string suite;
    std::optional<long> budget;
    std::uint64_t seed = 0;
    std::optional<std::string> out;
};

constexpr double kSeTolerance = 3.0;

json verify_gaussian_max(long draws, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0));
    json cases = json::array();
    bool pass = true;
    for (int i = 0; i < 10; ++i) {
        const auto p = oracles::random_gaussian_max_problem(rng);
        const double analytic = pik::lemma1_exceedance(p);
        const auto mc = oracles::gaussian_max_monte_carlo(p, draws, derive_seed(seed, 1 + i));
        const double se = std::max(mc.std_error, 1.0 / static_cast<double>(draws));
        const bool ok = std::abs(mc.value - analytic) <= kSeTolerance * se;
        pass = pass && ok;
        cases.push_back({{"alpha", p.alpha},
                         {"beta", p.beta},
                         {"gamma", p.gamma},
                         {"delta", p.delta},
                         {"epsilon", p.epsilon},
                         {"k", p.k},
                         {"analytic", analytic},
                         {"monte_carlo", io::to_json(mc)},
                         {"deviation_se", (mc.value - analytic) / se},
                         {"pass", ok}});
    }
    return {{"tolerance_se", kSeTolerance}, {"cases", cases}, {"pass", pass}};
}

json verify_convergence(long sets, std::uint64_t seed) {
    constexpr double iota = 0.5;
    constexpr int k = 10;
    constexpr double final_gap = 0.02;
    const std::vector<int> dims{4, 16, 64, 256};
    oracles::SweepBudget budget{static_cast<int>(sets), 200};
    const auto rows = oracles::convergence_sweep(oracles::ModelFamily::Gaussian, dims, k, iota, budget, seed);
    json table = json::array();
    bool monotone = true;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        table.push_back(io::to_json(rows[i]));
        if (i > 0 && rows[i].gap > rows[i - 1].gap + std::hypot(rows[i].estimate.std_error, rows[i - 1].estimate.std_error))
            monotone = false;
    }
    const bool small = rows.back().gap < final_gap;
    const auto z = oracles::z_moment_check(oracles::held_iota_model(oracles::ModelFamily::Gaussian, 512, iota), k,
                                           20 * sets, derive_seed(seed, 99));
    const bool moments = z.all_within(kSeTolerance);
    return {{"family", "gaussian"},
            {"iota", iota},
            {"k", k},
            {"exemplar_sets", sets},
            {"responses_per_set", budget.n_responses_per_set},
            {"gaps", table},
            {"gap_nonincreasing_1se", monotone},
            {"final_gap_tolerance", final_gap},
            {"final_gap_below_tolerance", small},
            {"z_moments_d512", io::to_json(z)},
            {"z_moments_within_3se", moments},
            {"pass", monotone && small && moments}};
}

json verify_staircase(long draws, std::uint64_t seed) {
    constexpr int k = 20;
    const auto formula = oracles::staircase_collision_abe(k, oracles::StaircaseMode::PoissonFormula);
    const auto mc = oracles::staircase_collision_abe(k, oracles::StaircaseMode::MonteCarlo, draws, seed);
    const double exact = oracles::staircase_exact_abe(k);
    const double mi = models::true_mi(models::StimulusResponseModel::staircase(k)).value;
    const bool formula_ok = std::abs(formula.value - 0.4848) <= 0.0005;
    const bool mc_vs_formula = std::abs(mc.value - formula.value) <= kSeTolerance * mc.std_error;
    const bool mc_vs_exact = std::abs(mc.value - exact) <= kSeTolerance * mc.std_error;
    const bool mi_ok = mi == std::log(static_cast<double>(k));
    return {{"k_bins", k},
            {"poisson_formula", formula.value},
            {"poisson_formula_matches_0.4848", formula_ok},
            {"monte_carlo", io::to_json(mc)},
            {"exact_finite_k", exact},
            {"monte_carlo_vs_formula_within_3se", mc_vs_formula},
            {"monte_carlo_vs_exact_within_3se", mc_vs_exact},
            {"true_mi", mi},
            {"true_mi_is_log_k", mi_ok},
            {"pass", formula_ok && mc_vs_formula && mc_vs_exact && mi_ok}};
}

void run_verify(const VerifyArgs& a) {
    struct Suite {
        const char* name;
        long minimum, fallback;
        json (*run)(long, std::uint64_t);
    };
    static constexpr Suite suites[] = {{"lemma1", 10000, 500000, verify_gaussian_max},
                                       {"theorem1", 100, 1000, verify_convergence},
                                       {"staircase", 10000, 1000000, verify_staircase}};
    const auto it = std::find_if(std::begin(suites), std::end(suites), [&](const Suite& s) { return a.suite == s.name; });
    if (it == std::end(suites)) throw ConfigError("unknown suite '" + a.suite + "' (lemma1, theorem1, staircase)");
    const long budget = a.budget.value_or(it->fallback);
    if (budget < it->minimum)
        throw DomainError("--budget for " + a.suite + " must be >= " + std::to_string(it->minimum));
    json report{{"schema_version", io::kSchemaVersion}, {"suite", a.suite}, {"budget", budget}, {"seed", a.seed}};
    const json body = it->run(budget, a.seed);
    for (auto& [key, v] : body.items()) report[key] = v;
    emit(report.dump(2) + '\n', a.out);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mutual information from classification error"};
    app.require_subcommand(1);

    PikArgs pk;
    auto* pik_cmd = app.add_subcommand("pik", "Evaluate pi_k(c) or its inverse at an error rate e");
    pik_cmd->add_option("--k", pk.k, "Number of classes")->required();
    pik_cmd->add_option("--c", pk.c, "Separation (forward)");
    pik_cmd->add_option("--e", pk.e, "Error rate (inverse)");

    EstimateArgs est;
    auto* est_cmd = app.add_subcommand("estimate", "Estimate MI from a confusion matrix CSV");
    est_cmd->add_option("confusion", est.file, "k x k integer CSV, rows = true class")->required();
    est_cmd->add_option("--k", est.k, "Expected number of classes (checked)");
    est_cmd->add_option("--alpha", est.alpha, "Smoothing weight (default 1/(r+1))");
    est_cmd->add_option("--methods", est.methods, "Comma-separated subset of hd,fano,cm");
    est_cmd->add_option("--out", est.out, "Write JSON lines here instead of stdout");

    SimulateArgs sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Run the simulation pipeline for a config");
    sim_cmd->add_option("--config", sim.config, "JSON config")->required();
    sim_cmd->add_option("--out", sim.out, "Output directory");
    sim_cmd->add_option("--seed", sim.seed, "Base seed override");
    sim_cmd->add_option("--replicates", sim.replicates, "Replicate count override");
    sim_cmd->add_option("--methods", sim.methods, "Estimator list override");

    SweepArgs sw;
    auto* sweep_cmd = app.add_subcommand("sweep", "Sweep B = s I over a grid and emit tidy CSV");
    sweep_cmd->add_option("--config", sw.config, "JSON config with a grid (default: p = q = 10, k = 20 logistic sweep over I = 0..4)");
    sweep_cmd->add_option("--out", sw.out, "CSV path (default stdout)");
    sweep_cmd->add_option("--seed", sw.seed, "Base seed override");
    sweep_cmd->add_option("--replicates", sw.replicates, "Replicate count override");
    sweep_cmd->add_option("--methods", sw.methods, "Estimator list override");

    DiagnoseArgs dk;
    auto* dk_cmd = app.add_subcommand("diagnose-k", "Re-estimate on random class subsets of each size");
    dk_cmd->add_option("confusion", dk.file, "Confusion matrix CSV");
    dk_cmd->add_option("--config", dk.config, "Simulate one replicate of this config instead");
    dk_cmd->add_option("--k-values", dk.k_values, "Comma-separated subset sizes")->required();
    dk_cmd->add_option("--method", dk.method, "hd, fano or cm");
    dk_cmd->add_option("--replicates", dk.replicates, "Subsets per size");
    dk_cmd->add_option("--seed", dk.seed, "Seed");
    dk_cmd->add_option("--alpha", dk.alpha, "Smoothing weight (default 1/(r+1))");
    dk_cmd->add_option("--bootstrap", dk.bootstrap, "Bootstrap resamples for the slope CI");
    dk_cmd->add_option("--out", dk.out, "CSV path (default stdout)");

    VerifyArgs vt;
    auto* vt_cmd = app.add_subcommand("verify-theory", "Monte Carlo checks of the asymptotic theory");
    vt_cmd->add_option("--suite", vt.suite, "lemma1, theorem1 or staircase")->required();
    vt_cmd->add_option("--budget", vt.budget, "Draws (lemma1, staircase) or exemplar sets (theorem1)");
    vt_cmd->add_option("--seed", vt.seed, "Seed");
    vt_cmd->add_option("--out", vt.out, "Report path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*pik_cmd) run_pik(pk);
        if (*est_cmd) run_estimate(est);
        if (*sim_cmd) run_simulate(sim);
        if (*sweep_cmd) run_sweep(sw);
        if (*dk_cmd) run_diagnose(dk);
        if (*vt_cmd) run_verify(vt);
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return 2;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const FitError& e) {
        std::cerr << "fit error: " << e.what() << '\n';
        return 1;
    } catch (const DomainError& e) {
        std::cerr << "domain error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
