// Acceptance suite: one [PASS]/[FAIL] line per criterion, with the measured
// values behind each verdict. `--criterion N` runs a single criterion.
#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "hdmi/classify.hpp"
#include "hdmi/error.hpp"
#include "hdmi/estimators.hpp"
#include "hdmi/experiment.hpp"
#include "hdmi/io.hpp"
#include "hdmi/models.hpp"
#include "hdmi/normal.hpp"
#include "hdmi/oracles.hpp"
#include "hdmi/pik.hpp"
#include "hdmi/rng.hpp"

using namespace hdmi;
namespace est = hdmi::estimators;
namespace exp_ = hdmi::experiment;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 20240611;
const double kLog20 = std::log(20.0);

// Checks within a criterion print as indented detail lines; the criterion
// passes when all of them (and the runtime budget) do.
struct Verdict {
    bool pass = true;
    void check(bool ok, const char* fmt, auto... args) {
        pass = pass && ok;
        std::printf("    %s ", ok ? "ok  " : "FAIL");
        if constexpr (sizeof...(args) == 0)
            std::fputs(fmt, stdout);
        else
            std::printf(fmt, args...);
        std::printf("\n");
    }
};

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double sd_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// ---------------------------------------------------------------------------

void pik_anchors(Verdict& v) {
    double worst0 = 0.0;
    for (int k = 2; k <= 100; ++k) worst0 = std::max(worst0, std::abs(pik::pi_k(k, 0.0) - (1.0 - 1.0 / k)));
    v.check(worst0 <= 1e-10, "max_k |pi_k(0) - (1 - 1/k)| = %.3g over k = 2..100 (tol 1e-10)", worst0);
    double worst2 = 0.0;
    for (int i = 0; i <= 8000; ++i) {
        const double c = i / 1000.0;
        worst2 = std::max(worst2, std::abs(pik::pi_k(2, c) - normal_cdf(-c / std::numbers::sqrt2)));
    }
    v.check(worst2 <= 1e-8, "max_c |pi_2(c) - Phi(-c/sqrt2)| = %.3g on 8001 points of [0, 8] (tol 1e-8)", worst2);
}

void inverse_round_trip(Verdict& v) {
    Rng rng(derive_seed(kSeed, 2));
    std::uniform_int_distribution<int> pick_k(2, 100);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const int k = pick_k(rng);
        const double chance = 1.0 - 1.0 / k;
        // Half uniform on (0, chance), half log-uniform down to 1e-8.
        const double e = i % 2 ? chance * (1e-6 + (1.0 - 2e-6) * u(rng)) : std::exp(std::log(1e-8) * u(rng)) * chance;
        worst = std::max(worst, std::abs(pik::pi_k(k, pik::pi_k_inverse(e, k)) - e));
    }
    v.check(worst <= 1e-9, "max |pi_k(pi_k_inverse(e)) - e| = %.3g over 1000 pairs (tol 1e-9)", worst);
}

void gaussian_max(Verdict& v) {
    Rng rng(derive_seed(kSeed, 3));
    for (int i = 0; i < 10; ++i) {
        const auto p = oracles::random_gaussian_max_problem(rng);
        const double analytic = pik::lemma1_exceedance(p);
        const auto mc = oracles::gaussian_max_monte_carlo(p, 500000, derive_seed(kSeed, 30 + i));
        const double se = std::hypot(mc.std_error, pik::kAccuracy);
        const double z = (mc.value - analytic) / se;
        v.check(std::abs(z) <= 3.0, "k=%2d a=%+.3f b=%.3f g=%+.3f d=%.3f e=%.3f: analytic %.5f, MC %.5f, %+.2f SE", p.k,
                p.alpha, p.beta, p.gamma, p.delta, p.epsilon, analytic, mc.value, z);
    }
}

void convergence(Verdict& v) {
    constexpr double iota = 0.5;
    constexpr int k = 10;
    const std::vector<int> dims{4, 16, 64, 256};
    const oracles::SweepBudget budget{2000, 200};
    const auto rows = oracles::convergence_sweep(oracles::ModelFamily::Gaussian, dims, k, iota, budget, derive_seed(kSeed, 4));
    std::printf("    pi_10(1) = %.5f; %d exemplar sets x %d responses per dimension\n", rows[0].prediction,
                budget.n_exemplar_sets, budget.n_responses_per_set);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (i == 0) {
            std::printf("    d=%-4d ABE %.5f (SE %.5f) gap %.5f\n", r.d, r.estimate.value, r.estimate.std_error, r.gap);
            continue;
        }
        const double slack = std::hypot(r.estimate.std_error, rows[i - 1].estimate.std_error);
        v.check(r.gap <= rows[i - 1].gap + slack, "d=%-4d ABE %.5f (SE %.5f) gap %.5f <= previous %.5f + 1 SE %.5f", r.d,
                r.estimate.value, r.estimate.std_error, r.gap, rows[i - 1].gap, slack);
    }
    v.check(rows.back().gap < 0.02, "gap at d=256 is %.5f (tol 0.02)", rows.back().gap);
    const auto z = oracles::z_moment_check(oracles::held_iota_model(oracles::ModelFamily::Gaussian, 512, iota), k, 20000,
                                           derive_seed(kSeed, 5));
    for (const auto& m : z.moments)
        v.check(m.within(3.0), "d=512 %-7s %+.5f vs %+.3f (%+.2f SE)", m.name.c_str(), m.estimate, m.target,
                m.deviation_se());
}

exp_::ExperimentConfig logistic_sweep(const std::vector<double>& mi_grid, int replicates) {
    exp_::ExperimentConfig c;
    c.model = models::StimulusResponseModel::scaled_identity_logistic(10, 1.0);
    c.k = 20;
    c.train_per_class = 1000;
    c.test_per_class = 1000;
    c.classifier = classify::RuleKind::NaiveBayes;
    c.methods = {est::Method::HD, est::Method::Fano, est::Method::CM};
    c.replicates = replicates;
    c.seed = derive_seed(kSeed, 5);
    c.grid = exp_::Grid{exp_::GridKind::MutualInformation, mi_grid};
    return c;
}

void logistic_sweep_shape(Verdict& v) {
    const std::vector<double> grid{0, 0.5, 1, 1.5, 2, 2.5, 3, 3.5, 4};
    const auto rows = exp_::sweep(logistic_sweep(grid, 20));
    // values[method][grid index]
    std::map<est::Method, std::vector<std::vector<double>>> values;
    std::vector<double> truth(grid.size());
    std::map<double, std::size_t> index;
    for (std::size_t g = 0; g < grid.size(); ++g) index[grid[g]] = g;
    std::vector<double> scales;
    for (const auto& r : rows) {
        auto& per = values[r.method];
        per.resize(grid.size());
        const std::size_t g = static_cast<std::size_t>(
            std::find_if(index.begin(), index.end(), [&](auto& kv) { return std::abs(kv.first - r.true_mi) < 1e-6; })->second);
        truth[g] = r.true_mi;
        if (r.estimate) per[g].push_back(*r.estimate);
    }
    std::printf("    true I    HD mean (sd)       Fano mean (sd)     CM mean (sd)\n");
    for (std::size_t g = 0; g < grid.size(); ++g) {
        std::printf("    %.4f", truth[g]);
        for (auto m : {est::Method::HD, est::Method::Fano, est::Method::CM}) {
            const auto& x = values[m][g];
            std::printf("    %.4f (%.4f)", mean_of(x), sd_of(x));
        }
        std::printf("\n");
    }
    const std::size_t top = grid.size() - 1, mid = index.at(2.5);
    for (auto m : {est::Method::Fano, est::Method::CM}) {
        const auto name = std::string(est::to_string(m));
        double peak = 0.0;
        for (const auto& x : values[m]) peak = std::max(peak, *std::max_element(x.begin(), x.end()));
        v.check(peak <= kLog20, "(a) largest %s estimate %.4f <= log 20 = %.4f", name.c_str(), peak, kLog20);
        const double rise = mean_of(values[m][top]) - mean_of(values[m][mid]);
        v.check(std::abs(rise) <= 0.3, "(a) %s plateau: mean at I=%.2f minus mean at I=2.5 = %.4f (tol 0.3)", name.c_str(),
                truth[top], rise);
    }
    for (std::size_t g = 0; g < grid.size(); ++g)
        if (grid[g] >= 0.5 && grid[g] <= 2.5) {
            const double bias = mean_of(values[est::Method::HD][g]) - truth[g];
            v.check(std::abs(bias) <= 0.25, "(b) HD mean - I at I=%.2f: %+.4f (tol 0.25)", truth[g], bias);
        }
    const double hd_top = mean_of(values[est::Method::HD][top]);
    v.check(hd_top > kLog20, "(b) HD mean at the top grid point %.4f > log 20", hd_top);
    const auto& null = values[est::Method::HD][index.at(0.0)];
    const double m0 = mean_of(null), sd0 = sd_of(null);
    v.check(std::abs(m0) <= 2.0 * sd0,
            "(c) HD at I=0: mean %.3g, SE of a single estimate %.3g (%.2f SE; %.2f SE of the 20-replicate mean)", m0, sd0,
            sd0 > 0 ? m0 / sd0 : 0.0, sd0 > 0 ? m0 / (sd0 / std::sqrt(static_cast<double>(null.size()))) : 0.0);
}

void mle_recovery(Verdict& v) {
    const auto model = models::StimulusResponseModel::scaled_identity_logistic(10, 4.0 / std::sqrt(10.0));
    const double truth = models::true_mi(model).value;
    constexpr int reps = 50;
    std::vector<double> est_values(reps);
    std::vector<int> failed(reps, 0);
    for (int j = 0; j < reps; ++j) {
        const auto seed = derive_seed(derive_seed(kSeed, 6), j);
        const auto ex = models::sample_exemplars(model, 20, derive_seed(seed, 0));
        const auto data = models::sample_responses(model, ex, 1000, derive_seed(seed, 1));
        try {
            est_values[j] = est::estimate_mle_logistic(data, ex, 20000, derive_seed(seed, 3)).value;
        } catch (const FitError&) {
            failed[j] = 1;
        }
    }
    int inside = 0;
    std::vector<double> ok_values;
    for (int j = 0; j < reps; ++j)
        if (!failed[j]) {
            ok_values.push_back(est_values[j]);
            inside += std::abs(est_values[j] - truth) <= 0.1 * truth;
        }
    std::printf("    oracle I = %.4f; n = 20 x 1000 observations; %zu fits converged\n", truth, ok_values.size());
    if (!ok_values.empty())
        std::printf("    MLE mean %.4f, sd %.4f, range [%.4f, %.4f]\n", mean_of(ok_values),
                    ok_values.size() > 1 ? sd_of(ok_values) : 0.0, *std::min_element(ok_values.begin(), ok_values.end()),
                    *std::max_element(ok_values.begin(), ok_values.end()));
    v.check(inside >= 40, "%d of %d replicates within +-10%% of the oracle (need 40)", inside, reps);
}

void staircase(Verdict& v) {
    const auto formula = oracles::staircase_collision_abe(20, oracles::StaircaseMode::PoissonFormula);
    v.check(std::abs(formula.value - 0.4848) <= 0.0005, "Poisson formula %.5f vs 0.4848 (tol 0.0005)", formula.value);
    const auto mc = oracles::staircase_collision_abe(20, oracles::StaircaseMode::MonteCarlo, 1000000, derive_seed(kSeed, 7));
    const double z = (mc.value - formula.value) / mc.std_error;
    v.check(std::abs(z) <= 3.0, "Monte Carlo %.5f (SE %.5f) vs formula: %+.1f SE (tol 3)", mc.value, mc.std_error, z);
    std::printf("    exact k=20 collision error (1 - 1/20)^20 = %.5f; Monte Carlo vs exact %+.2f SE\n",
                oracles::staircase_exact_abe(20), (mc.value - oracles::staircase_exact_abe(20)) / mc.std_error);
    const double mi = models::true_mi(models::StimulusResponseModel::staircase(20)).value;
    v.check(mi == std::log(20.0), "true_mi(staircase, 20) = %.17g, log 20 = %.17g", mi, std::log(20.0));
}

void logistic_anchors(Verdict& v) {
    const std::pair<int, double> anchors[] = {{3, 0.800}, {10, 1.322}, {50, 1.794}};
    for (auto [p, target] : anchors) {
        const double mi = models::true_mi(models::StimulusResponseModel::scaled_identity_logistic(p, 4.0 / std::sqrt(p))).value;
        v.check(std::abs(mi - target) <= 0.01, "p=%-2d I = %.5f vs %.3f (tol 0.01)", p, mi, target);
    }
}

std::string slurp_dir(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::string all;
    for (const auto& f : files) all += f.filename().string() + '\n' + io::read_text(f);
    return all;
}

void properties(Verdict& v) {
    // Chance collapse.
    double worst = 0.0;
    for (int k = 2; k <= 50; ++k) {
        const auto se = est::smooth_error((k - 1.0) / k, 0.01, k);
        worst = std::max({worst, est::estimate_hd(se).value, est::estimate_fano(se).value,
                          est::estimate_cm(est::ConfusionMatrix::uniform(k, 10L * k)).value});
    }
    v.check(worst == 0.0, "chance collapse: largest HD/Fano/CM at chance over k = 2..50 is %g", worst);

    // Permutation invariance.
    Rng rng(derive_seed(kSeed, 9));
    double drift = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const int k = 2 + trial % 19;
        const int r = 60;
        std::vector<std::int64_t> counts;
        for (int i = 0; i < k; ++i) {
            std::vector<std::int64_t> row(k, 0);
            std::uniform_int_distribution<int> col(0, k - 1);
            for (int t = 0; t < r; ++t) ++row[t % 3 == 0 ? i : col(rng)];
            counts.insert(counts.end(), row.begin(), row.end());
        }
        const est::ConfusionMatrix m(k, counts);
        std::vector<int> perm(k);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        const auto pm = m.permuted(perm);
        const double a = est::default_alpha(r);
        const auto s1 = est::smooth_error(est::test_error(m), a, k), s2 = est::smooth_error(est::test_error(pm), a, k);
        drift = std::max({drift, std::abs(est::estimate_hd(s1).value - est::estimate_hd(s2).value),
                          std::abs(est::estimate_fano(s1).value - est::estimate_fano(s2).value),
                          std::abs(est::estimate_cm(m).value - est::estimate_cm(pm).value)});
    }
    v.check(drift <= 1e-12, "permutation invariance: largest change over 200 relabelled matrices %.3g", drift);

    // HD above Fano below a per-k threshold located by bisection on HD - Fano.
    for (int k : {2, 3, 5, 10, 20, 50, 100}) {
        const double chance = (k - 1.0) / k;
        auto gap = [&](double e) { return est::hd_value(e, k) - est::fano_value(e, k); };
        double lo = 1e-9, hi = chance * (1 - 1e-9);
        // Leftmost sign change: scan coarsely, then bisect.
        double e0 = hi;
        for (int i = 1; i <= 2000; ++i) {
            const double e = lo + (hi - lo) * i / 2000.0;
            if (gap(e) <= 0) {
                double a = lo + (hi - lo) * (i - 1) / 2000.0, b = e;
                for (int it = 0; it < 100; ++it) (gap(0.5 * (a + b)) > 0 ? a : b) = 0.5 * (a + b);
                e0 = a;
                break;
            }
        }
        bool all = true;
        for (int i = 0; i < 1000; ++i) {
            const double e = lo * std::pow(e0 / lo, i / 999.0);
            all = all && gap(e) > 0;
        }
        v.check(all, "k=%-3d HD > Fano on 1000 points of (0, %.5f]", k, e0);
    }

    // Determinism: every seeded pipeline twice, byte for byte.
    const auto tmp = fs::temp_directory_path() / ("hdmi_acceptance_" + std::to_string(kSeed));
    fs::remove_all(tmp);
    auto c = logistic_sweep({0.5, 2.0}, 3);
    c.train_per_class = c.test_per_class = 100;
    c.methods = est::parse_methods("hd,fano,cm,naive,mle");
    c.mle_mc_n = 2000;
    c.grid.reset();
    c.model = models::StimulusResponseModel::scaled_identity_logistic(10, 1.0);
    exp_::write_simulation(c, exp_::simulate(c), tmp / "a");
    exp_::write_simulation(c, exp_::simulate(c), tmp / "b");
    v.check(slurp_dir(tmp / "a") == slurp_dir(tmp / "b"), "simulate: output directories byte-identical");
    fs::remove_all(tmp);

    c.grid = exp_::Grid{exp_::GridKind::MutualInformation, {0.5, 2.0}};
    v.check(exp_::sweep_csv(exp_::sweep(c)) == exp_::sweep_csv(exp_::sweep(c)), "sweep: CSV byte-identical");

    auto dump = [](auto&& f) { return io::to_json(f()).dump(); };
    const auto g = oracles::held_iota_model(oracles::ModelFamily::Gaussian, 32, 0.5);
    auto abe = [&] { return oracles::mc_average_bayes_error(g, 5, 50, 20, 7); };
    v.check(dump(abe) == dump(abe), "mc_average_bayes_error: byte-identical");
    auto zm = [&] { return oracles::z_moment_check(g, 5, 500, 7); };
    v.check(dump(zm) == dump(zm), "z_moment_check: byte-identical");
    auto nd = [&] { return oracles::normality_diagnostic(g, 5, 500, 7); };
    v.check(dump(nd) == dump(nd), "normality_diagnostic: byte-identical");
    auto sc = [&] { return oracles::staircase_collision_abe(20, oracles::StaircaseMode::MonteCarlo, 5000, 7); };
    v.check(dump(sc) == dump(sc), "staircase Monte Carlo: byte-identical");
    Rng r1(1);
    const auto lp = oracles::random_gaussian_max_problem(r1);
    auto l1 = [&] { return oracles::gaussian_max_monte_carlo(lp, 5000, 7); };
    v.check(dump(l1) == dump(l1), "lemma1 Monte Carlo: byte-identical");
    const auto fit_model = models::StimulusResponseModel::multi_logistic(Eigen::MatrixXd::Identity(3, 4) * 0.7);
    auto nested = [&] { return io::format_double(models::true_mi(fit_model, 2000, 7).value); };
    v.check(nested() == nested(), "nested Monte Carlo MI: byte-identical");
    const auto m = exp_::run_replicate(c, c.model, 0, 7).confusion;
    const std::vector<int> ks{5, 10, 20};
    auto series = [&] {
        std::string s;
        for (const auto& p : est::k_subsample_diagnostic(m, ks, est::Method::HD, 10, 7))
            for (double x : p.values) s += io::format_double(x) + ',';
        return s;
    };
    v.check(series() == series(), "k-subsampling diagnostic: byte-identical");
    const auto cv = [&] {
        std::string s;
        for (const auto& row : oracles::convergence_sweep(oracles::ModelFamily::Logistic, {4, 8}, 5, 0.5, {20, 20}, 7))
            s += io::to_json(row).dump();
        return s;
    };
    v.check(cv() == cv(), "convergence_sweep: byte-identical");
}

struct Criterion {
    int id;
    const char* title;
    double budget_seconds;
    std::function<void(Verdict&)> run;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    int only = 0;
    app.add_option("--criterion", only, "Run only this criterion (1-9)")->check(CLI::Range(1, 9));
    CLI11_PARSE(app, argc, argv);

    const std::vector<Criterion> criteria{
        {1, "pi_k anchors", 1, pik_anchors},
        {2, "inverse round trip", 5, inverse_round_trip},
        {3, "Gaussian-max exceedance vs correlated-Gaussian Monte Carlo", 60, gaussian_max},
        {4, "average Bayes error converges to pi_k (Gaussian, iota = 0.5, k = 10)", 600, convergence},
        {5, "logistic sweep: bounded vs unbounded estimators", 1800, logistic_sweep_shape},
        {6, "MLE recovery", 900, mle_recovery},
        {7, "staircase collision value", 60, staircase},
        {8, "logistic MI anchors", 10, logistic_anchors},
        {9, "estimator property suite", 60, properties},
    };
    bool all = true;
    for (const auto& c : criteria) {
        if (only && c.id != only) continue;
        std::printf("criterion %d: %s\n", c.id, c.title);
        Verdict v;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            c.run(v);
        } catch (const std::exception& e) {
            v.check(false, "exception: %s", e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        v.check(secs < c.budget_seconds, "runtime %.2f s (budget %.0f s)", secs, c.budget_seconds);
        std::printf("[%s] %d %s\n", v.pass ? "PASS" : "FAIL", c.id, c.title);
        std::fflush(stdout);
        all = all && v.pass;
    }
    return all ? 0 : 1;
}
