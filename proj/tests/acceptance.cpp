// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include "pcc/eval.hpp"
#include "pcc/io.hpp"
#include "pcc/oracle.hpp"
#include "pcc/shift.hpp"

#ifndef PCC_BINARY
#error "PCC_BINARY must name the CLI executable"
#endif

using namespace pcc;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void run(int id, const char* name, const std::function<Outcome()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failures;
    std::printf("%s criterion %d (%s): %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
    std::fflush(stdout);
}

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(6);
    s << v;
    return s.str();
}

// AUC-gain identity over fuzzed instances: support <= 12, K <= 3, G <= 3.
Outcome auc_gain() {
    Rng rng(101);
    double worst = 0, min_gap = 1;
    int n_inst = 0;
    bool all_exact = true;
    for (int i = 0; i < 300; ++i, ++n_inst) {
        const int k = std::uniform_int_distribution<int>(1, 3)(rng);
        const int g = std::uniform_int_distribution<int>(1, 3)(rng);
        const int n = std::uniform_int_distribution<int>(k, 12)(rng);
        const AucGainReport r = auc_gain_check(random_pcc_instance(n, k, g, derive_seed(101, static_cast<std::uint64_t>(i))));
        worst = std::max(worst, r.abs_error);
        min_gap = std::min(min_gap, r.lhs);
        all_exact = all_exact && r.exact;
    }
    return {worst <= 1e-10 && min_gap >= -1e-12,
            std::to_string(n_inst) + " instances, max |lhs-rhs| " + fmt(worst) + ", min gap " + fmt(min_gap) +
                (all_exact ? ", exact in rationals" : "")};
}

Outcome posterior_correction() {
    Rng rng(202);
    double worst = 0;
    int n_inst = 0;
    for (int i = 0; i < 300; ++i, ++n_inst) {
        const int k = std::uniform_int_distribution<int>(1, 3)(rng);
        const int g = std::uniform_int_distribution<int>(1, 3)(rng);
        const int n = std::uniform_int_distribution<int>(k, 12)(rng);
        const auto [joint, biased] = random_pcc_pair(n, k, g, derive_seed(202, static_cast<std::uint64_t>(i)));
        worst = std::max(worst, posterior_correction_check(joint, biased));
    }
    return {worst <= 1e-12, std::to_string(n_inst) + " paired instances, max error " + fmt(worst)};
}

Outcome pure_cells() {
    bool ok = true;
    std::string detail;
    for (auto [n, k, g] : {std::tuple{2, 1, 2}, {6, 3, 2}, {12, 3, 4}, {8, 2, 6}}) {
        const DiscreteJoint j = pure_cells_instance(n, k, g);
        const double a = exact_auc(j, OracleScorer::rho);
        const double b = exact_auc(j, OracleScorer::rho_bar);
        ok = ok && a == 0.5 && b == 1.0;
        detail = "AUC(rho) " + fmt(a) + ", AUC(rho_bar) " + fmt(b);
    }
    return {ok, detail + " on 4 instances"};
}

Outcome auc_oracle() {
    Rng rng(303);
    int mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = std::uniform_int_distribution<int>(2, 500)(rng);
        const int levels = std::uniform_int_distribution<int>(1, 20)(rng);
        std::vector<double> s(static_cast<std::size_t>(n));
        std::vector<int> y(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            s[static_cast<std::size_t>(i)] = std::uniform_int_distribution<int>(0, levels - 1)(rng) / 7.0;
            y[static_cast<std::size_t>(i)] = std::uniform_int_distribution<int>(0, 1)(rng);
        }
        y[0] = 1;
        y[1] = 0;
        std::int64_t twice = 0, pairs = 0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (y[static_cast<std::size_t>(i)] == 1 && y[static_cast<std::size_t>(j)] == 0) {
                    ++pairs;
                    const double a = s[static_cast<std::size_t>(i)], b = s[static_cast<std::size_t>(j)];
                    twice += a > b ? 2 : a == b ? 1 : 0;
                }
        const AucCounts c = auc_counts(s, y);
        if (c.twice_wins != twice || c.pairs != pairs || auc(s, y) != static_cast<double>(twice) / (2.0 * pairs))
            ++mismatches;
    }
    return {mismatches == 0, "1000 instances, " + std::to_string(mismatches) + " mismatches"};
}

Outcome mlls_recovery() {
    int eligible = 0, within = 0;
    double worst = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        SyntheticConfig cfg;
        cfg.k = 1;
        cfg.groups = 10;
        cfg.labeled_size = {1000, 100};
        cfg.unlabeled_size = {3000, 300};
        cfg.auc_range = {0.8, 0.95};
        cfg.seed = derive_seed(505, seed);
        const SyntheticData d = generate(cfg);
        const auto [train, val] = split_groups_holdout(d.labeled, 0.2, derive_seed(cfg.seed, 1));
        FitOptions opt;
        opt.seed = derive_seed(cfg.seed, 2);
        const GroupAwareModel m = fit_group_aware(train, val, d.unlabeled, d.truth.true_partition(), opt);
        for (const auto& [g, row] : m.priors().cells())
            for (std::size_t k = 0; k < row.size(); ++k) {
                if (row[k].support < 2000 || d.truth.components[k].bayes_auc < 0.8) continue;
                const double truth = d.truth.groups[static_cast<std::size_t>(g)].unlabeled_priors[k];
                const double err = std::abs(row[k].prior - truth);
                ++eligible;
                within += err <= 0.05 ? 1 : 0;
                worst = std::max(worst, err);
            }
    }
    const std::vector<double> flat(100, 0.35);
    const std::vector<double> sym{0.9, 0.9, 0.1, 0.1};
    const double fixed_err = std::abs(mlls_estimate(flat, 0.35).estimate - 0.35);
    const double sym_err = std::max(std::abs(mlls_estimate(sym, 0.5).estimate - 0.5), std::abs(mlls_reference(sym, 0.5, 100) - 0.5));
    const double share = eligible ? static_cast<double>(within) / eligible : 0.0;
    return {eligible > 0 && share >= 0.9 && fixed_err <= 1e-9 && sym_err <= 1e-9,
            std::to_string(within) + "/" + std::to_string(eligible) + " cells within 0.05 (worst " + fmt(worst) +
                "), fixed-point error " + fmt(fixed_err) + ", symmetry error " + fmt(sym_err)};
}

ExperimentConfig benchmark_config(Setting setting) {
    ExperimentConfig cfg;
    cfg.synthetic.d = 2;
    cfg.synthetic.k = 4;
    cfg.synthetic.groups = 100;
    cfg.synthetic.setting = setting;
    cfg.synthetic.labeled_size = {200, 20};
    cfg.synthetic.unlabeled_size = {2000, 200};
    cfg.repetitions = 10;
    cfg.learner = LearnerKind::gmm;
    cfg.seed = 1;
    return cfg;
}

Outcome setting2() {
    const ExperimentResult r = run_experiment(benchmark_config(Setting::partition_shift));
    const double ours = r.mean_auc.at(Method::pcc);
    const double global = r.mean_auc.at(Method::global);
    const double gag = r.mean_auc.at(Method::group_aware_global);
    const double truth = r.mean_auc.at(Method::pcc_true_clustering);
    return {ours - global >= 0.02 && ours > gag && truth >= ours - 0.005,
            "pcc " + fmt(ours) + ", global " + fmt(global) + ", group-aware global " + fmt(gag) + ", true clustering " +
                fmt(truth) + " over " + std::to_string(r.repetitions.size()) + " repetitions"};
}

Outcome setting1() {
    const ExperimentResult r = run_experiment(benchmark_config(Setting::identical));
    const double ours = r.mean_auc.at(Method::pcc);
    const double global = r.mean_auc.at(Method::global);
    return {std::abs(ours - global) <= 0.01,
            "pcc " + fmt(ours) + ", global " + fmt(global) + ", |difference| " + fmt(std::abs(ours - global))};
}

Outcome degeneracy() {
    double worst = 0;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        SyntheticConfig cfg;
        cfg.groups = 20;
        cfg.labeled_size = {200, 20};
        cfg.unlabeled_size = {1000, 100};
        cfg.seed = derive_seed(808, seed);
        const SyntheticData d = generate(cfg);
        const auto [train, val] = split_groups_holdout(d.labeled, 0.2, 1);
        FitOptions opt;
        opt.seed = 2;
        const FittedMethod ls = fit_baseline(Method::label_shift, train, val, d.unlabeled, opt);
        opt.partition = PartitionModel(Matrix(stack_features(train, d.unlabeled).colwise().mean()));
        const FittedMethod ours = fit_baseline(Method::pcc, train, val, d.unlabeled, opt);
        for (Eigen::Index i = 0; i < d.unlabeled.size(); ++i) {
            const Vector x = d.unlabeled.x.row(i).transpose();
            const int g = d.unlabeled.group[static_cast<std::size_t>(i)];
            worst = std::max(worst, std::abs(ls.score(x, g) - ours.score(x, g)));
        }
    }
    return {worst <= 1e-12, "max pointwise difference " + fmt(worst)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int shell(const std::string& cmd) {
    const int status = std::system((cmd + " > /dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Every command run twice with the same config and seed; all outputs compared byte for byte.
Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / ("pcc_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    std::ofstream(root / "config.json") << R"({
  "seed": 42,
  "generate": {"synthetic": {"d": 2, "k": 4, "groups": 12, "setting": 2,
    "labeled_size": {"mean": 200, "sd": 20}, "unlabeled_size": {"mean": 1000, "sd": 100}}},
  "benchmark": {"repetitions": 2, "synthetic": {"d": 2, "k": 2, "groups": 10,
    "labeled_size": {"mean": 150, "sd": 10}, "unlabeled_size": {"mean": 400, "sd": 10}}},
  "verify": {"instances": 50, "pair_instances": 50}
})";
    const std::string bin = std::string("'") + PCC_BINARY + "'";
    const std::string cfg = " --config '" + (root / "config.json").string() + "'";
    int compared = 0, differing = 0;
    std::string first_diff;
    for (const char* run : {"r1", "r2"}) {
        const fs::path out = root / run;
        const std::string o = " --out '" + out.string();
        if (shell(bin + " generate" + cfg + o + "/data'") != 0) return {false, "generate failed"};
        if (shell(bin + " fit" + cfg + " --data '" + (out / "data").string() + "'" + o + "/model'") != 0)
            return {false, "fit failed"};
        if (shell(bin + " predict" + cfg + " --model '" + (out / "model" / "model.json").string() + "' --input '" +
                  (out / "data" / "unlabeled.csv").string() + "'" + o + "/pred'") != 0)
            return {false, "predict failed"};
        if (shell(bin + " benchmark" + cfg + o + "/bench'") != 0) return {false, "benchmark failed"};
        if (shell(bin + " verify-theorems" + cfg + o + "/verify'") != 0) return {false, "verify-theorems failed"};
    }
    for (const auto& entry : fs::recursive_directory_iterator(root / "r1")) {
        if (!entry.is_regular_file()) continue;
        const fs::path rel = fs::relative(entry.path(), root / "r1");
        ++compared;
        if (slurp(entry.path()) != slurp(root / "r2" / rel)) {
            ++differing;
            if (first_diff.empty()) first_diff = rel.string();
        }
    }
    fs::remove_all(root);
    return {compared == 13 && differing == 0,
            std::to_string(compared) + " files compared across 5 commands, " + std::to_string(differing) + " differ" +
                (first_diff.empty() ? "" : " (first: " + first_diff + ")")};
}

}  // namespace

int main() {
    run(1, "AUC-gain identity", auc_gain);
    run(2, "posterior-correction identity", posterior_correction);
    run(3, "pure-cells extreme", pure_cells);
    run(4, "AUC oracle equivalence", auc_oracle);
    run(5, "MLLS recovery", mlls_recovery);
    run(6, "setting-2 improvement", setting2);
    run(7, "setting-1 robustness", setting1);
    run(8, "label-shift degeneracy", degeneracy);
    run(9, "determinism", determinism);
    std::printf("%d of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
