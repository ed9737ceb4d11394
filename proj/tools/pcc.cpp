#include <CLI11.hpp>

#include <iostream>

#include "commands.hpp"

namespace {

void add_common(CLI::App* cmd, pcc::cli::Flags& f) {
    cmd->add_option("--config", f.config, "JSON config file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", f.seed, "master seed (overrides config)");
    cmd->add_option("--out", f.out, "output directory")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Group-aware classification under partition-projected class-conditional invariance"};
    app.require_subcommand(1);
    pcc::cli::Flags f;

    auto* gen = app.add_subcommand("generate", "generate a synthetic or resampled dataset");
    add_common(gen, f);
    gen->add_option("--setting", f.setting, "1: invariant class-conditionals, 2: group-varying");
    gen->add_option("--k", f.k, "number of clusters");

    auto* fit = app.add_subcommand("fit", "fit the group-aware model");
    add_common(fit, f);
    fit->add_option("--data", f.data, "dataset directory written by generate")->check(CLI::ExistingDirectory);
    fit->add_option("--labeled", f.labeled, "labeled CSV")->check(CLI::ExistingFile);
    fit->add_option("--unlabeled", f.unlabeled, "unlabeled CSV")->check(CLI::ExistingFile);
    fit->add_option("--groundtruth", f.groundtruth, "ground-truth JSON")->check(CLI::ExistingFile);
    fit->add_option("--force-k", f.force_k, "skip K selection and use this K");
    fit->add_flag("--true-clustering", f.true_clustering, "use the ground-truth partition");
    fit->add_option("--learner", f.learner, "logistic, qda or gmm");

    auto* predict = app.add_subcommand("predict", "score a CSV with a fitted model");
    add_common(predict, f);
    predict->add_option("--model", f.model, "model JSON")->check(CLI::ExistingFile);
    predict->add_option("--input", f.input, "input CSV")->check(CLI::ExistingFile);

    auto* bench = app.add_subcommand("benchmark", "run the repeated method comparison");
    add_common(bench, f);
    bench->add_option("--setting", f.setting, "1 or 2");
    bench->add_option("--k", f.k, "number of generating clusters");
    bench->add_option("--learner", f.learner, "logistic, qda or gmm");
    bench->add_option("--methods", f.methods, "comma separated method names");
    bench->add_option("--reps", f.reps, "repetitions");

    auto* verify = app.add_subcommand("verify-theorems", "fuzz the exact discrete oracle");
    add_common(verify, f);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*gen) pcc::cli::cmd_generate(f);
        else if (*fit) pcc::cli::cmd_fit(f);
        else if (*predict) pcc::cli::cmd_predict(f);
        else if (*bench) pcc::cli::cmd_benchmark(f);
        else if (*verify) return pcc::cli::cmd_verify(f) ? 0 : 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return pcc::cli::exit_code_for(e);
    }
    return 0;
}
