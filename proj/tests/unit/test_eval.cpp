#include <doctest.h>

#include <random>

#include "pcc/eval.hpp"

using namespace pcc;

namespace {

double brute_auc(const std::vector<double>& s, const std::vector<int>& y) {
    double wins = 0, pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j)
            if (y[i] == 1 && y[j] == 0) {
                pairs += 1;
                wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
            }
    return wins / pairs;
}

SyntheticConfig small_config(std::uint64_t seed, int k = 2) {
    SyntheticConfig cfg;
    cfg.k = k;
    cfg.groups = 10;
    cfg.labeled_size = {200, 10};
    cfg.unlabeled_size = {500, 10};
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("AUC examples") {
    CHECK(auc(std::vector<double>{0.9, 0.8, 0.2, 0.1}, std::vector<int>{1, 1, 0, 0}) == 1.0);
    CHECK(auc(std::vector<double>{0.3, 0.3, 0.3}, std::vector<int>{1, 0, 1}) == 0.5);
    CHECK(auc(std::vector<double>{0.9, 0.4, 0.4, 0.1}, std::vector<int>{1, 1, 0, 0}) == 0.875);
    const std::vector<ScoredExample> ex{{0.9, 1, 0}, {0.4, 1, 0}, {0.4, 0, 1}, {0.1, 0, 1}};
    CHECK(auc(ex) == 0.875);
    CHECK_THROWS_AS(auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), DegenerateError);
}

TEST_CASE("rank AUC equals enumeration on tie-laden data") {
    Rng rng(1);
    std::uniform_int_distribution<int> n(2, 60), level(0, 5), bit(0, 1);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<double> s;
        std::vector<int> y;
        const int m = n(rng);
        for (int i = 0; i < m; ++i) {
            s.push_back(level(rng) * 0.25);
            y.push_back(bit(rng));
        }
        y[0] = 1;
        y[1] = 0;
        CHECK(auc(s, y) == brute_auc(s, y));
    }
}

TEST_CASE("method names") {
    CHECK(all_methods().size() == 6);
    for (Method m : all_methods()) CHECK(parse_method(to_string(m)) == m);
    CHECK_THROWS_AS(parse_method("coral"), ConfigError);
}

TEST_CASE("one-hot augmentation") {
    Matrix x(3, 1);
    x << 1, 2, 3;
    const std::vector<int> g{4, 7, 9};
    const Matrix a = one_hot_augment(x, g, {{4, 0}, {7, 1}});
    REQUIRE(a.cols() == 3);
    CHECK(a(0, 1) == 1.0);
    CHECK(a(1, 2) == 1.0);
    CHECK(a.row(2).tail(2).isZero());
}

TEST_CASE("baseline contracts") {
    const SyntheticData d = generate(small_config(3));
    const auto [train, val] = split_groups_holdout(d.labeled, 0.2, 1);
    FitOptions opt;
    opt.seed = 2;

    SUBCASE("global ignores the group") {
        const FittedMethod f = fit_baseline(Method::global, train, val, d.unlabeled, opt);
        for (Eigen::Index i = 0; i < 20; ++i) {
            const Vector x = d.unlabeled.x.row(i).transpose();
            CHECK(f.score(x, 0) == f.score(x, 5));
            CHECK(f.score(x, 0) == f.score(x, 1000));
        }
    }

    SUBCASE("label shift equals pcc at K=1") {
        opt.partition = PartitionModel(Matrix(stack_features(train, d.unlabeled).colwise().mean()));
        const FittedMethod ls = fit_baseline(Method::label_shift, train, val, d.unlabeled, opt);
        const FittedMethod ours = fit_baseline(Method::pcc, train, val, d.unlabeled, opt);
        for (Eigen::Index i = 0; i < d.unlabeled.size(); i += 7) {
            const Vector x = d.unlabeled.x.row(i).transpose();
            const int g = d.unlabeled.group[static_cast<std::size_t>(i)];
            CHECK(std::abs(ls.score(x, g) - ours.score(x, g)) <= 1e-12);
        }
    }

    SUBCASE("cluster_global is pcc without the correction") {
        opt.partition = d.truth.true_partition();
        const FittedMethod cg = fit_baseline(Method::cluster_global, train, val, d.unlabeled, opt);
        const FittedMethod ours = fit_baseline(Method::pcc, train, val, d.unlabeled, opt);
        REQUIRE(ours.model.has_value());
        const auto& ens = ours.model->ensemble();
        for (Eigen::Index i = 0; i < d.unlabeled.size(); i += 7) {
            const Vector x = d.unlabeled.x.row(i).transpose();
            CHECK(std::abs(cg.score(x, 0) - ens.predict(x)) <= 1e-12);
        }
    }

    SUBCASE("true clustering needs a partition") {
        CHECK_THROWS_AS(fit_baseline(Method::pcc_true_clustering, train, val, d.unlabeled, opt), ConfigError);
    }
}

TEST_CASE("experiment bookkeeping") {
    ExperimentConfig cfg;
    cfg.synthetic = small_config(4);
    cfg.repetitions = 2;
    cfg.seed = 9;
    CHECK(ExperimentConfig{}.repetitions >= 10);
    const ExperimentResult r = run_experiment(cfg);
    CHECK(r.repetitions.size() == 2);
    CHECK(r.methods == all_methods());
    for (const auto& rep : r.repetitions) {
        CHECK(rep.complete);
        CHECK(rep.auc.size() == all_methods().size());
        CHECK(rep.test_groups.size() == 2);
    }
    CHECK(r.mean_delta_vs_global.at(Method::global) == 0.0);
    const ExperimentResult again = run_experiment(cfg);
    for (Method m : all_methods()) CHECK(again.mean_auc.at(m) == r.mean_auc.at(m));

    cfg.repetitions = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
