#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "pcc/eval.hpp"
#include "pcc/synthgen.hpp"

using namespace pcc;

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double mc_auc(const ClusterComponentPair& pair, int n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> s;
    std::vector<int> y;
    for (int i = 0; i < n; ++i) {
        s.push_back(pair.log_likelihood_ratio(pair.positive.sample(rng)));
        y.push_back(1);
        s.push_back(pair.log_likelihood_ratio(pair.negative.sample(rng)));
        y.push_back(0);
    }
    return auc(s, y);
}

}  // namespace

TEST_CASE("univariate closed-form AUC") {
    // Phi(delta / sqrt 2) = 0.85.
    double lo = 0, hi = 10;
    for (int i = 0; i < 200; ++i) {
        const double mid = (lo + hi) / 2;
        (normal_cdf(mid / std::sqrt(2.0)) < 0.85 ? lo : hi) = mid;
    }
    Vector m0 = Vector::Zero(1), m1 = Vector::Constant(1, lo);
    ClusterComponentPair pair{GaussianComponent(m1, Matrix::Identity(1, 1)), GaussianComponent(m0, Matrix::Identity(1, 1)),
                              Vector::Zero(1), 0.85, 0.0};
    CHECK(bayes_auc(pair, 100000, 1) == doctest::Approx(0.85).epsilon(0.005));
}

TEST_CASE("component pairs hit the AUC range and stay separated") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto pairs = sample_component_pairs(2, 2, {0.75, 0.95}, seed);
        REQUIRE(pairs.size() == 2);
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            const double a = mc_auc(pairs[i], 100000, seed * 10 + i);
            CHECK(a >= 0.74);
            CHECK(a <= 0.96);
        }
        for (const auto* a : {&pairs[0].positive, &pairs[0].negative})
            for (const auto* b : {&pairs[1].positive, &pairs[1].negative})
                CHECK(mahalanobis_separation(*a, *b) >= PairOptions{}.separation);
    }
}

TEST_CASE("setting 1 shares parameters everywhere") {
    SyntheticConfig cfg;
    cfg.groups = 10;
    cfg.setting = Setting::identical;
    cfg.labeled_size = {100, 10};
    cfg.unlabeled_size = {200, 10};
    cfg.seed = 4;
    const SyntheticData d = generate(cfg);
    const GroupParameters& first = d.truth.groups.front();
    for (const GroupParameters& g : d.truth.groups) {
        CHECK(g.labeled_weights == first.labeled_weights);
        CHECK(g.labeled_priors == first.labeled_priors);
        CHECK(g.unlabeled_weights == g.labeled_weights);
        CHECK(g.unlabeled_priors == g.labeled_priors);
    }
}

TEST_CASE("stratum counts") {
    CHECK(stratum_count(0.25, 0.6, 10000) == 1500);
    CHECK(stratum_count(0.25, 0.4, 10000) == 1000);
    CHECK(stratum_count(0.5, 0.5, 2) == 0);  // 0.5 rounds to even
    CHECK(stratum_count(0.5, 0.5, 6) == 2);  // 1.5 rounds to even
}

TEST_CASE("setting 2 strata follow the recorded parameters") {
    SyntheticConfig cfg;
    cfg.groups = 5;
    cfg.labeled_size = {300, 10};
    cfg.unlabeled_size = {3000, 10};
    cfg.seed = 5;
    const SyntheticData d = generate(cfg);
    for (int g = 0; g < cfg.groups; ++g) {
        const GroupParameters& gp = d.truth.groups[static_cast<std::size_t>(g)];
        for (int k = 0; k < cfg.k; ++k) {
            std::int64_t pos = 0, neg = 0;
            for (Eigen::Index i = 0; i < d.unlabeled.size(); ++i)
                if (d.unlabeled.group[static_cast<std::size_t>(i)] == g && d.truth.unlabeled_cluster[static_cast<std::size_t>(i)] == k)
                    (d.truth.unlabeled_label[static_cast<std::size_t>(i)] ? pos : neg)++;
            CHECK(pos == stratum_count(gp.unlabeled_weights[k], gp.unlabeled_priors[k], gp.unlabeled_size));
            CHECK(neg == stratum_count(gp.unlabeled_weights[k], 1 - gp.unlabeled_priors[k], gp.unlabeled_size));
        }
    }
}

TEST_CASE("K=1 is pure label shift") {
    SyntheticConfig cfg;
    cfg.k = 1;
    cfg.groups = 4;
    cfg.labeled_size = {100, 1};
    cfg.unlabeled_size = {100, 1};
    cfg.seed = 6;
    const SyntheticData d = generate(cfg);
    for (const GroupParameters& g : d.truth.groups) {
        CHECK(g.labeled_weights == std::vector<double>{1.0});
        CHECK(g.unlabeled_weights == std::vector<double>{1.0});
    }
}

TEST_CASE("labeled sizes follow the configured normal") {
    SyntheticConfig cfg;
    cfg.groups = 100;
    cfg.labeled_size = {1000, 100};
    cfg.unlabeled_size = {50, 1};
    cfg.seed = 7;
    const SyntheticData d = generate(cfg);
    double rows = static_cast<double>(d.labeled.size());
    // Sum of 100 draws: mean 1e5, sd 1e3; rounding of strata adds at most K/2 per group.
    CHECK(std::abs(rows - 1e5) < 5e3);
    std::int64_t recorded = 0;
    for (const auto& g : d.truth.groups) recorded += g.labeled_size;
    CHECK(std::abs(static_cast<double>(recorded) - rows) <= cfg.groups * cfg.k);
}

TEST_CASE("generation is deterministic per seed") {
    SyntheticConfig cfg;
    cfg.groups = 5;
    cfg.labeled_size = {100, 10};
    cfg.unlabeled_size = {100, 10};
    cfg.seed = 8;
    const SyntheticData a = generate(cfg), b = generate(cfg);
    CHECK(a.labeled.x == b.labeled.x);
    CHECK(a.unlabeled.x == b.unlabeled.x);
    cfg.seed = 9;
    CHECK(generate(cfg).labeled.x != a.labeled.x);
}

TEST_CASE("Dirichlet draws lie on the simplex") {
    Rng rng(1);
    for (int i = 0; i < 100; ++i) {
        const auto w = sample_dirichlet(4, 2.0, rng);
        double s = 0;
        for (double v : w) {
            CHECK(v >= 0);
            s += v;
        }
        CHECK(s == doctest::Approx(1.0));
    }
}

TEST_CASE("resampling a pool") {
    Rng rng(2);
    std::normal_distribution<double> z(0.0, 1.0);
    LabeledSet pool;
    const int n = 400;
    pool.x = Matrix(n, 1);
    for (int i = 0; i < n; ++i) {
        const int k = i % 2;
        pool.x(i, 0) = (k ? 20.0 : 0.0) + z(rng);
        pool.label.push_back((i / 2) % 5 == 0 ? 1 : 0);  // 40 positives per cluster
        pool.group.push_back(i % 4 < 2 ? 0 : 1);
        pool.source.push_back(i);
    }
    Matrix c(2, 1);
    c << 0, 20;
    const PartitionModel p(c);
    ResampleConfig rc;
    rc.seed = 3;
    const SyntheticData d = resample_pool(pool, p, rc);
    CHECK(d.truth.partition.has_value());
    for (int g = 0; g < 2; ++g) {
        std::set<std::int64_t> lab, unl;
        for (Eigen::Index i = 0; i < d.labeled.size(); ++i)
            if (d.labeled.group[static_cast<std::size_t>(i)] == g) lab.insert(d.labeled.source[static_cast<std::size_t>(i)]);
        for (Eigen::Index i = 0; i < d.unlabeled.size(); ++i)
            if (d.unlabeled.group[static_cast<std::size_t>(i)] == g) unl.insert(d.unlabeled.source[static_cast<std::size_t>(i)]);
        for (auto s : lab) CHECK(unl.count(s) == 0);
        for (auto s : lab) CHECK(pool.group[static_cast<std::size_t>(s)] == g);
    }
    // With replacement: more rows than distinct sources.
    std::set<std::int64_t> distinct(d.labeled.source.begin(), d.labeled.source.end());
    CHECK(distinct.size() < static_cast<std::size_t>(d.labeled.size()));
}
