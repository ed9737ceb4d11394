#include <doctest.h>

#include <random>

#include "pcc/classifier.hpp"
#include "pcc/oracle.hpp"
#include "pcc/shift.hpp"

using namespace pcc;

namespace {

Matrix column(std::initializer_list<double> v) {
    Matrix m(static_cast<Eigen::Index>(v.size()), 1);
    Eigen::Index i = 0;
    for (double x : v) m(i++, 0) = x;
    return m;
}

// Ensemble of constant-fallback clusters: predictions are known exactly.
ClusterClassifierEnsemble constant_ensemble(const PartitionModel& p, std::vector<double> values) {
    std::vector<ClusterEntry> entries;
    for (double v : values) {
        ClusterEntry e;
        e.fallback = v;
        entries.push_back(e);
    }
    return ClusterClassifierEnsemble(p, std::move(entries));
}

}  // namespace

TEST_CASE("labeled cluster priors") {
    const PartitionModel p(column({0.0, 10.0, 20.0}));
    LabeledSet s;
    s.x = Matrix(14, 1);
    for (int i = 0; i < 10; ++i) {
        s.x(i, 0) = 0.0;
        s.label.push_back(i < 3 ? 1 : 0);
    }
    for (int i = 10; i < 14; ++i) {
        s.x(i, 0) = 10.0;
        s.label.push_back(1);
    }
    s.group.assign(14, 0);
    for (int i = 0; i < 14; ++i) s.source.push_back(i);
    const LabeledPriors pr = labeled_cluster_priors(s, p);
    CHECK(pr.prior[0] == doctest::Approx(0.3));
    CHECK(pr.prior[1] == 1.0 - 1e-6);
    CHECK(pr.fallback[2]);
    CHECK(pr.prior[2] == doctest::Approx(7.0 / 14.0));
    CHECK_FALSE(pr.fallback[0]);
}

TEST_CASE("MLLS fixed points") {
    const std::vector<double> flat(50, 0.3);
    const MllsResult r = mlls_estimate(flat, 0.3);
    CHECK(r.estimate == doctest::Approx(0.3).epsilon(1e-12));

    const std::vector<double> high(20, 1.0 - 1e-6);
    CHECK(mlls_estimate(high, 0.5).estimate == doctest::Approx(1.0 - 1e-6).epsilon(1e-9));

    const std::vector<double> sym{0.9, 0.9, 0.1, 0.1};
    MllsConfig every;
    for (int it = 1; it <= 20; ++it) {
        every.max_iterations = it;
        every.tolerance = 0.0;
        CHECK(std::abs(mlls_estimate(sym, 0.5, every).estimate - 0.5) <= 1e-15);
    }
    CHECK(std::abs(mlls_reference(sym, 0.5, 100) - 0.5) <= 1e-15);
    CHECK_THROWS_AS(mlls_estimate(std::vector<double>{}, 0.5), EmptyCellError);
}

TEST_CASE("MLLS agrees with the long-double reference") {
    Rng rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> n(1, 200);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> post(static_cast<std::size_t>(n(rng)));
        for (double& p : post) p = clamp_probability(u(rng), 1e-6);
        const double prior = clamp_probability(u(rng), 1e-6);
        const MllsResult r = mlls_estimate(post, prior);
        CHECK(std::abs(r.estimate - mlls_reference(post, prior, r.iterations)) <= 1e-9);
    }
}

TEST_CASE("corrected posterior") {
    CHECK(corrected_posterior(0.5, 0.5, 0.8) == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(corrected_posterior(0.5, 0.8, 0.5) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(corrected_posterior(0.37, 0.4, 0.4) == doctest::Approx(0.37).epsilon(1e-15));
}

TEST_CASE("group-cluster prior table") {
    const PartitionModel p(column({0.0, 10.0}));
    const auto ens = constant_ensemble(p, {0.3, 0.6});
    LabeledPriors lp;
    lp.prior = {0.3, 0.6};
    lp.fallback = {false, false};
    lp.global = 0.45;
    UnlabeledSet u;
    u.x = column({0.1, 0.2, 0.3});
    u.group = {5, 5, 5};
    u.source = {0, 1, 2};
    const PriorTable t = estimate_group_cluster_priors(u, ens, lp);
    CHECK(t.has_group(5));
    CHECK_FALSE(t.has_group(4));
    CHECK(t.cell(5, 0).support == 3);
    CHECK_FALSE(t.cell(5, 0).fallback);
    CHECK(t.cell(5, 0).prior == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(t.cell(5, 1).support == 0);
    CHECK(t.cell(5, 1).fallback);
    CHECK(t.cell(5, 1).prior == 0.6);

    const GroupAwareModel m(ens, t);
    Vector x(1);
    x << 0.2;
    const PosteriorDetail d = m.detail(x, 5);
    CHECK(d.group_aware == doctest::Approx(d.group_agnostic).epsilon(1e-12));
    const PosteriorDetail unseen = m.detail(x, 99);
    CHECK(unseen.unseen_group);
    CHECK(unseen.group_aware == unseen.group_agnostic);
}

TEST_CASE("corrected posterior reproduces the discrete truth") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto [joint, biased] = random_pcc_pair(8, 2, 3, seed);
        CHECK(posterior_correction_check(joint, biased) <= 1e-12);
    }
}
