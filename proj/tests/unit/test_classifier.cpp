#include <doctest.h>

#include <random>

#include "pcc/classifier.hpp"
#include "pcc/eval.hpp"
#include "pcc/synthgen.hpp"

using namespace pcc;

namespace {

LabeledSet gaussian_classes(int n, double mu_pos, double mu_neg, double sd, std::uint64_t seed, int d = 1) {
    Rng rng(seed);
    std::normal_distribution<double> z(0.0, sd);
    LabeledSet s;
    s.x = Matrix(2 * n, d);
    for (int i = 0; i < 2 * n; ++i) {
        const int y = i < n ? 1 : 0;
        for (int j = 0; j < d; ++j) s.x(i, j) = (y ? mu_pos : mu_neg) + z(rng);
        s.label.push_back(y);
        s.group.push_back(0);
        s.source.push_back(i);
    }
    return s;
}

std::vector<double> scores_of(const BaseClassifier& c, const Matrix& x) {
    std::vector<double> s;
    for (Eigen::Index i = 0; i < x.rows(); ++i) s.push_back(c.score(x.row(i).transpose()));
    return s;
}

}  // namespace

TEST_CASE("logistic separates separable data") {
    LabeledSet s;
    s.x = Matrix(6, 1);
    s.x << -3, -2, -1, 1, 2, 3;
    s.label = {0, 0, 0, 1, 1, 1};
    s.group.assign(6, 0);
    s.source = {0, 1, 2, 3, 4, 5};
    const BaseClassifier c = fit_base(s, LearnerKind::logistic);
    CHECK(auc(scores_of(c, s.x), s.label) == 1.0);
}

TEST_CASE("logistic is invariant to duplication") {
    const LabeledSet s = gaussian_classes(200, 1.0, -1.0, 1.0, 3, 2);
    const LabeledSet twice = concat(s, s);
    const LogisticModel a = *fit_base(s, LearnerKind::logistic).logistic();
    const LogisticModel b = *fit_base(twice, LearnerKind::logistic).logistic();
    CHECK((a.weights - b.weights).norm() < 1e-8);
    CHECK(std::abs(a.bias - b.bias) < 1e-8);
}

TEST_CASE("logistic gradient matches finite differences") {
    const LabeledSet s = gaussian_classes(50, 0.5, -0.5, 1.0, 4, 2);
    LogisticModel m{Vector::Constant(2, 0.3), -0.2};
    const Vector g = logistic_gradient(m, s, 0.1);
    const double h = 1e-6;
    for (int j = 0; j < 3; ++j) {
        LogisticModel up = m, down = m;
        if (j < 2) {
            up.weights(j) += h;
            down.weights(j) -= h;
        } else {
            up.bias += h;
            down.bias -= h;
        }
        const double fd = (logistic_objective(up, s, 0.1) - logistic_objective(down, s, 0.1)) / (2 * h);
        CHECK(g(j) == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("QDA means lie within three standard errors") {
    const int n = 2000;
    const LabeledSet s = gaussian_classes(n, 2.0, -1.0, 1.5, 5, 2);
    const QdaModel q = *fit_base(s, LearnerKind::qda).qda();
    const double se = 1.5 / std::sqrt(static_cast<double>(n));
    for (int j = 0; j < 2; ++j) {
        CHECK(std::abs(q.mean[1](j) - 2.0) < 3 * se);
        CHECK(std::abs(q.mean[0](j) + 1.0) < 3 * se);
    }
}

TEST_CASE("fit_base needs both classes") {
    LabeledSet s = gaussian_classes(10, 1.0, 0.0, 1.0, 6);
    s.label.assign(20, 1);
    CHECK_THROWS_AS(fit_base(s, LearnerKind::qda), DegenerateError);
    CHECK_THROWS_AS(fit_base(s, LearnerKind::logistic), DegenerateError);
}

TEST_CASE("Platt targets and calibration") {
    const PlattTargets t = platt_targets(3, 2);
    CHECK(t.positive == doctest::Approx(0.8));
    CHECK(t.negative == doctest::Approx(0.25));

    Rng rng(7);
    std::normal_distribution<double> z(0.0, 1.0);
    std::bernoulli_distribution coin(0.3);
    std::vector<double> s;
    std::vector<int> y;
    for (int i = 0; i < 5000; ++i) {
        s.push_back(z(rng));
        y.push_back(coin(rng) ? 1 : 0);
    }
    const CalibrationModel flat = fit_platt(s, y);
    CHECK(std::abs(flat.a) < 0.1);

    // Scores that are already posteriors, passed as logits.
    std::uniform_real_distribution<double> u(0.02, 0.98);
    s.clear();
    y.clear();
    for (int i = 0; i < 50000; ++i) {
        const double p = u(rng);
        s.push_back(std::log(p / (1 - p)));
        y.push_back(std::bernoulli_distribution(p)(rng) ? 1 : 0);
    }
    const CalibrationModel id = fit_platt(s, y);
    CHECK(id.a < 0);
    for (double p = 0.1; p <= 0.9; p += 0.05) CHECK(std::abs(id(std::log(p / (1 - p))) - p) < 0.05);

    // Higher score means higher probability.
    double prev = 0.0;
    for (double x = -5; x <= 5; x += 0.25) {
        CHECK(id(x) >= prev);
        prev = id(x);
    }

    const CalibrationModel constant = fit_platt(std::vector<double>{1, 2, 3}, std::vector<int>{1, 1, 1});
    CHECK(constant(-10) == doctest::Approx(constant(10)));
    CHECK(constant(0) == doctest::Approx(4.0 / 5.0).epsilon(1e-6));
}

TEST_CASE("ensemble fallbacks and clamp") {
    Matrix c(2, 1);
    c << -10, 10;
    const PartitionModel p(c);
    LabeledSet train = gaussian_classes(100, -9.0, -11.0, 1.0, 8);
    LabeledSet right = gaussian_classes(50, 10.0, 10.0, 1.0, 9);
    right.label.assign(100, 0);
    train = concat(train, right);
    const LabeledSet val = concat(gaussian_classes(50, -9.0, -11.0, 1.0, 10), right);
    const ClusterClassifierEnsemble e = fit_ensemble(train, val, p, LearnerKind::qda);
    REQUIRE(e.entries()[1].fallback.has_value());
    Vector x(1);
    for (double v : {5.0, 10.0, 50.0}) {
        x << v;
        CHECK(e.predict(x) == kPosteriorEpsilon);
    }
    for (double v = -20; v <= 0; v += 0.5) {
        x << v;
        const double q = e.predict(x);
        CHECK(q >= kPosteriorEpsilon);
        CHECK(q <= 1 - kPosteriorEpsilon);
    }
}

TEST_CASE("K=1 ensemble is a single calibrated classifier") {
    const LabeledSet train = gaussian_classes(300, 1.0, -1.0, 1.0, 11, 2);
    const LabeledSet val = gaussian_classes(300, 1.0, -1.0, 1.0, 12, 2);
    const PartitionModel p(Matrix(train.x.colwise().mean()));
    const ClusterClassifierEnsemble e = fit_ensemble(train, val, p, LearnerKind::logistic);
    const BaseClassifier base = fit_base(train, LearnerKind::logistic);
    const std::vector<double> vs = scores_of(base, val.x);
    CalibrationModel cal = fit_platt(vs, val.label);
    // Both halves hold 300 of each class, so only Platt's smoothing separates
    // the validation rate from the labeled prior of 0.5.
    const PlattTargets t = platt_targets(300, 300);
    const double fitted = (t.positive + t.negative) / 2.0;
    cal.b -= 0.0 - std::log(fitted / (1.0 - fitted));
    for (Eigen::Index i = 0; i < 20; ++i) {
        const Vector x = val.x.row(i).transpose();
        CHECK(e.predict(x) == doctest::Approx(clamp_probability(cal(base.score(x)), kPosteriorEpsilon)).epsilon(1e-12));
    }
}

TEST_CASE("calibration follows the labeled prior, not the validation balance") {
    // Same class-conditionals, but validation is 80% positive and train 20%.
    LabeledSet train = gaussian_classes(1000, 1.0, -1.0, 1.0, 15);
    LabeledSet val = gaussian_classes(1000, 1.0, -1.0, 1.0, 16);
    std::vector<Eigen::Index> keep_train, keep_val;
    for (Eigen::Index i = 0; i < 2000; ++i) {
        const bool pos = i < 1000;
        if (!pos || i % 4 == 0) keep_train.push_back(i);
        if (pos || i % 4 == 0) keep_val.push_back(i);
    }
    train = select_rows(train, keep_train);
    val = select_rows(val, keep_val);
    const PartitionModel p(Matrix::Zero(1, 1));
    const ClusterClassifierEnsemble e = fit_ensemble(train, val, p, LearnerKind::qda);
    const LabeledSet all = concat(train, val);
    double mean = 0, rate = 0;
    for (Eigen::Index i = 0; i < all.size(); ++i) {
        mean += e.predict(all.x.row(i).transpose());
        rate += all.label[static_cast<std::size_t>(i)];
    }
    CHECK(mean / all.size() == doctest::Approx(rate / all.size()).epsilon(0.03));
}

TEST_CASE("QDA ensemble approaches the mixture Bayes AUC in setting 1") {
    SyntheticConfig cfg;
    cfg.groups = 20;
    cfg.setting = Setting::identical;
    cfg.labeled_size = {500, 50};
    cfg.unlabeled_size = {1000, 50};
    cfg.seed = 13;
    const SyntheticData data = generate(cfg);
    const PartitionModel p = data.truth.true_partition();
    const auto [train, val] = split_groups_holdout(data.labeled, 0.2, 1);
    const ClusterClassifierEnsemble e = fit_ensemble(train, val, p, LearnerKind::qda);

    // Bayes scorer for the mixture: p(x|y=1) / p(x|y=0) with the shared weights.
    const GroupParameters& gp = data.truth.groups.front();
    std::vector<double> fitted, bayes;
    for (Eigen::Index i = 0; i < data.unlabeled.size(); ++i) {
        const Vector x = data.unlabeled.x.row(i).transpose();
        fitted.push_back(e.predict(x));
        double pos = 0, neg = 0;
        for (int k = 0; k < cfg.k; ++k) {
            const auto& c = data.truth.components[static_cast<std::size_t>(k)];
            pos += gp.unlabeled_weights[k] * gp.unlabeled_priors[k] * std::exp(c.positive.log_density(x));
            neg += gp.unlabeled_weights[k] * (1 - gp.unlabeled_priors[k]) * std::exp(c.negative.log_density(x));
        }
        bayes.push_back(pos / (pos + neg));
    }
    const double a_fit = auc(fitted, data.truth.unlabeled_label);
    const double a_bayes = auc(bayes, data.truth.unlabeled_label);
    CHECK(std::abs(a_fit - a_bayes) <= 0.02);
}

TEST_CASE("class mixture recovers two components") {
    Rng rng(14);
    std::normal_distribution<double> z(0.0, 1.0);
    Matrix pts(2000, 2);
    for (int i = 0; i < 2000; ++i) {
        const double off = i % 2 ? 10.0 : -10.0;
        pts(i, 0) = off + z(rng);
        pts(i, 1) = z(rng);
    }
    const ClassMixture m = fit_class_mixture(pts, {}, 3);
    CHECK(m.components.size() == 2);
    Vector x(2);
    x << 10, 0;
    const double peak = m.log_density(x);
    x << 0, 0;
    CHECK(peak > m.log_density(x) + 10);
}

TEST_CASE("learner names") {
    for (LearnerKind k : {LearnerKind::logistic, LearnerKind::qda, LearnerKind::gmm})
        CHECK(parse_learner(to_string(k)) == k);
    CHECK_THROWS_AS(parse_learner("forest"), ConfigError);
}
