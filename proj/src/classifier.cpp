#include "pcc/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "pcc/partition.hpp"

namespace pcc {

std::string to_string(LearnerKind kind) {
    switch (kind) {
    case LearnerKind::logistic: return "logistic";
    case LearnerKind::qda: return "qda";
    case LearnerKind::gmm: return "gmm";
    }
    throw ConfigError("unknown learner kind");
}

LearnerKind parse_learner(const std::string& name) {
    if (name == "logistic") return LearnerKind::logistic;
    if (name == "qda") return LearnerKind::qda;
    if (name == "gmm") return LearnerKind::gmm;
    throw ConfigError("unknown learner '" + name + "' (expected logistic, qda or gmm)");
}

namespace {

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

Eigen::MatrixXd with_bias(const Matrix& x) {
    Eigen::MatrixXd out(x.rows(), x.cols() + 1);
    out.leftCols(x.cols()) = x;
    out.col(x.cols()).setOnes();
    return out;
}

LogisticModel unpack(const Vector& theta) {
    LogisticModel m;
    m.weights = theta.head(theta.size() - 1);
    m.bias = theta[theta.size() - 1];
    return m;
}

void check_two_classes(const LabeledSet& data) {
    bool pos = false;
    bool neg = false;
    for (int y : data.label) (y == 1 ? pos : neg) = true;
    if (!pos || !neg) throw DegenerateError("training data must contain both classes");
}

BaseClassifier fit_logistic(const LabeledSet& train, const LearnerParams& params) {
    const Eigen::MatrixXd xb = with_bias(train.x);
    const auto n = static_cast<double>(train.size());
    const Eigen::Index p = xb.cols();
    Eigen::VectorXd y(train.size());
    for (Eigen::Index i = 0; i < train.size(); ++i) y[i] = train.label[static_cast<std::size_t>(i)];
    Eigen::VectorXd penalty = Eigen::VectorXd::Constant(p, params.l2);
    penalty[p - 1] = 0.0;

    auto objective = [&](const Eigen::VectorXd& theta) {
        const Eigen::VectorXd z = xb * theta;
        double total = 0.0;
        for (Eigen::Index i = 0; i < z.size(); ++i) total += softplus(z[i]) - y[i] * z[i];
        return total / n + 0.5 * theta.dot(penalty.cwiseProduct(theta));
    };

    Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);
    double value = objective(theta);
    for (int it = 0; it < params.max_iterations; ++it) {
        const Eigen::VectorXd z = xb * theta;
        Eigen::VectorXd mu(z.size());
        Eigen::VectorXd w(z.size());
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            mu[i] = sigmoid(z[i]);
            w[i] = mu[i] * (1.0 - mu[i]);
        }
        const Eigen::VectorXd grad = xb.transpose() * (mu - y) / n + penalty.cwiseProduct(theta);
        if (grad.norm() <= params.gradient_tolerance) break;
        Eigen::MatrixXd hessian = xb.transpose() * w.asDiagonal() * xb / n;
        hessian.diagonal() += penalty + Eigen::VectorXd::Constant(p, 1e-12);
        const Eigen::VectorXd step = hessian.ldlt().solve(grad);
        double t = 1.0;
        bool moved = false;
        while (t > 1e-12) {
            const Eigen::VectorXd candidate = theta - t * step;
            const double cv = objective(candidate);
            if (cv <= value - 1e-4 * t * grad.dot(step) || (cv <= value && t < 1e-6)) {
                theta = candidate;
                value = cv;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if (!moved) break;
    }
    return BaseClassifier(unpack(theta));
}

BaseClassifier fit_qda(const LabeledSet& train, const LearnerParams& params) {
    QdaModel m;
    const Eigen::Index d = train.dim();
    std::array<Eigen::Index, 2> counts{0, 0};
    for (int y : train.label) ++counts[static_cast<std::size_t>(y)];
    for (int c = 0; c < 2; ++c) {
        const auto ci = static_cast<std::size_t>(c);
        Vector mean = Vector::Zero(d);
        for (Eigen::Index i = 0; i < train.size(); ++i)
            if (train.label[static_cast<std::size_t>(i)] == c) mean += train.x.row(i).transpose();
        mean /= static_cast<double>(counts[ci]);
        Matrix cov = Matrix::Zero(d, d);
        for (Eigen::Index i = 0; i < train.size(); ++i) {
            if (train.label[static_cast<std::size_t>(i)] != c) continue;
            const Vector diff = train.x.row(i).transpose() - mean;
            cov.noalias() += diff * diff.transpose();
        }
        cov /= static_cast<double>(counts[ci]);
        const double scale = std::max(cov.trace() / static_cast<double>(d), 1e-12);
        cov.diagonal().array() += params.ridge * scale;
        m.mean[ci] = std::move(mean);
        m.covariance[ci] = std::move(cov);
        m.log_prior[ci] = std::log(static_cast<double>(counts[ci]) / static_cast<double>(train.size()));
    }
    m.factorize();
    return BaseClassifier(std::move(m));
}

double log_sum_exp(std::span<const double> v) {
    const double top = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(top)) return top;
    double total = 0.0;
    for (double x : v) total += std::exp(x - top);
    return top + std::log(total);
}

// Weighted mean and covariance with ridge * scale on the diagonal.
void moments(const Matrix& points, const Eigen::VectorXd& weight, double ridge, MixtureComponent& c) {
    const double total = weight.sum();
    c.mean = (points.transpose() * weight) / total;
    const Matrix centered = points.rowwise() - c.mean.transpose();
    c.covariance = centered.transpose() * weight.asDiagonal() * centered / total;
    c.covariance.diagonal().array() += ridge;
}

struct MixtureFit {
    ClassMixture mixture;
    double log_likelihood = 0.0;
};

MixtureFit fit_mixture_em(const Matrix& points, int m, double ridge, const LearnerParams& params,
                          std::uint64_t seed) {
    const Eigen::Index n = points.rows();
    Eigen::MatrixXd resp = Eigen::MatrixXd::Zero(n, m);
    if (m == 1) {
        resp.setOnes();
    } else {
        KMeansConfig km;
        km.seed = seed;
        const std::vector<int> labels = fit_kmeans(points, m, km).assign_all(points);
        for (Eigen::Index i = 0; i < n; ++i) resp(i, labels[static_cast<std::size_t>(i)]) = 1.0;
    }

    MixtureFit fit;
    fit.mixture.components.resize(static_cast<std::size_t>(m));
    double previous = -std::numeric_limits<double>::infinity();
    std::vector<double> logp(static_cast<std::size_t>(m));
    for (int it = 0; it < params.em_iterations; ++it) {
        // M-step.
        for (int j = 0; j < m; ++j) {
            auto& c = fit.mixture.components[static_cast<std::size_t>(j)];
            const double mass = std::max(resp.col(j).sum(), 1e-12);
            c.log_weight = std::log(mass / static_cast<double>(n));
            moments(points, resp.col(j), ridge, c);
        }
        fit.mixture.factorize();
        // E-step.
        double ll = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const Vector x = points.row(i).transpose();
            for (int j = 0; j < m; ++j) {
                const auto& c = fit.mixture.components[static_cast<std::size_t>(j)];
                const Vector z = c.chol.triangularView<Eigen::Lower>().solve(x - c.mean);
                logp[static_cast<std::size_t>(j)] = c.log_weight - 0.5 * c.log_det - 0.5 * z.squaredNorm();
            }
            const double total = log_sum_exp(logp);
            ll += total;
            for (int j = 0; j < m; ++j) resp(i, j) = std::exp(logp[static_cast<std::size_t>(j)] - total);
        }
        const double d = static_cast<double>(points.cols());
        fit.log_likelihood = ll - 0.5 * static_cast<double>(n) * d * std::log(2.0 * std::numbers::pi);
        if (m == 1 || fit.log_likelihood - previous <= params.em_tolerance * static_cast<double>(n)) break;
        previous = fit.log_likelihood;
    }
    return fit;
}

}  // namespace

void ClassMixture::factorize() {
    for (auto& c : components) {
        Eigen::LLT<Eigen::MatrixXd> llt(c.covariance);
        if (llt.info() != Eigen::Success) throw DataError("mixture covariance is not positive definite");
        c.chol = llt.matrixL();
        c.log_det = 2.0 * c.chol.diagonal().array().log().sum();
    }
}

double ClassMixture::log_density(const VectorRef& x) const {
    std::vector<double> terms;
    terms.reserve(components.size());
    const double d = static_cast<double>(x.size());
    for (const auto& c : components) {
        const Vector z = c.chol.triangularView<Eigen::Lower>().solve(x - c.mean);
        terms.push_back(c.log_weight - 0.5 * c.log_det - 0.5 * z.squaredNorm());
    }
    return log_sum_exp(terms) - 0.5 * d * std::log(2.0 * std::numbers::pi);
}

ClassMixture fit_class_mixture(const Matrix& points, const LearnerParams& params, std::uint64_t seed) {
    const Eigen::Index n = points.rows();
    const Eigen::Index d = points.cols();
    if (n == 0) throw ConfigError("cannot fit a mixture to no points");
    const Matrix centered = points.rowwise() - points.colwise().mean();
    const double scale = std::max((centered.cwiseAbs2().sum() / static_cast<double>(n)) / static_cast<double>(d), 1e-12);
    const double ridge = params.ridge * scale;
    const double free_per_component = static_cast<double>(d + d * (d + 1) / 2 + 1);

    std::optional<MixtureFit> best;
    double best_bic = std::numeric_limits<double>::infinity();
    for (int m : params.mixture_components) {
        if (m < 1) throw ConfigError("mixture component counts must be positive");
        if (m > 1 && static_cast<double>(n) < static_cast<double>(m) * free_per_component) continue;
        MixtureFit fit;
        try {
            fit = fit_mixture_em(points, m, ridge, params, derive_seed(seed, static_cast<std::uint64_t>(m)));
        } catch (const ConfigError&) {
            continue;  // fewer distinct points than components
        }
        const double p = static_cast<double>(m) * free_per_component - 1.0;
        const double bic = -2.0 * fit.log_likelihood + p * std::log(static_cast<double>(n));
        if (bic < best_bic) {
            best_bic = bic;
            best = std::move(fit);
        }
    }
    if (!best) best = fit_mixture_em(points, 1, ridge, params, seed);
    return std::move(best->mixture);
}

void QdaModel::factorize() {
    for (std::size_t c = 0; c < 2; ++c) {
        Eigen::LLT<Eigen::MatrixXd> llt(covariance[c]);
        if (llt.info() != Eigen::Success) throw DataError("QDA covariance is not positive definite");
        chol[c] = llt.matrixL();
        log_det[c] = 2.0 * chol[c].diagonal().array().log().sum();
    }
}

LearnerKind BaseClassifier::kind() const {
    if (std::holds_alternative<LogisticModel>(model_)) return LearnerKind::logistic;
    return std::holds_alternative<QdaModel>(model_) ? LearnerKind::qda : LearnerKind::gmm;
}

Eigen::Index BaseClassifier::dim() const {
    if (const auto* m = logistic()) return m->weights.size();
    if (const auto* q = qda()) return q->mean[0].size();
    return gmm()->mixture[0].components.front().mean.size();
}

double BaseClassifier::score(const VectorRef& x) const {
    if (x.size() != dim()) throw ShapeError("feature dimension does not match the classifier");
    if (const auto* m = logistic()) return m->weights.dot(x) + m->bias;
    if (const auto* g = gmm())
        return (g->log_prior[1] + g->mixture[1].log_density(x)) - (g->log_prior[0] + g->mixture[0].log_density(x));
    const QdaModel& q = *qda();
    std::array<double, 2> ll{};
    for (std::size_t c = 0; c < 2; ++c) {
        const Vector z = q.chol[c].triangularView<Eigen::Lower>().solve(x - q.mean[c]);
        ll[c] = q.log_prior[c] - 0.5 * q.log_det[c] - 0.5 * z.squaredNorm();
    }
    return ll[1] - ll[0];
}

double logistic_objective(const LogisticModel& model, const LabeledSet& data, double l2) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        const double z = model.weights.dot(data.x.row(i).transpose()) + model.bias;
        total += softplus(z) - data.label[static_cast<std::size_t>(i)] * z;
    }
    return total / static_cast<double>(data.size()) + 0.5 * l2 * model.weights.squaredNorm();
}

Vector logistic_gradient(const LogisticModel& model, const LabeledSet& data, double l2) {
    Vector grad = Vector::Zero(model.weights.size() + 1);
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        const double z = model.weights.dot(data.x.row(i).transpose()) + model.bias;
        const double r = sigmoid(z) - data.label[static_cast<std::size_t>(i)];
        grad.head(model.weights.size()) += r * data.x.row(i).transpose();
        grad[model.weights.size()] += r;
    }
    grad /= static_cast<double>(data.size());
    grad.head(model.weights.size()) += l2 * model.weights;
    return grad;
}

BaseClassifier fit_base(const LabeledSet& train, LearnerKind kind, const LearnerParams& params,
                        std::uint64_t seed) {
    if (train.empty()) throw ConfigError("cannot fit a classifier on an empty set");
    check_two_classes(train);
    switch (kind) {
    case LearnerKind::logistic: return fit_logistic(train, params);
    case LearnerKind::qda: return fit_qda(train, params);
    case LearnerKind::gmm: break;
    }
    GmmModel m;
    for (int c = 0; c < 2; ++c) {
        std::vector<Eigen::Index> rows;
        for (Eigen::Index i = 0; i < train.size(); ++i)
            if (train.label[static_cast<std::size_t>(i)] == c) rows.push_back(i);
        const Matrix points = train.x(rows, Eigen::all);
        m.mixture[static_cast<std::size_t>(c)] = fit_class_mixture(points, params, derive_seed(seed, static_cast<std::uint64_t>(c)));
        m.log_prior[static_cast<std::size_t>(c)] = std::log(static_cast<double>(rows.size()) / static_cast<double>(train.size()));
    }
    return BaseClassifier(std::move(m));
}

double CalibrationModel::operator()(double score) const {
    // 1 / (1 + exp(z)) == sigmoid(-z)
    return sigmoid(-(a * score + b));
}

PlattTargets platt_targets(std::int64_t n_positive, std::int64_t n_negative) {
    return {(static_cast<double>(n_positive) + 1.0) / (static_cast<double>(n_positive) + 2.0),
            1.0 / (static_cast<double>(n_negative) + 2.0)};
}

namespace {

// NLL term for one example with z = a*s + b and target t:
// -t log p - (1-t) log(1-p) with p = 1/(1+e^z).
double platt_term(double z, double t) { return softplus(z) - (1.0 - t) * z; }

}  // namespace

double platt_objective(const CalibrationModel& model, std::span<const double> scores,
                       std::span<const int> labels) {
    std::int64_t n_pos = 0;
    for (int y : labels) n_pos += y == 1;
    const PlattTargets t = platt_targets(n_pos, static_cast<std::int64_t>(labels.size()) - n_pos);
    double total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i)
        total += platt_term(model.a * scores[i] + model.b, labels[i] == 1 ? t.positive : t.negative);
    return total;
}

CalibrationModel fit_platt(std::span<const double> scores, std::span<const int> labels) {
    if (scores.empty()) throw ConfigError("Platt scaling needs at least one example");
    if (scores.size() != labels.size()) throw ShapeError("scores and labels differ in length");
    std::int64_t n_pos = 0;
    for (int y : labels) n_pos += y == 1;
    const auto n_neg = static_cast<std::int64_t>(labels.size()) - n_pos;
    const PlattTargets targets = platt_targets(n_pos, n_neg);
    if (n_pos == 0 || n_neg == 0) {
        const double t = n_pos > 0 ? targets.positive : targets.negative;
        return {0.0, std::log((1.0 - t) / t)};
    }

    std::vector<double> t(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) t[i] = labels[i] == 1 ? targets.positive : targets.negative;

    auto objective = [&](double a, double b) {
        double total = 0.0;
        for (std::size_t i = 0; i < scores.size(); ++i) total += platt_term(a * scores[i] + b, t[i]);
        return total;
    };

    double a = 0.0;
    double b = std::log((static_cast<double>(n_neg) + 1.0) / (static_cast<double>(n_pos) + 1.0));
    double value = objective(a, b);
    for (int it = 0; it < 100; ++it) {
        double h11 = 1e-12, h22 = 1e-12, h21 = 0.0, g1 = 0.0, g2 = 0.0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            const double p = sigmoid(-(a * scores[i] + b));
            const double q = p * (1.0 - p);
            const double s = scores[i];
            h11 += s * s * q;
            h22 += q;
            h21 += s * q;
            const double r = t[i] - p;
            g1 += s * r;
            g2 += r;
        }
        if (std::hypot(g1, g2) <= 1e-8) break;
        const double det = h11 * h22 - h21 * h21;
        const double da = -(h22 * g1 - h21 * g2) / det;
        const double db = -(-h21 * g1 + h11 * g2) / det;
        const double gd = g1 * da + g2 * db;
        double step = 1.0;
        bool moved = false;
        while (step >= 1e-10) {
            const double na = a + step * da;
            const double nb = b + step * db;
            const double nv = objective(na, nb);
            if (nv < value + 1e-4 * step * gd) {
                a = na;
                b = nb;
                value = nv;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;
    }
    return {a, b};
}

ClusterClassifierEnsemble::ClusterClassifierEnsemble(PartitionModel partition, std::vector<ClusterEntry> entries)
    : partition_(std::move(partition)), entries_(std::move(entries)) {
    if (entries_.size() != static_cast<std::size_t>(partition_.k()))
        throw ConfigError("an ensemble needs one entry per cluster");
    for (const auto& e : entries_)
        if (!e.base && !e.fallback) throw ConfigError("an ensemble entry needs a classifier or a fallback");
}

double ClusterClassifierEnsemble::predict_in_cluster(int cluster, const VectorRef& x) const {
    const ClusterEntry& e = entries_.at(static_cast<std::size_t>(cluster));
    if (e.fallback) return *e.fallback;
    return clamp_probability(e.calibration(e.base->score(x)), kPosteriorEpsilon);
}

double ClusterClassifierEnsemble::predict(const VectorRef& x) const {
    return predict_in_cluster(partition_.assign(x), x);
}

ClusterClassifierEnsemble fit_ensemble(const LabeledSet& train, const LabeledSet& validation,
                                       const PartitionModel& partition, LearnerKind kind,
                                       const LearnerParams& params, std::uint64_t seed) {
    if (train.empty()) throw ConfigError("cannot fit an ensemble on an empty training set");
    double global_prior = 0.0;
    for (int y : train.label) global_prior += y;
    global_prior /= static_cast<double>(train.size());

    std::vector<ClusterEntry> entries;
    for (int k = 0; k < partition.k(); ++k) {
        const LabeledSet tk = restrict(train, partition, k);
        const LabeledSet vk = validation.empty() ? LabeledSet(train.dim()) : restrict(validation, partition, k);
        ClusterEntry entry;
        std::int64_t pos = 0;
        for (int y : tk.label) pos += y;
        const bool both = pos > 0 && pos < tk.size();
        if (!both || vk.empty()) {
            std::int64_t vpos = 0;
            for (int y : vk.label) vpos += y;
            const auto rows = tk.size() + vk.size();
            const double prior = rows == 0 ? global_prior : static_cast<double>(pos + vpos) / static_cast<double>(rows);
            entry.fallback = clamp_probability(prior, kPosteriorEpsilon);
        } else {
            entry.base = fit_base(tk, kind, params, derive_seed(seed, static_cast<std::uint64_t>(k)));
            std::vector<double> scores(static_cast<std::size_t>(vk.size()));
            for (Eigen::Index i = 0; i < vk.size(); ++i)
                scores[static_cast<std::size_t>(i)] = entry.base->score(vk.x.row(i).transpose());
            entry.calibration = fit_platt(scores, vk.label);
            // Validation groups carry their own class balance; move the sigmoid
            // to the cluster prior of the whole labeled set (train and validation),
            // which leaves the within-cluster likelihood ratio untouched.
            std::int64_t vpos = 0;
            for (int y : vk.label) vpos += y;
            const PlattTargets t = platt_targets(vpos, vk.size() - vpos);
            const double fitted_rate =
                (static_cast<double>(vpos) * t.positive + static_cast<double>(vk.size() - vpos) * t.negative) /
                static_cast<double>(vk.size());
            const double labeled_rate = clamp_probability(
                static_cast<double>(pos + vpos) / static_cast<double>(tk.size() + vk.size()), kPosteriorEpsilon);
            entry.calibration.b -= logit(labeled_rate) - logit(fitted_rate);
        }
        entries.push_back(std::move(entry));
    }
    return ClusterClassifierEnsemble(partition, std::move(entries));
}

}  // namespace pcc
