#include "pcc/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <tuple>
#include <sstream>

#include "pcc/eval.hpp"

namespace pcc {

GaussianComponent::GaussianComponent(Vector mean, Matrix covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance)) {
    const Eigen::Index d = mean_.size();
    if (covariance_.rows() != d || covariance_.cols() != d)
        throw ShapeError("covariance shape does not match the mean");
    if (!covariance_.isApprox(covariance_.transpose(), 1e-12))
        throw DataError("covariance must be symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(covariance_);
    if (llt.info() != Eigen::Success) throw DataError("covariance must be positive definite");
    chol_ = llt.matrixL();
    const double log_det = 2.0 * chol_.diagonal().array().log().sum();
    log_norm_ = -0.5 * (static_cast<double>(d) * std::log(2.0 * std::numbers::pi) + log_det);
}

double GaussianComponent::log_density(const VectorRef& x) const {
    const Vector z = chol_.triangularView<Eigen::Lower>().solve(x - mean_);
    return log_norm_ - 0.5 * z.squaredNorm();
}

Vector GaussianComponent::sample(Rng& rng) const {
    std::normal_distribution<double> normal;
    Vector z(dim());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
    return transform(z);
}

double mahalanobis_separation(const GaussianComponent& a, const GaussianComponent& b) {
    const Matrix avg = 0.5 * (a.covariance() + b.covariance());
    const Vector diff = a.mean() - b.mean();
    return std::sqrt(diff.dot(Eigen::MatrixXd(avg).llt().solve(diff)));
}

double bayes_auc(const ClusterComponentPair& pair, int draws, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> scores;
    std::vector<int> labels;
    scores.reserve(static_cast<std::size_t>(2 * draws));
    labels.reserve(static_cast<std::size_t>(2 * draws));
    for (int i = 0; i < draws; ++i) {
        scores.push_back(pair.log_likelihood_ratio(pair.positive.sample(rng)));
        labels.push_back(1);
    }
    for (int i = 0; i < draws; ++i) {
        scores.push_back(pair.log_likelihood_ratio(pair.negative.sample(rng)));
        labels.push_back(0);
    }
    return auc(scores, labels);
}

namespace {

Matrix random_covariance(Eigen::Index d, double scale, Rng& rng) {
    std::normal_distribution<double> normal;
    Matrix a(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) a(i, j) = normal(rng) / std::sqrt(static_cast<double>(d));
    Matrix cov = a * a.transpose() + 0.1 * Matrix::Identity(d, d);
    cov = 0.5 * (cov + cov.transpose());
    return scale * cov;
}

Vector random_direction(Eigen::Index d, Rng& rng) {
    std::normal_distribution<double> normal;
    Vector u(d);
    do {
        for (Eigen::Index i = 0; i < d; ++i) u[i] = normal(rng);
    } while (u.norm() < 1e-8);
    return u / u.norm();
}

// Common random numbers make the Monte-Carlo AUC a smooth function of the
// mean offset, so bisection on the offset is well behaved.
class AucCalibrator {
public:
    AucCalibrator(Matrix cov_pos, Matrix cov_neg, Vector direction, int draws, Rng& rng)
        : cov_pos_(std::move(cov_pos)), cov_neg_(std::move(cov_neg)), u_(std::move(direction)) {
        std::normal_distribution<double> normal;
        const Eigen::Index d = u_.size();
        z_pos_.resize(draws, d);
        z_neg_.resize(draws, d);
        for (Eigen::Index i = 0; i < draws; ++i)
            for (Eigen::Index j = 0; j < d; ++j) z_pos_(i, j) = normal(rng);
        for (Eigen::Index i = 0; i < draws; ++i)
            for (Eigen::Index j = 0; j < d; ++j) z_neg_(i, j) = normal(rng);
    }

    ClusterComponentPair pair(double offset, double blend, const Vector& center) const {
        const Matrix mid = 0.5 * (cov_pos_ + cov_neg_);
        Matrix cp = (1.0 - blend) * cov_pos_ + blend * mid;
        Matrix cn = (1.0 - blend) * cov_neg_ + blend * mid;
        ClusterComponentPair out;
        out.positive = GaussianComponent(center + 0.5 * offset * u_, 0.5 * (cp + cp.transpose()));
        out.negative = GaussianComponent(center - 0.5 * offset * u_, 0.5 * (cn + cn.transpose()));
        out.center = center;
        return out;
    }

    double auc_at(double offset, double blend) const {
        const ClusterComponentPair p = pair(offset, blend, Vector::Zero(u_.size()));
        std::vector<double> scores;
        std::vector<int> labels;
        scores.reserve(static_cast<std::size_t>(z_pos_.rows() + z_neg_.rows()));
        for (Eigen::Index i = 0; i < z_pos_.rows(); ++i) {
            scores.push_back(p.log_likelihood_ratio(p.positive.transform(z_pos_.row(i).transpose())));
            labels.push_back(1);
        }
        for (Eigen::Index i = 0; i < z_neg_.rows(); ++i) {
            scores.push_back(p.log_likelihood_ratio(p.negative.transform(z_neg_.row(i).transpose())));
            labels.push_back(0);
        }
        return auc(scores, labels);
    }

    // Returns (offset, blend, achieved AUC) with |AUC - target| <= tolerance.
    std::tuple<double, double, double> calibrate(double target, double tolerance) const {
        double blend = 0.0;
        double base = auc_at(0.0, blend);
        while (base > target - tolerance && blend < 1.0) {
            blend = std::min(1.0, blend + 0.25);
            base = auc_at(0.0, blend);
        }
        double lo = 0.0;
        double hi = 1.0;
        double hi_auc = auc_at(hi, blend);
        while (hi_auc < target && hi < 1e3) {
            lo = hi;
            hi *= 2.0;
            hi_auc = auc_at(hi, blend);
        }
        double mid = hi;
        double mid_auc = hi_auc;
        for (int it = 0; it < 100 && std::abs(mid_auc - target) > 0.5 * tolerance; ++it) {
            mid = 0.5 * (lo + hi);
            mid_auc = auc_at(mid, blend);
            (mid_auc < target ? lo : hi) = mid;
        }
        return {mid, blend, mid_auc};
    }

private:
    Matrix cov_pos_;
    Matrix cov_neg_;
    Vector u_;
    Matrix z_pos_;
    Matrix z_neg_;
};

}  // namespace

std::vector<ClusterComponentPair> sample_component_pairs(int d, int k,
                                                         std::pair<double, double> auc_range,
                                                         std::uint64_t seed,
                                                         const PairOptions& options) {
    if (d < 1 || k < 1) throw ConfigError("component pairs need d >= 1 and K >= 1");
    if (!(auc_range.first > 0.5 && auc_range.first <= auc_range.second && auc_range.second < 1.0))
        throw ConfigError("AUC range must satisfy 0.5 < low <= high < 1");
    Rng rng(seed);
    std::uniform_real_distribution<double> target_dist(auc_range.first, auc_range.second);
    const double half_width = (options.separation + 2.0) * std::max(1.0, std::pow(static_cast<double>(k), 1.0 / d));
    std::uniform_real_distribution<double> box(-half_width, half_width);

    std::vector<ClusterComponentPair> pairs;
    int failures = 0;
    double shrink = 1.0;
    for (int c = 0; c < k; ++c) {
        const double target = target_dist(rng);
        bool placed = false;
        while (!placed) {
            AucCalibrator calibrator(random_covariance(d, shrink, rng), random_covariance(d, shrink, rng),
                                     random_direction(d, rng), options.calibration_draws, rng);
            const auto [offset, blend, achieved] = calibrator.calibrate(target, options.auc_tolerance);
            // Retry centers with this shape until 100 failures shrink it.
            for (int local = 0; local < 100 && !placed; ++local) {
                Vector center(d);
                for (int j = 0; j < d; ++j) center[j] = box(rng);
                ClusterComponentPair candidate = calibrator.pair(offset, blend, center);
                bool ok = true;
                for (const auto& prev : pairs) {
                    for (const auto* a : {&candidate.positive, &candidate.negative})
                        for (const auto* b : {&prev.positive, &prev.negative})
                            ok = ok && mahalanobis_separation(*a, *b) >= options.separation;
                }
                if (ok) {
                    candidate.target_auc = target;
                    candidate.bayes_auc = achieved;
                    pairs.push_back(std::move(candidate));
                    placed = true;
                } else if (++failures >= options.attempt_budget) {
                    std::ostringstream msg;
                    msg << "could not place " << k << " separated component pairs within the budget of "
                        << options.attempt_budget << " attempts";
                    throw GenerationError(msg.str());
                }
            }
            if (!placed) shrink *= 0.9;
        }
    }
    return pairs;
}

void SyntheticConfig::validate() const {
    if (d < 1) throw ConfigError("d must be at least 1");
    if (k < 1) throw ConfigError("K must be at least 1");
    if (groups < 1) throw ConfigError("the number of groups must be at least 1");
    if (setting != Setting::identical && setting != Setting::partition_shift)
        throw ConfigError("setting must be 1 or 2");
    if (!(alpha_range.first > 0.0 && alpha_range.first <= alpha_range.second && alpha_range.second < 1.0))
        throw ConfigError("alpha range must lie within (0, 1)");
    if (!(dirichlet_concentration > 0.0)) throw ConfigError("Dirichlet concentration must be positive");
    if (!(labeled_size.mean > 0.0) || !(unlabeled_size.mean > 0.0) || labeled_size.sd < 0.0 ||
        unlabeled_size.sd < 0.0)
        throw ConfigError("group size distributions need positive means and non-negative deviations");
}

std::vector<double> sample_dirichlet(int k, double concentration, Rng& rng) {
    std::gamma_distribution<double> gamma(concentration, 1.0);
    std::vector<double> w(static_cast<std::size_t>(k));
    double total = 0.0;
    do {
        total = 0.0;
        for (auto& v : w) {
            v = gamma(rng);
            total += v;
        }
    } while (!(total > 0.0));
    for (auto& v : w) v /= total;
    return w;
}

std::int64_t stratum_count(double weight, double prior, std::int64_t size) {
    // nearbyint honours the default round-half-to-even mode.
    return static_cast<std::int64_t>(std::nearbyint(weight * prior * static_cast<double>(size)));
}

namespace {

std::int64_t draw_size(const SizeDistribution& dist, int k, Rng& rng) {
    std::normal_distribution<double> normal(dist.mean, dist.sd);
    std::int64_t n = 0;
    do {
        n = static_cast<std::int64_t>(std::nearbyint(normal(rng)));
    } while (n <= 0);
    return std::max<std::int64_t>(n, k);
}

std::vector<double> uniform_priors(int k, std::pair<double, double> range, Rng& rng) {
    std::uniform_real_distribution<double> u(range.first, range.second);
    std::vector<double> out(static_cast<std::size_t>(k));
    for (auto& v : out) v = u(rng);
    return out;
}

struct Emitter {
    Matrix rows;
    std::vector<int> group;
    std::vector<int> label;
    std::vector<int> cluster;
    Eigen::Index used = 0;

    void push(const Vector& x, int g, int y, int k) {
        if (used == rows.rows()) rows.conservativeResize(std::max<Eigen::Index>(16, 2 * rows.rows()), x.size());
        rows.row(used++) = x.transpose();
        group.push_back(g);
        label.push_back(y);
        cluster.push_back(k);
    }
};

}  // namespace

SyntheticData generate(const SyntheticConfig& config) {
    config.validate();
    const int k = config.k;
    SyntheticData out;
    out.truth.components = sample_component_pairs(config.d, k, config.auc_range, derive_seed(config.seed, 0),
                                                  config.pair_options);

    Rng shared_rng(derive_seed(config.seed, 1));
    const std::vector<double> shared_weights = sample_dirichlet(k, config.dirichlet_concentration, shared_rng);
    const std::vector<double> shared_priors = uniform_priors(k, config.alpha_range, shared_rng);

    Emitter lab;
    Emitter unl;
    lab.rows.resize(0, config.d);
    unl.rows.resize(0, config.d);
    for (int g = 0; g < config.groups; ++g) {
        Rng rng(derive_seed(config.seed, 1000 + static_cast<std::uint64_t>(g)));
        GroupParameters params;
        params.labeled_size = draw_size(config.labeled_size, k, rng);
        params.unlabeled_size = draw_size(config.unlabeled_size, k, rng);
        if (config.setting == Setting::identical) {
            params.labeled_weights = params.unlabeled_weights = shared_weights;
            params.labeled_priors = params.unlabeled_priors = shared_priors;
        } else {
            params.labeled_weights = sample_dirichlet(k, config.dirichlet_concentration, rng);
            params.unlabeled_weights = sample_dirichlet(k, config.dirichlet_concentration, rng);
            params.labeled_priors = uniform_priors(k, config.alpha_range, rng);
            params.unlabeled_priors = uniform_priors(k, config.alpha_range, rng);
        }
        for (int c = 0; c < k; ++c) {
            const auto& pair = out.truth.components[static_cast<std::size_t>(c)];
            const auto ci = static_cast<std::size_t>(c);
            const auto n_pos = stratum_count(params.labeled_weights[ci], params.labeled_priors[ci], params.labeled_size);
            const auto n_neg = stratum_count(params.labeled_weights[ci], 1.0 - params.labeled_priors[ci], params.labeled_size);
            for (std::int64_t i = 0; i < n_pos; ++i) lab.push(pair.positive.sample(rng), g, 1, c);
            for (std::int64_t i = 0; i < n_neg; ++i) lab.push(pair.negative.sample(rng), g, 0, c);
        }
        for (int c = 0; c < k; ++c) {
            const auto& pair = out.truth.components[static_cast<std::size_t>(c)];
            const auto ci = static_cast<std::size_t>(c);
            const auto n_pos = stratum_count(params.unlabeled_weights[ci], params.unlabeled_priors[ci], params.unlabeled_size);
            const auto n_neg = stratum_count(params.unlabeled_weights[ci], 1.0 - params.unlabeled_priors[ci], params.unlabeled_size);
            for (std::int64_t i = 0; i < n_pos; ++i) unl.push(pair.positive.sample(rng), g, 1, c);
            for (std::int64_t i = 0; i < n_neg; ++i) unl.push(pair.negative.sample(rng), g, 0, c);
        }
        out.truth.groups.push_back(std::move(params));
    }

    out.labeled.x = lab.rows.topRows(lab.used);
    out.labeled.group = std::move(lab.group);
    out.labeled.label = std::move(lab.label);
    out.labeled.source.resize(static_cast<std::size_t>(lab.used));
    std::iota(out.labeled.source.begin(), out.labeled.source.end(), std::int64_t{0});
    out.truth.labeled_cluster = std::move(lab.cluster);

    out.unlabeled.x = unl.rows.topRows(unl.used);
    out.unlabeled.group = std::move(unl.group);
    out.unlabeled.source.resize(static_cast<std::size_t>(unl.used));
    std::iota(out.unlabeled.source.begin(), out.unlabeled.source.end(), std::int64_t{0});
    out.truth.unlabeled_cluster = std::move(unl.cluster);
    out.truth.unlabeled_label = std::move(unl.label);
    return out;
}

PartitionModel GroundTruth::true_partition() const {
    if (components.empty()) {
        if (partition) return *partition;
        throw ConfigError("ground truth carries no generating components");
    }
    Matrix centers(static_cast<Eigen::Index>(components.size()), components.front().center.size());
    for (std::size_t c = 0; c < components.size(); ++c)
        centers.row(static_cast<Eigen::Index>(c)) = components[c].center.transpose();
    return PartitionModel(std::move(centers));
}

SyntheticData resample_pool(const LabeledSet& pool, const PartitionModel& partition,
                            const ResampleConfig& config) {
    if (pool.empty()) throw ConfigError("cannot resample an empty pool");
    pool.validate();
    if (!(config.alpha_range.first > 0.0 && config.alpha_range.first <= config.alpha_range.second &&
          config.alpha_range.second < 1.0))
        throw ConfigError("alpha range must lie within (0, 1)");
    const int k = partition.k();
    const std::vector<int> clusters = partition.assign_all(pool.x);

    Rng shared_rng(derive_seed(config.seed, 1));
    std::vector<double> shared_weights = config.fixed_weights
                                             ? *config.fixed_weights
                                             : sample_dirichlet(k, config.dirichlet_concentration, shared_rng);
    std::vector<double> shared_priors =
        config.fixed_priors ? *config.fixed_priors : uniform_priors(k, config.alpha_range, shared_rng);
    if (shared_weights.size() != static_cast<std::size_t>(k) || shared_priors.size() != static_cast<std::size_t>(k))
        throw ConfigError("fixed weights and priors must have one entry per cluster");

    const std::vector<int> groups = distinct_groups(pool.group);
    std::vector<std::vector<Eigen::Index>> members(groups.empty() ? 0 : static_cast<std::size_t>(groups.back() + 1));
    for (Eigen::Index i = 0; i < pool.size(); ++i) members[static_cast<std::size_t>(pool.group[static_cast<std::size_t>(i)])].push_back(i);

    SyntheticData out;
    out.labeled = LabeledSet(pool.dim());
    out.unlabeled = UnlabeledSet(pool.dim());
    out.truth.partition = partition;
    std::vector<Eigen::Index> lab_rows;
    std::vector<Eigen::Index> unl_rows;
    std::vector<int> unl_labels;
    // GroundTruth keeps one parameter block per group index, including absent ones.
    out.truth.groups.resize(members.size());

    for (int g : groups) {
        Rng rng(derive_seed(config.seed, 1000 + static_cast<std::uint64_t>(g)));
        std::vector<Eigen::Index> rows = members[static_cast<std::size_t>(g)];
        std::shuffle(rows.begin(), rows.end(), rng);
        const auto half = static_cast<std::ptrdiff_t>(rows.size() / 2);
        const std::vector<Eigen::Index> lab_pool(rows.begin(), rows.begin() + half);
        const std::vector<Eigen::Index> unl_pool(rows.begin() + half, rows.end());

        GroupParameters params;
        params.labeled_size = static_cast<std::int64_t>(lab_pool.size());
        params.unlabeled_size = static_cast<std::int64_t>(unl_pool.size());
        if (config.setting == Setting::identical) {
            params.labeled_weights = params.unlabeled_weights = shared_weights;
            params.labeled_priors = params.unlabeled_priors = shared_priors;
        } else {
            params.labeled_weights = sample_dirichlet(k, config.dirichlet_concentration, rng);
            params.unlabeled_weights = sample_dirichlet(k, config.dirichlet_concentration, rng);
            params.labeled_priors = uniform_priors(k, config.alpha_range, rng);
            params.unlabeled_priors = uniform_priors(k, config.alpha_range, rng);
        }

        auto draw = [&](const std::vector<Eigen::Index>& half_rows, const std::vector<double>& weights,
                        const std::vector<double>& priors, std::int64_t size, const char* split,
                        std::vector<Eigen::Index>& dest, std::vector<int>* dest_labels) {
            for (int c = 0; c < k; ++c) {
                for (int y : {1, 0}) {
                    std::vector<Eigen::Index> stratum;
                    for (Eigen::Index r : half_rows)
                        if (clusters[static_cast<std::size_t>(r)] == c && pool.label[static_cast<std::size_t>(r)] == y)
                            stratum.push_back(r);
                    const double prior = y == 1 ? priors[static_cast<std::size_t>(c)] : 1.0 - priors[static_cast<std::size_t>(c)];
                    const auto want = stratum_count(weights[static_cast<std::size_t>(c)], prior, size);
                    if (want > 0 && stratum.empty()) {
                        std::ostringstream msg;
                        msg << "group " << g << " " << split << " cluster " << c << " class " << y << ": wanted " << want
                            << ", stratum empty";
                        out.truth.deficits.push_back(msg.str());
                        continue;
                    }
                    if (stratum.empty()) continue;
                    std::uniform_int_distribution<std::size_t> pick(0, stratum.size() - 1);
                    for (std::int64_t i = 0; i < want; ++i) {
                        dest.push_back(stratum[pick(rng)]);
                        if (dest_labels) dest_labels->push_back(y);
                    }
                }
            }
        };
        draw(lab_pool, params.labeled_weights, params.labeled_priors, params.labeled_size, "labeled", lab_rows, nullptr);
        draw(unl_pool, params.unlabeled_weights, params.unlabeled_priors, params.unlabeled_size, "unlabeled", unl_rows,
             &unl_labels);
        out.truth.groups[static_cast<std::size_t>(g)] = std::move(params);
    }

    out.labeled = select_rows(pool, lab_rows);
    for (std::size_t i = 0; i < lab_rows.size(); ++i) {
        out.labeled.source[i] = lab_rows[i];
        out.truth.labeled_cluster.push_back(clusters[static_cast<std::size_t>(lab_rows[i])]);
    }
    out.unlabeled.x.resize(static_cast<Eigen::Index>(unl_rows.size()), pool.dim());
    for (std::size_t i = 0; i < unl_rows.size(); ++i) {
        out.unlabeled.x.row(static_cast<Eigen::Index>(i)) = pool.x.row(unl_rows[i]);
        out.unlabeled.group.push_back(pool.group[static_cast<std::size_t>(unl_rows[i])]);
        out.unlabeled.source.push_back(unl_rows[i]);
        out.truth.unlabeled_cluster.push_back(clusters[static_cast<std::size_t>(unl_rows[i])]);
    }
    out.truth.unlabeled_label = std::move(unl_labels);
    return out;
}

}  // namespace pcc
