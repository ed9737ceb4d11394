#include "pcc/partition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace pcc {

PartitionModel::PartitionModel(Matrix centroids) : centroids_(std::move(centroids)) {
    if (centroids_.rows() < 1) throw ConfigError("a partition needs at least one centroid");
    if (!centroids_.allFinite()) throw DataError("centroids must be finite");
    for (Eigen::Index i = 0; i < centroids_.rows(); ++i)
        for (Eigen::Index j = i + 1; j < centroids_.rows(); ++j)
            if (centroids_.row(i) == centroids_.row(j))
                throw DataError("centroids must be pairwise distinct");
}

int PartitionModel::assign(const VectorRef& x) const {
    if (x.size() != dim()) throw ShapeError("point dimension does not match the partition");
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < centroids_.rows(); ++k) {
        const double d = (centroids_.row(k).transpose() - x).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(k);
        }
    }
    return best;
}

std::vector<int> PartitionModel::assign_all(const Matrix& points) const {
    if (points.rows() > 0 && points.cols() != dim())
        throw ShapeError("point dimension does not match the partition");
    std::vector<int> out(static_cast<std::size_t>(points.rows()));
    for (Eigen::Index i = 0; i < points.rows(); ++i)
        out[static_cast<std::size_t>(i)] = assign(points.row(i).transpose());
    return out;
}

namespace {

std::vector<Eigen::Index> sample_without_replacement(Eigen::Index n, Eigen::Index m, Rng& rng) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    if (m >= n) return idx;
    for (Eigen::Index i = 0; i < m; ++i) {
        std::uniform_int_distribution<Eigen::Index> pick(i, n - 1);
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
    }
    idx.resize(static_cast<std::size_t>(m));
    return idx;
}

int nearest(const Matrix& centroids, const double* x, Eigen::Index d, double* dist_out) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < centroids.rows(); ++k) {
        const double* c = centroids.row(k).data();
        double s = 0.0;
        for (Eigen::Index j = 0; j < d; ++j) {
            const double diff = x[j] - c[j];
            s += diff * diff;
        }
        if (s < best_d) {
            best_d = s;
            best = static_cast<int>(k);
        }
    }
    if (dist_out) *dist_out = best_d;
    return best;
}

Matrix kmeanspp(const Matrix& points, int k, const KMeansConfig& config, Rng& rng) {
    const auto subset = sample_without_replacement(points.rows(), config.init_sample, rng);
    const auto m = static_cast<Eigen::Index>(subset.size());
    Matrix centroids(k, points.cols());
    std::uniform_int_distribution<Eigen::Index> first(0, m - 1);
    centroids.row(0) = points.row(subset[static_cast<std::size_t>(first(rng))]);
    std::vector<double> d2(static_cast<std::size_t>(m), std::numeric_limits<double>::infinity());
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            const double d =
                (points.row(subset[static_cast<std::size_t>(i)]) - centroids.row(c - 1)).squaredNorm();
            auto& slot = d2[static_cast<std::size_t>(i)];
            slot = std::min(slot, d);
            total += slot;
        }
        if (!(total > 0.0)) throw ConfigError("fewer distinct points than requested clusters");
        std::uniform_real_distribution<double> u(0.0, total);
        double target = u(rng);
        Eigen::Index chosen = m - 1;
        for (Eigen::Index i = 0; i < m; ++i) {
            target -= d2[static_cast<std::size_t>(i)];
            if (target <= 0.0 && d2[static_cast<std::size_t>(i)] > 0.0) {
                chosen = i;
                break;
            }
        }
        while (d2[static_cast<std::size_t>(chosen)] == 0.0) --chosen;
        centroids.row(c) = points.row(subset[static_cast<std::size_t>(chosen)]);
    }
    return centroids;
}

}  // namespace

Matrix lloyd_step(const Matrix& points, const Matrix& centroids) {
    const Eigen::Index k = centroids.rows();
    const Eigen::Index d = points.cols();
    Matrix sums = Matrix::Zero(k, d);
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
    std::vector<double> dist(static_cast<std::size_t>(points.rows()));
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        const int c = nearest(centroids, points.row(i).data(), d, &dist[static_cast<std::size_t>(i)]);
        sums.row(c) += points.row(i);
        ++counts[static_cast<std::size_t>(c)];
    }
    Matrix next = centroids;
    std::vector<bool> taken(static_cast<std::size_t>(points.rows()), false);
    for (Eigen::Index c = 0; c < k; ++c) {
        if (counts[static_cast<std::size_t>(c)] > 0) {
            next.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
            continue;
        }
        Eigen::Index far = -1;
        for (Eigen::Index i = 0; i < points.rows(); ++i) {
            if (taken[static_cast<std::size_t>(i)]) continue;
            if (far < 0 || dist[static_cast<std::size_t>(i)] > dist[static_cast<std::size_t>(far)]) far = i;
        }
        if (far >= 0) {
            taken[static_cast<std::size_t>(far)] = true;
            next.row(c) = points.row(far);
        }
    }
    return next;
}

double kmeans_objective(const Matrix& points, const PartitionModel& model) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        double d = 0.0;
        nearest(model.centroids(), points.row(i).data(), points.cols(), &d);
        total += d;
    }
    return total;
}

PartitionModel fit_kmeans(const Matrix& points, int k, const KMeansConfig& config) {
    if (k < 1) throw ConfigError("k must be at least 1");
    if (points.rows() < k) throw ConfigError("fewer points than clusters");
    if (config.batch_size < 1) throw ConfigError("batch size must be at least 1");
    if (k == 1) {
        Matrix mean = points.colwise().mean();
        return PartitionModel(std::move(mean));
    }

    Rng rng(config.seed);
    Matrix centroids = kmeanspp(points, k, config, rng);

    // Mini-batch updates with per-center learning rate 1 / count.
    const Eigen::Index d = points.cols();
    std::vector<double> counts(static_cast<std::size_t>(k), 0.0);
    std::uniform_int_distribution<Eigen::Index> pick(0, points.rows() - 1);
    std::vector<Eigen::Index> batch(static_cast<std::size_t>(config.batch_size));
    std::vector<int> owner(batch.size());
    for (int it = 0; it < config.max_iterations; ++it) {
        for (auto& b : batch) b = pick(rng);
        for (std::size_t i = 0; i < batch.size(); ++i)
            owner[i] = nearest(centroids, points.row(batch[i]).data(), d, nullptr);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            auto& v = counts[static_cast<std::size_t>(owner[i])];
            v += 1.0;
            const double eta = 1.0 / v;
            centroids.row(owner[i]) = (1.0 - eta) * centroids.row(owner[i]) + eta * points.row(batch[i]);
        }
    }

    // Full-batch polish until the assignment stops changing.
    std::vector<int> assignment;
    for (int it = 0; it < config.polish_iterations; ++it) {
        std::vector<int> current(static_cast<std::size_t>(points.rows()));
        for (Eigen::Index i = 0; i < points.rows(); ++i)
            current[static_cast<std::size_t>(i)] = nearest(centroids, points.row(i).data(), d, nullptr);
        if (current == assignment) break;
        assignment = std::move(current);
        centroids = lloyd_step(points, centroids);
    }

    for (Eigen::Index i = 0; i < centroids.rows(); ++i)
        for (Eigen::Index j = i + 1; j < centroids.rows(); ++j)
            if (centroids.row(i) == centroids.row(j))
                throw ConfigError("k-means collapsed two centroids; fewer distinct points than clusters");
    return PartitionModel(std::move(centroids));
}

namespace {

// Silhouette scores for several labelings of the same points, sharing the
// pairwise distance computation.
std::vector<double> silhouettes(const Matrix& points, const std::vector<std::vector<int>>& labelings) {
    const Eigen::Index n = points.rows();
    const Eigen::Index d = points.cols();
    const std::size_t m = labelings.size();
    std::vector<int> width(m);
    for (std::size_t c = 0; c < m; ++c) {
        if (labelings[c].size() != static_cast<std::size_t>(n))
            throw ShapeError("labels and points differ in length");
        int mx = -1;
        for (int l : labelings[c]) {
            if (l < 0) throw DataError("cluster labels must be non-negative");
            mx = std::max(mx, l);
        }
        width[c] = mx + 1;
    }
    std::vector<std::vector<double>> sums(m);
    std::vector<std::vector<Eigen::Index>> sizes(m);
    for (std::size_t c = 0; c < m; ++c) {
        sums[c].assign(static_cast<std::size_t>(n * width[c]), 0.0);
        sizes[c].assign(static_cast<std::size_t>(width[c]), 0);
        for (int l : labelings[c]) ++sizes[c][static_cast<std::size_t>(l)];
        int present = 0;
        for (auto s : sizes[c]) present += s > 0;
        if (present < 2) throw DegenerateError("silhouette needs at least two populated clusters");
    }

    for (Eigen::Index i = 0; i < n; ++i) {
        const double* xi = points.row(i).data();
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double* xj = points.row(j).data();
            double s = 0.0;
            for (Eigen::Index t = 0; t < d; ++t) {
                const double diff = xi[t] - xj[t];
                s += diff * diff;
            }
            const double dist = std::sqrt(s);
            for (std::size_t c = 0; c < m; ++c) {
                const auto& lab = labelings[c];
                const auto w = static_cast<Eigen::Index>(width[c]);
                sums[c][static_cast<std::size_t>(i * w + lab[static_cast<std::size_t>(j)])] += dist;
                sums[c][static_cast<std::size_t>(j * w + lab[static_cast<std::size_t>(i)])] += dist;
            }
        }
    }

    std::vector<double> out(m, 0.0);
    for (std::size_t c = 0; c < m; ++c) {
        const auto w = static_cast<Eigen::Index>(width[c]);
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const int own = labelings[c][static_cast<std::size_t>(i)];
            const auto own_size = sizes[c][static_cast<std::size_t>(own)];
            if (own_size <= 1) continue;
            const double a = sums[c][static_cast<std::size_t>(i * w + own)] / static_cast<double>(own_size - 1);
            double b = std::numeric_limits<double>::infinity();
            for (Eigen::Index other = 0; other < w; ++other) {
                const auto sz = sizes[c][static_cast<std::size_t>(other)];
                if (other == own || sz == 0) continue;
                b = std::min(b, sums[c][static_cast<std::size_t>(i * w + other)] / static_cast<double>(sz));
            }
            const double denom = std::max(a, b);
            if (denom > 0.0) total += (b - a) / denom;
        }
        out[c] = total / static_cast<double>(n);
    }
    return out;
}

}  // namespace

double silhouette(const Matrix& points, std::span<const int> labels) {
    if (points.rows() < 2) throw DegenerateError("silhouette needs at least two points");
    return silhouettes(points, {std::vector<int>(labels.begin(), labels.end())}).front();
}

double silhouette(const Matrix& points, const PartitionModel& model) {
    if (model.k() < 2) throw DegenerateError("silhouette is undefined for a single cluster");
    return silhouette(points, model.assign_all(points));
}

KSelection select_k(const Matrix& points, const KMeansConfig& config) {
    if (points.rows() == 0) throw ConfigError("cannot select K on an empty set");
    for (int k : config.candidate_k)
        if (k < 1) throw ConfigError("candidate K values must be at least 1");

    std::vector<int> candidates = config.candidate_k;
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    Rng rng(derive_seed(config.seed, 0));
    const auto rows = sample_without_replacement(points.rows(), config.silhouette_sample, rng);
    Matrix sample(static_cast<Eigen::Index>(rows.size()), points.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) sample.row(static_cast<Eigen::Index>(i)) = points.row(rows[i]);

    std::vector<PartitionModel> models;
    std::vector<int> ks;
    std::vector<std::vector<int>> labelings;
    for (int k : candidates) {
        if (k == 1 || k > points.rows()) continue;
        KMeansConfig sub = config;
        sub.seed = derive_seed(config.seed, static_cast<std::uint64_t>(k));
        PartitionModel model = fit_kmeans(points, k, sub);
        std::vector<int> labels = model.assign_all(sample);
        if (distinct_groups(labels).size() < 2) continue;
        models.push_back(std::move(model));
        ks.push_back(k);
        labelings.push_back(std::move(labels));
    }

    KSelection out;
    std::vector<double> scores;
    if (!labelings.empty() && sample.rows() >= 2) scores = silhouettes(sample, labelings);
    int best = -1;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out.silhouettes.emplace_back(ks[i], scores[i]);
        if (best < 0 || scores[i] > scores[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    }
    if (best >= 0 && scores[static_cast<std::size_t>(best)] >= config.min_silhouette) {
        out.k = ks[static_cast<std::size_t>(best)];
        out.model = models[static_cast<std::size_t>(best)];
    } else {
        out.k = 1;
        out.model = fit_kmeans(points, 1, config);
    }
    return out;
}

KSelection select_k(const LabeledSet& labeled, const UnlabeledSet& unlabeled,
                    const KMeansConfig& config) {
    return select_k(stack_features(labeled, unlabeled), config);
}

}  // namespace pcc
