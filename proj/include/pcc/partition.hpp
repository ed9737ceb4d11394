#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pcc/core.hpp"

namespace pcc {

/// Nearest-centroid partition of the feature space. Immutable once built.
class PartitionModel {
public:
    PartitionModel() = default;
    /// Rows of `centroids` are the cluster centers; they must be finite and
    /// pairwise distinct.
    explicit PartitionModel(Matrix centroids);

    int k() const { return static_cast<int>(centroids_.rows()); }
    Eigen::Index dim() const { return centroids_.cols(); }
    const Matrix& centroids() const { return centroids_; }

    /// Index of the nearest centroid (squared Euclidean); ties go to the
    /// lowest index.
    int assign(const VectorRef& x) const;
    std::vector<int> assign_all(const Matrix& points) const;

private:
    Matrix centroids_;
};

struct KMeansConfig {
    int batch_size = 4096;
    int max_iterations = 100;  // mini-batch steps
    int polish_iterations = 10;
    std::vector<int> candidate_k{1, 2, 4, 8};
    int silhouette_sample = 25000;
    int init_sample = 25000;
    double min_silhouette = 0.05;  // below this the single-cluster model wins
    std::uint64_t seed = 0;
};

/// Mini-batch k-means with k-means++ seeding followed by full-batch Lloyd
/// polishing. Throws ConfigError when there are fewer points than clusters.
PartitionModel fit_kmeans(const Matrix& points, int k, const KMeansConfig& config);

/// Sum of squared distances to the nearest centroid.
double kmeans_objective(const Matrix& points, const PartitionModel& model);

/// One Lloyd step: recompute centroids from the current assignment. Empty
/// clusters move to the point farthest from its centroid.
Matrix lloyd_step(const Matrix& points, const Matrix& centroids);

/// Mean silhouette coefficient of `points` under explicit cluster labels.
/// Points alone in their cluster score 0, as do points with a = b = 0.
/// Throws DegenerateError when fewer than two clusters are present.
double silhouette(const Matrix& points, std::span<const int> labels);
double silhouette(const Matrix& points, const PartitionModel& model);

struct KSelection {
    PartitionModel model;
    int k = 1;
    std::vector<std::pair<int, double>> silhouettes;  // (K, score) for K > 1
};

/// Fits one model per candidate K on L ∪ U and keeps the silhouette maximizer
/// (smallest K on ties); falls back to K = 1 below `min_silhouette`.
KSelection select_k(const Matrix& points, const KMeansConfig& config);
KSelection select_k(const LabeledSet& labeled, const UnlabeledSet& unlabeled,
                    const KMeansConfig& config);

}  // namespace pcc
