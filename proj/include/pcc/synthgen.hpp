#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pcc/core.hpp"
#include "pcc/partition.hpp"

namespace pcc {

struct GenerationError : ConfigError {
    using ConfigError::ConfigError;
};

/// Multivariate normal with a cached lower Cholesky factor.
class GaussianComponent {
public:
    GaussianComponent() = default;
    /// Throws DataError unless `covariance` is symmetric positive definite.
    GaussianComponent(Vector mean, Matrix covariance);

    const Vector& mean() const { return mean_; }
    const Matrix& covariance() const { return covariance_; }
    const Matrix& cholesky() const { return chol_; }
    Eigen::Index dim() const { return mean_.size(); }

    double log_density(const VectorRef& x) const;
    /// x = mean + L z for a standard normal z.
    Vector transform(const VectorRef& z) const { return mean_ + chol_ * z; }
    Vector sample(Rng& rng) const;

private:
    Vector mean_;
    Matrix covariance_;
    Matrix chol_;
    double log_norm_ = 0.0;
};

struct ClusterComponentPair {
    GaussianComponent positive;
    GaussianComponent negative;
    Vector center;
    double target_auc = 0.0;
    double bayes_auc = 0.0;  // Monte-Carlo estimate at calibration time

    /// log N(x; positive) - log N(x; negative).
    double log_likelihood_ratio(const VectorRef& x) const {
        return positive.log_density(x) - negative.log_density(x);
    }
};

struct PairOptions {
    double separation = 6.0;  // minimum Mahalanobis distance across clusters
    int attempt_budget = 1000;
    int calibration_draws = 20000;
    double auc_tolerance = 0.01;
};

/// Monte-Carlo AUC of the likelihood-ratio scorer between the two components,
/// with `draws` samples per class.
double bayes_auc(const ClusterComponentPair& pair, int draws, std::uint64_t seed);

/// Mahalanobis distance between two means under the average covariance.
double mahalanobis_separation(const GaussianComponent& a, const GaussianComponent& b);

/// K positive/negative Gaussian pairs whose within-pair Bayes AUC is drawn
/// uniformly from `auc_range` and whose components stay `separation` apart
/// from every other cluster's components.
std::vector<ClusterComponentPair> sample_component_pairs(int d, int k,
                                                         std::pair<double, double> auc_range,
                                                         std::uint64_t seed,
                                                         const PairOptions& options = {});

enum class Setting { identical = 1, partition_shift = 2 };

struct SizeDistribution {
    double mean = 0.0;
    double sd = 0.0;
};

struct SyntheticConfig {
    int d = 2;
    int k = 4;
    int groups = 100;
    Setting setting = Setting::partition_shift;
    SizeDistribution labeled_size{1000.0, 100.0};
    SizeDistribution unlabeled_size{10000.0, 1000.0};
    double dirichlet_concentration = 2.0;
    std::pair<double, double> alpha_range{0.01, 0.99};
    std::pair<double, double> auc_range{0.75, 0.95};
    std::uint64_t seed = 0;
    PairOptions pair_options{};

    void validate() const;
};

/// Mixing weights (gamma) and positive proportions (alpha) of one group,
/// for its labeled and unlabeled parts.
struct GroupParameters {
    std::vector<double> labeled_weights;
    std::vector<double> labeled_priors;
    std::vector<double> unlabeled_weights;
    std::vector<double> unlabeled_priors;
    std::int64_t labeled_size = 0;
    std::int64_t unlabeled_size = 0;
};

struct GroundTruth {
    std::vector<ClusterComponentPair> components;  // empty for resampled pools
    std::vector<GroupParameters> groups;
    std::vector<int> labeled_cluster;
    std::vector<int> unlabeled_cluster;
    std::vector<int> unlabeled_label;  // hidden labels, used only for scoring
    std::vector<std::string> deficits;
    std::optional<PartitionModel> partition;  // the pool partition of resampled data

    int k() const { return groups.empty() ? 0 : static_cast<int>(groups.front().labeled_weights.size()); }

    /// Nearest-center partition built from the generating cluster centers, or
    /// the pool partition for resampled data.
    PartitionModel true_partition() const;
};

struct SyntheticData {
    LabeledSet labeled;
    UnlabeledSet unlabeled;
    GroundTruth truth;
};

/// Symmetric Dirichlet draw of dimension k.
std::vector<double> sample_dirichlet(int k, double concentration, Rng& rng);

/// round-half-to-even(weight * prior * size).
std::int64_t stratum_count(double weight, double prior, std::int64_t size);

SyntheticData generate(const SyntheticConfig& config);

struct ResampleConfig {
    Setting setting = Setting::partition_shift;
    double dirichlet_concentration = 2.0;
    std::pair<double, double> alpha_range{0.01, 0.99};
    std::uint64_t seed = 0;
    // Setting-1 overrides of the shared weights and priors.
    std::optional<std::vector<double>> fixed_weights;
    std::optional<std::vector<double>> fixed_priors;
};

/// Splits every group of `pool` in half (labeled / unlabeled pools) and draws
/// biased labeled and unlabeled sets with replacement from the
/// (cluster, class) strata of each half. `source` of every emitted row is its
/// pool row.
SyntheticData resample_pool(const LabeledSet& pool, const PartitionModel& partition,
                            const ResampleConfig& config);

}  // namespace pcc
