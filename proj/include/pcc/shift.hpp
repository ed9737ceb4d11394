#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "pcc/classifier.hpp"
#include "pcc/core.hpp"
#include "pcc/partition.hpp"

namespace pcc {

/// Thrown by mlls_estimate for a cell without examples.
struct EmptyCellError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MllsConfig {
    int max_iterations = 100;
    double tolerance = 1e-8;
    double epsilon = 1e-6;
};

struct MllsResult {
    double estimate = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// EM estimate of the positive proportion of one target cell from
/// calibrated source posteriors. Starts at the mean posterior and iterates
///   a <- mean_x (1 + OR(labeled_prior, a) (1 - rho(x)) / rho(x))^-1
/// with every iterate clamped to [eps, 1 - eps].
MllsResult mlls_estimate(std::span<const double> posteriors, double labeled_prior,
                         const MllsConfig& config = {});

/// The bias-corrected group-aware posterior
///   (1 + OR(labeled_prior, group_prior) (1 - rho) / rho)^-1
/// evaluated without clamping.
double corrected_posterior(double rho, double labeled_prior, double group_prior);

struct LabeledPriors {
    std::vector<double> prior;   // clamped positive rate per cluster
    std::vector<bool> fallback;  // cluster had no labeled rows
    double global = 0.0;
};

/// Positive rate of each cluster in the labeled set, clamped to [eps, 1 - eps];
/// empty clusters take the global labeled rate.
LabeledPriors labeled_cluster_priors(const LabeledSet& labeled, const PartitionModel& partition,
                                     double epsilon = 1e-6);

struct CellPrior {
    double prior = 0.0;
    std::int64_t support = 0;
    int iterations = 0;
    bool fallback = false;
};

/// Labeled cluster priors and estimated (group, cluster) priors. Only groups
/// that appear in the unlabeled data have rows.
class PriorTable {
public:
    PriorTable() = default;
    PriorTable(LabeledPriors labeled, std::map<int, std::vector<CellPrior>> cells);

    const LabeledPriors& labeled() const { return labeled_; }
    const std::map<int, std::vector<CellPrior>>& cells() const { return cells_; }
    int k() const { return static_cast<int>(labeled_.prior.size()); }

    bool has_group(int g) const { return cells_.count(g) > 0; }
    const CellPrior& cell(int g, int k) const { return cells_.at(g).at(static_cast<std::size_t>(k)); }

private:
    LabeledPriors labeled_;
    std::map<int, std::vector<CellPrior>> cells_;
};

/// Runs MLLS on every (group, cluster) cell of `unlabeled`; empty cells fall
/// back to the labeled cluster prior and are flagged.
PriorTable estimate_group_cluster_priors(const UnlabeledSet& unlabeled,
                                         const ClusterClassifierEnsemble& ensemble,
                                         const LabeledPriors& labeled_priors,
                                         const MllsConfig& config = {});

struct PosteriorDetail {
    double group_aware = 0.0;
    double group_agnostic = 0.0;
    int cluster = 0;
    bool unseen_group = false;
    bool cell_fallback = false;
};

class GroupAwareModel {
public:
    GroupAwareModel() = default;
    GroupAwareModel(ClusterClassifierEnsemble ensemble, PriorTable priors, double epsilon = 1e-6);

    const ClusterClassifierEnsemble& ensemble() const { return ensemble_; }
    const PriorTable& priors() const { return priors_; }
    double epsilon() const { return epsilon_; }

    /// Group-aware posterior; an unseen group returns the group-agnostic one.
    double posterior(const VectorRef& x, int group) const { return detail(x, group).group_aware; }
    PosteriorDetail detail(const VectorRef& x, int group) const;

private:
    ClusterClassifierEnsemble ensemble_;
    PriorTable priors_;
    double epsilon_ = 1e-6;
};

}  // namespace pcc
