#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "pcc/core.hpp"
#include "pcc/shift.hpp"

namespace pcc {

/// Finite joint p(x, g, y) with integer masses over a common denominator and
/// a map from points to clusters. All derived quantities are exact ratios of
/// the masses; the double accessors round them once.
class DiscreteJoint {
public:
    DiscreteJoint() = default;
    /// `mass` is indexed by ((x * groups) + g) * 2 + y. Throws DataError on
    /// negative or all-zero masses and on cluster ids outside [0, k).
    DiscreteJoint(int k, int groups, std::vector<int> cluster, std::vector<std::int64_t> mass);

    int points() const { return static_cast<int>(cluster_.size()); }
    int k() const { return k_; }
    int groups() const { return groups_; }
    int cluster(int x) const { return cluster_.at(static_cast<std::size_t>(x)); }
    const std::vector<int>& clusters() const { return cluster_; }

    std::int64_t mass(int x, int g, int y) const {
        return mass_[static_cast<std::size_t>((x * groups_ + g) * 2 + y)];
    }
    const std::vector<std::int64_t>& masses() const { return mass_; }
    std::int64_t total() const { return total_; }
    std::int64_t class_total(int y) const;

    double f_positive(int x) const;  // p(x | y=1)
    double f_negative(int x) const;  // p(x | y=0)
    double gamma(int k) const;       // p(pi = k)
    double alpha() const;            // p(y = 1)
    double alpha_cluster(int k) const;
    double alpha_cell(int g, int k) const;  // NaN when the cell has no mass
    double rho(int x) const;                // NaN when p(x) = 0
    double rho_bar(int x, int g) const;     // NaN when p(x, g) = 0

    /// Exact check of p(x|y,g,pi(x)) = p(x|y,g',pi(x)) on every pair of
    /// conditioning events with positive mass.
    bool pcc_invariant() const;

    /// The same joint with all groups merged into one.
    DiscreteJoint marginalize_groups() const;

private:
    int k_ = 0;
    int groups_ = 0;
    std::vector<int> cluster_;
    std::vector<std::int64_t> mass_;
    std::int64_t total_ = 0;
};

/// PCC-invariant joint by construction: within-cluster class-conditionals are
/// shared by all groups, and each group draws its own (cluster, class)
/// weights. Masses are dyadic.
DiscreteJoint random_pcc_instance(int n_points, int k, int groups, std::uint64_t seed);

/// A joint and a single-group "labeled" joint with the same support, partition
/// and within-cluster class-conditionals but different cluster priors.
std::pair<DiscreteJoint, DiscreteJoint> random_pcc_pair(int n_points, int k, int groups, std::uint64_t seed);

/// f+ = f- and every (group, cluster) cell pure. `groups` must be even.
DiscreteJoint pure_cells_instance(int n_points, int k, int groups);

enum class OracleScorer { rho, rho_bar };

/// Exhaustive AUC over (positive point-group, negative point-group) pairs with
/// half credit on exact ties. Throws DegenerateError without both classes.
double exact_auc(const DiscreteJoint& joint, OracleScorer scorer);

struct AucGainReport {
    double auc_rho = 0.0;
    double auc_rho_bar = 0.0;
    double lhs = 0.0;  // auc_rho_bar - auc_rho
    double rhs = 0.0;  // term_ratio + term_pure
    double abs_error = 0.0;
    bool exact = false;  // lhs == rhs in rational arithmetic
    double term_ratio = 0.0;
    double term_pure = 0.0;
    // The identity before the change of measure: six expectations under the
    // (positive, negative) pair distribution.
    double rhs_pre_exchange = 0.0;
    double pre_exchange_error = 0.0;
};

AucGainReport auc_gain_check(const DiscreteJoint& joint);

/// Max over support points with positive mass of
/// |corrected_posterior(rho~, alpha~_k, alpha^g_k) - rho_bar(x, g)|.
/// Throws DataError when the two joints do not share support, partition and
/// within-cluster class-conditionals.
double posterior_correction_check(const DiscreteJoint& joint, const DiscreteJoint& biased);

/// MLLS in long double without early stopping.
double mlls_reference(std::span<const double> posteriors, double labeled_prior, int iterations,
                      double epsilon = 1e-6);

/// Integer-count sample whose empirical distribution is the joint: one score
/// per unit of mass.
struct ExpandedSample {
    std::vector<double> score;
    std::vector<int> label;
};
ExpandedSample expand_samples(const DiscreteJoint& joint, OracleScorer scorer);

}  // namespace pcc
