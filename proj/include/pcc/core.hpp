#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace pcc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VectorRef = Eigen::Ref<const Vector>;

using Rng = std::mt19937_64;

// Error categories. The CLI maps each to an exit code.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ShapeError : DataError {
    using DataError::DataError;
};
struct DegenerateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct VerificationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Mixes a master seed with a stream id (splitmix64) so that every randomized
/// stage draws from its own reproducible stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Labeled examples (x, g, y) stored row-wise. `source` records the row of an
/// originating pool when examples were resampled, or the row itself otherwise.
struct LabeledSet {
    Matrix x;
    std::vector<int> group;
    std::vector<int> label;
    std::vector<std::int64_t> source;

    LabeledSet() = default;
    explicit LabeledSet(Eigen::Index dim) : x(0, dim) {}

    Eigen::Index size() const { return x.rows(); }
    Eigen::Index dim() const { return x.cols(); }
    bool empty() const { return x.rows() == 0; }

    /// Throws DataError when the columns disagree in length, labels are not
    /// binary or a feature is not finite.
    void validate() const;
};

struct UnlabeledSet {
    Matrix x;
    std::vector<int> group;
    std::vector<std::int64_t> source;

    UnlabeledSet() = default;
    explicit UnlabeledSet(Eigen::Index dim) : x(0, dim) {}

    Eigen::Index size() const { return x.rows(); }
    Eigen::Index dim() const { return x.cols(); }
    bool empty() const { return x.rows() == 0; }

    void validate() const;
};

struct CellIndex {
    int group = 0;
    int cluster = 0;
    auto operator<=>(const CellIndex&) const = default;
};

/// Row selection preserving order; used by every filtering operation.
LabeledSet select_rows(const LabeledSet& set, std::span<const Eigen::Index> rows);
UnlabeledSet select_rows(const UnlabeledSet& set, std::span<const Eigen::Index> rows);

/// Concatenation of two sets with the same dimension.
LabeledSet concat(const LabeledSet& a, const LabeledSet& b);
UnlabeledSet concat(const UnlabeledSet& a, const UnlabeledSet& b);

/// Stacks the features of a labeled and an unlabeled set (L ∪ U).
Matrix stack_features(const LabeledSet& labeled, const UnlabeledSet& unlabeled);

/// Odds ratio (p/(1-p)) / (q/(1-q)) extended to the boundary by its limits,
/// with OR(0,0) = OR(1,1) = 1.
double odds_ratio(double p, double q);

inline double clamp_probability(double p, double eps) {
    return std::min(std::max(p, eps), 1.0 - eps);
}

class PartitionModel;

/// Examples of `labeled` whose nearest centroid is `k`.
LabeledSet restrict(const LabeledSet& labeled, const PartitionModel& partition, int k);

/// Examples of `unlabeled` in group `cell.group` whose nearest centroid is
/// `cell.cluster`.
UnlabeledSet restrict_cell(const UnlabeledSet& unlabeled, const PartitionModel& partition,
                           CellIndex cell);

/// Sorted distinct group indices.
std::vector<int> distinct_groups(std::span<const int> group);

/// Splits the distinct groups into a train part and a holdout part of
/// ceil(fraction * #groups) groups drawn uniformly with `seed`.
std::pair<std::vector<int>, std::vector<int>> split_group_ids(std::span<const int> groups,
                                                              double fraction,
                                                              std::uint64_t seed);

std::pair<LabeledSet, LabeledSet> split_groups_holdout(const LabeledSet& set, double fraction,
                                                       std::uint64_t seed);
std::pair<UnlabeledSet, UnlabeledSet> split_groups_holdout(const UnlabeledSet& set,
                                                           double fraction, std::uint64_t seed);

LabeledSet filter_groups(const LabeledSet& set, std::span<const int> keep);
UnlabeledSet filter_groups(const UnlabeledSet& set, std::span<const int> keep);

/// Maps external group names to dense indices in order of first appearance.
class GroupTable {
public:
    int intern(const std::string& name);
    int find(const std::string& name) const;  // -1 when unknown
    const std::string& name(int index) const { return names_.at(static_cast<std::size_t>(index)); }
    const std::vector<std::string>& names() const { return names_; }
    std::size_t size() const { return names_.size(); }

    static GroupTable numbered(int count);

private:
    std::vector<std::string> names_;
    std::map<std::string, int> index_;
};

}  // namespace pcc
