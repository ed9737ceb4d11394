#include "pcc/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "pcc/partition.hpp"

namespace pcc {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

namespace {

void check_features(const Matrix& x) {
    if (!x.allFinite()) throw DataError("feature matrix contains non-finite values");
}

template <typename Set>
Set select_impl(const Set& set, std::span<const Eigen::Index> rows) {
    Set out(set.dim());
    out.x.resize(static_cast<Eigen::Index>(rows.size()), set.dim());
    out.group.reserve(rows.size());
    out.source.reserve(rows.size());
    if constexpr (requires { set.label; }) out.label.reserve(rows.size());
    Eigen::Index r = 0;
    for (Eigen::Index i : rows) {
        out.x.row(r++) = set.x.row(i);
        out.group.push_back(set.group[static_cast<std::size_t>(i)]);
        out.source.push_back(set.source[static_cast<std::size_t>(i)]);
        if constexpr (requires { set.label; }) out.label.push_back(set.label[static_cast<std::size_t>(i)]);
    }
    return out;
}

template <typename Set>
Set concat_impl(const Set& a, const Set& b) {
    if (a.dim() != b.dim()) throw ShapeError("cannot concatenate sets of different dimension");
    Set out(a.dim());
    out.x.resize(a.size() + b.size(), a.dim());
    out.x.topRows(a.size()) = a.x;
    out.x.bottomRows(b.size()) = b.x;
    out.group = a.group;
    out.group.insert(out.group.end(), b.group.begin(), b.group.end());
    out.source = a.source;
    out.source.insert(out.source.end(), b.source.begin(), b.source.end());
    if constexpr (requires { a.label; }) {
        out.label = a.label;
        out.label.insert(out.label.end(), b.label.begin(), b.label.end());
    }
    return out;
}

template <typename Set>
std::pair<Set, Set> split_impl(const Set& set, double fraction, std::uint64_t seed) {
    auto [train_groups, holdout_groups] = split_group_ids(set.group, fraction, seed);
    return {filter_groups(set, train_groups), filter_groups(set, holdout_groups)};
}

template <typename Set>
Set filter_impl(const Set& set, std::span<const int> keep) {
    std::set<int> allowed(keep.begin(), keep.end());
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < set.size(); ++i)
        if (allowed.count(set.group[static_cast<std::size_t>(i)])) rows.push_back(i);
    return select_rows(set, rows);
}

}  // namespace

void LabeledSet::validate() const {
    const auto n = static_cast<std::size_t>(x.rows());
    if (group.size() != n || label.size() != n || source.size() != n)
        throw DataError("labeled set columns have inconsistent lengths");
    for (int y : label)
        if (y != 0 && y != 1) throw DataError("labels must be 0 or 1");
    for (int g : group)
        if (g < 0) throw DataError("group indices must be non-negative");
    check_features(x);
}

void UnlabeledSet::validate() const {
    const auto n = static_cast<std::size_t>(x.rows());
    if (group.size() != n || source.size() != n)
        throw DataError("unlabeled set columns have inconsistent lengths");
    for (int g : group)
        if (g < 0) throw DataError("group indices must be non-negative");
    check_features(x);
}

LabeledSet select_rows(const LabeledSet& set, std::span<const Eigen::Index> rows) {
    return select_impl(set, rows);
}

UnlabeledSet select_rows(const UnlabeledSet& set, std::span<const Eigen::Index> rows) {
    return select_impl(set, rows);
}

LabeledSet concat(const LabeledSet& a, const LabeledSet& b) { return concat_impl(a, b); }
UnlabeledSet concat(const UnlabeledSet& a, const UnlabeledSet& b) { return concat_impl(a, b); }

Matrix stack_features(const LabeledSet& labeled, const UnlabeledSet& unlabeled) {
    if (labeled.dim() != unlabeled.dim() && !labeled.empty() && !unlabeled.empty())
        throw ShapeError("labeled and unlabeled sets differ in dimension");
    const Eigen::Index d = labeled.empty() ? unlabeled.dim() : labeled.dim();
    Matrix out(labeled.size() + unlabeled.size(), d);
    if (!labeled.empty()) out.topRows(labeled.size()) = labeled.x;
    if (!unlabeled.empty()) out.bottomRows(unlabeled.size()) = unlabeled.x;
    return out;
}

double odds_ratio(double p, double q) {
    if (p == q) return 1.0;  // covers OR(0,0) and OR(1,1)
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (p == 1.0 || q == 0.0) return inf;
    if (p == 0.0 || q == 1.0) return 0.0;
    return (p / (1.0 - p)) / (q / (1.0 - q));
}

LabeledSet restrict(const LabeledSet& labeled, const PartitionModel& partition, int k) {
    if (k < 0 || k >= partition.k()) throw std::out_of_range("cluster index out of range");
    if (!labeled.empty() && labeled.dim() != partition.dim())
        throw ShapeError("partition dimension does not match the dataset");
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < labeled.size(); ++i)
        if (partition.assign(labeled.x.row(i).transpose()) == k) rows.push_back(i);
    return select_rows(labeled, rows);
}

UnlabeledSet restrict_cell(const UnlabeledSet& unlabeled, const PartitionModel& partition,
                           CellIndex cell) {
    if (cell.cluster < 0 || cell.cluster >= partition.k())
        throw std::out_of_range("cluster index out of range");
    if (!unlabeled.empty() && unlabeled.dim() != partition.dim())
        throw ShapeError("partition dimension does not match the dataset");
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < unlabeled.size(); ++i) {
        if (unlabeled.group[static_cast<std::size_t>(i)] != cell.group) continue;
        if (partition.assign(unlabeled.x.row(i).transpose()) == cell.cluster) rows.push_back(i);
    }
    return select_rows(unlabeled, rows);
}

std::vector<int> distinct_groups(std::span<const int> group) {
    std::vector<int> out(group.begin(), group.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::pair<std::vector<int>, std::vector<int>> split_group_ids(std::span<const int> groups,
                                                              double fraction,
                                                              std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw ConfigError("holdout fraction must lie in (0, 1)");
    std::vector<int> ids = distinct_groups(groups);
    if (ids.size() < 2) throw ConfigError("group holdout needs at least 2 distinct groups");
    const auto n_holdout = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(ids.size()) - 1e-12));
    Rng rng(seed);
    std::shuffle(ids.begin(), ids.end(), rng);
    std::vector<int> holdout(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_holdout));
    std::vector<int> train(ids.begin() + static_cast<std::ptrdiff_t>(n_holdout), ids.end());
    std::sort(holdout.begin(), holdout.end());
    std::sort(train.begin(), train.end());
    return {train, holdout};
}

std::pair<LabeledSet, LabeledSet> split_groups_holdout(const LabeledSet& set, double fraction,
                                                       std::uint64_t seed) {
    return split_impl(set, fraction, seed);
}

std::pair<UnlabeledSet, UnlabeledSet> split_groups_holdout(const UnlabeledSet& set,
                                                           double fraction, std::uint64_t seed) {
    return split_impl(set, fraction, seed);
}

LabeledSet filter_groups(const LabeledSet& set, std::span<const int> keep) {
    return filter_impl(set, keep);
}

UnlabeledSet filter_groups(const UnlabeledSet& set, std::span<const int> keep) {
    return filter_impl(set, keep);
}

int GroupTable::intern(const std::string& name) {
    auto [it, inserted] = index_.try_emplace(name, static_cast<int>(names_.size()));
    if (inserted) names_.push_back(name);
    return it->second;
}

int GroupTable::find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
}

GroupTable GroupTable::numbered(int count) {
    GroupTable table;
    for (int g = 0; g < count; ++g) table.intern(std::to_string(g));
    return table;
}

}  // namespace pcc
