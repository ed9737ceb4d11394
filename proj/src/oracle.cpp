#include "pcc/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <boost/multiprecision/cpp_int.hpp>

namespace pcc {

namespace {

using Q = boost::multiprecision::cpp_rational;

// Non-negative extended rational: a finite value or +infinity.
struct Ext {
    bool inf = false;
    Q v = 0;

    static Ext infinity() { return Ext{true, 0}; }
    static Ext of(const Q& q) { return Ext{false, q}; }
    bool is_zero() const { return !inf && v == 0; }
    bool is(const Q& q) const { return !inf && v == q; }
    bool below(const Q& q) const { return !inf && v < q; }
    bool above(const Q& q) const { return inf || v > q; }
};

bool operator<(const Ext& a, const Ext& b) {
    if (a.inf) return false;
    if (b.inf) return true;
    return a.v < b.v;
}

bool operator==(const Ext& a, const Ext& b) { return a.inf == b.inf && (a.inf || a.v == b.v); }

Ext reciprocal(const Ext& a) {
    if (a.inf) return Ext::of(0);
    if (a.v == 0) return Ext::infinity();
    return Ext::of(1 / a.v);
}

Ext odds_ratio_exact(const Q& p, const Q& q) {
    if (p == q) return Ext::of(1);
    if (p == 1 || q == 0) return Ext::infinity();
    if (p == 0 || q == 1) return Ext::of(0);
    return Ext::of((p * (1 - q)) / (q * (1 - p)));
}

double to_double(const Q& q) { return q.convert_to<double>(); }

// Exact cluster-level and cell-level aggregates of a joint.
struct Aggregates {
    std::vector<std::int64_t> point_class[2];               // sum_g m(x, g, y)
    std::vector<std::int64_t> cluster_class[2];             // sum_{x in k, g} m(x, g, y)
    std::vector<std::vector<std::int64_t>> cell_class[2];   // [g][k]
    std::int64_t class_total[2] = {0, 0};

    explicit Aggregates(const DiscreteJoint& j) {
        for (int y = 0; y < 2; ++y) {
            point_class[y].assign(static_cast<std::size_t>(j.points()), 0);
            cluster_class[y].assign(static_cast<std::size_t>(j.k()), 0);
            cell_class[y].assign(static_cast<std::size_t>(j.groups()),
                                 std::vector<std::int64_t>(static_cast<std::size_t>(j.k()), 0));
        }
        for (int x = 0; x < j.points(); ++x)
            for (int g = 0; g < j.groups(); ++g)
                for (int y = 0; y < 2; ++y) {
                    const std::int64_t m = j.mass(x, g, y);
                    const auto k = static_cast<std::size_t>(j.cluster(x));
                    point_class[y][static_cast<std::size_t>(x)] += m;
                    cluster_class[y][k] += m;
                    cell_class[y][static_cast<std::size_t>(g)][k] += m;
                    class_total[y] += m;
                }
    }

    Q alpha_cluster(int k) const {
        const auto i = static_cast<std::size_t>(k);
        return Q(cluster_class[1][i], cluster_class[0][i] + cluster_class[1][i]);
    }
    Q alpha_cell(int g, int k) const {
        const auto gi = static_cast<std::size_t>(g);
        const auto ki = static_cast<std::size_t>(k);
        return Q(cell_class[1][gi][ki], cell_class[0][gi][ki] + cell_class[1][gi][ki]);
    }
    // r(x) = f+(x) / f-(x); +inf when f-(x) = 0.
    Ext likelihood_ratio(int x) const {
        const auto i = static_cast<std::size_t>(x);
        if (point_class[0][i] == 0) return Ext::infinity();
        return Ext::of(Q(point_class[1][i] * class_total[0], point_class[0][i] * class_total[1]));
    }
};

Q score_exact(const DiscreteJoint& j, const Aggregates& a, OracleScorer scorer, int x, int g) {
    if (scorer == OracleScorer::rho) {
        const auto i = static_cast<std::size_t>(x);
        return Q(a.point_class[1][i], a.point_class[0][i] + a.point_class[1][i]);
    }
    return Q(j.mass(x, g, 1), j.mass(x, g, 0) + j.mass(x, g, 1));
}

void require_both_classes(const DiscreteJoint& j) {
    if (j.class_total(0) == 0 || j.class_total(1) == 0)
        throw DegenerateError("AUC is undefined unless both classes carry mass");
}

Q exact_auc_q(const DiscreteJoint& j, const Aggregates& a, OracleScorer scorer) {
    require_both_classes(j);
    struct Entry {
        Q score;
        std::int64_t mass;
    };
    std::vector<Entry> pos;
    std::vector<Entry> neg;
    for (int x = 0; x < j.points(); ++x)
        for (int g = 0; g < j.groups(); ++g) {
            if (j.mass(x, g, 1) > 0) pos.push_back({score_exact(j, a, scorer, x, g), j.mass(x, g, 1)});
            if (j.mass(x, g, 0) > 0) neg.push_back({score_exact(j, a, scorer, x, g), j.mass(x, g, 0)});
        }
    boost::multiprecision::cpp_int twice = 0;
    for (const auto& p : pos)
        for (const auto& n : neg) {
            const std::int64_t w = p.mass * n.mass;
            if (p.score > n.score) twice += 2 * w;
            else if (p.score == n.score) twice += w;
        }
    return Q(twice, 2 * boost::multiprecision::cpp_int(a.class_total[1]) * a.class_total[0]);
}

// Composition of `total` into `parts` non-negative integers, uniform over
// multisets of unit placements.
std::vector<std::int64_t> random_composition(std::int64_t total, int parts, Rng& rng) {
    std::vector<std::int64_t> out(static_cast<std::size_t>(parts), 0);
    std::uniform_int_distribution<int> pick(0, parts - 1);
    for (std::int64_t u = 0; u < total; ++u) ++out[static_cast<std::size_t>(pick(rng))];
    return out;
}

std::int64_t next_power_of_two(std::int64_t v) {
    std::int64_t p = 1;
    while (p < v) p *= 2;
    return p;
}

struct SharedConditionals {
    std::vector<int> cluster;
    std::vector<std::vector<std::int64_t>> q[2];  // [k] -> weight per member point, total 8
    std::vector<std::vector<int>> members;
};

SharedConditionals random_conditionals(int n_points, int k, Rng& rng) {
    SharedConditionals s;
    s.cluster.resize(static_cast<std::size_t>(n_points));
    std::uniform_int_distribution<int> pick(0, k - 1);
    for (int x = 0; x < n_points; ++x) s.cluster[static_cast<std::size_t>(x)] = x < k ? x : pick(rng);
    s.members.resize(static_cast<std::size_t>(k));
    for (int x = 0; x < n_points; ++x) s.members[static_cast<std::size_t>(s.cluster[static_cast<std::size_t>(x)])].push_back(x);
    for (int y = 0; y < 2; ++y)
        for (int c = 0; c < k; ++c)
            s.q[y].push_back(random_composition(8, static_cast<int>(s.members[static_cast<std::size_t>(c)].size()), rng));
    return s;
}

// mass(x, g, y) = w_g * c_{g, pi(x), y} * q_y(x | pi(x)).
std::vector<std::int64_t> assemble(const SharedConditionals& s, int groups, const std::vector<std::int64_t>& w,
                                   const std::vector<std::vector<std::int64_t>>& c) {
    const int n = static_cast<int>(s.cluster.size());
    std::vector<std::int64_t> mass(static_cast<std::size_t>(n * groups * 2), 0);
    for (std::size_t k = 0; k < s.members.size(); ++k)
        for (std::size_t i = 0; i < s.members[k].size(); ++i) {
            const int x = s.members[k][i];
            for (int g = 0; g < groups; ++g)
                for (int y = 0; y < 2; ++y)
                    mass[static_cast<std::size_t>((x * groups + g) * 2 + y)] =
                        w[static_cast<std::size_t>(g)] * c[static_cast<std::size_t>(g)][k * 2 + static_cast<std::size_t>(y)] *
                        s.q[y][k][i];
        }
    return mass;
}

bool has_both_classes(const std::vector<std::int64_t>& mass) {
    std::int64_t t[2] = {0, 0};
    for (std::size_t i = 0; i < mass.size(); ++i) t[i % 2] += mass[i];
    return t[0] > 0 && t[1] > 0;
}

void check_instance_args(int n_points, int k, int groups) {
    if (k < 1 || n_points < k) throw ConfigError("instances need n_points >= K >= 1");
    if (groups < 1) throw ConfigError("instances need at least one group");
}

DiscreteJoint random_joint(const SharedConditionals& s, int k, int groups, Rng& rng) {
    for (;;) {
        const std::int64_t w_total = 8 * next_power_of_two(groups);
        std::vector<std::int64_t> w = random_composition(w_total - groups, groups, rng);
        for (auto& v : w) v += 1;
        std::vector<std::vector<std::int64_t>> c;
        for (int g = 0; g < groups; ++g) c.push_back(random_composition(8, 2 * k, rng));
        std::vector<std::int64_t> mass = assemble(s, groups, w, c);
        if (has_both_classes(mass)) return DiscreteJoint(k, groups, s.cluster, std::move(mass));
    }
}

}  // namespace

DiscreteJoint::DiscreteJoint(int k, int groups, std::vector<int> cluster, std::vector<std::int64_t> mass)
    : k_(k), groups_(groups), cluster_(std::move(cluster)), mass_(std::move(mass)) {
    if (k_ < 1 || groups_ < 1) throw DataError("a joint needs K >= 1 and at least one group");
    if (mass_.size() != cluster_.size() * static_cast<std::size_t>(groups_) * 2)
        throw ShapeError("mass table does not match points x groups x 2");
    for (int c : cluster_)
        if (c < 0 || c >= k_) throw DataError("cluster id outside [0, K)");
    for (std::int64_t m : mass_) {
        if (m < 0) throw DataError("masses must be non-negative");
        total_ += m;
    }
    if (total_ == 0) throw DataError("a joint needs positive total mass");
}

std::int64_t DiscreteJoint::class_total(int y) const {
    std::int64_t t = 0;
    for (std::size_t i = static_cast<std::size_t>(y); i < mass_.size(); i += 2) t += mass_[i];
    return t;
}

double DiscreteJoint::f_positive(int x) const {
    return to_double(Q(Aggregates(*this).point_class[1][static_cast<std::size_t>(x)], class_total(1)));
}

double DiscreteJoint::f_negative(int x) const {
    return to_double(Q(Aggregates(*this).point_class[0][static_cast<std::size_t>(x)], class_total(0)));
}

double DiscreteJoint::gamma(int k) const {
    const Aggregates a(*this);
    const auto i = static_cast<std::size_t>(k);
    return to_double(Q(a.cluster_class[0][i] + a.cluster_class[1][i], total_));
}

double DiscreteJoint::alpha() const { return to_double(Q(class_total(1), total_)); }

double DiscreteJoint::alpha_cluster(int k) const {
    const Aggregates a(*this);
    const auto i = static_cast<std::size_t>(k);
    if (a.cluster_class[0][i] + a.cluster_class[1][i] == 0) return std::numeric_limits<double>::quiet_NaN();
    return to_double(a.alpha_cluster(k));
}

double DiscreteJoint::alpha_cell(int g, int k) const {
    const Aggregates a(*this);
    const auto gi = static_cast<std::size_t>(g);
    const auto ki = static_cast<std::size_t>(k);
    if (a.cell_class[0][gi][ki] + a.cell_class[1][gi][ki] == 0) return std::numeric_limits<double>::quiet_NaN();
    return to_double(a.alpha_cell(g, k));
}

double DiscreteJoint::rho(int x) const {
    const Aggregates a(*this);
    const auto i = static_cast<std::size_t>(x);
    const std::int64_t t = a.point_class[0][i] + a.point_class[1][i];
    if (t == 0) return std::numeric_limits<double>::quiet_NaN();
    return to_double(Q(a.point_class[1][i], t));
}

double DiscreteJoint::rho_bar(int x, int g) const {
    const std::int64_t t = mass(x, g, 0) + mass(x, g, 1);
    if (t == 0) return std::numeric_limits<double>::quiet_NaN();
    return to_double(Q(mass(x, g, 1), t));
}

bool DiscreteJoint::pcc_invariant() const {
    const Aggregates a(*this);
    for (int y = 0; y < 2; ++y)
        for (int c = 0; c < k_; ++c) {
            // Reference group: the first with positive (c, y) mass.
            int ref = -1;
            for (int g = 0; g < groups_ && ref < 0; ++g)
                if (a.cell_class[y][static_cast<std::size_t>(g)][static_cast<std::size_t>(c)] > 0) ref = g;
            if (ref < 0) continue;
            const std::int64_t ref_total = a.cell_class[y][static_cast<std::size_t>(ref)][static_cast<std::size_t>(c)];
            for (int g = ref + 1; g < groups_; ++g) {
                const std::int64_t t = a.cell_class[y][static_cast<std::size_t>(g)][static_cast<std::size_t>(c)];
                if (t == 0) continue;
                for (int x = 0; x < points(); ++x) {
                    if (cluster(x) != c) continue;
                    // m(x,g,y) / t == m(x,ref,y) / ref_total
                    if (mass(x, g, y) * ref_total != mass(x, ref, y) * t) return false;
                }
            }
        }
    return true;
}

DiscreteJoint DiscreteJoint::marginalize_groups() const {
    std::vector<std::int64_t> merged(cluster_.size() * 2, 0);
    for (int x = 0; x < points(); ++x)
        for (int g = 0; g < groups_; ++g)
            for (int y = 0; y < 2; ++y) merged[static_cast<std::size_t>(x * 2 + y)] += mass(x, g, y);
    return DiscreteJoint(k_, 1, cluster_, std::move(merged));
}

DiscreteJoint random_pcc_instance(int n_points, int k, int groups, std::uint64_t seed) {
    check_instance_args(n_points, k, groups);
    Rng rng(seed);
    const SharedConditionals s = random_conditionals(n_points, k, rng);
    return random_joint(s, k, groups, rng);
}

std::pair<DiscreteJoint, DiscreteJoint> random_pcc_pair(int n_points, int k, int groups, std::uint64_t seed) {
    check_instance_args(n_points, k, groups);
    Rng rng(seed);
    const SharedConditionals s = random_conditionals(n_points, k, rng);
    DiscreteJoint joint = random_joint(s, k, groups, rng);
    // Biased cluster/class weights are all positive so every biased cluster
    // has both classes wherever the conditionals have support.
    std::vector<std::int64_t> c = random_composition(8, 2 * k, rng);
    for (auto& v : c) v += 1;
    DiscreteJoint biased(k, 1, s.cluster, assemble(s, 1, {1}, {c}));
    return {std::move(joint), std::move(biased)};
}

DiscreteJoint pure_cells_instance(int n_points, int k, int groups) {
    check_instance_args(n_points, k, groups);
    if (groups % 2 != 0) throw ConfigError("pure-cell instances need an even number of groups");
    SharedConditionals s;
    s.cluster.resize(static_cast<std::size_t>(n_points));
    s.members.resize(static_cast<std::size_t>(k));
    for (int x = 0; x < n_points; ++x) {
        s.cluster[static_cast<std::size_t>(x)] = x % k;
        s.members[static_cast<std::size_t>(x % k)].push_back(x);
    }
    // Identical class-conditionals: f+ = f-.
    for (int c = 0; c < k; ++c) {
        std::vector<std::int64_t> q;
        for (std::size_t i = 0; i < s.members[static_cast<std::size_t>(c)].size(); ++i)
            q.push_back(static_cast<std::int64_t>(i % 3 + 1));
        s.q[0].push_back(q);
        s.q[1].push_back(q);
    }
    // Cell (g, k) holds only class (g + k) mod 2; each cluster gets the same
    // positive and negative weight.
    std::vector<std::vector<std::int64_t>> c(static_cast<std::size_t>(groups),
                                             std::vector<std::int64_t>(static_cast<std::size_t>(2 * k), 0));
    for (int g = 0; g < groups; ++g)
        for (int j = 0; j < k; ++j) c[static_cast<std::size_t>(g)][static_cast<std::size_t>(2 * j + (g + j) % 2)] = 1;
    return DiscreteJoint(k, groups, s.cluster, assemble(s, groups, std::vector<std::int64_t>(static_cast<std::size_t>(groups), 1), c));
}

double exact_auc(const DiscreteJoint& joint, OracleScorer scorer) {
    return to_double(exact_auc_q(joint, Aggregates(joint), scorer));
}

AucGainReport auc_gain_check(const DiscreteJoint& joint) {
    require_both_classes(joint);
    const Aggregates a(joint);
    const Q auc_rho = exact_auc_q(joint, a, OracleScorer::rho);
    const Q auc_rho_bar = exact_auc_q(joint, a, OracleScorer::rho_bar);

    // OR(alpha^g_k, alpha_k) per cell with mass.
    std::vector<std::vector<Ext>> cell_or(static_cast<std::size_t>(joint.groups()),
                                          std::vector<Ext>(static_cast<std::size_t>(joint.k())));
    for (int g = 0; g < joint.groups(); ++g)
        for (int c = 0; c < joint.k(); ++c) {
            const auto gi = static_cast<std::size_t>(g);
            const auto ci = static_cast<std::size_t>(c);
            if (a.cell_class[0][gi][ci] + a.cell_class[1][gi][ci] == 0) continue;
            cell_or[gi][ci] = odds_ratio_exact(a.alpha_cell(g, c), a.alpha_cluster(c));
        }

    const Q half(1, 2);
    Q ratio_sum = 0;
    Q pure_sum = 0;
    Q pre_sum = 0;
    for (int x1 = 0; x1 < joint.points(); ++x1)
        for (int g1 = 0; g1 < joint.groups(); ++g1) {
            const std::int64_t m1 = joint.mass(x1, g1, 1);
            if (m1 == 0) continue;
            const Ext r1 = a.likelihood_ratio(x1);
            const Ext& or1 = cell_or[static_cast<std::size_t>(g1)][static_cast<std::size_t>(joint.cluster(x1))];
            if (or1.is_zero()) throw VerificationError("positive example in a cell with zero odds ratio");
            for (int x0 = 0; x0 < joint.points(); ++x0)
                for (int g0 = 0; g0 < joint.groups(); ++g0) {
                    const std::int64_t m0 = joint.mass(x0, g0, 0);
                    if (m0 == 0) continue;
                    const Ext r0 = a.likelihood_ratio(x0);
                    const Ext& or0 = cell_or[static_cast<std::size_t>(g0)][static_cast<std::size_t>(joint.cluster(x0))];
                    if (or0.inf) throw VerificationError("negative example in a cell with infinite odds ratio");

                    // tau10 = r(x1) / r(x0) in (0, inf]; omega10 = OR1 / OR0 in (0, inf].
                    const Ext tau10 = (r1.inf || r0.is_zero()) ? Ext::infinity() : Ext::of(r1.v / r0.v);
                    const Ext omega10 = (or1.inf || or0.is_zero()) ? Ext::infinity() : Ext::of(or1.v / or0.v);
                    const Ext tau01 = reciprocal(tau10);
                    const Ext omega01 = reciprocal(omega10);
                    const Q w = Q(m1) * m0;

                    // Final form: ratio term and pure term.
                    if (omega10.below(1) && !omega10.is_zero()) {
                        Q credit = 0;
                        if (omega10 < tau01 && tau01.below(1)) credit = 1;
                        else if (tau01.is(1)) credit = half;
                        if (credit != 0) ratio_sum += w * credit * (tau01.v / omega10.v - 1);
                    }
                    if (omega01.is_zero()) {
                        if (!tau10.is_zero() && tau10.below(1)) pure_sum += w;
                        else if (tau10.is(1)) pure_sum += w * half;
                    }

                    // Form before the change of measure; omega01 is finite here.
                    Q pre = 0;
                    const bool w_low = omega01.above(0) && omega01.below(1);
                    const bool w_high = omega01.above(1);
                    if (w_low && omega01 < tau10 && tau10.below(1)) pre += 1;
                    if (w_high && tau10.above(1) && tau10 < omega01) pre -= 1;
                    if (tau10 == omega01) {
                        if (w_low) pre += half;
                        if (w_high) pre -= half;
                    }
                    if (tau10.is(1)) {
                        if (w_low) pre += half;
                        if (w_high) pre -= half;
                    }
                    if (omega01.is_zero()) {
                        if (tau10.above(0) && tau10.below(1)) pre += 1;
                        if (tau10.is(1)) pre += half;
                    }
                    pre_sum += w * pre;
                }
        }

    const Q norm = Q(a.class_total[1]) * a.class_total[0];
    const Q lhs = auc_rho_bar - auc_rho;
    const Q term_ratio = ratio_sum / norm;
    const Q term_pure = pure_sum / norm;
    const Q rhs = term_ratio + term_pure;
    const Q pre = pre_sum / norm;

    AucGainReport report;
    report.auc_rho = to_double(auc_rho);
    report.auc_rho_bar = to_double(auc_rho_bar);
    report.lhs = to_double(lhs);
    report.rhs = to_double(rhs);
    report.abs_error = to_double(abs(lhs - rhs));
    report.exact = lhs == rhs;
    report.term_ratio = to_double(term_ratio);
    report.term_pure = to_double(term_pure);
    report.rhs_pre_exchange = to_double(pre);
    report.pre_exchange_error = to_double(abs(lhs - pre));
    return report;
}

double posterior_correction_check(const DiscreteJoint& joint, const DiscreteJoint& biased) {
    if (joint.points() != biased.points() || joint.k() != biased.k() || joint.clusters() != biased.clusters())
        throw DataError("joints must share support and partition");
    const Aggregates a(joint);
    const Aggregates b(biased);

    // Shared within-cluster class-conditionals: m(x, y) / m(k, y) agree
    // wherever both clusters carry class y.
    for (int x = 0; x < joint.points(); ++x)
        for (int y = 0; y < 2; ++y) {
            const auto c = static_cast<std::size_t>(joint.cluster(x));
            const std::int64_t ta = a.cluster_class[y][c];
            const std::int64_t tb = b.cluster_class[y][c];
            if (ta == 0 || tb == 0) continue;
            if (a.point_class[y][static_cast<std::size_t>(x)] * tb != b.point_class[y][static_cast<std::size_t>(x)] * ta)
                throw DataError("joints do not share within-cluster class-conditionals");
        }

    double worst = 0.0;
    for (int x = 0; x < joint.points(); ++x) {
        const int c = joint.cluster(x);
        for (int g = 0; g < joint.groups(); ++g) {
            if (joint.mass(x, g, 0) + joint.mass(x, g, 1) == 0) continue;
            const double rho_tilde = biased.rho(x);
            if (std::isnan(rho_tilde)) throw DataError("biased joint has no mass at a supported point");
            const double alpha_tilde = biased.alpha_cluster(c);
            const double alpha_g = joint.alpha_cell(g, c);
            const double formula = corrected_posterior(rho_tilde, alpha_tilde, alpha_g);
            if (std::isnan(formula)) throw DataError("corrected posterior undefined at a supported point");
            worst = std::max(worst, std::abs(formula - joint.rho_bar(x, g)));
        }
    }
    return worst;
}

double mlls_reference(std::span<const double> posteriors, double labeled_prior, int iterations, double epsilon) {
    if (posteriors.empty()) throw EmptyCellError("MLLS needs at least one posterior");
    if (iterations < 1) throw ConfigError("MLLS needs at least one iteration");
    using L = long double;
    const L eps = epsilon;
    auto clamp = [eps](L p) { return std::min(std::max(p, eps), L(1) - eps); };
    const L n = static_cast<L>(posteriors.size());
    const L source = clamp(labeled_prior);
    L mean = 0;
    for (double p : posteriors) mean += clamp(p);
    L a = clamp(mean / n);
    for (int t = 0; t < iterations; ++t) {
        L ratio;
        if (source == a) ratio = 1;
        else ratio = (source / (1 - source)) / (a / (1 - a));
        L total = 0;
        for (double p : posteriors) {
            const L rho = clamp(p);
            total += 1 / (1 + ratio * (1 - rho) / rho);
        }
        a = clamp(total / n);
    }
    return static_cast<double>(a);
}

ExpandedSample expand_samples(const DiscreteJoint& joint, OracleScorer scorer) {
    ExpandedSample out;
    for (int x = 0; x < joint.points(); ++x)
        for (int g = 0; g < joint.groups(); ++g)
            for (int y = 0; y < 2; ++y) {
                const std::int64_t m = joint.mass(x, g, y);
                if (m == 0) continue;
                const double s = scorer == OracleScorer::rho ? joint.rho(x) : joint.rho_bar(x, g);
                out.score.insert(out.score.end(), static_cast<std::size_t>(m), s);
                out.label.insert(out.label.end(), static_cast<std::size_t>(m), y);
            }
    return out;
}

}  // namespace pcc
