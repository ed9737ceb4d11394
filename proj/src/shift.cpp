#include "pcc/shift.hpp"

#include <cmath>

namespace pcc {

MllsResult mlls_estimate(std::span<const double> posteriors, double labeled_prior,
                         const MllsConfig& config) {
    if (posteriors.empty()) throw EmptyCellError("MLLS needs at least one posterior");
    if (config.max_iterations < 1) throw ConfigError("MLLS needs at least one iteration");
    const double eps = config.epsilon;
    const double n = static_cast<double>(posteriors.size());

    // (1 - rho) / rho is fixed across iterations.
    std::vector<double> odds_against(posteriors.size());
    double mean = 0.0;
    for (std::size_t i = 0; i < posteriors.size(); ++i) {
        const double rho = clamp_probability(posteriors[i], eps);
        odds_against[i] = (1.0 - rho) / rho;
        mean += rho;
    }
    const double source = clamp_probability(labeled_prior, eps);

    MllsResult result;
    result.estimate = clamp_probability(mean / n, eps);
    for (int t = 0; t < config.max_iterations; ++t) {
        const double ratio = odds_ratio(source, result.estimate);
        double total = 0.0;
        for (double r : odds_against) total += 1.0 / (1.0 + ratio * r);
        const double next = clamp_probability(total / n, eps);
        const double change = std::abs(next - result.estimate);
        result.estimate = next;
        result.iterations = t + 1;
        if (change <= config.tolerance) {
            result.converged = true;
            break;
        }
    }
    return result;
}

double corrected_posterior(double rho, double labeled_prior, double group_prior) {
    return 1.0 / (1.0 + odds_ratio(labeled_prior, group_prior) * (1.0 - rho) / rho);
}

LabeledPriors labeled_cluster_priors(const LabeledSet& labeled, const PartitionModel& partition,
                                     double epsilon) {
    if (labeled.empty()) throw ConfigError("labeled cluster priors need a nonempty labeled set");
    const int k = partition.k();
    std::vector<std::int64_t> pos(static_cast<std::size_t>(k), 0);
    std::vector<std::int64_t> total(static_cast<std::size_t>(k), 0);
    std::int64_t all_pos = 0;
    const std::vector<int> clusters = partition.assign_all(labeled.x);
    for (std::size_t i = 0; i < clusters.size(); ++i) {
        const auto c = static_cast<std::size_t>(clusters[i]);
        ++total[c];
        pos[c] += labeled.label[i];
        all_pos += labeled.label[i];
    }
    LabeledPriors out;
    out.global = static_cast<double>(all_pos) / static_cast<double>(labeled.size());
    for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c) {
        const bool empty = total[c] == 0;
        const double rate = empty ? out.global : static_cast<double>(pos[c]) / static_cast<double>(total[c]);
        out.prior.push_back(clamp_probability(rate, epsilon));
        out.fallback.push_back(empty);
    }
    return out;
}

PriorTable::PriorTable(LabeledPriors labeled, std::map<int, std::vector<CellPrior>> cells)
    : labeled_(std::move(labeled)), cells_(std::move(cells)) {
    for (const auto& [g, row] : cells_)
        if (row.size() != labeled_.prior.size())
            throw ConfigError("prior table rows must have one cell per cluster");
}

PriorTable estimate_group_cluster_priors(const UnlabeledSet& unlabeled,
                                         const ClusterClassifierEnsemble& ensemble,
                                         const LabeledPriors& labeled_priors,
                                         const MllsConfig& config) {
    const int k = ensemble.k();
    if (static_cast<int>(labeled_priors.prior.size()) != k)
        throw ConfigError("labeled priors do not match the ensemble's partition");

    // Posteriors bucketed by (group, cluster) in one pass over U.
    std::map<int, std::vector<std::vector<double>>> buckets;
    for (Eigen::Index i = 0; i < unlabeled.size(); ++i) {
        const auto x = unlabeled.x.row(i).transpose();
        const int c = ensemble.partition().assign(x);
        auto& row = buckets[unlabeled.group[static_cast<std::size_t>(i)]];
        if (row.empty()) row.resize(static_cast<std::size_t>(k));
        row[static_cast<std::size_t>(c)].push_back(ensemble.predict_in_cluster(c, x));
    }

    std::map<int, std::vector<CellPrior>> cells;
    for (const auto& [g, row] : buckets) {
        std::vector<CellPrior> out(static_cast<std::size_t>(k));
        for (std::size_t c = 0; c < row.size(); ++c) {
            out[c].support = static_cast<std::int64_t>(row[c].size());
            if (row[c].empty()) {
                out[c].prior = labeled_priors.prior[c];
                out[c].fallback = true;
                continue;
            }
            const MllsResult r = mlls_estimate(row[c], labeled_priors.prior[c], config);
            out[c].prior = r.estimate;
            out[c].iterations = r.iterations;
        }
        cells.emplace(g, std::move(out));
    }
    return PriorTable(labeled_priors, std::move(cells));
}

GroupAwareModel::GroupAwareModel(ClusterClassifierEnsemble ensemble, PriorTable priors, double epsilon)
    : ensemble_(std::move(ensemble)), priors_(std::move(priors)), epsilon_(epsilon) {
    if (priors_.k() != ensemble_.k()) throw ConfigError("prior table and ensemble disagree on K");
}

PosteriorDetail GroupAwareModel::detail(const VectorRef& x, int group) const {
    PosteriorDetail out;
    out.cluster = ensemble_.partition().assign(x);
    out.group_agnostic = ensemble_.predict_in_cluster(out.cluster, x);
    if (!priors_.has_group(group)) {
        out.unseen_group = true;
        out.group_aware = out.group_agnostic;
        return out;
    }
    const CellPrior& cell = priors_.cell(group, out.cluster);
    out.cell_fallback = cell.fallback;
    const double rho = clamp_probability(out.group_agnostic, epsilon_);
    const double source = clamp_probability(priors_.labeled().prior[static_cast<std::size_t>(out.cluster)], epsilon_);
    const double target = clamp_probability(cell.prior, epsilon_);
    out.group_aware = corrected_posterior(rho, source, target);
    return out;
}

}  // namespace pcc
