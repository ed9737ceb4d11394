#include "pcc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <set>

namespace pcc {

AucCounts auc_counts(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw ShapeError("scores and labels differ in length");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!std::isfinite(scores[i])) throw DataError("AUC needs finite scores");
        if (labels[i] != 0 && labels[i] != 1) throw DataError("AUC needs binary labels");
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Walk tie blocks in increasing score order. Each positive in a block beats
    // every negative below it and ties with the negatives inside it.
    AucCounts out;
    std::int64_t negatives_below = 0;
    std::int64_t positives = 0;
    for (std::size_t start = 0; start < order.size();) {
        std::size_t end = start;
        std::int64_t pos = 0;
        std::int64_t neg = 0;
        while (end < order.size() && scores[order[end]] == scores[order[start]]) {
            (labels[order[end]] == 1 ? pos : neg) += 1;
            ++end;
        }
        out.twice_wins += 2 * pos * negatives_below + pos * neg;
        negatives_below += neg;
        positives += pos;
        start = end;
    }
    if (positives == 0 || negatives_below == 0)
        throw DegenerateError("AUC is undefined unless both classes are present");
    out.pairs = positives * negatives_below;
    return out;
}

double auc(std::span<const double> scores, std::span<const int> labels) {
    return auc_counts(scores, labels).value();
}

double auc(std::span<const ScoredExample> scored) {
    std::vector<double> s;
    std::vector<int> y;
    s.reserve(scored.size());
    y.reserve(scored.size());
    for (const auto& e : scored) {
        s.push_back(e.score);
        y.push_back(e.label);
    }
    return auc(s, y);
}

namespace {

const std::vector<std::pair<Method, const char*>>& method_names() {
    static const std::vector<std::pair<Method, const char*>> names{
        {Method::global, "global"},
        {Method::group_aware_global, "group_aware_global"},
        {Method::cluster_global, "cluster_global"},
        {Method::label_shift, "label_shift"},
        {Method::pcc, "pcc"},
        {Method::pcc_true_clustering, "pcc_true_clustering"},
    };
    return names;
}

PartitionModel single_cluster(const Matrix& points) {
    if (points.rows() == 0) throw ConfigError("cannot build a partition from no points");
    Matrix centroid = points.colwise().mean();
    return PartitionModel(std::move(centroid));
}

FitDiagnostics prior_diagnostics(const GroupAwareModel& model, const MllsConfig& mlls) {
    FitDiagnostics d;
    d.k = model.ensemble().k();
    double iterations = 0.0;
    int estimated = 0;
    for (const auto& [g, row] : model.priors().cells()) {
        for (const CellPrior& cell : row) {
            ++d.cells;
            if (cell.fallback) {
                ++d.fallback_cells;
                continue;
            }
            ++estimated;
            iterations += cell.iterations;
            if (cell.iterations >= mlls.max_iterations) ++d.unconverged_cells;
        }
    }
    d.mean_iterations = estimated > 0 ? iterations / estimated : 0.0;
    return d;
}

}  // namespace

std::string to_string(Method method) {
    for (const auto& [m, name] : method_names())
        if (m == method) return name;
    throw ConfigError("unknown method");
}

Method parse_method(const std::string& name) {
    for (const auto& [m, n] : method_names())
        if (name == n) return m;
    throw ConfigError("unknown method '" + name + "'");
}

const std::vector<Method>& all_methods() {
    static const std::vector<Method> methods = [] {
        std::vector<Method> out;
        for (const auto& [m, n] : method_names()) out.push_back(m);
        return out;
    }();
    return methods;
}

GroupAwareModel fit_group_aware(const LabeledSet& train, const LabeledSet& validation,
                                const UnlabeledSet& unlabeled, const PartitionModel& partition,
                                const FitOptions& options) {
    if (unlabeled.empty()) throw ConfigError("the group-aware pipeline needs unlabeled data");
    ClusterClassifierEnsemble ensemble = fit_ensemble(train, validation, partition, options.learner,
                                                      options.learner_params, derive_seed(options.seed, 1));
    const LabeledSet all_labeled = validation.empty() ? train : concat(train, validation);
    LabeledPriors labeled = labeled_cluster_priors(all_labeled, partition, options.mlls.epsilon);
    PriorTable priors = estimate_group_cluster_priors(unlabeled, ensemble, labeled, options.mlls);
    return GroupAwareModel(std::move(ensemble), std::move(priors), options.mlls.epsilon);
}

Matrix one_hot_augment(const Matrix& x, std::span<const int> group, const std::map<int, int>& columns) {
    if (static_cast<std::size_t>(x.rows()) != group.size()) throw ShapeError("features and groups differ in length");
    const Eigen::Index d = x.cols();
    Matrix out = Matrix::Zero(x.rows(), d + static_cast<Eigen::Index>(columns.size()));
    out.leftCols(d) = x;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        auto it = columns.find(group[static_cast<std::size_t>(i)]);
        if (it != columns.end()) out(i, d + it->second) = 1.0;
    }
    return out;
}

FittedMethod fit_baseline(Method method, const LabeledSet& train, const LabeledSet& validation,
                          const UnlabeledSet& unlabeled, const FitOptions& options) {
    if (train.empty()) throw ConfigError(to_string(method) + " needs a nonempty labeled training set");
    FittedMethod out;
    out.method = method;

    auto clustered = [&]() -> PartitionModel {
        if (options.partition) return *options.partition;
        KMeansConfig km = options.kmeans;
        km.seed = derive_seed(options.seed, 2);
        KSelection sel = select_k(train, unlabeled, km);
        out.diagnostics.silhouettes = sel.silhouettes;
        return std::move(sel.model);
    };

    switch (method) {
    case Method::global: {
        auto ensemble = std::make_shared<ClusterClassifierEnsemble>(
            fit_ensemble(train, validation, single_cluster(train.x), options.learner, options.learner_params,
                         derive_seed(options.seed, 1)));
        out.score = [ensemble](const VectorRef& x, int) { return ensemble->predict(x); };
        break;
    }
    case Method::group_aware_global: {
        std::map<int, int> columns;
        std::set<int> seen(train.group.begin(), train.group.end());
        seen.insert(validation.group.begin(), validation.group.end());
        for (int g : seen) columns.emplace(g, static_cast<int>(columns.size()));
        LabeledSet aug_train = train;
        aug_train.x = one_hot_augment(train.x, train.group, columns);
        LabeledSet aug_val = validation;
        aug_val.x = one_hot_augment(validation.x, validation.group, columns);
        auto ensemble = std::make_shared<ClusterClassifierEnsemble>(
            fit_ensemble(aug_train, aug_val, single_cluster(aug_train.x), options.learner, options.learner_params,
                         derive_seed(options.seed, 1)));
        const Eigen::Index d = train.dim();
        out.score = [ensemble, columns, d](const VectorRef& x, int g) {
            Vector z = Vector::Zero(d + static_cast<Eigen::Index>(columns.size()));
            z.head(d) = x;
            auto it = columns.find(g);
            if (it != columns.end()) z(d + it->second) = 1.0;
            return ensemble->predict(z);
        };
        out.diagnostics.zero_vector_for_unseen_groups = true;
        break;
    }
    case Method::cluster_global: {
        PartitionModel partition = clustered();
        out.diagnostics.k = partition.k();
        auto ensemble = std::make_shared<ClusterClassifierEnsemble>(
            fit_ensemble(train, validation, partition, options.learner, options.learner_params,
                         derive_seed(options.seed, 1)));
        out.score = [ensemble](const VectorRef& x, int) { return ensemble->predict(x); };
        break;
    }
    case Method::label_shift:
    case Method::pcc:
    case Method::pcc_true_clustering: {
        PartitionModel partition;
        if (method == Method::label_shift) {
            partition = unlabeled.empty() ? single_cluster(train.x)
                                          : single_cluster(stack_features(train, unlabeled));
        } else if (method == Method::pcc) {
            partition = clustered();
        } else {
            if (!options.true_partition)
                throw ConfigError("pcc_true_clustering requires the ground-truth partition");
            partition = *options.true_partition;
        }
        auto silhouettes = out.diagnostics.silhouettes;
        out.model = fit_group_aware(train, validation, unlabeled, partition, options);
        out.diagnostics = prior_diagnostics(*out.model, options.mlls);
        out.diagnostics.silhouettes = std::move(silhouettes);
        auto model = std::make_shared<GroupAwareModel>(*out.model);
        out.score = [model](const VectorRef& x, int g) { return model->posterior(x, g); };
        break;
    }
    }
    return out;
}

void ExperimentConfig::validate() const {
    if (repetitions < 1) throw ConfigError("repetitions must be at least 1");
    if (methods.empty()) throw ConfigError("the method list must be nonempty");
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) throw ConfigError("holdout fraction must lie in (0, 1)");
    std::set<Method> unique(methods.begin(), methods.end());
    if (unique.size() != methods.size()) throw ConfigError("the method list has duplicates");
    if (pool) {
        pool->validate();
        if (pool->empty()) throw ConfigError("the resampling pool is empty");
    } else {
        synthetic.validate();
    }
}

namespace {

struct Split {
    LabeledSet train;
    LabeledSet validation;
    UnlabeledSet unlabeled;        // all of U, used for clustering
    UnlabeledSet prior_unlabeled;  // U used for prior estimation
    UnlabeledSet test;
    std::vector<int> test_label;
    std::vector<int> test_groups;
    std::string prior_source;
};

Split split_repetition(const SyntheticData& data, double fraction, std::uint64_t seed) {
    const UnlabeledSet& u = data.unlabeled;
    const auto& hidden = data.truth.unlabeled_label;
    if (hidden.size() != static_cast<std::size_t>(u.size()))
        throw DataError("unlabeled data lacks hidden labels for scoring");

    Split s;
    auto [u_train_groups, test_groups] = split_group_ids(u.group, fraction, derive_seed(seed, 0));
    s.test_groups = test_groups;
    const std::set<int> test_set(test_groups.begin(), test_groups.end());

    // Test examples: U rows of the test groups, duplicates collapsed by source.
    std::set<std::pair<int, std::int64_t>> seen;
    std::vector<Eigen::Index> test_rows;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        const int g = u.group[static_cast<std::size_t>(i)];
        if (test_set.count(g) && seen.emplace(g, u.source[static_cast<std::size_t>(i)]).second)
            test_rows.push_back(i);
    }
    s.test = select_rows(u, test_rows);
    for (Eigen::Index i : test_rows) s.test_label.push_back(hidden[static_cast<std::size_t>(i)]);

    // Prior-estimation rows exclude test items; a test group left empty keeps all its rows.
    std::set<int> nonempty;
    std::vector<Eigen::Index> kept;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        const int g = u.group[static_cast<std::size_t>(i)];
        if (!test_set.count(g) || !seen.count({g, u.source[static_cast<std::size_t>(i)]})) {
            kept.push_back(i);
            if (test_set.count(g)) nonempty.insert(g);
        }
    }
    int fell_back = 0;
    std::set<int> fallback_groups;
    for (int g : test_groups)
        if (!nonempty.count(g)) {
            fallback_groups.insert(g);
            ++fell_back;
        }
    if (fell_back > 0) {
        kept.clear();
        for (Eigen::Index i = 0; i < u.size(); ++i) {
            const int g = u.group[static_cast<std::size_t>(i)];
            if (!test_set.count(g) || fallback_groups.count(g) || !seen.count({g, u.source[static_cast<std::size_t>(i)]}))
                kept.push_back(i);
        }
    }
    if (fell_back == 0) s.prior_source = "excluding_test_items";
    else if (fell_back == static_cast<int>(test_groups.size())) s.prior_source = "all_unlabeled";
    else s.prior_source = "mixed";
    s.prior_unlabeled = select_rows(u, kept);
    s.unlabeled = u;

    // Labeled data never contains test groups; validation is a group holdout of the rest.
    std::vector<int> labeled_groups;
    for (int g : distinct_groups(data.labeled.group))
        if (!test_set.count(g)) labeled_groups.push_back(g);
    LabeledSet remaining = filter_groups(data.labeled, labeled_groups);
    if (remaining.empty()) throw ConfigError("no labeled groups remain after the test holdout");
    std::tie(s.train, s.validation) = split_groups_holdout(remaining, fraction, derive_seed(seed, 1));
    return s;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    ExperimentResult result;
    result.methods = config.methods;

    std::optional<PartitionModel> pool_partition;
    if (config.pool) {
        KMeansConfig km = config.kmeans;
        km.seed = derive_seed(config.seed, 0x706f6f6c);
        pool_partition = select_k(config.pool->x, km).model;
    }

    for (int r = 0; r < config.repetitions; ++r) {
        RepetitionResult rep;
        rep.index = r;
        const std::uint64_t rep_seed = derive_seed(config.seed, static_cast<std::uint64_t>(r));
        try {
            SyntheticData data;
            if (config.pool) {
                ResampleConfig rc = config.resample;
                rc.seed = derive_seed(rep_seed, 1);
                data = resample_pool(*config.pool, *pool_partition, rc);
            } else {
                SyntheticConfig sc = config.synthetic;
                sc.seed = derive_seed(rep_seed, 1);
                data = generate(sc);
            }
            Split split = split_repetition(data, config.holdout_fraction, derive_seed(rep_seed, 2));
            rep.test_groups = split.test_groups;
            rep.test_size = split.test.size();
            rep.prior_source = split.prior_source;

            FitOptions options;
            options.learner = config.learner;
            options.learner_params = config.learner_params;
            options.kmeans = config.kmeans;
            options.mlls = config.mlls;
            options.seed = derive_seed(rep_seed, 3);
            options.true_partition = data.truth.true_partition();

            const bool needs_k = std::any_of(config.methods.begin(), config.methods.end(), [](Method m) {
                return m == Method::cluster_global || m == Method::pcc;
            });
            if (needs_k) {
                KMeansConfig km = config.kmeans;
                km.seed = derive_seed(rep_seed, 4);
                KSelection sel = select_k(split.train, split.unlabeled, km);
                rep.selected_k = sel.k;
                rep.silhouettes = sel.silhouettes;
                options.partition = std::move(sel.model);
            }

            for (Method m : config.methods) {
                try {
                    FittedMethod fitted = fit_baseline(m, split.train, split.validation,
                                                       m == Method::cluster_global || m == Method::global ||
                                                               m == Method::group_aware_global
                                                           ? split.unlabeled
                                                           : split.prior_unlabeled,
                                                       options);
                    std::vector<double> scores(static_cast<std::size_t>(split.test.size()));
                    for (Eigen::Index i = 0; i < split.test.size(); ++i)
                        scores[static_cast<std::size_t>(i)] =
                            fitted.score(split.test.x.row(i).transpose(), split.test.group[static_cast<std::size_t>(i)]);
                    rep.auc[m] = auc(scores, split.test_label);
                    if (m == Method::cluster_global || m == Method::pcc) {
                        fitted.diagnostics.k = rep.selected_k;
                        fitted.diagnostics.silhouettes = rep.silhouettes;
                    }
                    rep.diagnostics[m] = std::move(fitted.diagnostics);
                } catch (const std::exception& e) {
                    rep.complete = false;
                    rep.errors[m] = e.what();
                }
            }
        } catch (const std::exception& e) {
            rep.complete = false;
            for (Method m : config.methods) rep.errors[m] = e.what();
        }
        result.repetitions.push_back(std::move(rep));
    }

    for (Method m : config.methods) {
        double total = 0.0;
        double delta = 0.0;
        int count = 0;
        int delta_count = 0;
        for (const auto& rep : result.repetitions) {
            auto it = rep.auc.find(m);
            if (it == rep.auc.end()) continue;
            total += it->second;
            ++count;
            auto g = rep.auc.find(Method::global);
            if (g != rep.auc.end()) {
                delta += it->second - g->second;
                ++delta_count;
            }
        }
        if (count > 0) result.mean_auc[m] = total / count;
        if (delta_count > 0) result.mean_delta_vs_global[m] = delta / delta_count;
    }
    return result;
}

}  // namespace pcc
