#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcc/classifier.hpp"
#include "pcc/core.hpp"
#include "pcc/partition.hpp"
#include "pcc/shift.hpp"
#include "pcc/synthgen.hpp"

namespace pcc {

struct ScoredExample {
    double score = 0.0;
    int label = 0;
    int group = 0;
};

/// AUC as an exact fraction: `twice_wins` counts 2 per correctly ordered
/// positive/negative pair and 1 per tie.
struct AucCounts {
    std::int64_t twice_wins = 0;
    std::int64_t pairs = 0;

    double value() const { return static_cast<double>(twice_wins) / (2.0 * static_cast<double>(pairs)); }
};

/// Mann-Whitney statistic with midranks, O(n log n). Throws DegenerateError
/// unless both classes are present.
AucCounts auc_counts(std::span<const double> scores, std::span<const int> labels);
double auc(std::span<const double> scores, std::span<const int> labels);
double auc(std::span<const ScoredExample> scored);

enum class Method { global, group_aware_global, cluster_global, label_shift, pcc, pcc_true_clustering };

std::string to_string(Method method);
Method parse_method(const std::string& name);
const std::vector<Method>& all_methods();

struct FitOptions {
    LearnerKind learner = LearnerKind::qda;
    LearnerParams learner_params{};
    KMeansConfig kmeans{};
    MllsConfig mlls{};
    std::uint64_t seed = 0;
    std::optional<PartitionModel> partition;       // skips K selection when set
    std::optional<PartitionModel> true_partition;  // required by pcc_true_clustering
};

struct FitDiagnostics {
    int k = 1;
    std::vector<std::pair<int, double>> silhouettes;
    int cells = 0;
    int fallback_cells = 0;
    int unconverged_cells = 0;
    double mean_iterations = 0.0;
    bool zero_vector_for_unseen_groups = false;
};

struct FittedMethod {
    Method method = Method::global;
    std::function<double(const VectorRef&, int)> score;
    FitDiagnostics diagnostics;
    std::optional<GroupAwareModel> model;
};

/// Steps 1-5 of the group-aware pipeline on a fixed partition.
GroupAwareModel fit_group_aware(const LabeledSet& train, const LabeledSet& validation,
                                const UnlabeledSet& unlabeled, const PartitionModel& partition,
                                const FitOptions& options);

/// Features with a one-hot block for `columns` (group index -> column); groups
/// without a column get a zero block.
Matrix one_hot_augment(const Matrix& x, std::span<const int> group, const std::map<int, int>& columns);

FittedMethod fit_baseline(Method method, const LabeledSet& train, const LabeledSet& validation,
                          const UnlabeledSet& unlabeled, const FitOptions& options);

struct ExperimentConfig {
    SyntheticConfig synthetic{};
    // When set, repetitions resample this pool instead of generating data.
    std::optional<LabeledSet> pool;
    ResampleConfig resample{};
    std::vector<Method> methods = all_methods();
    int repetitions = 10;
    LearnerKind learner = LearnerKind::qda;
    LearnerParams learner_params{};
    KMeansConfig kmeans{};
    MllsConfig mlls{};
    double holdout_fraction = 0.2;
    std::uint64_t seed = 0;

    void validate() const;
};

struct RepetitionResult {
    int index = 0;
    bool complete = true;
    std::map<Method, double> auc;
    std::map<Method, std::string> errors;
    std::map<Method, FitDiagnostics> diagnostics;
    int selected_k = 1;
    std::vector<std::pair<int, double>> silhouettes;
    std::vector<int> test_groups;
    std::int64_t test_size = 0;
    std::string prior_source;
};

struct ExperimentResult {
    std::vector<Method> methods;
    std::vector<RepetitionResult> repetitions;
    std::map<Method, double> mean_auc;
    std::map<Method, double> mean_delta_vs_global;
};

ExperimentResult run_experiment(const ExperimentConfig& config);

}  // namespace pcc
