#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "pcc/core.hpp"
#include "pcc/partition.hpp"

namespace pcc {

/// Posterior clamp applied to every calibrated prediction.
inline constexpr double kPosteriorEpsilon = 1e-6;

enum class LearnerKind { logistic, qda, gmm };

std::string to_string(LearnerKind kind);
LearnerKind parse_learner(const std::string& name);

struct LearnerParams {
    double l2 = 1e-4;  // logistic penalty on the weights (not the bias)
    int max_iterations = 100;
    double gradient_tolerance = 1e-6;
    double ridge = 1e-3;  // QDA ridge, scaled by trace / d
    // Class-conditional mixtures: candidate component counts (chosen by BIC)
    // and the EM stopping rule on the mean log-likelihood.
    std::vector<int> mixture_components{1, 2, 4, 8};
    int em_iterations = 200;
    double em_tolerance = 1e-7;
};

struct LogisticModel {
    Vector weights;
    double bias = 0.0;
};

/// Per-class Gaussian parameters; the score is the log posterior odds.
struct QdaModel {
    std::array<Vector, 2> mean;
    std::array<Matrix, 2> covariance;
    std::array<double, 2> log_prior{};

    // Derived on construction from the covariances.
    std::array<Matrix, 2> chol;
    std::array<double, 2> log_det{};

    void factorize();
};

struct MixtureComponent {
    double log_weight = 0.0;
    Vector mean;
    Matrix covariance;

    Matrix chol;  // derived
    double log_det = 0.0;
};

/// Gaussian mixture density of one class.
struct ClassMixture {
    std::vector<MixtureComponent> components;

    void factorize();
    double log_density(const VectorRef& x) const;
};

/// Class-conditional Gaussian mixtures; the score is the log posterior odds.
struct GmmModel {
    std::array<ClassMixture, 2> mixture;
    std::array<double, 2> log_prior{};
};

/// EM fit of a Gaussian mixture with the component count chosen by BIC among
/// `params.mixture_components`; covariances get the QDA ridge.
ClassMixture fit_class_mixture(const Matrix& points, const LearnerParams& params, std::uint64_t seed);

/// Raw scorer: larger scores mean "more positive".
class BaseClassifier {
public:
    BaseClassifier() = default;
    explicit BaseClassifier(LogisticModel m) : model_(std::move(m)) {}
    explicit BaseClassifier(QdaModel m) : model_(std::move(m)) {}
    explicit BaseClassifier(GmmModel m) : model_(std::move(m)) {}

    LearnerKind kind() const;
    Eigen::Index dim() const;
    double score(const VectorRef& x) const;

    const LogisticModel* logistic() const { return std::get_if<LogisticModel>(&model_); }
    const QdaModel* qda() const { return std::get_if<QdaModel>(&model_); }
    const GmmModel* gmm() const { return std::get_if<GmmModel>(&model_); }

private:
    std::variant<LogisticModel, QdaModel, GmmModel> model_;
};

/// Mean negative log-likelihood plus (l2/2)|w|^2, and its gradient with the
/// bias as the last entry.
double logistic_objective(const LogisticModel& model, const LabeledSet& data, double l2);
Vector logistic_gradient(const LogisticModel& model, const LabeledSet& data, double l2);

/// Throws DegenerateError unless both classes are present.
BaseClassifier fit_base(const LabeledSet& train, LearnerKind kind, const LearnerParams& params = {},
                        std::uint64_t seed = 0);

/// Platt sigmoid p(s) = 1 / (1 + exp(a*s + b)); a < 0 for positively oriented scores.
struct CalibrationModel {
    double a = 0.0;
    double b = 0.0;

    double operator()(double score) const;
};

struct PlattTargets {
    double positive = 0.0;
    double negative = 0.0;
};

/// Smoothed targets (N+ + 1)/(N+ + 2) and 1/(N- + 2).
PlattTargets platt_targets(std::int64_t n_positive, std::int64_t n_negative);

/// Negative log-likelihood of the calibrated outputs against Platt's targets.
double platt_objective(const CalibrationModel& model, std::span<const double> scores,
                       std::span<const int> labels);

/// Newton iterations with backtracking. Single-class input yields the constant
/// model at the smoothed base rate.
CalibrationModel fit_platt(std::span<const double> scores, std::span<const int> labels);

struct ClusterEntry {
    std::optional<BaseClassifier> base;
    CalibrationModel calibration;
    std::optional<double> fallback;  // constant posterior for degenerate clusters
};

class ClusterClassifierEnsemble {
public:
    ClusterClassifierEnsemble() = default;
    ClusterClassifierEnsemble(PartitionModel partition, std::vector<ClusterEntry> entries);

    const PartitionModel& partition() const { return partition_; }
    const std::vector<ClusterEntry>& entries() const { return entries_; }
    int k() const { return partition_.k(); }

    /// Calibrated posterior of the labeled distribution, clamped to
    /// [kPosteriorEpsilon, 1 - kPosteriorEpsilon].
    double predict(const VectorRef& x) const;
    double predict_in_cluster(int cluster, const VectorRef& x) const;

private:
    PartitionModel partition_;
    std::vector<ClusterEntry> entries_;
};

/// One calibrated classifier per cluster: fit on the cluster's training rows,
/// calibrated on its validation rows, with the sigmoid intercept moved from the
/// validation class balance to the cluster's labeled prior (train and
/// validation rows). Clusters missing a class in training or without
/// validation rows get the clamped labeled prior of the cluster.
ClusterClassifierEnsemble fit_ensemble(const LabeledSet& train, const LabeledSet& validation,
                                       const PartitionModel& partition, LearnerKind kind,
                                       const LearnerParams& params = {}, std::uint64_t seed = 0);

}  // namespace pcc
