#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "pcc/classifier.hpp"
#include "pcc/core.hpp"
#include "pcc/eval.hpp"
#include "pcc/oracle.hpp"
#include "pcc/shift.hpp"
#include "pcc/synthgen.hpp"

namespace pcc {

using Json = nlohmann::ordered_json;

inline constexpr const char* kFormatVersion = "1.0";

/// Shortest decimal that parses back to the same double.
std::string format_double(double v);

// CSV: header f0,...,f{d-1},group[,label]. Group names are interned in
// `groups` in order of first appearance. Errors carry path and line.
LabeledSet read_labeled_csv(const std::filesystem::path& path, GroupTable& groups);
UnlabeledSet read_unlabeled_csv(const std::filesystem::path& path, GroupTable& groups);
void write_labeled_csv(const std::filesystem::path& path, const LabeledSet& data, const GroupTable& groups);
void write_unlabeled_csv(const std::filesystem::path& path, const UnlabeledSet& data, const GroupTable& groups);

/// Writes `text` atomically enough for a single writer: temp file then rename.
void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const Json& doc);
Json read_json(const std::filesystem::path& path);

/// Throws ConfigError unless `doc` carries a format_version with a known major.
void check_format_version(const Json& doc, const std::string& what);

/// Throws ConfigError naming the first key of `obj` not in `allowed`.
void reject_unknown_keys(const Json& obj, std::initializer_list<const char*> allowed, const std::string& where);

// Configuration sections. Parsers start from the defaults and reject unknown keys.
Json to_json(const SyntheticConfig& config);
SyntheticConfig parse_synthetic_config(const Json& obj, SyntheticConfig base = {});
Json to_json(const KMeansConfig& config);
KMeansConfig parse_kmeans_config(const Json& obj, KMeansConfig base = {});
Json to_json(const MllsConfig& config);
MllsConfig parse_mlls_config(const Json& obj, MllsConfig base = {});
Json to_json(const LearnerParams& params);
LearnerParams parse_learner_params(const Json& obj, LearnerParams base = {});
Json to_json(const ResampleConfig& config);
ResampleConfig parse_resample_config(const Json& obj, ResampleConfig base = {});

Json to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);
Json to_json(const Vector& v);
Vector vector_from_json(const Json& j);

Json to_json(const GroundTruth& truth);

/// Model file: partition, per-cluster learners and calibrations, prior table
/// (cells keyed by group name) and the group table.
Json model_to_json(const GroupAwareModel& model, const GroupTable& groups);
GroupAwareModel model_from_json(const Json& doc, GroupTable& groups);

Json to_json(const FitDiagnostics& diag);
Json to_json(const ExperimentResult& result);
std::string experiment_auc_csv(const ExperimentResult& result);
std::string experiment_delta_csv(const ExperimentResult& result);
std::string experiment_summary(const ExperimentResult& result);

Json to_json(const AucGainReport& report);

}  // namespace pcc
