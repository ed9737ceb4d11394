#include "pcc/io.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <system_error>

namespace pcc {

namespace fs = std::filesystem;

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace {

[[noreturn]] void fail_at(const fs::path& path, std::size_t line, const std::string& msg) {
    throw DataError(path.string() + ":" + std::to_string(line) + ": " + msg);
}

// Splits one CSV record; fields may be double-quoted with "" as an escape.
std::vector<std::string> split_record(const std::string& line, const fs::path& path, std::size_t lineno) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    bool was_quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            if (!field.empty() || was_quoted) fail_at(path, lineno, "stray quote");
            quoted = was_quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
            was_quoted = false;
        } else {
            field += c;
        }
    }
    if (quoted) fail_at(path, lineno, "unterminated quote");
    out.push_back(std::move(field));
    return out;
}

std::string quote_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos && !s.empty()) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

double parse_double(const std::string& s, const fs::path& path, std::size_t lineno) {
    double v = 0.0;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    if (!s.empty() && *begin == '+') ++begin;
    auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc() || res.ptr != end) fail_at(path, lineno, "cannot parse number '" + s + "'");
    if (!std::isfinite(v)) fail_at(path, lineno, "non-finite feature '" + s + "'");
    return v;
}

struct RawTable {
    std::vector<std::vector<double>> rows;
    std::vector<int> group;
    std::vector<int> label;
    Eigen::Index dim = 0;
};

RawTable read_table(const fs::path& path, GroupTable& groups, bool labeled) {
    std::ifstream in(path);
    if (!in) throw DataError(path.string() + ": cannot open file");
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) fail_at(path, 1, "missing header");
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::vector<std::string> header = split_record(line, path, lineno);
    const std::size_t tail = labeled ? 2 : 1;
    if (header.size() < tail + 1) fail_at(path, lineno, "header needs at least one feature column");
    RawTable t;
    t.dim = static_cast<Eigen::Index>(header.size() - tail);
    for (Eigen::Index j = 0; j < t.dim; ++j)
        if (header[static_cast<std::size_t>(j)] != "f" + std::to_string(j))
            fail_at(path, lineno, "expected column 'f" + std::to_string(j) + "', found '" + header[static_cast<std::size_t>(j)] + "'");
    if (header[static_cast<std::size_t>(t.dim)] != "group") fail_at(path, lineno, "expected column 'group'");
    if (labeled && header.back() != "label") fail_at(path, lineno, "expected column 'label'");

    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> f = split_record(line, path, lineno);
        if (f.size() != header.size())
            fail_at(path, lineno, "expected " + std::to_string(header.size()) + " fields, found " + std::to_string(f.size()));
        std::vector<double> row(static_cast<std::size_t>(t.dim));
        for (std::size_t j = 0; j < row.size(); ++j) row[j] = parse_double(f[j], path, lineno);
        t.rows.push_back(std::move(row));
        t.group.push_back(groups.intern(f[static_cast<std::size_t>(t.dim)]));
        if (labeled) {
            const std::string& y = f.back();
            if (y != "0" && y != "1") fail_at(path, lineno, "label must be 0 or 1, found '" + y + "'");
            t.label.push_back(y == "1" ? 1 : 0);
        }
    }
    return t;
}

Matrix to_matrix(const RawTable& t) {
    Matrix x(static_cast<Eigen::Index>(t.rows.size()), t.dim);
    for (std::size_t i = 0; i < t.rows.size(); ++i)
        for (Eigen::Index j = 0; j < t.dim; ++j) x(static_cast<Eigen::Index>(i), j) = t.rows[i][static_cast<std::size_t>(j)];
    return x;
}

std::vector<std::int64_t> row_ids(std::size_t n) {
    std::vector<std::int64_t> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<std::int64_t>(i);
    return ids;
}

void write_rows(std::ostream& out, const Matrix& x, const std::vector<int>& group, const std::vector<int>* label,
                const GroupTable& groups) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) out << 'f' << j << ',';
    out << "group" << (label ? ",label" : "") << '\n';
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) out << format_double(x(i, j)) << ',';
        out << quote_field(groups.name(group[static_cast<std::size_t>(i)]));
        if (label) out << ',' << (*label)[static_cast<std::size_t>(i)];
        out << '\n';
    }
}

}  // namespace

LabeledSet read_labeled_csv(const fs::path& path, GroupTable& groups) {
    RawTable t = read_table(path, groups, true);
    LabeledSet out;
    out.x = to_matrix(t);
    out.group = std::move(t.group);
    out.label = std::move(t.label);
    out.source = row_ids(out.group.size());
    return out;
}

UnlabeledSet read_unlabeled_csv(const fs::path& path, GroupTable& groups) {
    RawTable t = read_table(path, groups, false);
    UnlabeledSet out;
    out.x = to_matrix(t);
    out.group = std::move(t.group);
    out.source = row_ids(out.group.size());
    return out;
}

void write_labeled_csv(const fs::path& path, const LabeledSet& data, const GroupTable& groups) {
    std::ostringstream out;
    write_rows(out, data.x, data.group, &data.label, groups);
    write_text(path, out.str());
}

void write_unlabeled_csv(const fs::path& path, const UnlabeledSet& data, const GroupTable& groups) {
    std::ostringstream out;
    write_rows(out, data.x, data.group, nullptr, groups);
    write_text(path, out.str());
}

void write_text(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError(tmp.string() + ": cannot open for writing");
        out << text;
        if (!out) throw DataError(tmp.string() + ": write failed");
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw DataError(path.string() + ": " + ec.message());
}

void write_json(const fs::path& path, const Json& doc) { write_text(path, doc.dump(2) + "\n"); }

Json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError(path.string() + ": cannot open file");
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void check_format_version(const Json& doc, const std::string& what) {
    if (!doc.is_object() || !doc.contains("format_version") || !doc["format_version"].is_string())
        throw ConfigError(what + " lacks a format_version");
    const std::string v = doc["format_version"].get<std::string>();
    const std::string major = v.substr(0, v.find('.'));
    const std::string ours = std::string(kFormatVersion).substr(0, std::string(kFormatVersion).find('.'));
    if (major != ours) throw ConfigError(what + " has unsupported format_version " + v);
}

void reject_unknown_keys(const Json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& item : obj.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || item.key() == a;
        if (!ok) throw ConfigError("unknown key '" + item.key() + "' in " + where);
    }
}

namespace {

template <class T>
T read_field(const Json& obj, const char* key, T fallback, const std::string& where) {
    if (!obj.contains(key) || obj[key].is_null()) return fallback;
    try {
        return obj[key].get<T>();
    } catch (const Json::exception&) {
        throw ConfigError(where + "." + key + " has the wrong type");
    }
}

std::pair<double, double> read_range(const Json& obj, const char* key, std::pair<double, double> fallback,
                                     const std::string& where) {
    if (!obj.contains(key)) return fallback;
    const Json& v = obj[key];
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
        throw ConfigError(where + "." + key + " must be a two-number array");
    return {v[0].get<double>(), v[1].get<double>()};
}

SizeDistribution read_size(const Json& obj, const char* key, SizeDistribution fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    const std::string sub = where + "." + key;
    reject_unknown_keys(obj[key], {"mean", "sd"}, sub);
    return {read_field(obj[key], "mean", fallback.mean, sub), read_field(obj[key], "sd", fallback.sd, sub)};
}

Setting read_setting(const Json& obj, Setting fallback, const std::string& where) {
    const int s = read_field(obj, "setting", static_cast<int>(fallback), where);
    if (s != 1 && s != 2) throw ConfigError(where + ".setting must be 1 or 2");
    return static_cast<Setting>(s);
}

Json pair_json(std::pair<double, double> p) { return Json::array({p.first, p.second}); }

std::vector<double> double_list(const Json& j) {
    std::vector<double> out;
    for (const auto& v : j) out.push_back(v.get<double>());
    return out;
}

}  // namespace

Json to_json(const SyntheticConfig& c) {
    Json j;
    j["d"] = c.d;
    j["k"] = c.k;
    j["groups"] = c.groups;
    j["setting"] = static_cast<int>(c.setting);
    j["labeled_size"] = {{"mean", c.labeled_size.mean}, {"sd", c.labeled_size.sd}};
    j["unlabeled_size"] = {{"mean", c.unlabeled_size.mean}, {"sd", c.unlabeled_size.sd}};
    j["dirichlet_concentration"] = c.dirichlet_concentration;
    j["alpha_range"] = pair_json(c.alpha_range);
    j["auc_range"] = pair_json(c.auc_range);
    j["separation"] = c.pair_options.separation;
    j["attempt_budget"] = c.pair_options.attempt_budget;
    j["calibration_draws"] = c.pair_options.calibration_draws;
    j["auc_tolerance"] = c.pair_options.auc_tolerance;
    return j;
}

SyntheticConfig parse_synthetic_config(const Json& obj, SyntheticConfig c) {
    const std::string w = "synthetic";
    reject_unknown_keys(obj, {"d", "k", "groups", "setting", "labeled_size", "unlabeled_size", "dirichlet_concentration",
                              "alpha_range", "auc_range", "separation", "attempt_budget", "calibration_draws",
                              "auc_tolerance"},
                        w);
    c.d = read_field(obj, "d", c.d, w);
    c.k = read_field(obj, "k", c.k, w);
    c.groups = read_field(obj, "groups", c.groups, w);
    c.setting = read_setting(obj, c.setting, w);
    c.labeled_size = read_size(obj, "labeled_size", c.labeled_size, w);
    c.unlabeled_size = read_size(obj, "unlabeled_size", c.unlabeled_size, w);
    c.dirichlet_concentration = read_field(obj, "dirichlet_concentration", c.dirichlet_concentration, w);
    c.alpha_range = read_range(obj, "alpha_range", c.alpha_range, w);
    c.auc_range = read_range(obj, "auc_range", c.auc_range, w);
    c.pair_options.separation = read_field(obj, "separation", c.pair_options.separation, w);
    c.pair_options.attempt_budget = read_field(obj, "attempt_budget", c.pair_options.attempt_budget, w);
    c.pair_options.calibration_draws = read_field(obj, "calibration_draws", c.pair_options.calibration_draws, w);
    c.pair_options.auc_tolerance = read_field(obj, "auc_tolerance", c.pair_options.auc_tolerance, w);
    c.validate();
    return c;
}

Json to_json(const KMeansConfig& c) {
    Json j;
    j["batch_size"] = c.batch_size;
    j["max_iterations"] = c.max_iterations;
    j["polish_iterations"] = c.polish_iterations;
    j["candidate_k"] = c.candidate_k;
    j["silhouette_sample"] = c.silhouette_sample;
    j["init_sample"] = c.init_sample;
    j["min_silhouette"] = c.min_silhouette;
    return j;
}

KMeansConfig parse_kmeans_config(const Json& obj, KMeansConfig c) {
    const std::string w = "kmeans";
    reject_unknown_keys(obj, {"batch_size", "max_iterations", "polish_iterations", "candidate_k", "silhouette_sample",
                              "init_sample", "min_silhouette"},
                        w);
    c.batch_size = read_field(obj, "batch_size", c.batch_size, w);
    c.max_iterations = read_field(obj, "max_iterations", c.max_iterations, w);
    c.polish_iterations = read_field(obj, "polish_iterations", c.polish_iterations, w);
    c.candidate_k = read_field(obj, "candidate_k", c.candidate_k, w);
    c.silhouette_sample = read_field(obj, "silhouette_sample", c.silhouette_sample, w);
    c.init_sample = read_field(obj, "init_sample", c.init_sample, w);
    c.min_silhouette = read_field(obj, "min_silhouette", c.min_silhouette, w);
    if (c.batch_size < 1 || c.max_iterations < 0 || c.polish_iterations < 0 || c.silhouette_sample < 2 ||
        c.init_sample < 1)
        throw ConfigError("kmeans settings out of range");
    if (c.candidate_k.empty()) throw ConfigError("kmeans.candidate_k must be nonempty");
    for (int k : c.candidate_k)
        if (k < 1) throw ConfigError("kmeans.candidate_k entries must be positive");
    return c;
}

Json to_json(const MllsConfig& c) {
    return Json{{"max_iterations", c.max_iterations}, {"tolerance", c.tolerance}, {"epsilon", c.epsilon}};
}

MllsConfig parse_mlls_config(const Json& obj, MllsConfig c) {
    const std::string w = "mlls";
    reject_unknown_keys(obj, {"max_iterations", "tolerance", "epsilon"}, w);
    c.max_iterations = read_field(obj, "max_iterations", c.max_iterations, w);
    c.tolerance = read_field(obj, "tolerance", c.tolerance, w);
    c.epsilon = read_field(obj, "epsilon", c.epsilon, w);
    if (c.max_iterations < 1) throw ConfigError("mlls.max_iterations must be at least 1");
    if (!(c.tolerance >= 0.0) || !(c.epsilon > 0.0 && c.epsilon < 0.5)) throw ConfigError("mlls settings out of range");
    return c;
}

Json to_json(const LearnerParams& p) {
    return Json{{"l2", p.l2},
                {"max_iterations", p.max_iterations},
                {"gradient_tolerance", p.gradient_tolerance},
                {"ridge", p.ridge},
                {"mixture_components", p.mixture_components},
                {"em_iterations", p.em_iterations},
                {"em_tolerance", p.em_tolerance}};
}

LearnerParams parse_learner_params(const Json& obj, LearnerParams p) {
    const std::string w = "learner_params";
    reject_unknown_keys(obj, {"l2", "max_iterations", "gradient_tolerance", "ridge", "mixture_components", "em_iterations",
                              "em_tolerance"},
                        w);
    p.l2 = read_field(obj, "l2", p.l2, w);
    p.max_iterations = read_field(obj, "max_iterations", p.max_iterations, w);
    p.gradient_tolerance = read_field(obj, "gradient_tolerance", p.gradient_tolerance, w);
    p.ridge = read_field(obj, "ridge", p.ridge, w);
    p.mixture_components = read_field(obj, "mixture_components", p.mixture_components, w);
    p.em_iterations = read_field(obj, "em_iterations", p.em_iterations, w);
    p.em_tolerance = read_field(obj, "em_tolerance", p.em_tolerance, w);
    if (p.mixture_components.empty()) throw ConfigError("learner_params.mixture_components must be nonempty");
    for (int m : p.mixture_components)
        if (m < 1) throw ConfigError("learner_params.mixture_components entries must be positive");
    if (p.l2 < 0.0 || p.ridge < 0.0 || p.max_iterations < 1 || p.em_iterations < 1 || !(p.em_tolerance >= 0.0) ||
        !(p.gradient_tolerance > 0.0))
        throw ConfigError("learner_params out of range");
    return p;
}

Json to_json(const ResampleConfig& c) {
    Json j;
    j["setting"] = static_cast<int>(c.setting);
    j["dirichlet_concentration"] = c.dirichlet_concentration;
    j["alpha_range"] = pair_json(c.alpha_range);
    if (c.fixed_weights) j["fixed_weights"] = *c.fixed_weights;
    if (c.fixed_priors) j["fixed_priors"] = *c.fixed_priors;
    return j;
}

ResampleConfig parse_resample_config(const Json& obj, ResampleConfig c) {
    const std::string w = "resample";
    reject_unknown_keys(obj, {"setting", "dirichlet_concentration", "alpha_range", "fixed_weights", "fixed_priors"}, w);
    c.setting = read_setting(obj, c.setting, w);
    c.dirichlet_concentration = read_field(obj, "dirichlet_concentration", c.dirichlet_concentration, w);
    c.alpha_range = read_range(obj, "alpha_range", c.alpha_range, w);
    if (obj.contains("fixed_weights")) c.fixed_weights = read_field(obj, "fixed_weights", std::vector<double>{}, w);
    if (obj.contains("fixed_priors")) c.fixed_priors = read_field(obj, "fixed_priors", std::vector<double>{}, w);
    return c;
}

Json to_json(const Matrix& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const Json& j) {
    if (!j.is_array()) throw DataError("matrix must be an array of rows");
    const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
    const Eigen::Index cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const Json& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) throw ShapeError("ragged matrix");
        for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    return m;
}

Json to_json(const Vector& v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

Vector vector_from_json(const Json& j) {
    if (!j.is_array()) throw DataError("vector must be an array");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    return v;
}

Json to_json(const GroundTruth& t) {
    Json j;
    j["format_version"] = kFormatVersion;
    j["k"] = t.k();
    Json comps = Json::array();
    for (const auto& c : t.components) {
        comps.push_back({{"center", to_json(c.center)},
                         {"target_auc", c.target_auc},
                         {"bayes_auc", c.bayes_auc},
                         {"positive", {{"mean", to_json(c.positive.mean())}, {"covariance", to_json(c.positive.covariance())}}},
                         {"negative", {{"mean", to_json(c.negative.mean())}, {"covariance", to_json(c.negative.covariance())}}}});
    }
    j["components"] = std::move(comps);
    if (!t.components.empty() || t.partition) j["partition"] = {{"centroids", to_json(t.true_partition().centroids())}};
    Json groups = Json::array();
    for (const auto& g : t.groups) {
        groups.push_back({{"labeled_weights", g.labeled_weights},
                          {"labeled_priors", g.labeled_priors},
                          {"unlabeled_weights", g.unlabeled_weights},
                          {"unlabeled_priors", g.unlabeled_priors},
                          {"labeled_size", g.labeled_size},
                          {"unlabeled_size", g.unlabeled_size}});
    }
    j["groups"] = std::move(groups);
    j["deficits"] = t.deficits;
    j["labeled_cluster"] = t.labeled_cluster;
    j["unlabeled_cluster"] = t.unlabeled_cluster;
    j["unlabeled_label"] = t.unlabeled_label;
    return j;
}

namespace {

Json learner_json(const std::optional<BaseClassifier>& base) {
    if (!base) return nullptr;
    if (const LogisticModel* m = base->logistic())
        return Json{{"kind", "logistic"}, {"weights", to_json(m->weights)}, {"bias", m->bias}};
    if (const GmmModel* g = base->gmm()) {
        Json mix = Json::array();
        for (const auto& cm : g->mixture) {
            Json comps = Json::array();
            for (const auto& c : cm.components)
                comps.push_back({{"log_weight", c.log_weight}, {"mean", to_json(c.mean)}, {"covariance", to_json(c.covariance)}});
            mix.push_back(std::move(comps));
        }
        return Json{{"kind", "gmm"}, {"mixture", std::move(mix)}, {"log_prior", Json::array({g->log_prior[0], g->log_prior[1]})}};
    }
    const QdaModel* q = base->qda();
    Json j;
    j["kind"] = "qda";
    j["mean"] = Json::array({to_json(q->mean[0]), to_json(q->mean[1])});
    j["covariance"] = Json::array({to_json(q->covariance[0]), to_json(q->covariance[1])});
    j["log_prior"] = Json::array({q->log_prior[0], q->log_prior[1]});
    return j;
}

std::optional<BaseClassifier> learner_from_json(const Json& j) {
    if (j.is_null()) return std::nullopt;
    const LearnerKind kind = parse_learner(j.at("kind").get<std::string>());
    if (kind == LearnerKind::logistic) {
        LogisticModel m;
        m.weights = vector_from_json(j.at("weights"));
        m.bias = j.at("bias").get<double>();
        return BaseClassifier(std::move(m));
    }
    if (kind == LearnerKind::gmm) {
        GmmModel g;
        for (std::size_t c = 0; c < 2; ++c) {
            for (const Json& comp : j.at("mixture").at(c)) {
                MixtureComponent mc;
                mc.log_weight = comp.at("log_weight").get<double>();
                mc.mean = vector_from_json(comp.at("mean"));
                mc.covariance = matrix_from_json(comp.at("covariance"));
                g.mixture[c].components.push_back(std::move(mc));
            }
            if (g.mixture[c].components.empty()) throw DataError("mixture without components");
            g.mixture[c].factorize();
            g.log_prior[c] = j.at("log_prior").at(c).get<double>();
        }
        return BaseClassifier(std::move(g));
    }
    QdaModel q;
    for (std::size_t c = 0; c < 2; ++c) {
        q.mean[c] = vector_from_json(j.at("mean").at(c));
        q.covariance[c] = matrix_from_json(j.at("covariance").at(c));
        q.log_prior[c] = j.at("log_prior").at(c).get<double>();
    }
    q.factorize();
    return BaseClassifier(std::move(q));
}

}  // namespace

Json model_to_json(const GroupAwareModel& model, const GroupTable& groups) {
    Json j;
    j["format_version"] = kFormatVersion;
    j["kind"] = "group_aware_model";
    j["epsilon"] = model.epsilon();
    j["partition"] = {{"centroids", to_json(model.ensemble().partition().centroids())}};
    Json clusters = Json::array();
    const auto& entries = model.ensemble().entries();
    for (std::size_t c = 0; c < entries.size(); ++c) {
        Json e;
        e["cluster"] = c;
        e["learner"] = learner_json(entries[c].base);
        e["calibration"] = {{"a", entries[c].calibration.a}, {"b", entries[c].calibration.b}};
        e["fallback"] = entries[c].fallback ? Json(*entries[c].fallback) : Json(nullptr);
        clusters.push_back(std::move(e));
    }
    j["clusters"] = std::move(clusters);
    const LabeledPriors& lp = model.priors().labeled();
    Json fallback = Json::array();
    for (bool b : lp.fallback) fallback.push_back(b);
    j["labeled_priors"] = {{"prior", lp.prior}, {"fallback", std::move(fallback)}, {"global", lp.global}};
    j["groups"] = groups.names();
    Json cells = Json::array();
    for (const auto& [g, row] : model.priors().cells())
        for (std::size_t c = 0; c < row.size(); ++c)
            cells.push_back({{"group", groups.name(g)},
                             {"cluster", c},
                             {"prior", row[c].prior},
                             {"support", row[c].support},
                             {"iterations", row[c].iterations},
                             {"fallback", row[c].fallback}});
    j["cells"] = std::move(cells);
    return j;
}

GroupAwareModel model_from_json(const Json& doc, GroupTable& groups) {
    check_format_version(doc, "model file");
    try {
        if (doc.at("kind").get<std::string>() != "group_aware_model") throw DataError("not a group-aware model file");
        PartitionModel partition(matrix_from_json(doc.at("partition").at("centroids")));
        std::vector<ClusterEntry> entries;
        for (const Json& e : doc.at("clusters")) {
            ClusterEntry entry;
            entry.base = learner_from_json(e.at("learner"));
            entry.calibration = {e.at("calibration").at("a").get<double>(), e.at("calibration").at("b").get<double>()};
            if (!e.at("fallback").is_null()) entry.fallback = e.at("fallback").get<double>();
            entries.push_back(std::move(entry));
        }
        ClusterClassifierEnsemble ensemble(std::move(partition), std::move(entries));

        const Json& lpj = doc.at("labeled_priors");
        LabeledPriors lp;
        lp.prior = double_list(lpj.at("prior"));
        for (const auto& b : lpj.at("fallback")) lp.fallback.push_back(b.get<bool>());
        lp.global = lpj.at("global").get<double>();

        for (const auto& name : doc.at("groups")) groups.intern(name.get<std::string>());
        std::map<int, std::vector<CellPrior>> cells;
        const std::size_t k = lp.prior.size();
        for (const Json& c : doc.at("cells")) {
            const int g = groups.intern(c.at("group").get<std::string>());
            const auto cluster = c.at("cluster").get<std::size_t>();
            if (cluster >= k) throw DataError("cell cluster index out of range");
            auto& row = cells[g];
            if (row.empty()) row.resize(k);
            row[cluster] = CellPrior{c.at("prior").get<double>(), c.at("support").get<std::int64_t>(),
                                     c.at("iterations").get<int>(), c.at("fallback").get<bool>()};
        }
        return GroupAwareModel(std::move(ensemble), PriorTable(std::move(lp), std::move(cells)),
                               doc.at("epsilon").get<double>());
    } catch (const Json::exception& e) {
        throw DataError(std::string("malformed model file: ") + e.what());
    }
}

Json to_json(const FitDiagnostics& d) {
    Json sil = Json::array();
    for (const auto& [k, s] : d.silhouettes) sil.push_back({{"k", k}, {"silhouette", s}});
    return Json{{"k", d.k},
                {"silhouettes", std::move(sil)},
                {"cells", d.cells},
                {"fallback_cells", d.fallback_cells},
                {"unconverged_cells", d.unconverged_cells},
                {"mean_iterations", d.mean_iterations},
                {"zero_vector_for_unseen_groups", d.zero_vector_for_unseen_groups}};
}

Json to_json(const ExperimentResult& r) {
    Json j;
    j["format_version"] = kFormatVersion;
    Json methods = Json::array();
    for (Method m : r.methods) methods.push_back(to_string(m));
    j["methods"] = std::move(methods);
    Json reps = Json::array();
    for (const auto& rep : r.repetitions) {
        Json e;
        e["index"] = rep.index;
        e["complete"] = rep.complete;
        Json auc = Json::object();
        for (Method m : r.methods)
            if (auto it = rep.auc.find(m); it != rep.auc.end()) auc[to_string(m)] = it->second;
        e["auc"] = std::move(auc);
        Json errors = Json::object();
        for (Method m : r.methods)
            if (auto it = rep.errors.find(m); it != rep.errors.end()) errors[to_string(m)] = it->second;
        e["errors"] = std::move(errors);
        e["selected_k"] = rep.selected_k;
        Json sil = Json::array();
        for (const auto& [k, s] : rep.silhouettes) sil.push_back({{"k", k}, {"silhouette", s}});
        e["silhouettes"] = std::move(sil);
        e["test_groups"] = rep.test_groups;
        e["test_size"] = rep.test_size;
        e["prior_source"] = rep.prior_source;
        Json diag = Json::object();
        for (Method m : r.methods)
            if (auto it = rep.diagnostics.find(m); it != rep.diagnostics.end()) diag[to_string(m)] = to_json(it->second);
        e["diagnostics"] = std::move(diag);
        reps.push_back(std::move(e));
    }
    j["repetitions"] = std::move(reps);
    Json mean = Json::object();
    Json delta = Json::object();
    for (Method m : r.methods) {
        if (auto it = r.mean_auc.find(m); it != r.mean_auc.end()) mean[to_string(m)] = it->second;
        if (auto it = r.mean_delta_vs_global.find(m); it != r.mean_delta_vs_global.end()) delta[to_string(m)] = it->second;
    }
    j["mean_auc"] = std::move(mean);
    j["mean_delta_vs_global"] = std::move(delta);
    return j;
}

std::string experiment_auc_csv(const ExperimentResult& r) {
    std::ostringstream out;
    out << "repetition,method,auc\n";
    for (const auto& rep : r.repetitions)
        for (Method m : r.methods) {
            out << rep.index << ',' << to_string(m) << ',';
            if (auto it = rep.auc.find(m); it != rep.auc.end()) out << format_double(it->second);
            out << '\n';
        }
    return out.str();
}

std::string experiment_delta_csv(const ExperimentResult& r) {
    std::ostringstream out;
    out << "method,repetition,auc,global_auc,delta\n";
    for (Method m : r.methods)
        for (const auto& rep : r.repetitions) {
            out << to_string(m) << ',' << rep.index << ',';
            auto a = rep.auc.find(m);
            auto g = rep.auc.find(Method::global);
            if (a != rep.auc.end()) out << format_double(a->second);
            out << ',';
            if (g != rep.auc.end()) out << format_double(g->second);
            out << ',';
            if (a != rep.auc.end() && g != rep.auc.end()) out << format_double(a->second - g->second);
            out << '\n';
        }
    return out.str();
}

std::string experiment_summary(const ExperimentResult& r) {
    std::ostringstream out;
    out << std::left << std::setw(22) << "method" << std::right << std::setw(10) << "mean_auc" << std::setw(12)
        << "vs_global" << std::setw(8) << "runs" << '\n';
    out << std::fixed << std::setprecision(4);
    for (Method m : r.methods) {
        int runs = 0;
        for (const auto& rep : r.repetitions) runs += rep.auc.count(m) ? 1 : 0;
        out << std::left << std::setw(22) << to_string(m) << std::right << std::setw(10);
        if (auto it = r.mean_auc.find(m); it != r.mean_auc.end()) out << it->second;
        else out << "-";
        out << std::setw(12);
        if (auto it = r.mean_delta_vs_global.find(m); it != r.mean_delta_vs_global.end()) out << std::showpos << it->second << std::noshowpos;
        else out << "-";
        out << std::setw(8) << runs << '\n';
    }
    int partial = 0;
    for (const auto& rep : r.repetitions) partial += rep.complete ? 0 : 1;
    out << "repetitions: " << r.repetitions.size() << " (partial: " << partial << ")\n";
    return out.str();
}

Json to_json(const AucGainReport& t) {
    return Json{{"auc_rho", t.auc_rho},
                {"auc_rho_bar", t.auc_rho_bar},
                {"lhs", t.lhs},
                {"rhs", t.rhs},
                {"abs_error", t.abs_error},
                {"exact", t.exact},
                {"term_ratio", t.term_ratio},
                {"term_pure", t.term_pure},
                {"rhs_pre_exchange", t.rhs_pre_exchange},
                {"pre_exchange_error", t.pre_exchange_error}};
}

}  // namespace pcc
