#include "commands.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

#include "pcc/io.hpp"

namespace pcc::cli {

namespace fs = std::filesystem;

namespace {

// Exclusive ownership of an output directory for the lifetime of a command.
class OutputLock {
public:
    explicit OutputLock(const fs::path& dir) : path_(dir / ".lock") {
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw DataError(dir.string() + ": " + ec.message());
        fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd_ < 0) {
            if (errno == EEXIST) throw ConfigError(dir.string() + " is locked by another run (remove " + path_.string() + " if stale)");
            throw DataError(path_.string() + ": " + std::strerror(errno));
        }
    }
    ~OutputLock() {
        ::close(fd_);
        std::error_code ec;
        fs::remove(path_, ec);
    }
    OutputLock(const OutputLock&) = delete;
    OutputLock& operator=(const OutputLock&) = delete;

private:
    fs::path path_;
    int fd_ = -1;
};

struct RunConfig {
    Json root = Json::object();
    fs::path base_dir = ".";
    std::uint64_t seed = 0;

    Json section(const char* name) const { return root.contains(name) ? root[name] : Json::object(); }
    fs::path resolve(const std::string& p) const {
        const fs::path path(p);
        return path.is_absolute() ? path : base_dir / path;
    }
};

template <class T>
T get_or(const Json& obj, const char* key, T fallback, const std::string& where) {
    if (!obj.contains(key) || obj[key].is_null()) return fallback;
    try {
        return obj[key].get<T>();
    } catch (const Json::exception&) {
        throw ConfigError(where + "." + key + " has the wrong type");
    }
}

struct GenerateSettings {
    SyntheticConfig synthetic;
    std::optional<std::string> pool;
    ResampleConfig resample;
    KMeansConfig kmeans;
};

struct FitSettings {
    LearnerKind learner = LearnerKind::qda;
    LearnerParams learner_params;
    KMeansConfig kmeans;
    MllsConfig mlls;
    double validation_fraction = 0.2;
    std::optional<int> force_k;
    bool true_clustering = false;
};

struct BenchmarkSettings {
    ExperimentConfig experiment;
    std::optional<std::string> pool;
};

struct VerifySettings {
    int instances = 100;
    int max_points = 12;
    int max_k = 3;
    int max_groups = 3;
    int pair_instances = 100;
    bool trivial_only = false;
    double auc_gain_tolerance = 1e-10;
    double posterior_tolerance = 1e-12;
};

GenerateSettings parse_generate(const Json& obj) {
    reject_unknown_keys(obj, {"synthetic", "pool", "resample", "kmeans"}, "generate");
    GenerateSettings s;
    if (obj.contains("synthetic")) s.synthetic = parse_synthetic_config(obj["synthetic"]);
    if (obj.contains("pool") && !obj["pool"].is_null()) s.pool = get_or<std::string>(obj, "pool", "", "generate");
    if (obj.contains("resample")) s.resample = parse_resample_config(obj["resample"]);
    if (obj.contains("kmeans")) s.kmeans = parse_kmeans_config(obj["kmeans"]);
    return s;
}

FitSettings parse_fit(const Json& obj) {
    reject_unknown_keys(obj, {"learner", "learner_params", "kmeans", "mlls", "validation_fraction", "force_k", "true_clustering"},
                        "fit");
    FitSettings s;
    s.learner = parse_learner(get_or<std::string>(obj, "learner", "qda", "fit"));
    if (obj.contains("learner_params")) s.learner_params = parse_learner_params(obj["learner_params"]);
    if (obj.contains("kmeans")) s.kmeans = parse_kmeans_config(obj["kmeans"]);
    if (obj.contains("mlls")) s.mlls = parse_mlls_config(obj["mlls"]);
    s.validation_fraction = get_or(obj, "validation_fraction", s.validation_fraction, "fit");
    if (obj.contains("force_k") && !obj["force_k"].is_null()) s.force_k = get_or(obj, "force_k", 1, "fit");
    s.true_clustering = get_or(obj, "true_clustering", false, "fit");
    if (!(s.validation_fraction > 0.0 && s.validation_fraction < 1.0))
        throw ConfigError("fit.validation_fraction must lie in (0, 1)");
    if (s.force_k && *s.force_k < 1) throw ConfigError("fit.force_k must be at least 1");
    return s;
}

std::vector<Method> parse_method_list(const std::string& csv) {
    std::vector<Method> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(parse_method(item));
    return out;
}

BenchmarkSettings parse_benchmark(const Json& obj) {
    reject_unknown_keys(obj, {"repetitions", "methods", "learner", "learner_params", "kmeans", "mlls", "holdout_fraction",
                              "synthetic", "pool", "resample"},
                        "benchmark");
    BenchmarkSettings s;
    ExperimentConfig& e = s.experiment;
    e.repetitions = get_or(obj, "repetitions", e.repetitions, "benchmark");
    if (obj.contains("methods")) {
        e.methods.clear();
        for (const auto& name : get_or(obj, "methods", std::vector<std::string>{}, "benchmark"))
            e.methods.push_back(parse_method(name));
    }
    e.learner = parse_learner(get_or<std::string>(obj, "learner", "qda", "benchmark"));
    if (obj.contains("learner_params")) e.learner_params = parse_learner_params(obj["learner_params"]);
    if (obj.contains("kmeans")) e.kmeans = parse_kmeans_config(obj["kmeans"]);
    if (obj.contains("mlls")) e.mlls = parse_mlls_config(obj["mlls"]);
    e.holdout_fraction = get_or(obj, "holdout_fraction", e.holdout_fraction, "benchmark");
    if (obj.contains("synthetic")) e.synthetic = parse_synthetic_config(obj["synthetic"]);
    if (obj.contains("pool") && !obj["pool"].is_null()) s.pool = get_or<std::string>(obj, "pool", "", "benchmark");
    if (obj.contains("resample")) e.resample = parse_resample_config(obj["resample"]);
    return s;
}

VerifySettings parse_verify(const Json& obj) {
    reject_unknown_keys(obj, {"instances", "max_points", "max_k", "max_groups", "pair_instances", "trivial_only",
                              "auc_gain_tolerance", "posterior_tolerance"},
                        "verify");
    VerifySettings s;
    s.instances = get_or(obj, "instances", s.instances, "verify");
    s.max_points = get_or(obj, "max_points", s.max_points, "verify");
    s.max_k = get_or(obj, "max_k", s.max_k, "verify");
    s.max_groups = get_or(obj, "max_groups", s.max_groups, "verify");
    s.pair_instances = get_or(obj, "pair_instances", s.pair_instances, "verify");
    s.trivial_only = get_or(obj, "trivial_only", s.trivial_only, "verify");
    s.auc_gain_tolerance = get_or(obj, "auc_gain_tolerance", s.auc_gain_tolerance, "verify");
    s.posterior_tolerance = get_or(obj, "posterior_tolerance", s.posterior_tolerance, "verify");
    if (s.instances < 0 || s.pair_instances < 0 || s.max_k < 1 || s.max_groups < 1 || s.max_points < s.max_k)
        throw ConfigError("verify settings out of range");
    return s;
}

// Reads and validates the whole config file before any work starts.
RunConfig load_config(const Flags& flags) {
    RunConfig rc;
    if (flags.config) {
        rc.root = read_json(*flags.config);
        if (!rc.root.is_object()) throw ConfigError(flags.config->string() + ": config must be a JSON object");
        reject_unknown_keys(rc.root, {"format_version", "seed", "generate", "fit", "benchmark", "verify"}, "config");
        if (rc.root.contains("format_version")) check_format_version(rc.root, "config");
        rc.base_dir = flags.config->parent_path();
        if (rc.base_dir.empty()) rc.base_dir = ".";
        rc.seed = get_or<std::uint64_t>(rc.root, "seed", 0, "config");
        parse_generate(rc.section("generate"));
        parse_fit(rc.section("fit"));
        parse_benchmark(rc.section("benchmark"));
        parse_verify(rc.section("verify"));
    }
    if (flags.seed) rc.seed = *flags.seed;
    return rc;
}

Setting setting_flag(int s) {
    if (s != 1 && s != 2) throw ConfigError("--setting must be 1 or 2");
    return static_cast<Setting>(s);
}

Json manifest_base(const char* command, std::uint64_t seed) {
    Json m;
    m["format_version"] = kFormatVersion;
    m["command"] = command;
    m["seed"] = seed;
    return m;
}

// Re-throws with the failing pipeline stage prefixed, keeping the category.
template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const GenerationError& e) {
        throw GenerationError(std::string(name) + ": " + e.what());
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(name) + ": " + e.what());
    } catch (const ShapeError& e) {
        throw ShapeError(std::string(name) + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(std::string(name) + ": " + e.what());
    } catch (const DegenerateError& e) {
        throw DegenerateError(std::string(name) + ": " + e.what());
    } catch (const EmptyCellError& e) {
        throw EmptyCellError(std::string(name) + ": " + e.what());
    }
}

struct DatasetFiles {
    fs::path labeled;
    fs::path unlabeled;
    std::optional<fs::path> groundtruth;
};

DatasetFiles resolve_dataset(const Flags& flags) {
    DatasetFiles f;
    if (flags.data) {
        f.labeled = *flags.data / "labeled.csv";
        f.unlabeled = *flags.data / "unlabeled.csv";
        if (fs::exists(*flags.data / "groundtruth.json")) f.groundtruth = *flags.data / "groundtruth.json";
        if (fs::exists(*flags.data / "manifest.json")) check_format_version(read_json(*flags.data / "manifest.json"), "manifest");
    }
    if (flags.labeled) f.labeled = *flags.labeled;
    if (flags.unlabeled) f.unlabeled = *flags.unlabeled;
    if (flags.groundtruth) f.groundtruth = *flags.groundtruth;
    if (f.labeled.empty() || f.unlabeled.empty())
        throw ConfigError("fit needs --data DIR or both --labeled and --unlabeled");
    for (const fs::path& p : {f.labeled, f.unlabeled})
        if (!fs::exists(p)) throw DataError(p.string() + ": no such file");
    return f;
}

Json cells_json(const GroupAwareModel& model, const GroupTable& groups) {
    Json cells = Json::array();
    const auto& labeled = model.priors().labeled();
    for (const auto& [g, row] : model.priors().cells())
        for (std::size_t c = 0; c < row.size(); ++c)
            cells.push_back({{"group", groups.name(g)},
                             {"cluster", c},
                             {"support", row[c].support},
                             {"iterations", row[c].iterations},
                             {"fallback", row[c].fallback},
                             {"prior", row[c].prior},
                             {"labeled_prior", labeled.prior[c]}});
    return cells;
}

}  // namespace

void cmd_generate(const Flags& flags) {
    const RunConfig rc = load_config(flags);
    GenerateSettings settings = parse_generate(rc.section("generate"));
    if (flags.setting) settings.synthetic.setting = settings.resample.setting = setting_flag(*flags.setting);
    if (flags.k) settings.synthetic.k = *flags.k;
    settings.synthetic.validate();

    OutputLock lock(flags.out);
    SyntheticData data;
    GroupTable groups;
    Json config;
    if (settings.pool) {
        const fs::path pool_path = rc.resolve(*settings.pool);
        const LabeledSet pool = stage("reading pool", [&] { return read_labeled_csv(pool_path, groups); });
        KMeansConfig km = settings.kmeans;
        km.seed = derive_seed(rc.seed, 2);
        const PartitionModel partition = stage("clustering pool", [&] {
            return flags.k ? fit_kmeans(pool.x, *flags.k, km) : select_k(pool.x, km).model;
        });
        ResampleConfig r = settings.resample;
        r.seed = rc.seed;
        data = stage("resampling", [&] { return resample_pool(pool, partition, r); });
        config["pool"] = *settings.pool;
        config["resample"] = to_json(settings.resample);
        config["kmeans"] = to_json(settings.kmeans);
        if (flags.k) config["k"] = *flags.k;
    } else {
        SyntheticConfig s = settings.synthetic;
        s.seed = rc.seed;
        data = stage("generation", [&] { return generate(s); });
        groups = GroupTable::numbered(s.groups);
        config["synthetic"] = to_json(settings.synthetic);
    }

    write_labeled_csv(flags.out / "labeled.csv", data.labeled, groups);
    write_unlabeled_csv(flags.out / "unlabeled.csv", data.unlabeled, groups);
    write_json(flags.out / "groundtruth.json", to_json(data.truth));
    Json manifest = manifest_base("generate", rc.seed);
    manifest["config"] = std::move(config);
    manifest["files"] = {{"labeled", "labeled.csv"}, {"unlabeled", "unlabeled.csv"}, {"groundtruth", "groundtruth.json"}};
    manifest["dimension"] = data.labeled.dim();
    manifest["rows"] = {{"labeled", data.labeled.size()}, {"unlabeled", data.unlabeled.size()}};
    manifest["groups"] = groups.names();
    write_json(flags.out / "manifest.json", manifest);
}

void cmd_fit(const Flags& flags) {
    const RunConfig rc = load_config(flags);
    FitSettings settings = parse_fit(rc.section("fit"));
    if (flags.force_k) settings.force_k = *flags.force_k;
    if (flags.true_clustering) settings.true_clustering = true;
    if (flags.learner) settings.learner = parse_learner(*flags.learner);
    if (settings.force_k && *settings.force_k < 1) throw ConfigError("--force-k must be at least 1");
    if (settings.force_k && settings.true_clustering) throw ConfigError("--force-k and --true-clustering are exclusive");
    const DatasetFiles files = resolve_dataset(flags);
    if (settings.true_clustering && !files.groundtruth) throw ConfigError("--true-clustering needs groundtruth.json");

    OutputLock lock(flags.out);
    GroupTable groups;
    const LabeledSet labeled = stage("reading labeled data", [&] { return read_labeled_csv(files.labeled, groups); });
    const UnlabeledSet unlabeled = stage("reading unlabeled data", [&] { return read_unlabeled_csv(files.unlabeled, groups); });
    if (labeled.dim() != unlabeled.dim()) throw ShapeError("labeled and unlabeled data differ in dimension");

    auto [train, validation] = stage("validation split", [&] {
        return split_groups_holdout(labeled, settings.validation_fraction, derive_seed(rc.seed, 1));
    });

    Json diagnostics = manifest_base("fit", rc.seed);
    PartitionModel partition;
    if (settings.true_clustering) {
        partition = stage("loading ground-truth partition", [&] {
            const Json truth = read_json(*files.groundtruth);
            check_format_version(truth, "groundtruth.json");
            if (!truth.contains("partition")) throw ConfigError("groundtruth.json carries no partition");
            return PartitionModel(matrix_from_json(truth["partition"]["centroids"]));
        });
        if (partition.dim() != labeled.dim()) throw ShapeError("ground-truth partition dimension does not match the data");
        diagnostics["partition_source"] = "ground_truth";
    } else if (settings.force_k) {
        KMeansConfig km = settings.kmeans;
        km.seed = derive_seed(rc.seed, 2);
        partition = stage("clustering", [&] {
            if (*settings.force_k == 1) return PartitionModel(Matrix(stack_features(labeled, unlabeled).colwise().mean()));
            return fit_kmeans(stack_features(labeled, unlabeled), *settings.force_k, km);
        });
        diagnostics["partition_source"] = "forced";
    } else {
        KMeansConfig km = settings.kmeans;
        km.seed = derive_seed(rc.seed, 2);
        KSelection sel = stage("clustering", [&] { return select_k(labeled, unlabeled, km); });
        Json sil = Json::array();
        for (const auto& [k, s] : sel.silhouettes) sil.push_back({{"k", k}, {"silhouette", s}});
        diagnostics["silhouettes"] = std::move(sil);
        partition = std::move(sel.model);
        diagnostics["partition_source"] = "selected";
    }

    FitOptions options;
    options.learner = settings.learner;
    options.learner_params = settings.learner_params;
    options.kmeans = settings.kmeans;
    options.mlls = settings.mlls;
    options.seed = derive_seed(rc.seed, 3);
    const GroupAwareModel model = stage("fitting", [&] {
        return fit_group_aware(train, validation, unlabeled, partition, options);
    });

    diagnostics["k"] = partition.k();
    diagnostics["degenerates_to_label_shift"] = partition.k() == 1;
    diagnostics["learner"] = to_string(settings.learner);
    Json val_groups = Json::array();
    for (int g : distinct_groups(validation.group)) val_groups.push_back(groups.name(g));
    diagnostics["validation_groups"] = std::move(val_groups);
    Json fallback_clusters = Json::array();
    for (std::size_t c = 0; c < model.ensemble().entries().size(); ++c)
        if (model.ensemble().entries()[c].fallback) fallback_clusters.push_back(c);
    diagnostics["fallback_clusters"] = std::move(fallback_clusters);
    diagnostics["cells"] = cells_json(model, groups);

    write_json(flags.out / "model.json", model_to_json(model, groups));
    write_json(flags.out / "diagnostics.json", diagnostics);
}

void cmd_predict(const Flags& flags) {
    load_config(flags);
    if (!flags.model) throw ConfigError("predict needs --model FILE");
    if (!flags.input) throw ConfigError("predict needs --input CSV");
    OutputLock lock(flags.out);
    GroupTable groups;
    const GroupAwareModel model = stage("loading model", [&] { return model_from_json(read_json(*flags.model), groups); });

    // Accept either CSV schema; the label column, if present, is ignored.
    std::string header;
    {
        std::ifstream in(*flags.input);
        if (!in) throw DataError(flags.input->string() + ": cannot open file");
        std::getline(in, header);
    }
    if (!header.empty() && header.back() == '\r') header.pop_back();
    const bool has_label = header.size() >= 6 && header.compare(header.size() - 6, 6, ",label") == 0;
    Matrix x;
    std::vector<int> group;
    if (has_label) {
        LabeledSet l = read_labeled_csv(*flags.input, groups);
        x = std::move(l.x);
        group = std::move(l.group);
    } else {
        UnlabeledSet u = read_unlabeled_csv(*flags.input, groups);
        x = std::move(u.x);
        group = std::move(u.group);
    }
    if (x.cols() != model.ensemble().partition().dim())
        throw ShapeError(flags.input->string() + ": dimension " + std::to_string(x.cols()) + " does not match the model's " +
                         std::to_string(model.ensemble().partition().dim()));

    std::ostringstream out;
    out << "row,group,group_aware,group_agnostic,cluster,unseen_group,cell_fallback\n";
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const int g = group[static_cast<std::size_t>(i)];
        const PosteriorDetail d = model.detail(x.row(i).transpose(), g);
        std::string name = groups.name(g);
        if (name.find_first_of(",\"\n") != std::string::npos || name.empty()) {
            std::string q = "\"";
            for (char c : name) q += c == '"' ? std::string("\"\"") : std::string(1, c);
            name = q + "\"";
        }
        out << i << ',' << name << ',' << format_double(d.group_aware) << ',' << format_double(d.group_agnostic) << ','
            << d.cluster << ',' << (d.unseen_group ? 1 : 0) << ',' << (d.cell_fallback ? 1 : 0) << '\n';
    }
    write_text(flags.out / "scores.csv", out.str());
}

void cmd_benchmark(const Flags& flags) {
    const RunConfig rc = load_config(flags);
    BenchmarkSettings settings = parse_benchmark(rc.section("benchmark"));
    ExperimentConfig& e = settings.experiment;
    if (flags.setting) e.synthetic.setting = e.resample.setting = setting_flag(*flags.setting);
    if (flags.k) e.synthetic.k = *flags.k;
    if (flags.learner) e.learner = parse_learner(*flags.learner);
    if (flags.methods) e.methods = parse_method_list(*flags.methods);
    if (flags.reps) e.repetitions = *flags.reps;
    e.seed = rc.seed;
    GroupTable groups;
    if (settings.pool) e.pool = stage("reading pool", [&] { return read_labeled_csv(rc.resolve(*settings.pool), groups); });
    e.validate();

    OutputLock lock(flags.out);
    const ExperimentResult result = run_experiment(e);
    write_json(flags.out / "results.json", to_json(result));
    write_text(flags.out / "auc.csv", experiment_auc_csv(result));
    write_text(flags.out / "deltas.csv", experiment_delta_csv(result));
    const std::string summary = experiment_summary(result);
    write_text(flags.out / "summary.txt", summary);
    Json manifest = manifest_base("benchmark", rc.seed);
    Json config;
    config["repetitions"] = e.repetitions;
    Json methods = Json::array();
    for (Method m : e.methods) methods.push_back(to_string(m));
    config["methods"] = std::move(methods);
    config["learner"] = to_string(e.learner);
    config["learner_params"] = to_json(e.learner_params);
    config["kmeans"] = to_json(e.kmeans);
    config["mlls"] = to_json(e.mlls);
    config["holdout_fraction"] = e.holdout_fraction;
    if (settings.pool) {
        config["pool"] = *settings.pool;
        config["resample"] = to_json(e.resample);
    } else {
        config["synthetic"] = to_json(e.synthetic);
    }
    manifest["config"] = std::move(config);
    write_json(flags.out / "manifest.json", manifest);
    std::cout << summary;
}

bool cmd_verify(const Flags& flags) {
    const RunConfig rc = load_config(flags);
    const VerifySettings settings = parse_verify(rc.section("verify"));
    OutputLock lock(flags.out);
    Rng rng(derive_seed(rc.seed, 0));

    Json report = manifest_base("verify-theorems", rc.seed);
    report["config"] = {{"instances", settings.instances},          {"max_points", settings.max_points},
                        {"max_k", settings.max_k},                  {"max_groups", settings.max_groups},
                        {"pair_instances", settings.pair_instances}, {"trivial_only", settings.trivial_only},
                        {"auc_gain_tolerance", settings.auc_gain_tolerance},
                        {"posterior_tolerance", settings.posterior_tolerance}};

    auto draw_shape = [&](int& n, int& k, int& g) {
        if (settings.trivial_only) {
            k = g = 1;
            n = std::uniform_int_distribution<int>(1, settings.max_points)(rng);
            return;
        }
        k = std::uniform_int_distribution<int>(1, settings.max_k)(rng);
        g = std::uniform_int_distribution<int>(1, settings.max_groups)(rng);
        n = std::uniform_int_distribution<int>(k, settings.max_points)(rng);
    };

    bool pass = true;
    Json t1 = Json::array();
    double max1 = 0.0;
    double max_pre = 0.0;
    double min_gap = 0.0;
    bool first = true;
    for (int i = 0; i < settings.instances; ++i) {
        int n = 0, k = 0, g = 0;
        draw_shape(n, k, g);
        const std::uint64_t seed = derive_seed(rc.seed, 1000 + static_cast<std::uint64_t>(i));
        const AucGainReport r = auc_gain_check(random_pcc_instance(n, k, g, seed));
        Json row = to_json(r);
        row["n_points"] = n;
        row["k"] = k;
        row["groups"] = g;
        row["seed"] = seed;
        t1.push_back(std::move(row));
        max1 = std::max(max1, r.abs_error);
        max_pre = std::max(max_pre, r.pre_exchange_error);
        min_gap = first ? r.lhs : std::min(min_gap, r.lhs);
        first = false;
    }
    const bool t1_pass = max1 <= settings.auc_gain_tolerance && min_gap >= -1e-12;
    pass = pass && t1_pass;
    report["auc_gain"] = {{"instances", std::move(t1)},
                          {"max_abs_error", max1},
                          {"max_pre_exchange_error", max_pre},
                          {"min_gap", min_gap},
                          {"pass", t1_pass}};

    Json t2 = Json::array();
    double max2 = 0.0;
    for (int i = 0; i < settings.pair_instances; ++i) {
        int n = 0, k = 0, g = 0;
        draw_shape(n, k, g);
        const std::uint64_t seed = derive_seed(rc.seed, 2000 + static_cast<std::uint64_t>(i));
        const auto [joint, biased] = random_pcc_pair(n, k, g, seed);
        const double err = posterior_correction_check(joint, biased);
        t2.push_back({{"n_points", n}, {"k", k}, {"groups", g}, {"seed", seed}, {"max_error", err}});
        max2 = std::max(max2, err);
    }
    const bool t2_pass = max2 <= settings.posterior_tolerance;
    pass = pass && t2_pass;
    report["posterior_correction"] = {{"instances", std::move(t2)}, {"max_error", max2}, {"pass", t2_pass}};

    if (!settings.trivial_only) {
        const DiscreteJoint pure = pure_cells_instance(std::max(settings.max_k, 2) * 2, std::max(settings.max_k, 2), 2);
        const AucGainReport r = auc_gain_check(pure);
        const bool pure_pass = r.auc_rho == 0.5 && r.auc_rho_bar == 1.0 && r.exact;
        pass = pass && pure_pass;
        Json row = to_json(r);
        row["pass"] = pure_pass;
        report["pure_cells"] = std::move(row);
    }
    report["pass"] = pass;
    write_json(flags.out / "report.json", report);
    std::cout << "AUC-gain identity max error " << format_double(max1) << ", posterior correction max error " << format_double(max2)
              << (pass ? ", all bounds met\n" : ", BOUND VIOLATED\n");
    return pass;
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return 2;
    if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const DegenerateError*>(&e) ||
        dynamic_cast<const EmptyCellError*>(&e))
        return 3;
    if (dynamic_cast<const VerificationError*>(&e)) return 4;
    return 1;
}

}  // namespace pcc::cli
