#include "kirsf/experiment.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "kirsf/tree.hpp"

namespace kirsf {

namespace {

using nlohmann::json;

constexpr const char* kModelFormat = "kirsf-model";
constexpr int kModelVersion = 1;

std::string fmt(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write file: " + tmp);
        out << content;
        if (!out) throw std::runtime_error("write failed: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

json kernel_pipeline_to_json(const KernelPipeline& pipeline) {
    json spec{{"family", to_string(pipeline.basis.spec.family)},
              {"offset_c", pipeline.basis.spec.offset_c},
              {"degree", pipeline.basis.spec.degree},
              {"sigma2", pipeline.basis.spec.sigma2}};
    json standardizer{{"input_dim", pipeline.standardizer.input_dim()},
                      {"kept", pipeline.standardizer.kept_features()},
                      {"mean", pipeline.standardizer.means()},
                      {"scale", pipeline.standardizer.scales()}};
    return json{{"spec", std::move(spec)},
                {"standardizer", std::move(standardizer)},
                {"anchors", pipeline.basis.anchor_points}};
}

KernelPipeline kernel_pipeline_from_json(const json& j) {
    KernelSpec spec;
    spec.family = kernel_family_from_string(j.at("spec").at("family").get<std::string>());
    spec.offset_c = j.at("spec").at("offset_c").get<double>();
    spec.degree = j.at("spec").at("degree").get<int>();
    spec.sigma2 = j.at("spec").at("sigma2").get<double>();

    const json& s = j.at("standardizer");
    KernelPipeline pipeline;
    pipeline.standardizer = Standardizer::from_parts(
        s.at("input_dim").get<std::size_t>(), s.at("kept").get<std::vector<std::size_t>>(),
        s.at("mean").get<std::vector<double>>(), s.at("scale").get<std::vector<double>>());
    pipeline.basis = build_basis(j.at("anchors").get<Matrix>(), spec);
    return pipeline;
}

std::string forest_echo(const ForestConfig& fc) {
    std::string s = "ntree=" + std::to_string(fc.n_trees);
    s += ",mtry=" + (fc.tree.mtry >= 1 ? std::to_string(fc.tree.mtry) : std::string("auto"));
    s += ",min_node_events=" + std::to_string(fc.tree.min_node_events);
    s += ",min_node_size=" + std::to_string(fc.tree.min_node_size);
    s += ",split_rule=" + to_string(fc.tree.split_rule);
    s += ",max_depth=" +
         (fc.tree.max_depth > 0 ? std::to_string(fc.tree.max_depth) : std::string("unlimited"));
    return s;
}

std::string kernel_echo(const KernelSpec& spec) {
    std::string s = "kernel=" + to_string(spec.family);
    if (spec.family == KernelFamily::polynomial)
        s += ",degree=" + std::to_string(spec.degree) + ",offset_c=" + fmt(spec.offset_c);
    if (spec.family == KernelFamily::gaussian)
        s += ",sigma2=" + (spec.sigma2 > 0.0 ? fmt(spec.sigma2) : std::string("auto"));
    return s;
}

// test-set prediction error: rank by ensemble mortality, score with 1 - C
double heldout_error(const SurvivalForest& forest, const SurvivalDataset& test,
                     const Matrix& test_features) {
    std::vector<double> times(test.size()), predicted(test.size());
    std::vector<int> events(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
        times[i] = test.records[i].time;
        events[i] = test.records[i].event;
        predicted[i] = forest.ensemble_mortality(test_features[i]);
    }
    return c_index(times, events, predicted).prediction_error;
}

Matrix raw_features(const SurvivalDataset& data) {
    Matrix m;
    m.reserve(data.size());
    for (const auto& rec : data.records) m.push_back(rec.covariates);
    return m;
}

NodeSample to_node_sample(const SurvivalDataset& data) {
    NodeSample sample;
    sample.times.reserve(data.size());
    sample.events.reserve(data.size());
    for (const auto& rec : data.records) {
        sample.times.push_back(rec.time);
        sample.events.push_back(rec.event);
    }
    return sample;
}

struct RealizationRow {
    int realization = 0;
    double rsf_error = 0.0;
    double kirsf_error = 0.0;
    std::vector<std::pair<std::string, std::uint64_t>> seeds;
};

// Shared tail of both experiments: summaries, t-test, completion gate and
// file output.
ExperimentResult assemble_result(std::vector<double> rsf_errors, std::vector<double> kirsf_errors,
                                 std::vector<std::string> failures, int requested,
                                 const std::string& config_echo, std::uint64_t master_seed,
                                 const std::string& settings_rsf, const std::string& settings_kirsf,
                                 const std::vector<RealizationRow>& rows,
                                 const std::string& out_dir) {
    ExperimentResult result;
    result.requested = requested;
    result.completed = static_cast<int>(rsf_errors.size());
    result.failures = std::move(failures);

    if (result.completed * 5 < requested * 4) {
        std::string msg = "experiment failed: only " + std::to_string(result.completed) + " of " +
                          std::to_string(requested) + " realizations completed";
        for (const auto& f : result.failures) msg += "\n  " + f;
        throw std::runtime_error(msg);
    }

    result.rsf.method = "RSF";
    result.rsf.per_realization_errors = std::move(rsf_errors);
    result.rsf.settings = settings_rsf;
    result.rsf.finalize();
    result.kirsf.method = "KIRSF";
    result.kirsf.per_realization_errors = std::move(kirsf_errors);
    result.kirsf.settings = settings_kirsf;
    result.kirsf.finalize();
    result.ttest =
        pooled_t_test(result.rsf.per_realization_errors, result.kirsf.per_realization_errors);

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        const std::string header = metadata_header(config_echo, master_seed);

        std::string per = header;
        per += "realization,rsf_error,kirsf_error";
        if (!rows.empty())
            for (const auto& [name, _] : rows.front().seeds) per += "," + name;
        per += "\n";
        for (const auto& row : rows) {
            per += std::to_string(row.realization) + "," + fmt(row.rsf_error) + "," +
                   fmt(row.kirsf_error);
            for (const auto& [_, seed] : row.seeds) per += "," + std::to_string(seed);
            per += "\n";
        }
        write_file_atomic(out_dir + "/per_realization.csv", per);

        std::string summary = header;
        summary += "method\tmean_error_pct\tsd_pct\trealizations\n";
        for (const ExperimentSummary* s : {&result.rsf, &result.kirsf}) {
            summary += s->method + "\t" + fmt(s->mean_error * 100.0) + "\t" +
                       fmt(s->sample_sd * 100.0) + "\t" +
                       std::to_string(s->per_realization_errors.size()) + "\n";
        }
        write_file_atomic(out_dir + "/summary.tsv", summary);

        std::string ttest = header;
        if (result.ttest.infinite_t) ttest += "# note: zero pooled variance, |t| is infinite\n";
        ttest += "t\tdf\tp\n";
        ttest += fmt(result.ttest.t) + "\t" + std::to_string(result.ttest.df) + "\t" +
                 fmt(result.ttest.p_value) + "\n";
        write_file_atomic(out_dir + "/ttest.tsv", ttest);
    }
    return result;
}

}  // namespace

std::vector<double> KernelPipeline::map_row(std::span<const double> x) const {
    const std::vector<double> z = standardizer.apply(x);
    std::vector<double> features(basis.size());
    for (std::size_t j = 0; j < basis.size(); ++j)
        features[j] = kernel_eval(basis.spec, basis.anchor_points[j], z);
    return features;
}

SurvivalDataset KernelPipeline::apply(const SurvivalDataset& data) const {
    SurvivalDataset out;
    out.feature_names = basis.anchor_feature_names;
    out.records.reserve(data.size());
    for (const auto& rec : data.records) {
        SurvivalRecord k;
        k.time = rec.time;
        k.event = rec.event;
        k.covariates = map_row(rec.covariates);
        out.records.push_back(std::move(k));
    }
    return out;
}

KernelPipeline fit_kernel_pipeline(const SurvivalDataset& train, KernelSpec spec) {
    Matrix raw = raw_features(train);
    if (raw.empty()) throw std::runtime_error("fit_kernel_pipeline: empty training set");

    KernelPipeline pipeline;
    pipeline.standardizer = Standardizer::fit(raw);
    if (pipeline.standardizer.output_dim() == 0)
        throw std::runtime_error("fit_kernel_pipeline: every feature has zero variance");
    if (spec.family == KernelFamily::gaussian && spec.sigma2 <= 0.0)
        spec.sigma2 = static_cast<double>(pipeline.standardizer.output_dim());
    pipeline.basis = build_basis(pipeline.standardizer.apply(raw), spec);
    return pipeline;
}

std::size_t Model::input_dim() const {
    return kernel ? kernel->standardizer.input_dim() : forest.feature_dim();
}

std::vector<double> Model::featurize(std::span<const double> raw_x) const {
    if (kernel) return kernel->map_row(raw_x);
    if (raw_x.size() != forest.feature_dim())
        throw std::runtime_error("model expects dimension " +
                                 std::to_string(forest.feature_dim()) + ", got " +
                                 std::to_string(raw_x.size()));
    return std::vector<double>(raw_x.begin(), raw_x.end());
}

double Model::mortality(std::span<const double> raw_x) const {
    return forest.ensemble_mortality(featurize(raw_x));
}

std::string Model::save() const {
    json j;
    j["format"] = kModelFormat;
    j["version"] = kModelVersion;
    j["forest"] = json::parse(forest.save());
    j["kernel"] = kernel ? kernel_pipeline_to_json(*kernel) : json();
    return j.dump();
}

Model Model::load(const std::string& bytes) {
    json j;
    try {
        j = json::parse(bytes);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("corrupt model payload: ") + e.what());
    }
    if (!j.is_object() || j.value("format", std::string()) != kModelFormat)
        throw std::runtime_error("corrupt model payload: missing format tag");
    const int version = j.value("version", -1);
    if (version != kModelVersion)
        throw std::runtime_error("unsupported model format version " + std::to_string(version) +
                                 " (this build reads version " + std::to_string(kModelVersion) +
                                 ")");
    try {
        Model model;
        model.forest = SurvivalForest::load(j.at("forest").dump());
        if (!j.at("kernel").is_null()) model.kernel = kernel_pipeline_from_json(j.at("kernel"));
        return model;
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("corrupt model payload: ") + e.what());
    }
}

void Model::save_file(const std::string& path) const { write_file_atomic(path, save()); }

Model Model::load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return load(buf.str());
}

void ExperimentSummary::finalize() {
    const std::size_t n = per_realization_errors.size();
    if (n == 0) {
        mean_error = 0.0;
        sample_sd = 0.0;
        return;
    }
    double sum = 0.0;
    for (double e : per_realization_errors) sum += e;
    mean_error = sum / static_cast<double>(n);
    if (n < 2) {
        sample_sd = 0.0;
        return;
    }
    double ss = 0.0;
    for (double e : per_realization_errors) ss += (e - mean_error) * (e - mean_error);
    sample_sd = std::sqrt(ss / static_cast<double>(n - 1));
}

std::string metadata_header(const std::string& config_echo, std::uint64_t master_seed) {
    std::string out;
    out += std::string("# tool: ") + kToolVersion + "\n";
    out += "# config: " + config_echo + "\n";
    out += "# master_seed: " + std::to_string(master_seed) + "\n";
    return out;
}

ExperimentResult run_ringnorm_experiment(const RingnormExperimentConfig& config) {
    if (config.realizations < 2)
        throw std::invalid_argument("experiment needs at least 2 realizations");
    config.sim.validate();

    const std::string config_echo =
        "experiment=ringnorm,realizations=" + std::to_string(config.realizations) +
        ",n=" + std::to_string(config.sim.n) + ",d=" + std::to_string(config.sim.d) +
        ",lambda1=" + fmt(config.sim.lambda1) + ",lambda2=" + fmt(config.sim.lambda2) +
        ",censor=[" + fmt(config.sim.censor_low) + "," + fmt(config.sim.censor_high) + "]" +
        ",train_fraction=" + fmt(config.train_fraction) + "," + forest_echo(config.forest) + "," +
        kernel_echo(config.kernel);

    std::vector<double> rsf_errors, kirsf_errors;
    std::vector<std::string> failures;
    std::vector<RealizationRow> rows;

    for (int r = 0; r < config.realizations; ++r) {
        const std::uint64_t sim_seed = derive_seed(derive_seed(config.master_seed, 1), r);
        const std::uint64_t split_seed = derive_seed(derive_seed(config.master_seed, 2), r);
        const std::uint64_t forest_seed = derive_seed(derive_seed(config.master_seed, 3), r);
        try {
            SimConfig sim = config.sim;
            sim.seed = sim_seed;
            const SimulatedData simulated = make_ringnorm_survival(sim);

            Rng split_rng(split_seed);
            auto [train, test] = split_train_test(simulated.data, config.train_fraction, split_rng);

            ForestConfig fc = config.forest;
            fc.seed = forest_seed;

            const SurvivalForest rsf = SurvivalForest::fit(train, fc, config.n_threads);
            const double rsf_error = heldout_error(rsf, test, raw_features(test));

            const KernelPipeline pipeline = fit_kernel_pipeline(train, config.kernel);
            const SurvivalDataset ktrain = pipeline.apply(train);
            Matrix ktest;
            ktest.reserve(test.size());
            for (const auto& rec : test.records) ktest.push_back(pipeline.map_row(rec.covariates));
            const SurvivalForest kirsf = SurvivalForest::fit(ktrain, fc, config.n_threads);
            const double kirsf_error = heldout_error(kirsf, test, ktest);

            rsf_errors.push_back(rsf_error);
            kirsf_errors.push_back(kirsf_error);
            rows.push_back({r + 1,
                            rsf_error,
                            kirsf_error,
                            {{"sim_seed", sim_seed},
                             {"split_seed", split_seed},
                             {"forest_seed", forest_seed}}});

            if (config.write_curves && r == config.realizations - 1 && !config.out_dir.empty()) {
                std::filesystem::create_directories(config.out_dir);
                const NodeSample train_sample = to_node_sample(train);
                const std::string meta = metadata_header(config_echo, config.master_seed);
                write_curve_bundle(config.out_dir + "/curves_rsf.csv", rsf, raw_features(train),
                                   train_sample, &sim, meta);
                write_curve_bundle(config.out_dir + "/curves_kirsf.csv", kirsf,
                                   raw_features(ktrain), train_sample, &sim, meta);
            }
        } catch (const std::exception& e) {
            failures.push_back("realization " + std::to_string(r + 1) + ": " + e.what());
        }
    }

    const std::string rsf_settings = forest_echo(config.forest) + ",features=raw";
    const std::string kirsf_settings = forest_echo(config.forest) + "," + kernel_echo(config.kernel);
    return assemble_result(std::move(rsf_errors), std::move(kirsf_errors), std::move(failures),
                           config.realizations, config_echo, config.master_seed, rsf_settings,
                           kirsf_settings, rows, config.out_dir);
}

namespace {

// The endpoint picks which (time, indicator) pair of the fixed layout is the
// response; the remaining columns of that pair never become covariates.
std::pair<std::string, std::string> bmt_endpoint_columns(const std::string& endpoint) {
    if (endpoint == "primary") return {"t", "c"};
    if (endpoint == "agvhd") return {"ta", "a"};
    if (endpoint == "cgvhd") return {"tc", "cc"};
    if (endpoint == "platelet") return {"tp", "p"};
    throw std::runtime_error("unknown BMT endpoint '" + endpoint + "'");
}

}  // namespace

ExperimentResult run_bmt_experiment(const BmtExperimentConfig& config) {
    if (config.realizations < 2)
        throw std::invalid_argument("experiment needs at least 2 realizations");
    SurvivalDataset data;
    if (config.feature_columns.empty()) {
        data = load_bmt(config.bmt_path, config.endpoint);
    } else {
        const auto [time_col, event_col] = bmt_endpoint_columns(config.endpoint);
        ColumnSchema schema;
        schema.time_column = time_col;
        schema.event_column = event_col;
        schema.feature_columns = config.feature_columns;
        schema.id_columns_ignored = {"ID"};
        data = load_csv(config.bmt_path, schema);
    }
    data.validate();

    std::string features_echo = "default";
    if (!config.feature_columns.empty()) {
        features_echo.clear();
        for (const auto& f : config.feature_columns)
            features_echo += (features_echo.empty() ? "" : "+") + f;
    }
    const std::string config_echo =
        "experiment=bmt,realizations=" + std::to_string(config.realizations) +
        ",endpoint=" + config.endpoint + ",features=" + features_echo +
        ",train_fraction=" + fmt(config.train_fraction) + "," + forest_echo(config.forest) + "," +
        kernel_echo(config.kernel);

    std::vector<double> rsf_errors, kirsf_errors;
    std::vector<std::string> failures;
    std::vector<RealizationRow> rows;

    for (int r = 0; r < config.realizations; ++r) {
        const std::uint64_t split_seed = derive_seed(derive_seed(config.master_seed, 2), r);
        const std::uint64_t forest_seed = derive_seed(derive_seed(config.master_seed, 3), r);
        try {
            Rng split_rng(split_seed);
            auto [train, test] = split_train_test(data, config.train_fraction, split_rng);

            ForestConfig fc = config.forest;
            fc.seed = forest_seed;

            const SurvivalForest rsf = SurvivalForest::fit(train, fc, config.n_threads);
            const double rsf_error = heldout_error(rsf, test, raw_features(test));

            const KernelPipeline pipeline = fit_kernel_pipeline(train, config.kernel);
            const SurvivalDataset ktrain = pipeline.apply(train);
            Matrix ktest;
            ktest.reserve(test.size());
            for (const auto& rec : test.records) ktest.push_back(pipeline.map_row(rec.covariates));
            const SurvivalForest kirsf = SurvivalForest::fit(ktrain, fc, config.n_threads);
            const double kirsf_error = heldout_error(kirsf, test, ktest);

            rsf_errors.push_back(rsf_error);
            kirsf_errors.push_back(kirsf_error);
            rows.push_back({r + 1,
                            rsf_error,
                            kirsf_error,
                            {{"split_seed", split_seed}, {"forest_seed", forest_seed}}});

            if (config.write_curves && r == config.realizations - 1 && !config.out_dir.empty()) {
                std::filesystem::create_directories(config.out_dir);
                const NodeSample train_sample = to_node_sample(train);
                const std::string meta = metadata_header(config_echo, config.master_seed);
                write_curve_bundle(config.out_dir + "/curves_rsf.csv", rsf, raw_features(train),
                                   train_sample, nullptr, meta);
                write_curve_bundle(config.out_dir + "/curves_kirsf.csv", kirsf,
                                   raw_features(ktrain), train_sample, nullptr, meta);
            }
        } catch (const std::exception& e) {
            failures.push_back("realization " + std::to_string(r + 1) + ": " + e.what());
        }
    }

    const std::string rsf_settings = forest_echo(config.forest) + ",features=raw";
    const std::string kirsf_settings = forest_echo(config.forest) + "," + kernel_echo(config.kernel);
    return assemble_result(std::move(rsf_errors), std::move(kirsf_errors), std::move(failures),
                           config.realizations, config_echo, config.master_seed, rsf_settings,
                           kirsf_settings, rows, config.out_dir);
}

void write_curve_bundle(const std::string& path, const SurvivalForest& forest,
                        const Matrix& subject_features, const NodeSample& train_sample,
                        const SimConfig* sim_config, const std::string& meta_comment) {
    std::vector<double> grid;
    grid.reserve(forest.event_time_grid().size() + 1);
    grid.push_back(0.0);
    for (double t : forest.event_time_grid())
        if (t > 0.0) grid.push_back(t);

    std::string out = meta_comment;
    out += "series,subject_id,t,value\n";

    std::vector<double> mean_survival(grid.size(), 0.0);
    for (std::size_t i = 0; i < subject_features.size(); ++i) {
        const StepFunction chf = forest.ensemble_chf(subject_features[i]);
        for (std::size_t g = 0; g < grid.size(); ++g) {
            const double s = std::exp(-chf(grid[g]));
            mean_survival[g] += s;
            out += "subject," + std::to_string(i + 1) + "," + fmt(grid[g]) + "," + fmt(s) + "\n";
        }
    }
    const auto n_sub = static_cast<double>(subject_features.size());
    for (std::size_t g = 0; g < grid.size(); ++g)
        out += "ensemble,-1," + fmt(grid[g]) + "," + fmt(mean_survival[g] / n_sub) + "\n";

    const StepFunction na = nelson_aalen(train_sample);
    for (std::size_t g = 0; g < grid.size(); ++g)
        out += "nelson_aalen,-1," + fmt(grid[g]) + "," + fmt(std::exp(-na(grid[g]))) + "\n";

    if (sim_config) {
        for (std::size_t g = 0; g < grid.size(); ++g)
            out += "true_class_1,-1," + fmt(grid[g]) + "," +
                   fmt(std::exp(-sim_config->lambda1 * grid[g])) + "\n";
        for (std::size_t g = 0; g < grid.size(); ++g)
            out += "true_class_2,-1," + fmt(grid[g]) + "," +
                   fmt(std::exp(-sim_config->lambda2 * grid[g])) + "\n";
    }
    write_file_atomic(path, out);
}

}  // namespace kirsf
