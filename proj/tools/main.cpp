#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kirsf/experiment.hpp"
#include "kirsf/forest.hpp"
#include "kirsf/tree.hpp"

namespace {

using namespace kirsf;

std::string fmt(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

struct SchemaFlags {
    std::string time_column;
    std::string event_column;
    std::vector<std::string> features;
    std::vector<std::string> ignore;

    ColumnSchema schema() const {
        return ColumnSchema{time_column, event_column, features, ignore};
    }
};

void add_schema_flags(CLI::App* cmd, SchemaFlags& flags, bool required) {
    auto* time_opt = cmd->add_option("--time", flags.time_column, "Name of the time column");
    auto* event_opt = cmd->add_option("--event", flags.event_column,
                                      "Name of the event indicator column (values 0/1)");
    if (required) {
        time_opt->required();
        event_opt->required();
    }
    cmd->add_option("--features", flags.features,
                    "Feature columns (comma separated; default: all remaining columns)")
        ->delimiter(',');
    cmd->add_option("--ignore", flags.ignore, "Columns to drop entirely (comma separated)")
        ->delimiter(',');
}

struct ForestFlags {
    int ntree = 1000;
    int mtry = 0;
    int min_node_events = 3;
    int min_node_size = 3;
    int max_depth = 0;
    std::string split_rule = "logrank";
    std::uint64_t seed = 1;
    unsigned threads = 0;

    ForestConfig config() const {
        ForestConfig fc;
        fc.n_trees = ntree;
        fc.tree.mtry = mtry;
        fc.tree.min_node_events = min_node_events;
        fc.tree.min_node_size = min_node_size;
        fc.tree.max_depth = max_depth;
        fc.tree.split_rule = split_rule_from_string(split_rule);
        fc.seed = seed;
        return fc;
    }
};

void add_forest_flags(CLI::App* cmd, ForestFlags& flags, int default_ntree) {
    flags.ntree = default_ntree;
    cmd->add_option("--ntree", flags.ntree, "Number of trees")->check(CLI::PositiveNumber);
    cmd->add_option("--mtry", flags.mtry, "Features tried per node (0 = ceil(sqrt(p)))");
    cmd->add_option("--min-node-events", flags.min_node_events,
                    "Minimum events required to attempt a split");
    cmd->add_option("--min-node-size", flags.min_node_size,
                    "Minimum members required to attempt a split");
    cmd->add_option("--max-depth", flags.max_depth, "Maximum tree depth (0 = unlimited)");
    cmd->add_option("--split-rule", flags.split_rule, "Node split rule")
        ->check(CLI::IsMember({"logrank", "deviance"}));
    cmd->add_option("--seed", flags.seed, "Master seed");
    cmd->add_option("--threads", flags.threads,
                    "Worker threads for tree growth (0 = hardware default)");
}

struct KernelFlags {
    std::string kernel = "none";
    int degree = 2;
    double offset_c = 0.0;
    double sigma2 = 0.0;  // 0 = auto (standardized feature dimension)

    std::optional<KernelSpec> spec() const {
        if (kernel == "none") return std::nullopt;
        KernelSpec s;
        s.family = kernel_family_from_string(kernel);
        s.degree = degree;
        s.offset_c = offset_c;
        s.sigma2 = sigma2;
        return s;
    }
};

void add_kernel_flags(CLI::App* cmd, KernelFlags& flags, const std::string& default_kernel) {
    flags.kernel = default_kernel;
    cmd->add_option("--kernel", flags.kernel, "Kernel family for kernel-induced features")
        ->check(CLI::IsMember({"none", "linear", "polynomial", "gaussian"}));
    cmd->add_option("--degree", flags.degree, "Polynomial kernel degree");
    cmd->add_option("--offset-c", flags.offset_c, "Polynomial kernel offset c");
    cmd->add_option("--sigma2", flags.sigma2,
                    "Gaussian kernel sigma^2 (0 = standardized feature dimension)");
}

void warn_dropped(const Standardizer& standardizer, const std::vector<std::string>& names) {
    for (std::size_t j : standardizer.dropped_features())
        std::cerr << "warning: dropping zero-variance feature '"
                  << (j < names.size() ? names[j] : std::to_string(j)) << "'\n";
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path);
}

int cmd_fit(const std::string& input, const SchemaFlags& schema_flags, const ForestFlags& forest_flags,
            const KernelFlags& kernel_flags, const std::string& out_path, std::string report_path) {
    SurvivalDataset data = load_csv(input, schema_flags.schema());
    data.validate();

    Model model;
    SurvivalDataset train = data;
    if (auto spec = kernel_flags.spec()) {
        KernelPipeline pipeline = fit_kernel_pipeline(data, *spec);
        warn_dropped(pipeline.standardizer, data.feature_names);
        train = pipeline.apply(data);
        model.kernel = std::move(pipeline);
    }
    model.forest = SurvivalForest::fit(train, forest_flags.config(), forest_flags.threads);
    model.save_file(out_path);

    // fit report: full-forest mortality and the OOB ranking value per record
    const auto& forest = model.forest;
    const auto& grid = forest.event_time_grid();
    std::vector<double> oob_times, oob_outcomes;
    std::vector<int> oob_events;
    std::string report = metadata_header("fit,input=" + input, forest_flags.seed);
    report += "row,time,event,mortality,oob_outcome\n";
    for (std::size_t i = 0; i < train.size(); ++i) {
        const double mortality = forest.ensemble_mortality(train.records[i].covariates);
        std::string oob_cell = "NA";
        if (forest.has_oob(i)) {
            const double outcome =
                SurvivalForest::predicted_outcome(forest.oob_ensemble_chf(i), grid);
            oob_cell = fmt(outcome);
            oob_times.push_back(train.records[i].time);
            oob_events.push_back(train.records[i].event);
            oob_outcomes.push_back(outcome);
        }
        report += std::to_string(i + 1) + "," + fmt(train.records[i].time) + "," +
                  std::to_string(train.records[i].event) + "," + fmt(mortality) + "," + oob_cell +
                  "\n";
    }
    if (report_path.empty()) report_path = out_path + ".report.csv";
    write_text_file(report_path, report);

    const ConcordanceResult oob = c_index(oob_times, oob_events, oob_outcomes);
    std::cout << "OOB prediction error: " << fmt(oob.prediction_error) << " (1 - C, C = "
              << fmt(oob.c_index) << ", " << oob_times.size() << " of " << train.size()
              << " records OOB; 0.5 = no better than random guessing)\n";
    std::cout << "model written to " << out_path << "\n";
    return 0;
}

int cmd_predict(const std::string& model_path, const std::string& input,
                const SchemaFlags& schema_flags, const std::string& out_path,
                const std::string& curves_path) {
    const Model model = Model::load_file(model_path);

    Matrix rows;
    if (!schema_flags.time_column.empty() || !schema_flags.event_column.empty()) {
        if (schema_flags.time_column.empty() || schema_flags.event_column.empty())
            throw CLI::ValidationError("--time and --event must be given together");
        const SurvivalDataset data = load_csv(input, schema_flags.schema());
        for (const auto& rec : data.records) rows.push_back(rec.covariates);
    } else {
        rows = load_matrix_csv(input, schema_flags.ignore).second;
    }

    std::string out = metadata_header("predict,model=" + model_path + ",input=" + input, 0);
    out += "row,mortality\n";
    std::string curves;
    if (!curves_path.empty()) {
        curves = out.substr(0, out.find("row,mortality"));
        curves += "row_id,t,H,S\n";
    }
    const auto& grid = model.forest.event_time_grid();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::vector<double> features = model.featurize(rows[i]);
        out += std::to_string(i + 1) + "," + fmt(model.forest.ensemble_mortality(features)) + "\n";
        if (!curves_path.empty()) {
            const StepFunction chf = model.forest.ensemble_chf(features);
            curves += std::to_string(i + 1) + ",0,0,1\n";
            for (double t : grid) {
                const double h = chf(t);
                curves += std::to_string(i + 1) + "," + fmt(t) + "," + fmt(h) + "," +
                          fmt(std::exp(-h)) + "\n";
            }
        }
    }
    write_text_file(out_path, out);
    if (!curves_path.empty()) write_text_file(curves_path, curves);
    std::cout << rows.size() << " predictions written to " << out_path << "\n";
    return 0;
}

int cmd_curves(const std::string& model_path, const std::string& input,
               const SchemaFlags& schema_flags, const std::string& out_path,
               const std::string& meta_path, bool true_curves) {
    const Model model = Model::load_file(model_path);
    const SurvivalDataset data = load_csv(input, schema_flags.schema());

    Matrix features;
    features.reserve(data.size());
    for (const auto& rec : data.records) features.push_back(model.featurize(rec.covariates));

    NodeSample sample;
    for (const auto& rec : data.records) {
        sample.times.push_back(rec.time);
        sample.events.push_back(rec.event);
    }

    SimConfig sim;
    const SimConfig* sim_ptr = nullptr;
    if (true_curves) {
        if (meta_path.empty())
            throw CLI::ValidationError("--true-curves requires --meta (simulation sidecar file)");
        std::ifstream in(meta_path);
        if (!in) throw std::runtime_error("cannot open metadata file: " + meta_path);
        nlohmann::json j = nlohmann::json::parse(in);
        sim.n = j.at("n").get<std::size_t>();
        sim.d = j.at("d").get<std::size_t>();
        sim.lambda1 = j.at("lambda1").get<double>();
        sim.lambda2 = j.at("lambda2").get<double>();
        sim.censor_low = j.at("censor_low").get<double>();
        sim.censor_high = j.at("censor_high").get<double>();
        sim.seed = j.at("seed").get<std::uint64_t>();
        sim_ptr = &sim;
    }

    write_curve_bundle(out_path, model.forest, features, sample, sim_ptr,
                       metadata_header("curves,model=" + model_path + ",input=" + input, 0));
    std::cout << "curves written to " << out_path << "\n";
    return 0;
}

int cmd_simulate(const SimConfig& config, const std::string& out_path) {
    const SimulatedData simulated = make_ringnorm_survival(config);
    save_csv(simulated.data, out_path);

    nlohmann::json meta{{"tool", kToolVersion},
                        {"generator", SimulatedData::kGenerator},
                        {"seed", config.seed},
                        {"n", config.n},
                        {"d", config.d},
                        {"lambda1", config.lambda1},
                        {"lambda2", config.lambda2},
                        {"censor_low", config.censor_low},
                        {"censor_high", config.censor_high},
                        {"labels", simulated.labels}};
    write_text_file(out_path + ".meta.json", meta.dump(2) + "\n");
    std::cout << config.n << " records written to " << out_path << " (+ .meta.json)\n";
    return 0;
}

void print_experiment(const ExperimentResult& result) {
    std::cout << "method\tmean_error_pct\tsd_pct\trealizations\n";
    for (const ExperimentSummary* s : {&result.rsf, &result.kirsf})
        std::cout << s->method << "\t" << fmt(s->mean_error * 100.0) << "\t"
                  << fmt(s->sample_sd * 100.0) << "\t" << s->per_realization_errors.size() << "\n";
    std::cout << "t-test: t=" << fmt(result.ttest.t) << " df=" << result.ttest.df
              << " p=" << fmt(result.ttest.p_value)
              << (result.ttest.infinite_t ? " (zero pooled variance)" : "") << "\n";
    for (const auto& failure : result.failures) std::cerr << "warning: " << failure << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{std::string(kToolVersion) +
                 " - kernel-induced random survival forests (fit, predict, experiments)"};
    app.require_subcommand(1);

    // fit
    auto* fit = app.add_subcommand("fit", "Fit a survival forest on a CSV file");
    std::string fit_input, fit_out, fit_report;
    SchemaFlags fit_schema;
    ForestFlags fit_forest;
    KernelFlags fit_kernel;
    fit->add_option("--input", fit_input, "Training CSV")->required();
    add_schema_flags(fit, fit_schema, true);
    add_forest_flags(fit, fit_forest, 1000);
    add_kernel_flags(fit, fit_kernel, "none");
    fit->add_option("--out", fit_out, "Model output path")->required();
    fit->add_option("--report", fit_report, "Fit report path (default: <out>.report.csv)");

    // predict
    auto* predict = app.add_subcommand("predict", "Predict ensemble mortality for a CSV file");
    std::string pred_model, pred_input, pred_out, pred_curves;
    SchemaFlags pred_schema;
    predict->add_option("--model", pred_model, "Fitted model file")->required();
    predict->add_option("--input", pred_input, "Input CSV")->required();
    add_schema_flags(predict, pred_schema, false);
    predict->add_option("--out", pred_out, "Predictions CSV path")->required();
    predict->add_option("--curves", pred_curves, "Also write per-row CHF/survival curves here");

    // curves
    auto* curves = app.add_subcommand("curves", "Write survival curve bundle for a fitted model");
    std::string cur_model, cur_input, cur_out, cur_meta;
    bool cur_true = false;
    SchemaFlags cur_schema;
    curves->add_option("--model", cur_model, "Fitted model file")->required();
    curves->add_option("--input", cur_input, "Training CSV (subjects to plot)")->required();
    add_schema_flags(curves, cur_schema, true);
    curves->add_option("--out", cur_out, "Curve CSV path")->required();
    curves->add_option("--meta", cur_meta, "Simulation sidecar metadata (for true curves)");
    curves->add_flag("--true-curves", cur_true, "Include the true per-class survival curves");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Generate a ringnorm survival dataset");
    SimConfig sim_config;
    std::string sim_out;
    simulate->add_option("--n", sim_config.n, "Number of observations");
    simulate->add_option("--d", sim_config.d, "Covariate dimension");
    simulate->add_option("--lambda1", sim_config.lambda1, "Hazard rate of class 1");
    simulate->add_option("--lambda2", sim_config.lambda2, "Hazard rate of class 2");
    simulate->add_option("--censor-low", sim_config.censor_low, "Censoring window lower bound");
    simulate->add_option("--censor-high", sim_config.censor_high, "Censoring window upper bound");
    simulate->add_option("--seed", sim_config.seed, "Seed");
    simulate->add_option("--out", sim_out, "Dataset CSV path (sidecar written alongside)")
        ->required();

    // experiment-ringnorm
    auto* ring = app.add_subcommand("experiment-ringnorm",
                                    "RSF vs KIRSF on simulated ringnorm survival data");
    RingnormExperimentConfig ring_config;
    ForestFlags ring_forest;
    KernelFlags ring_kernel;
    ring->add_option("--realizations", ring_config.realizations, "Number of realizations");
    ring->add_option("--n", ring_config.sim.n, "Observations per realization");
    ring->add_option("--d", ring_config.sim.d, "Covariate dimension");
    ring->add_option("--lambda1", ring_config.sim.lambda1, "Hazard rate of class 1");
    ring->add_option("--lambda2", ring_config.sim.lambda2, "Hazard rate of class 2");
    ring->add_option("--censor-low", ring_config.sim.censor_low, "Censoring window lower bound");
    ring->add_option("--censor-high", ring_config.sim.censor_high, "Censoring window upper bound");
    ring->add_option("--train-fraction", ring_config.train_fraction, "Training fraction");
    add_forest_flags(ring, ring_forest, 1000);
    add_kernel_flags(ring, ring_kernel, "gaussian");
    ring->add_option("--out-dir", ring_config.out_dir, "Output directory")->required();
    bool ring_curves = false;
    ring->add_flag("--curves", ring_curves, "Write curve bundles for the last realization");

    // experiment-bmt
    auto* bmt = app.add_subcommand("experiment-bmt",
                                   "RSF vs KIRSF on the bone-marrow-transplant data");
    BmtExperimentConfig bmt_config;
    ForestFlags bmt_forest;
    KernelFlags bmt_kernel;
    bmt->add_option("--bmt", bmt_config.bmt_path, "BMT CSV path")->required();
    bmt->add_option("--endpoint", bmt_config.endpoint, "Endpoint column pair")
        ->check(CLI::IsMember({"primary", "agvhd", "cgvhd", "platelet"}));
    bmt->add_option("--features", bmt_config.feature_columns,
                    "Covariate columns (comma separated; default: Z1..Z10,Group)")
        ->delimiter(',');
    bmt->add_option("--realizations", bmt_config.realizations, "Number of realizations");
    bmt->add_option("--train-fraction", bmt_config.train_fraction, "Training fraction");
    add_forest_flags(bmt, bmt_forest, 1000);
    add_kernel_flags(bmt, bmt_kernel, "linear");
    bmt->add_option("--out-dir", bmt_config.out_dir, "Output directory")->required();
    bool bmt_curves = false;
    bmt->add_flag("--curves", bmt_curves, "Write curve bundles for the last realization");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*fit)
            return cmd_fit(fit_input, fit_schema, fit_forest, fit_kernel, fit_out, fit_report);
        if (*predict)
            return cmd_predict(pred_model, pred_input, pred_schema, pred_out, pred_curves);
        if (*curves)
            return cmd_curves(cur_model, cur_input, cur_schema, cur_out, cur_meta, cur_true);
        if (*simulate) return cmd_simulate(sim_config, sim_out);
        if (*ring) {
            ring_config.forest = ring_forest.config();
            if (auto spec = ring_kernel.spec())
                ring_config.kernel = *spec;
            else
                throw CLI::ValidationError("experiment-ringnorm requires a kernel (not 'none')");
            ring_config.master_seed = ring_forest.seed;
            ring_config.n_threads = ring_forest.threads;
            ring_config.write_curves = ring_curves;
            print_experiment(run_ringnorm_experiment(ring_config));
            return 0;
        }
        if (*bmt) {
            bmt_config.forest = bmt_forest.config();
            if (auto spec = bmt_kernel.spec())
                bmt_config.kernel = *spec;
            else
                throw CLI::ValidationError("experiment-bmt requires a kernel (not 'none')");
            bmt_config.master_seed = bmt_forest.seed;
            bmt_config.n_threads = bmt_forest.threads;
            bmt_config.write_curves = bmt_curves;
            print_experiment(run_bmt_experiment(bmt_config));
            return 0;
        }
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
