#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kirsf/dataset.hpp"
#include "kirsf/eval.hpp"
#include "kirsf/forest.hpp"
#include "kirsf/kernels.hpp"
#include "kirsf/sim.hpp"

namespace kirsf {

inline constexpr const char* kToolVersion = "kirsf 0.1.0";

// Fitted feature map used by KIRSF: standardize with training statistics,
// then replace the covariates by kernel evaluations against every training
// point. Anchors are stored standardized.
struct KernelPipeline {
    Standardizer standardizer;
    KernelBasis basis;

    std::vector<double> map_row(std::span<const double> x) const;
    SurvivalDataset apply(const SurvivalDataset& data) const;
};

// Resolves the sigma2 <= 0 "auto" default to the standardized feature
// dimension before building the basis.
KernelPipeline fit_kernel_pipeline(const SurvivalDataset& train, KernelSpec spec);

// Forest plus the optional kernel pipeline needed to featurize raw inputs.
struct Model {
    SurvivalForest forest;
    std::optional<KernelPipeline> kernel;

    std::size_t input_dim() const;
    std::vector<double> featurize(std::span<const double> raw_x) const;
    double mortality(std::span<const double> raw_x) const;

    std::string save() const;
    static Model load(const std::string& bytes);
    void save_file(const std::string& path) const;
    static Model load_file(const std::string& path);
};

struct ExperimentSummary {
    std::string method;  // RSF or KIRSF
    std::vector<double> per_realization_errors;  // fractions in [0, 1]
    double mean_error = 0.0;
    double sample_sd = 0.0;  // divisor n - 1
    std::string settings;    // echo of forest/kernel config and seeds

    void finalize();  // recompute mean/sd from the vector
};

struct ExperimentResult {
    ExperimentSummary rsf;
    ExperimentSummary kirsf;
    TTestResult ttest;  // RSF errors vs KIRSF errors
    int requested = 0;
    int completed = 0;
    std::vector<std::string> failures;
};

struct RingnormExperimentConfig {
    int realizations = 50;
    SimConfig sim;               // n = 1000, d = 20, rates 0.1 / 0.5, censoring [5, 10]
    double train_fraction = 0.1; // 100 training / 900 test at n = 1000
    ForestConfig forest;
    KernelSpec kernel{KernelFamily::gaussian, 0.0, 2, 0.0};  // sigma2 auto
    std::uint64_t master_seed = 1;
    unsigned n_threads = 0;
    bool write_curves = false;  // curve bundles for the last realization
    std::string out_dir;        // empty = no files
};

struct BmtExperimentConfig {
    int realizations = 100;
    std::string bmt_path;
    std::string endpoint = "primary";
    std::vector<std::string> feature_columns;  // empty = Z1..Z10 and Group
    double train_fraction = 0.9;
    ForestConfig forest;
    KernelSpec kernel{KernelFamily::linear, 0.0, 2, 0.0};
    std::uint64_t master_seed = 1;
    unsigned n_threads = 0;
    bool write_curves = false;
    std::string out_dir;
};

// Per realization: fresh split (and fresh simulated data for ringnorm), RSF
// on raw covariates vs KIRSF on kernelized covariates with paired seeds;
// test-set prediction error is 1 - C with ensemble mortality as the ranking
// value. Both runners write per_realization.csv, summary.tsv and ttest.tsv
// into out_dir and require at least 80% completed realizations.
ExperimentResult run_ringnorm_experiment(const RingnormExperimentConfig& config);
ExperimentResult run_bmt_experiment(const BmtExperimentConfig& config);

// Long-format curve CSV (series, subject_id, t, value): per-subject survival
// exp(-H_e(t|x_i)), their pointwise mean as the overall ensemble survival,
// the Nelson-Aalen overall survival of the training sample, and the true
// exponential curves when simulation metadata is supplied.
void write_curve_bundle(const std::string& path, const SurvivalForest& forest,
                        const Matrix& subject_features, const NodeSample& train_sample,
                        const SimConfig* sim_config, const std::string& meta_comment);

// "# key: value" metadata lines placed at the top of every output file.
std::string metadata_header(const std::string& config_echo, std::uint64_t master_seed);

}  // namespace kirsf
