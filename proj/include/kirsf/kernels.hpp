#pragma once

#include <span>
#include <string>
#include <vector>

#include "kirsf/dataset.hpp"

namespace kirsf {

enum class KernelFamily { linear, polynomial, gaussian };

std::string to_string(KernelFamily family);
KernelFamily kernel_family_from_string(const std::string& name);

struct KernelSpec {
    KernelFamily family = KernelFamily::linear;
    double offset_c = 0.0;  // polynomial offset
    int degree = 2;         // polynomial degree
    double sigma2 = 1.0;    // gaussian bandwidth

    void validate() const;
};

// Per-feature location/scale fitted on training data and reused verbatim for
// test data. Zero-variance features are dropped (kept_features lists the
// survivors); dropped_features() lets callers warn about them.
class Standardizer {
public:
    static Standardizer fit(const Matrix& train_covariates);

    std::vector<double> apply(std::span<const double> x) const;
    Matrix apply(const Matrix& rows) const;

    std::size_t input_dim() const { return input_dim_; }
    std::size_t output_dim() const { return kept_.size(); }
    const std::vector<std::size_t>& kept_features() const { return kept_; }
    std::vector<std::size_t> dropped_features() const;

    const std::vector<double>& means() const { return mean_; }
    const std::vector<double>& scales() const { return scale_; }

    static Standardizer from_parts(std::size_t input_dim, std::vector<std::size_t> kept,
                                   std::vector<double> mean, std::vector<double> scale);

private:
    std::size_t input_dim_ = 0;
    std::vector<std::size_t> kept_;  // indices into the input vector
    std::vector<double> mean_;       // per kept feature
    std::vector<double> scale_;      // per kept feature, > 0
};

// The n training vectors acting as anchors of the kernel-induced features
// K_i(z) = K(x_i, z), plus the generated feature names K_1..K_n.
struct KernelBasis {
    Matrix anchor_points;
    KernelSpec spec;
    std::vector<std::string> anchor_feature_names;

    std::size_t size() const { return anchor_points.size(); }
    std::size_t anchor_dim() const { return anchor_points.empty() ? 0 : anchor_points.front().size(); }
};

double kernel_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> z);

KernelBasis build_basis(const Matrix& train_covariates, const KernelSpec& spec);

// entry (i, j) = K(anchor_j, x_i); transforming the training set itself
// yields the n x n Gram matrix
Matrix transform(const KernelBasis& basis, const Matrix& covariates);

// times and events pass through untouched; covariates become the kernel
// features and feature_names become K_1..K_n
SurvivalDataset kernelize_dataset(const SurvivalDataset& data, const KernelBasis& basis);

}  // namespace kirsf
