#include "kirsf/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace kirsf {

std::string to_string(KernelFamily family) {
    switch (family) {
        case KernelFamily::linear: return "linear";
        case KernelFamily::polynomial: return "polynomial";
        case KernelFamily::gaussian: return "gaussian";
    }
    return "?";
}

KernelFamily kernel_family_from_string(const std::string& name) {
    if (name == "linear") return KernelFamily::linear;
    if (name == "polynomial") return KernelFamily::polynomial;
    if (name == "gaussian") return KernelFamily::gaussian;
    throw std::runtime_error("unknown kernel family '" + name +
                             "' (valid: linear, polynomial, gaussian)");
}

void KernelSpec::validate() const {
    if (family == KernelFamily::polynomial && degree < 1)
        throw std::runtime_error("polynomial kernel requires degree >= 1");
    if (family == KernelFamily::gaussian && !(sigma2 > 0))
        throw std::runtime_error("gaussian kernel requires sigma2 > 0");
}

Standardizer Standardizer::fit(const Matrix& train_covariates) {
    if (train_covariates.empty())
        throw std::invalid_argument("Standardizer::fit: empty training set");
    const std::size_t p = train_covariates.front().size();
    const auto n = static_cast<double>(train_covariates.size());

    std::vector<double> mean(p, 0.0), var(p, 0.0);
    for (const auto& row : train_covariates) {
        if (row.size() != p)
            throw std::invalid_argument("Standardizer::fit: ragged covariate matrix");
        for (std::size_t j = 0; j < p; ++j) mean[j] += row[j];
    }
    for (std::size_t j = 0; j < p; ++j) mean[j] /= n;
    for (const auto& row : train_covariates)
        for (std::size_t j = 0; j < p; ++j) {
            const double d = row[j] - mean[j];
            var[j] += d * d;
        }

    Standardizer s;
    s.input_dim_ = p;
    for (std::size_t j = 0; j < p; ++j) {
        const double v = var[j] / n;
        if (v > 0.0) {
            s.kept_.push_back(j);
            s.mean_.push_back(mean[j]);
            s.scale_.push_back(std::sqrt(v));
        }
    }
    return s;
}

std::vector<double> Standardizer::apply(std::span<const double> x) const {
    if (x.size() != input_dim_)
        throw std::runtime_error("Standardizer: expected dimension " + std::to_string(input_dim_) +
                                 ", got " + std::to_string(x.size()));
    std::vector<double> out(kept_.size());
    for (std::size_t k = 0; k < kept_.size(); ++k) out[k] = (x[kept_[k]] - mean_[k]) / scale_[k];
    return out;
}

Matrix Standardizer::apply(const Matrix& rows) const {
    Matrix out;
    out.reserve(rows.size());
    for (const auto& row : rows) out.push_back(apply(row));
    return out;
}

std::vector<std::size_t> Standardizer::dropped_features() const {
    std::vector<std::size_t> dropped;
    std::size_t k = 0;
    for (std::size_t j = 0; j < input_dim_; ++j) {
        if (k < kept_.size() && kept_[k] == j)
            ++k;
        else
            dropped.push_back(j);
    }
    return dropped;
}

Standardizer Standardizer::from_parts(std::size_t input_dim, std::vector<std::size_t> kept,
                                      std::vector<double> mean, std::vector<double> scale) {
    if (kept.size() != mean.size() || kept.size() != scale.size())
        throw std::runtime_error("Standardizer: inconsistent parts");
    Standardizer s;
    s.input_dim_ = input_dim;
    s.kept_ = std::move(kept);
    s.mean_ = std::move(mean);
    s.scale_ = std::move(scale);
    return s;
}

namespace {

double inner_product(std::span<const double> x, std::span<const double> z) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * z[i];
    return s;
}

}  // namespace

double kernel_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> z) {
    if (x.size() != z.size())
        throw std::runtime_error("kernel_eval: dimension mismatch (" + std::to_string(x.size()) +
                                 " vs " + std::to_string(z.size()) + ")");
    for (double v : x)
        if (!std::isfinite(v)) throw std::runtime_error("kernel_eval: non-finite input");
    for (double v : z)
        if (!std::isfinite(v)) throw std::runtime_error("kernel_eval: non-finite input");

    switch (spec.family) {
        case KernelFamily::linear:
            return inner_product(x, z);
        case KernelFamily::polynomial:
            return std::pow(inner_product(x, z) + spec.offset_c, spec.degree);
        case KernelFamily::gaussian: {
            double sq = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double d = x[i] - z[i];
                sq += d * d;
            }
            return std::exp(-sq / (2.0 * spec.sigma2));
        }
    }
    throw std::logic_error("kernel_eval: unreachable");
}

KernelBasis build_basis(const Matrix& train_covariates, const KernelSpec& spec) {
    spec.validate();
    if (train_covariates.empty()) throw std::runtime_error("build_basis: empty training set");
    const std::size_t p = train_covariates.front().size();
    for (const auto& row : train_covariates)
        if (row.size() != p) throw std::runtime_error("build_basis: ragged covariate matrix");

    KernelBasis basis;
    basis.anchor_points = train_covariates;
    basis.spec = spec;
    basis.anchor_feature_names.reserve(train_covariates.size());
    for (std::size_t i = 0; i < train_covariates.size(); ++i)
        basis.anchor_feature_names.push_back("K_" + std::to_string(i + 1));
    return basis;
}

Matrix transform(const KernelBasis& basis, const Matrix& covariates) {
    const std::size_t p = basis.anchor_dim();
    Matrix out;
    out.reserve(covariates.size());
    for (const auto& row : covariates) {
        if (row.size() != p)
            throw std::runtime_error("transform: expected dimension " + std::to_string(p) +
                                     ", got " + std::to_string(row.size()));
        std::vector<double> features(basis.size());
        for (std::size_t j = 0; j < basis.size(); ++j)
            features[j] = kernel_eval(basis.spec, basis.anchor_points[j], row);
        out.push_back(std::move(features));
    }
    return out;
}

SurvivalDataset kernelize_dataset(const SurvivalDataset& data, const KernelBasis& basis) {
    SurvivalDataset out;
    out.feature_names = basis.anchor_feature_names;
    out.records.reserve(data.size());
    for (const auto& rec : data.records) {
        if (rec.covariates.size() != basis.anchor_dim())
            throw std::runtime_error("kernelize_dataset: expected dimension " +
                                     std::to_string(basis.anchor_dim()) + ", got " +
                                     std::to_string(rec.covariates.size()));
        SurvivalRecord k;
        k.time = rec.time;
        k.event = rec.event;
        k.covariates.resize(basis.size());
        for (std::size_t j = 0; j < basis.size(); ++j)
            k.covariates[j] = kernel_eval(basis.spec, basis.anchor_points[j], rec.covariates);
        out.records.push_back(std::move(k));
    }
    return out;
}

}  // namespace kirsf
