#pragma once

#include <string>
#include <utility>
#include <vector>

#include "kirsf/rng.hpp"

namespace kirsf {

using Matrix = std::vector<std::vector<double>>;

// One right-censored observation: follow-up time, event indicator
// (1 = event observed, 0 = censored) and the covariate vector.
struct SurvivalRecord {
    double time = 0.0;
    int event = 0;
    std::vector<double> covariates;
};

struct SurvivalDataset {
    std::vector<SurvivalRecord> records;
    std::vector<std::string> feature_names;

    std::size_t size() const { return records.size(); }
    std::size_t dim() const { return feature_names.size(); }
    std::size_t event_count() const;

    // throws if records disagree on dimension, contain non-finite values,
    // negative times, or no event is present
    void validate() const;
};

struct ColumnSchema {
    std::string time_column;
    std::string event_column;
    std::vector<std::string> feature_columns;  // empty = all remaining columns
    std::vector<std::string> id_columns_ignored;
};

SurvivalDataset load_csv(const std::string& path, const ColumnSchema& schema);

// Writes time, event and all covariates with shortest round-trip formatting,
// so a reload reproduces the dataset bit for bit.
void save_csv(const SurvivalDataset& data, const std::string& path);

// Numeric CSV without a survival schema (covariates only); returns the kept
// header names and one row per record.
std::pair<std::vector<std::string>, Matrix>
load_matrix_csv(const std::string& path, const std::vector<std::string>& ignore_columns = {});

// Bone-marrow-transplant file bundled under data/bmt.csv. Fixed layout
// ID,c,t,ta,a,tc,cc,tp,p,Z1..Z10,Group; the endpoint picks one of the four
// (time, indicator) pairs, covariates are always Z1..Z10 and Group.
extern const std::vector<std::string> kBmtEndpoints;  // primary agvhd cgvhd platelet
SurvivalDataset load_bmt(const std::string& path, const std::string& endpoint = "primary");

// Disjoint partition with |train| = round(fraction * n), original order kept
// within each part. Resamples up to a bounded retry count until the training
// part contains at least one event.
std::pair<SurvivalDataset, SurvivalDataset>
split_train_test(const SurvivalDataset& data, double train_fraction, Rng& rng);

}  // namespace kirsf
