#include "kirsf/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>
#include <unordered_map>
#include <unordered_set>

namespace kirsf {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_number(const std::string& raw, const std::string& column, std::size_t row) {
    const std::string cell = trim(raw);
    if (cell.empty())
        throw std::runtime_error("missing value in column '" + column + "' at row " +
                                 std::to_string(row));
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc{} || ptr != cell.data() + cell.size())
        throw std::runtime_error("non-numeric value '" + cell + "' in column '" + column +
                                 "' at row " + std::to_string(row));
    return value;
}

int parse_event(const std::string& raw, const std::string& column, std::size_t row) {
    const double v = parse_number(raw, column, row);
    if (v != 0.0 && v != 1.0)
        throw std::runtime_error("event value outside {0,1} at row " + std::to_string(row));
    return static_cast<int>(v);
}

void format_number(std::string& out, double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);  // shortest round-trip
    out.append(buf, ptr);
}

}  // namespace

std::size_t SurvivalDataset::event_count() const {
    std::size_t n = 0;
    for (const auto& r : records) n += static_cast<std::size_t>(r.event);
    return n;
}

void SurvivalDataset::validate() const {
    const std::size_t p = feature_names.size();
    bool any_event = false;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (!std::isfinite(r.time) || r.time < 0)
            throw std::runtime_error("invalid time at record " + std::to_string(i + 1));
        if (r.event != 0 && r.event != 1)
            throw std::runtime_error("event value outside {0,1} at record " + std::to_string(i + 1));
        if (r.covariates.size() != p)
            throw std::runtime_error("covariate length mismatch at record " + std::to_string(i + 1));
        for (double c : r.covariates)
            if (!std::isfinite(c))
                throw std::runtime_error("non-finite covariate at record " + std::to_string(i + 1));
        any_event = any_event || r.event == 1;
    }
    if (!any_event) throw std::runtime_error("dataset contains no event");
}

SurvivalDataset load_csv(const std::string& path, const ColumnSchema& schema) {
    if (schema.time_column == schema.event_column)
        throw std::runtime_error("schema: time and event columns must differ");
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty file: " + path);
    std::vector<std::string> header = split_line(line);
    for (auto& h : header) h = trim(h);

    std::unordered_map<std::string, std::size_t> col_index;
    for (std::size_t i = 0; i < header.size(); ++i) col_index[header[i]] = i;

    auto require = [&](const std::string& name) {
        auto it = col_index.find(name);
        if (it == col_index.end())
            throw std::runtime_error("missing column '" + name + "' in " + path);
        return it->second;
    };

    const std::size_t time_idx = require(schema.time_column);
    const std::size_t event_idx = require(schema.event_column);

    std::vector<std::size_t> feature_idx;
    std::vector<std::string> feature_names;
    if (!schema.feature_columns.empty()) {
        for (const auto& name : schema.feature_columns) {
            if (name == schema.time_column || name == schema.event_column)
                throw std::runtime_error("schema: feature column '" + name +
                                         "' duplicates time/event column");
            feature_idx.push_back(require(name));
            feature_names.push_back(name);
        }
    } else {
        std::unordered_set<std::string> skip(schema.id_columns_ignored.begin(),
                                             schema.id_columns_ignored.end());
        for (const auto& name : schema.id_columns_ignored) require(name);
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (i == time_idx || i == event_idx || skip.count(header[i])) continue;
            feature_idx.push_back(i);
            feature_names.push_back(header[i]);
        }
    }

    SurvivalDataset out;
    out.feature_names = feature_names;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ++row;
        std::vector<std::string> cells = split_line(line);
        if (cells.size() != header.size())
            throw std::runtime_error("row " + std::to_string(row) + " has " +
                                     std::to_string(cells.size()) + " cells, expected " +
                                     std::to_string(header.size()));
        SurvivalRecord rec;
        rec.time = parse_number(cells[time_idx], schema.time_column, row);
        if (!std::isfinite(rec.time) || rec.time < 0)
            throw std::runtime_error("negative or non-finite time at row " + std::to_string(row));
        rec.event = parse_event(cells[event_idx], schema.event_column, row);
        rec.covariates.reserve(feature_idx.size());
        for (std::size_t k = 0; k < feature_idx.size(); ++k) {
            const double v = parse_number(cells[feature_idx[k]], feature_names[k], row);
            if (!std::isfinite(v))
                throw std::runtime_error("non-finite value in column '" + feature_names[k] +
                                         "' at row " + std::to_string(row));
            rec.covariates.push_back(v);
        }
        out.records.push_back(std::move(rec));
    }
    return out;
}

void save_csv(const SurvivalDataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    std::string line = "time,event";
    for (const auto& name : data.feature_names) {
        line += ',';
        line += name;
    }
    out << line << '\n';
    for (const auto& rec : data.records) {
        line.clear();
        format_number(line, rec.time);
        line += ',';
        line += rec.event ? '1' : '0';
        for (double c : rec.covariates) {
            line += ',';
            format_number(line, c);
        }
        out << line << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::pair<std::vector<std::string>, Matrix>
load_matrix_csv(const std::string& path, const std::vector<std::string>& ignore_columns) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty file: " + path);
    std::vector<std::string> header = split_line(line);
    for (auto& h : header) h = trim(h);

    std::unordered_set<std::string> skip(ignore_columns.begin(), ignore_columns.end());
    std::vector<std::size_t> keep;
    std::vector<std::string> names;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (skip.count(header[i])) continue;
        keep.push_back(i);
        names.push_back(header[i]);
    }

    Matrix rows;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ++row;
        std::vector<std::string> cells = split_line(line);
        if (cells.size() != header.size())
            throw std::runtime_error("row " + std::to_string(row) + " has " +
                                     std::to_string(cells.size()) + " cells, expected " +
                                     std::to_string(header.size()));
        std::vector<double> values;
        values.reserve(keep.size());
        for (std::size_t k = 0; k < keep.size(); ++k)
            values.push_back(parse_number(cells[keep[k]], names[k], row));
        rows.push_back(std::move(values));
    }
    return {std::move(names), std::move(rows)};
}

const std::vector<std::string> kBmtEndpoints = {"primary", "agvhd", "cgvhd", "platelet"};

SurvivalDataset load_bmt(const std::string& path, const std::string& endpoint) {
    static const std::vector<std::string> layout = {
        "ID", "c",  "t",  "ta", "a",  "tc", "cc", "tp", "p",  "Z1",
        "Z2", "Z3", "Z4", "Z5", "Z6", "Z7", "Z8", "Z9", "Z10", "Group"};

    std::string time_col, event_col;
    if (endpoint == "primary") {
        time_col = "t";
        event_col = "c";
    } else if (endpoint == "agvhd") {
        time_col = "ta";
        event_col = "a";
    } else if (endpoint == "cgvhd") {
        time_col = "tc";
        event_col = "cc";
    } else if (endpoint == "platelet") {
        time_col = "tp";
        event_col = "p";
    } else {
        std::string valid;
        for (const auto& e : kBmtEndpoints) valid += (valid.empty() ? "" : ", ") + e;
        throw std::runtime_error("unknown BMT endpoint '" + endpoint + "' (valid: " + valid + ")");
    }

    {  // layout check up front so errors name the file, not a column
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open file: " + path);
        std::string line;
        if (!std::getline(in, line)) throw std::runtime_error("empty file: " + path);
        std::vector<std::string> header = split_line(line);
        for (auto& h : header) h = trim(h);
        if (header != layout)
            throw std::runtime_error("malformed BMT layout in " + path +
                                     ": expected header ID,c,t,ta,a,tc,cc,tp,p,Z1..Z10,Group");
    }

    ColumnSchema schema;
    schema.time_column = time_col;
    schema.event_column = event_col;
    schema.feature_columns = {"Z1", "Z2", "Z3", "Z4", "Z5", "Z6", "Z7", "Z8", "Z9", "Z10", "Group"};
    schema.id_columns_ignored = {"ID"};
    return load_csv(path, schema);
}

std::pair<SurvivalDataset, SurvivalDataset>
split_train_test(const SurvivalDataset& data, double train_fraction, Rng& rng) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("train_fraction must lie in (0,1)");
    const std::size_t n = data.size();
    const auto n_train =
        static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(n)));
    if (n_train == 0) throw std::runtime_error("train split would be empty");

    constexpr int kMaxRetries = 100;
    std::vector<std::size_t> indices(n);
    for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
        for (std::size_t i = 0; i < n; ++i) indices[i] = i;
        // partial Fisher-Yates: first n_train entries become the training rows
        for (std::size_t i = 0; i < n_train; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.bounded(n - i));
            std::swap(indices[i], indices[j]);
        }
        std::vector<std::size_t> train_idx(indices.begin(),
                                           indices.begin() + static_cast<std::ptrdiff_t>(n_train));
        std::sort(train_idx.begin(), train_idx.end());
        bool has_event = false;
        for (std::size_t i : train_idx) has_event = has_event || data.records[i].event == 1;
        if (!has_event) continue;

        SurvivalDataset train, test;
        train.feature_names = data.feature_names;
        test.feature_names = data.feature_names;
        std::size_t k = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (k < train_idx.size() && train_idx[k] == i) {
                train.records.push_back(data.records[i]);
                ++k;
            } else {
                test.records.push_back(data.records[i]);
            }
        }
        return {std::move(train), std::move(test)};
    }
    throw std::runtime_error("split_train_test: no event in training set after " +
                             std::to_string(kMaxRetries) + " attempts");
}

}  // namespace kirsf
