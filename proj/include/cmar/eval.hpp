#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "cmar/decompose.hpp"
#include "cmar/error.hpp"
#include "cmar/fusion.hpp"
#include "cmar/pca.hpp"

// Benchmark harness: load whitespace-delimited data matrices, fit one PCA
// model per monitoring block, score test series, and reduce alarm series
// to FDR / FAR / detection-delay metrics with the block alarm ordering.

namespace cmar {

struct Dataset {
    Eigen::MatrixXd matrix;                        // n samples x p variables
    std::vector<std::string> variable_order;       // tag per column
    double sample_period_min = 3.0;
    std::optional<std::size_t> fault_onset_index;  // first faulty sample
};

namespace detail {

inline double parse_number(const std::string& token, std::size_t row, std::size_t col,
                           const std::string& origin) {
    double value = 0.0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last)
        throw input_error(origin + ": row " + std::to_string(row + 1) + ", column " +
                          std::to_string(col + 1) + ": not a number: '" + token + "'");
    if (!std::isfinite(value))
        throw input_error(origin + ": row " + std::to_string(row + 1) + ", column " +
                          std::to_string(col + 1) + ": non-finite value '" + token + "'");
    return value;
}

}  // namespace detail

// Whitespace-delimited numeric text. With transpose, file rows are taken
// as variables (the orientation of the classic TEP training file).
inline Eigen::MatrixXd load_matrix(std::istream& in, const std::string& origin,
                                   bool transpose = false) {
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        const std::vector<std::string> tok = detail::split_tokens(line);
        if (tok.empty()) continue;
        std::vector<double> row;
        row.reserve(tok.size());
        for (std::size_t c = 0; c < tok.size(); ++c)
            row.push_back(detail::parse_number(tok[c], rows.size(), c, origin));
        if (!rows.empty() && row.size() != rows.front().size())
            throw input_error(origin + ": row " + std::to_string(rows.size() + 1) + " has " +
                              std::to_string(row.size()) + " values, expected " +
                              std::to_string(rows.front().size()));
        rows.push_back(std::move(row));
    }
    Eigen::MatrixXd m(rows.size(), rows.empty() ? 0 : rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    if (transpose) return m.transpose();
    return m;
}

inline Eigen::MatrixXd load_matrix_file(const std::filesystem::path& path,
                                        bool transpose = false) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open file: " + path.string());
    return load_matrix(in, path.string(), transpose);
}

// Fault detection rate: flagged fraction of the samples at or after onset.
inline double fdr(const std::vector<bool>& alarms, std::size_t onset) {
    if (onset >= alarms.size())
        throw input_error("fault onset " + std::to_string(onset) + " is outside the series of " +
                          std::to_string(alarms.size()) + " samples");
    std::size_t tp = 0;
    for (std::size_t i = onset; i < alarms.size(); ++i) tp += alarms[i] ? 1 : 0;
    return static_cast<double>(tp) / static_cast<double>(alarms.size() - onset);
}

// False alarm rate: flagged fraction of the pre-onset samples, or of the
// whole series when there is no onset.
inline double far(const std::vector<bool>& alarms, std::optional<std::size_t> onset = {}) {
    const std::size_t end = onset ? *onset : alarms.size();
    if (end == 0 || end > alarms.size())
        throw input_error("no normal samples to compute the false alarm rate on");
    std::size_t fp = 0;
    for (std::size_t i = 0; i < end; ++i) fp += alarms[i] ? 1 : 0;
    return static_cast<double>(fp) / static_cast<double>(end);
}

// Maps every block variable to its dataset column; fit order follows the
// block list.
inline std::vector<PcaModel> fit_block_models(const std::vector<MonitoringBlock>& blocks,
                                              const Dataset& train, double alpha,
                                              std::vector<std::string>* warnings = nullptr) {
    if (train.matrix.rows() == 0) throw input_error("training dataset is empty");
    std::unordered_map<std::string, Eigen::Index> column;
    for (std::size_t j = 0; j < train.variable_order.size(); ++j)
        column[train.variable_order[j]] = static_cast<Eigen::Index>(j);
    if (train.matrix.cols() != static_cast<Eigen::Index>(train.variable_order.size()))
        throw input_error("dataset has " + std::to_string(train.matrix.cols()) +
                          " columns but " + std::to_string(train.variable_order.size()) +
                          " column tags");

    std::vector<PcaModel> models;
    for (const MonitoringBlock& b : blocks) {
        Eigen::MatrixXd X(train.matrix.rows(), b.variables.size());
        for (std::size_t v = 0; v < b.variables.size(); ++v) {
            const auto it = column.find(b.variables[v]);
            if (it == column.end())
                throw input_error("block '" + b.name + "' references variable '" +
                                  b.variables[v] + "' absent from the dataset columns");
            X.col(static_cast<Eigen::Index>(v)) = train.matrix.col(it->second);
        }
        const Standardizer s = fit_standardizer(X, b.variables);
        PcaModel m = fit_full_pca(standardize(s, X), alpha, warnings);
        m.block_name = b.name;
        m.variables = b.variables;
        m.standardizer = s;
        models.push_back(std::move(m));
    }
    return models;
}

struct FusionSample {
    std::size_t index = 0;
    double time_min = 0.0;
    std::vector<BlockScore> per_block;
    double bic = 0.0;
    bool alarm = false;                // confirmed plant alarm, latched
    std::vector<bool> per_block_alarm;  // per-sample T^2 exceedance
};

// Scores every sample of the dataset against every model and runs the
// plant-level alarm state machine over the fused index.
inline std::vector<FusionSample> score_series(const std::vector<PcaModel>& models,
                                              const Dataset& data, const AlarmConfig& cfg) {
    if (models.empty()) throw input_error("no models to score with");
    if (data.matrix.rows() == 0) throw input_error("dataset has no samples");
    std::unordered_map<std::string, Eigen::Index> column;
    for (std::size_t j = 0; j < data.variable_order.size(); ++j)
        column[data.variable_order[j]] = static_cast<Eigen::Index>(j);

    std::vector<std::vector<Eigen::Index>> cols(models.size());
    for (std::size_t m = 0; m < models.size(); ++m) {
        for (const std::string& tag : models[m].variables) {
            const auto it = column.find(tag);
            if (it == column.end())
                throw input_error("model '" + models[m].block_name + "' references variable '" +
                                  tag + "' absent from the dataset columns");
            cols[m].push_back(it->second);
        }
    }

    const auto n = data.matrix.rows();
    std::vector<FusionSample> series(static_cast<std::size_t>(n));
    std::vector<double> index(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        FusionSample& s = series[static_cast<std::size_t>(i)];
        s.index = static_cast<std::size_t>(i);
        s.time_min = static_cast<double>(i) * data.sample_period_min;
        for (std::size_t m = 0; m < models.size(); ++m) {
            Eigen::VectorXd x(cols[m].size());
            for (std::size_t v = 0; v < cols[m].size(); ++v) x[v] = data.matrix(i, cols[m][v]);
            const Eigen::VectorXd z = standardize(models[m].standardizer, x);
            BlockScore score;
            score.block_name = models[m].block_name;
            score.t2 = hotelling_t2(models[m], z);
            const Likelihoods l = likelihoods(score.t2, models[m].t2_limit);
            score.likelihood_normal = l.normal;
            score.likelihood_fault = l.fault;
            score.posterior = posterior(l, models[m].alpha);
            s.per_block_alarm.push_back(score.t2 > models[m].t2_limit);
            s.per_block.push_back(std::move(score));
        }
        s.bic = bic(s.per_block);
        index[static_cast<std::size_t>(i)] = s.bic;
    }
    const AlarmSeries alarms = confirm_alarms(index, cfg);
    for (std::size_t i = 0; i < series.size(); ++i) series[i].alarm = alarms.latched[i];
    return series;
}

struct MetricsReport {
    double fdr_sample = 0.0;     // per-sample exceedance mode
    double fdr_confirmed = 0.0;  // 7-run latched mode
    double far_value = 0.0;      // pre-onset (or whole-series) sample mode
    std::optional<double> detection_delay_min;
    std::optional<std::string> first_alarm_block;
    std::vector<std::pair<std::string, std::size_t>> block_alarm_order;
};

// First confirmed alarm at or after start in a per-sample exceedance series.
inline std::optional<std::size_t> first_confirmed_at(const std::vector<bool>& exceed,
                                                     int confirm_run, std::size_t start) {
    const AlarmSeries a = confirm_alarms(exceed, confirm_run);
    if (!a.first_alarm) return std::nullopt;
    for (std::size_t i = std::max(*a.first_alarm, start); i < a.latched.size(); ++i)
        if (a.latched[i]) return i;
    return std::nullopt;
}

inline MetricsReport compute_metrics(const std::vector<FusionSample>& series,
                                     const AlarmConfig& cfg,
                                     std::optional<std::size_t> onset,
                                     double sample_period_min) {
    if (series.empty()) throw input_error("metrics need a nonempty series");
    if (onset && *onset >= series.size())
        throw input_error("fault onset " + std::to_string(*onset) +
                          " is outside the series of " + std::to_string(series.size()) +
                          " samples");
    std::vector<double> index(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) index[i] = series[i].bic;

    MetricsReport report;
    const std::vector<bool> exceed = sample_alarms(index, cfg.threshold);
    const AlarmSeries confirmed = confirm_alarms(exceed, cfg.confirm_run);
    report.far_value = far(exceed, onset);
    if (onset) {
        report.fdr_sample = fdr(exceed, *onset);
        report.fdr_confirmed = fdr(confirmed.latched, *onset);
        if (const auto hit = first_confirmed_at(exceed, cfg.confirm_run, *onset))
            report.detection_delay_min =
                static_cast<double>(*hit - *onset) * sample_period_min;
    }

    const std::size_t start = onset.value_or(0);
    const std::size_t nblocks = series.front().per_block.size();
    for (std::size_t b = 0; b < nblocks; ++b) {
        std::vector<bool> block_exceed(series.size());
        for (std::size_t i = 0; i < series.size(); ++i)
            block_exceed[i] = series[i].per_block_alarm[b];
        if (const auto hit = first_confirmed_at(block_exceed, cfg.confirm_run, start))
            report.block_alarm_order.emplace_back(series.front().per_block[b].block_name, *hit);
    }
    std::stable_sort(report.block_alarm_order.begin(), report.block_alarm_order.end(),
                     [](const auto& a, const auto& b) { return a.second < b.second; });
    if (!report.block_alarm_order.empty())
        report.first_alarm_block = report.block_alarm_order.front().first;
    return report;
}

struct BenchmarkConfig {
    double bic_threshold = 0.01;  // defaults to alpha when not calibrated
    int confirm_run = 7;
};

struct BenchmarkResult {
    MetricsReport report;
    std::vector<FusionSample> series;
};

inline BenchmarkResult benchmark_run(const Dataset& train, const Dataset& test,
                                     const std::vector<MonitoringBlock>& blocks, double alpha,
                                     const BenchmarkConfig& cfg,
                                     std::vector<std::string>* warnings = nullptr) {
    if (train.variable_order != test.variable_order)
        throw input_error("train and test datasets have different variable orders");
    const std::vector<PcaModel> models = fit_block_models(blocks, train, alpha, warnings);
    const AlarmConfig alarm{cfg.bic_threshold, cfg.confirm_run};
    BenchmarkResult result;
    result.series = score_series(models, test, alarm);
    result.report =
        compute_metrics(result.series, alarm, test.fault_onset_index, test.sample_period_min);
    return result;
}

inline nlohmann::json report_to_json(const std::string& fault_id, const MetricsReport& r) {
    nlohmann::json order = nlohmann::json::array();
    for (const auto& [block, sample] : r.block_alarm_order)
        order.push_back({{"block", block}, {"sample", sample}});
    nlohmann::json j{{"fault_id", fault_id},
                     {"fdr_sample", r.fdr_sample},
                     {"fdr_confirmed", r.fdr_confirmed},
                     {"far", r.far_value},
                     {"detection_delay_min", nullptr},
                     {"first_alarm_block", nullptr},
                     {"block_alarm_order", order}};
    if (r.detection_delay_min) j["detection_delay_min"] = *r.detection_delay_min;
    if (r.first_alarm_block) j["first_alarm_block"] = *r.first_alarm_block;
    return j;
}

}  // namespace cmar
