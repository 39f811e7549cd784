// Command-line front end: decompose a flowsheet into monitoring blocks,
// train per-block PCA models, monitor test data, export contribution maps,
// and evaluate detection metrics over a set of fault files.
//
// Exit status: 0 success, 1 computation error, 2 input/usage error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cmar/decompose.hpp"
#include "cmar/error.hpp"
#include "cmar/eval.hpp"
#include "cmar/export.hpp"
#include "cmar/flowsheet.hpp"
#include "cmar/fusion.hpp"
#include "cmar/pca.hpp"

namespace {

using cmar::input_error;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw input_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw input_error("cannot write file: " + path);
    out << content;
}

std::vector<std::string> load_columns(const std::string& path) {
    std::vector<std::string> columns;
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line)) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line = line.substr(0, hash);
        for (const std::string& tok : cmar::detail::split_tokens(line)) columns.push_back(tok);
    }
    if (columns.empty()) throw input_error("column file " + path + " lists no tags");
    return columns;
}

cmar::Dataset load_dataset(const std::string& path, const std::string& columns_path,
                           bool transpose, std::optional<std::size_t> onset = {}) {
    cmar::Dataset d;
    d.matrix = cmar::load_matrix_file(path, transpose);
    d.variable_order = load_columns(columns_path);
    d.fault_onset_index = onset;
    if (d.matrix.cols() != static_cast<Eigen::Index>(d.variable_order.size()))
        throw input_error(path + " has " + std::to_string(d.matrix.cols()) + " columns but " +
                          columns_path + " lists " + std::to_string(d.variable_order.size()) +
                          " tags");
    return d;
}

std::vector<cmar::PcaModel> load_models(const std::string& path) {
    return cmar::models_from_json(nlohmann::json::parse(read_file(path)));
}

double common_alpha(const std::vector<cmar::PcaModel>& models) {
    for (const cmar::PcaModel& m : models)
        if (m.alpha != models.front().alpha)
            throw input_error("models carry different significance levels; pass --threshold");
    return models.front().alpha;
}

struct ThresholdOptions {
    double threshold = -1.0;  // < 0 means unset
    std::string calibration_data;
    std::string calibration_index;
    double target_far = 0.05;
    bool target_far_given = false;
};

void add_threshold_options(CLI::App* cmd, ThresholdOptions& opt) {
    auto* thr = cmd->add_option("--threshold", opt.threshold,
                                "Detection threshold on the plant index");
    auto* cal_data = cmd->add_option(
        "--calibration-data", opt.calibration_data,
        "Normal-operation data file; the threshold is set to its (1 - target-far) index quantile");
    auto* cal_index = cmd->add_option("--calibration-index", opt.calibration_index,
                                      "Text file with one plant-index value per line to calibrate "
                                      "the threshold against");
    cmd->add_option("--target-far", opt.target_far,
                    "False alarm rate targeted by calibration")
        ->check(CLI::Range(0.0, 0.999999))
        ->each([&opt](const std::string&) { opt.target_far_given = true; });
    thr->excludes(cal_data)->excludes(cal_index);
    cal_data->excludes(cal_index);
}

std::vector<double> bic_series(const std::vector<cmar::FusionSample>& series) {
    std::vector<double> out;
    out.reserve(series.size());
    for (const cmar::FusionSample& s : series) out.push_back(s.bic);
    return out;
}

double resolve_threshold(const ThresholdOptions& opt, const std::vector<cmar::PcaModel>& models,
                         const std::string& columns_path, bool transpose) {
    if (opt.target_far_given && opt.calibration_data.empty() && opt.calibration_index.empty())
        throw input_error("--target-far requires --calibration-data or --calibration-index");
    if (opt.threshold >= 0.0) return opt.threshold;
    if (!opt.calibration_data.empty()) {
        const cmar::Dataset normal = load_dataset(opt.calibration_data, columns_path, transpose);
        const auto series = cmar::score_series(models, normal, {0.0, 1});
        return cmar::calibrate_threshold(bic_series(series), opt.target_far);
    }
    if (!opt.calibration_index.empty()) {
        std::vector<double> values;
        std::istringstream in(read_file(opt.calibration_index));
        std::string line;
        while (std::getline(in, line))
            for (const std::string& tok : cmar::detail::split_tokens(line))
                values.push_back(cmar::detail::parse_number(tok, values.size(), 0,
                                                            opt.calibration_index));
        return cmar::calibrate_threshold(values, opt.target_far);
    }
    return common_alpha(models);
}

int cmd_decompose(const std::string& flowsheet_path, const cmar::DecompositionConfig& cfg,
                  const std::string& out_path) {
    const cmar::FlowsheetGraph g = cmar::parse_flowsheet(read_file(flowsheet_path));
    std::vector<std::string> diagnostics;
    const auto blocks = cmar::decompose_blocks(g, cfg, &diagnostics);
    write_file(out_path, cmar::blocks_to_json(blocks).dump(2) + "\n");
    for (const std::string& d : diagnostics) std::cerr << "note: " << d << '\n';
    for (const cmar::MonitoringBlock& b : blocks) {
        std::cout << b.name << ": units=[";
        for (std::size_t i = 0; i < b.units.size(); ++i) std::cout << (i ? " " : "") << b.units[i];
        std::cout << "] variables=" << b.variables.size() << '\n';
    }
    std::cout << blocks.size() << " blocks -> " << out_path << '\n';
    return 0;
}

int cmd_train(const std::string& blocks_path, const std::string& data_path,
              const std::string& columns_path, bool transpose, double alpha,
              const std::string& out_path) {
    const auto blocks = cmar::blocks_from_json(nlohmann::json::parse(read_file(blocks_path)));
    const cmar::Dataset train = load_dataset(data_path, columns_path, transpose);
    std::vector<std::string> warnings;
    const auto models = cmar::fit_block_models(blocks, train, alpha, &warnings);
    for (const std::string& w : warnings) std::cerr << "warning: " << w << '\n';
    write_file(out_path, cmar::models_to_json(models).dump(2) + "\n");
    for (const cmar::PcaModel& m : models)
        std::cout << m.block_name << ": p=" << m.p() << " k=" << m.k()
                  << " t2_limit=" << cmar::detail::g9(m.t2_limit) << '\n';
    std::cout << models.size() << " models -> " << out_path << '\n';
    return 0;
}

int cmd_monitor(const std::string& models_path, const std::string& data_path,
                const std::string& columns_path, bool transpose, const ThresholdOptions& thr,
                int confirm_run, const std::string& out_path) {
    const auto models = load_models(models_path);
    const double threshold = resolve_threshold(thr, models, columns_path, transpose);
    const cmar::Dataset data = load_dataset(data_path, columns_path, transpose);
    const cmar::AlarmConfig cfg{threshold, confirm_run};
    const auto series = cmar::score_series(models, data, cfg);
    std::ostringstream csv;
    cmar::write_monitor_csv(csv, series);
    write_file(out_path, csv.str());

    std::cout << "threshold=" << cmar::detail::g9(threshold) << " confirm_run=" << confirm_run
              << '\n';
    const auto report = cmar::compute_metrics(series, cfg, std::nullopt, data.sample_period_min);
    if (!report.block_alarm_order.empty()) {
        std::cout << "first confirmed block alarms:";
        for (const auto& [block, sample] : report.block_alarm_order)
            std::cout << ' ' << block << '@' << sample;
        std::cout << '\n';
    }
    const auto plant = cmar::confirm_alarms(bic_series(series), cfg);
    if (plant.first_alarm)
        std::cout << "plant alarm confirmed at sample " << *plant.first_alarm << " (t="
                  << cmar::detail::g9(static_cast<double>(*plant.first_alarm) *
                                      data.sample_period_min)
                  << " min)\n";
    else
        std::cout << "no confirmed plant alarm\n";
    std::cout << series.size() << " samples -> " << out_path << '\n';
    return 0;
}

int cmd_contrib(const std::string& models_path, const std::string& data_path,
                const std::string& columns_path, bool transpose, const std::string& block,
                long long from, long long to, const std::string& out_path,
                const std::string& svg_path) {
    const auto models = load_models(models_path);
    const cmar::PcaModel* model = nullptr;
    for (const cmar::PcaModel& m : models)
        if (m.block_name == block) model = &m;
    if (!model) {
        std::string names;
        for (const cmar::PcaModel& m : models) names += (names.empty() ? "" : ", ") + m.block_name;
        throw input_error("unknown block '" + block + "'; bundle has: " + names);
    }
    const cmar::Dataset data = load_dataset(data_path, columns_path, transpose);
    const std::size_t end = to < 0 ? static_cast<std::size_t>(data.matrix.rows())
                                   : static_cast<std::size_t>(to);
    const auto map =
        cmar::compute_contribution_map(*model, data, static_cast<std::size_t>(from), end);
    std::ostringstream csv;
    cmar::write_contribution_csv(csv, map);
    write_file(out_path, csv.str());
    if (!svg_path.empty()) {
        std::ostringstream svg;
        cmar::write_svg_heatmap(svg, map);
        write_file(svg_path, svg.str());
    }
    std::cout << map.times.size() << " samples x " << map.variables.size() << " variables -> "
              << out_path << '\n';
    return 0;
}

struct ManifestEntry {
    std::string fault_id;
    std::string path;
    std::optional<std::size_t> onset;
};

std::vector<ManifestEntry> load_manifest(const std::string& path) {
    std::vector<ManifestEntry> entries;
    std::istringstream in(read_file(path));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line = line.substr(0, hash);
        const auto tok = cmar::detail::split_tokens(line);
        if (tok.empty()) continue;
        if (tok.size() != 3)
            throw input_error(path + ": line " + std::to_string(lineno) +
                              ": expected '<fault_id> <data_path> <onset|->'");
        ManifestEntry e;
        e.fault_id = tok[0];
        e.path = tok[1];
        if (tok[2] != "-")
            e.onset = static_cast<std::size_t>(
                cmar::detail::parse_number(tok[2], lineno - 1, 2, path));
        entries.push_back(std::move(e));
    }
    return entries;
}

int cmd_evaluate(const std::string& models_path, const std::string& manifest_path,
                 const std::string& columns_path, bool transpose, const ThresholdOptions& thr,
                 int confirm_run, const std::string& out_dir) {
    const auto models = load_models(models_path);
    const double threshold = resolve_threshold(thr, models, columns_path, transpose);
    const auto entries = load_manifest(manifest_path);
    std::filesystem::create_directories(out_dir);
    const cmar::AlarmConfig cfg{threshold, confirm_run};

    nlohmann::json aggregate = nlohmann::json::array();
    std::cout << "threshold=" << cmar::detail::g9(threshold) << " confirm_run=" << confirm_run
              << '\n';
    std::cout << "fault     fdr_sample  fdr_confirmed  far       delay_min  first_block\n";
    for (const ManifestEntry& e : entries) {
        nlohmann::json row;
        try {
            cmar::Dataset data = load_dataset(e.path, columns_path, transpose, e.onset);
            const auto series = cmar::score_series(models, data, cfg);
            const auto report =
                cmar::compute_metrics(series, cfg, data.fault_onset_index, data.sample_period_min);
            row = cmar::report_to_json(e.fault_id, report);
            char fdr_s[16] = "-", fdr_c[16] = "-";
            if (e.onset) {
                std::snprintf(fdr_s, sizeof(fdr_s), "%.4f", report.fdr_sample);
                std::snprintf(fdr_c, sizeof(fdr_c), "%.4f", report.fdr_confirmed);
            }
            std::printf("%-9s %-11s %-14s %-9.4f %-10s %s\n", e.fault_id.c_str(), fdr_s, fdr_c,
                        report.far_value,
                        report.detection_delay_min
                            ? cmar::detail::g9(*report.detection_delay_min).c_str()
                            : "-",
                        report.first_alarm_block ? report.first_alarm_block->c_str() : "-");
        } catch (const std::exception& ex) {
            row = {{"fault_id", e.fault_id}, {"error", ex.what()}};
            std::cout << e.fault_id << "  error: " << ex.what() << '\n';
        }
        write_file((std::filesystem::path(out_dir) / ("report_" + e.fault_id + ".json")).string(),
                   row.dump(2) + "\n");
        aggregate.push_back(std::move(row));
    }
    write_file((std::filesystem::path(out_dir) / "aggregate.json").string(),
               aggregate.dump(2) + "\n");
    std::cout << entries.size() << " reports -> " << out_dir << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distributed plant monitoring: flowsheet decomposition, per-block PCA "
                 "fault detection, Bayesian fusion, and benchmark evaluation"};
    app.require_subcommand(1);

    // decompose
    auto* dec = app.add_subcommand("decompose", "Decompose a flowsheet into monitoring blocks");
    std::string flowsheet_path, out_path;
    cmar::DecompositionConfig dcfg;
    dec->add_option("--flowsheet", flowsheet_path, "Flowsheet description file")->required();
    dec->add_option("--delta", dcfg.delta, "MAR merge threshold in (0, 1)")
        ->capture_default_str();
    dec->add_flag("--control-aware", dcfg.control_aware,
                  "Pull each control loop's MV into its CV's block");
    dec->add_flag("--exclusive-streams", dcfg.exclusive_streams,
                  "Assign boundary streams to a single subgraph");
    dec->add_flag("--undirected-neighbors", dcfg.undirected_neighbors,
                  "Allow merging across unit->stream adjacency too");
    dec->add_flag("--move-mv", dcfg.move_mv,
                  "Move the MV between blocks instead of duplicating it");
    dec->add_option("--out", out_path, "Blocks JSON output path")->required();
    dec->callback([&] { cmd_decompose(flowsheet_path, dcfg, out_path); });

    // train
    auto* train = app.add_subcommand("train", "Fit one PCA model per block from normal data");
    std::string blocks_path, data_path, columns_path;
    bool transpose = false;
    double alpha = 0.01;
    train->add_option("--blocks", blocks_path, "Blocks JSON from 'decompose'")->required();
    train->add_option("--data", data_path, "Normal-operation training data")->required();
    train->add_option("--columns", columns_path, "File listing the tag of every data column")
        ->required();
    train->add_flag("--transpose", transpose, "Treat data file rows as variables");
    train->add_option("--alpha", alpha, "Significance level of the T^2 limits")
        ->capture_default_str();
    train->add_option("--out", out_path, "Model bundle JSON output path")->required();
    train->callback(
        [&] { cmd_train(blocks_path, data_path, columns_path, transpose, alpha, out_path); });

    // monitor
    auto* mon = app.add_subcommand("monitor", "Score a data file and write the monitoring CSV");
    std::string models_path;
    ThresholdOptions thr;
    int confirm_run = 7;
    mon->add_option("--models", models_path, "Model bundle from 'train'")->required();
    mon->add_option("--data", data_path, "Data file to monitor")->required();
    mon->add_option("--columns", columns_path, "File listing the tag of every data column")
        ->required();
    mon->add_flag("--transpose", transpose, "Treat data file rows as variables");
    add_threshold_options(mon, thr);
    mon->add_option("--confirm-run", confirm_run,
                    "Consecutive exceedances required to confirm an alarm")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    mon->add_option("--out", out_path, "Monitoring CSV output path")->required();
    mon->callback([&] {
        cmd_monitor(models_path, data_path, columns_path, transpose, thr, confirm_run, out_path);
    });

    // contrib
    auto* con = app.add_subcommand("contrib", "Export a block's contribution map");
    std::string block_name, svg_path;
    long long from = 0, to = -1;
    con->add_option("--models", models_path, "Model bundle from 'train'")->required();
    con->add_option("--data", data_path, "Data file to analyze")->required();
    con->add_option("--columns", columns_path, "File listing the tag of every data column")
        ->required();
    con->add_flag("--transpose", transpose, "Treat data file rows as variables");
    con->add_option("--block", block_name, "Monitoring block name")->required();
    con->add_option("--from", from, "First sample of the window")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    con->add_option("--to", to, "One past the last sample of the window (-1 = end)")
        ->capture_default_str();
    con->add_option("--out", out_path, "Contribution CSV output path")->required();
    con->add_option("--svg", svg_path, "Optional SVG heatmap output path");
    con->callback([&] {
        cmd_contrib(models_path, data_path, columns_path, transpose, block_name, from, to,
                    out_path, svg_path);
    });

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "Compute FDR/FAR reports for a list of fault files");
    std::string manifest_path, out_dir;
    ev->add_option("--models", models_path, "Model bundle from 'train'")->required();
    ev->add_option("--manifest", manifest_path,
                   "File with one '<fault_id> <data_path> <onset|->' line per run")
        ->required();
    ev->add_option("--columns", columns_path, "File listing the tag of every data column")
        ->required();
    ev->add_flag("--transpose", transpose, "Treat data file rows as variables");
    add_threshold_options(ev, thr);
    ev->add_option("--confirm-run", confirm_run,
                   "Consecutive exceedances required to confirm an alarm")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    ev->add_option("--out-dir", out_dir, "Directory for per-fault and aggregate reports")
        ->required();
    ev->callback([&] {
        cmd_evaluate(models_path, manifest_path, columns_path, transpose, thr, confirm_run,
                     out_dir);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const cmar::input_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
