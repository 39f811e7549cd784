#pragma once

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "cmar/error.hpp"
#include "cmar/eval.hpp"

// Deterministic file emitters. All floating-point values are printed with
// 9 significant digits so that identical runs produce byte-identical files.

namespace cmar {

namespace detail {

inline std::string g9(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

}  // namespace detail

// Monitoring CSV: sample,time_min,<block>_t2,<block>_post,...,bic,alarm
inline void write_monitor_csv(std::ostream& os, const std::vector<FusionSample>& series) {
    if (series.empty()) throw input_error("monitoring series is empty");
    os << "sample,time_min";
    for (const BlockScore& b : series.front().per_block)
        os << ',' << b.block_name << "_t2," << b.block_name << "_post";
    os << ",bic,alarm\n";
    for (const FusionSample& s : series) {
        os << s.index << ',' << detail::g9(s.time_min);
        for (const BlockScore& b : s.per_block)
            os << ',' << detail::g9(b.t2) << ',' << detail::g9(b.posterior);
        os << ',' << detail::g9(s.bic) << ',' << (s.alarm ? 1 : 0) << '\n';
    }
}

// Per-block clipped contribution ratios over a sample window.
struct ContributionMap {
    std::string block_name;
    std::vector<std::size_t> times;        // sample indices
    std::vector<std::string> variables;    // tag per column
    std::vector<std::vector<double>> values;  // times x variables, in [0, 1]
};

inline ContributionMap compute_contribution_map(const PcaModel& model, const Dataset& data,
                                                std::size_t from, std::size_t to) {
    const auto n = static_cast<std::size_t>(data.matrix.rows());
    if (to > n) to = n;
    if (from >= to)
        throw input_error("empty sample window [" + std::to_string(from) + ", " +
                          std::to_string(to) + ")");
    std::vector<Eigen::Index> cols;
    for (const std::string& tag : model.variables) {
        Eigen::Index idx = -1;
        for (std::size_t j = 0; j < data.variable_order.size(); ++j)
            if (data.variable_order[j] == tag) idx = static_cast<Eigen::Index>(j);
        if (idx < 0)
            throw input_error("model '" + model.block_name + "' references variable '" + tag +
                              "' absent from the dataset columns");
        cols.push_back(idx);
    }
    ContributionMap map;
    map.block_name = model.block_name;
    map.variables = model.variables;
    for (std::size_t i = from; i < to; ++i) {
        Eigen::VectorXd x(cols.size());
        for (std::size_t v = 0; v < cols.size(); ++v)
            x[v] = data.matrix(static_cast<Eigen::Index>(i), cols[v]);
        const Eigen::VectorXd cont = contributions(model, standardize(model.standardizer, x));
        map.times.push_back(i);
        map.values.emplace_back(cont.begin(), cont.end());
    }
    return map;
}

// Contribution CSV: sample,<var1>,<var2>,...
inline void write_contribution_csv(std::ostream& os, const ContributionMap& map) {
    os << "sample";
    for (const std::string& v : map.variables) os << ',' << v;
    os << '\n';
    for (std::size_t r = 0; r < map.times.size(); ++r) {
        os << map.times[r];
        for (double v : map.values[r]) os << ',' << detail::g9(v);
        os << '\n';
    }
}

// Grayscale heatmap, one rect per cell: 0 -> white, 1 -> black. Column
// labels name the variables; row labels mark sample indices at a stride
// that keeps them readable.
inline void write_svg_heatmap(std::ostream& os, const ContributionMap& map) {
    const std::size_t rows = map.times.size();
    const std::size_t cols = map.variables.size();
    if (rows == 0 || cols == 0) throw input_error("contribution map is empty");
    const int cell_w = 14;
    const int cell_h = rows > 240 ? 2 : (rows > 120 ? 4 : 10);
    const int left = 58, top = 96;
    const std::size_t label_stride = rows <= 24 ? 1 : (rows + 23) / 24;
    const int width = left + static_cast<int>(cols) * cell_w + 10;
    const int height = top + static_cast<int>(rows) * cell_h + 10;

    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
       << height << "\">\n";
    os << "<text x=\"" << left << "\" y=\"14\" font-size=\"12\" font-family=\"monospace\">"
       << map.block_name << " contribution ratios</text>\n";
    for (std::size_t c = 0; c < cols; ++c) {
        const int x = left + static_cast<int>(c) * cell_w + cell_w / 2;
        os << "<text x=\"" << x << "\" y=\"" << top - 6 << "\" font-size=\"9\" "
           << "font-family=\"monospace\" text-anchor=\"start\" transform=\"rotate(-60 " << x << ' '
           << top - 6 << ")\">" << map.variables[c] << "</text>\n";
    }
    for (std::size_t r = 0; r < rows; ++r) {
        const int y = top + static_cast<int>(r) * cell_h;
        if (r % label_stride == 0)
            os << "<text x=\"" << left - 6 << "\" y=\"" << y + cell_h << "\" font-size=\"9\" "
               << "font-family=\"monospace\" text-anchor=\"end\">" << map.times[r] << "</text>\n";
        for (std::size_t c = 0; c < cols; ++c) {
            const double v = std::min(1.0, std::max(0.0, map.values[r][c]));
            const int gray = static_cast<int>(std::lround(255.0 * (1.0 - v)));
            os << "<rect x=\"" << left + static_cast<int>(c) * cell_w << "\" y=\"" << y
               << "\" width=\"" << cell_w << "\" height=\"" << cell_h << "\" fill=\"rgb(" << gray
               << ',' << gray << ',' << gray << ")\"/>\n";
        }
    }
    os << "</svg>\n";
}

}  // namespace cmar
