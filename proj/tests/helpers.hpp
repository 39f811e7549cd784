#pragma once

// Shared test fixtures: random flowsheet generation for property tests, a
// factor-model synthetic data generator for end-to-end detection checks,
// and the shipped TEP assets.

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cmar/decompose.hpp"
#include "cmar/eval.hpp"
#include "cmar/flowsheet.hpp"

namespace testutil {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string data_path(const std::string& name) {
    return std::string(CMAR_DATA_DIR) + "/" + name;
}

inline cmar::FlowsheetGraph tep_graph() {
    return cmar::parse_flowsheet(read_file(data_path("tep_flowsheet.txt")));
}

inline std::vector<std::string> tep_columns() {
    std::vector<std::string> cols;
    std::istringstream in(read_file(data_path("tep_columns.txt")));
    std::string line;
    while (std::getline(in, line))
        if (!line.empty() && line[0] != '#') cols.push_back(line);
    return cols;
}

// Random weakly connected unit/stream flowsheet. Every added unit is tied
// to an existing unit through a fresh stream, then extra streams and
// variables are sprinkled on; each stream always touches at least one unit.
inline cmar::FlowsheetGraph random_flowsheet(std::mt19937_64& rng, int max_units = 6,
                                             int max_extra_streams = 4, int max_vars_per_node = 3,
                                             int max_loops = 3) {
    cmar::FlowsheetGraph g;
    std::uniform_int_distribution<int> unit_count(1, max_units);
    const int units = unit_count(rng);
    for (int u = 0; u < units; ++u)
        g.add_node("u" + std::to_string(u), cmar::NodeKind::Unit, "unit " + std::to_string(u));

    int streams = 0;
    auto flip = [&] { return std::uniform_int_distribution<int>(0, 1)(rng) == 1; };
    auto connect = [&](const std::string& stream, const std::string& unit) {
        if (flip())
            g.add_edge(stream, unit);
        else
            g.add_edge(unit, stream);
    };
    for (int u = 1; u < units; ++u) {
        const std::string sid = "s" + std::to_string(streams++);
        g.add_node(sid, cmar::NodeKind::Stream, "stream");
        connect(sid, "u" + std::to_string(std::uniform_int_distribution<int>(0, u - 1)(rng)));
        connect(sid, "u" + std::to_string(u));
    }
    const int extra = std::uniform_int_distribution<int>(0, max_extra_streams)(rng);
    for (int e = 0; e < extra; ++e) {
        const std::string sid = "s" + std::to_string(streams++);
        g.add_node(sid, cmar::NodeKind::Stream, "stream");
        const int endpoints = std::uniform_int_distribution<int>(1, 2)(rng);
        std::set<std::string> used;
        for (int t = 0; t < endpoints; ++t) {
            const std::string unit =
                "u" + std::to_string(std::uniform_int_distribution<int>(0, units - 1)(rng));
            if (!used.insert(unit).second) continue;
            connect(sid, unit);
        }
    }

    int tag = 0;
    std::vector<std::string> measured, manipulated;
    for (const cmar::FlowsheetNode& n : g.nodes()) {
        const int vars = std::uniform_int_distribution<int>(0, max_vars_per_node)(rng);
        for (int v = 0; v < vars; ++v) {
            const bool is_measured = flip();
            const std::string name = "V" + std::to_string(tag++);
            g.add_variable(name, n.id,
                           is_measured ? cmar::VarRole::Measured : cmar::VarRole::Manipulated);
            (is_measured ? measured : manipulated).push_back(name);
        }
    }
    if (g.variables().empty()) {
        g.add_variable("V" + std::to_string(tag++), "u0", cmar::VarRole::Measured);
        measured.push_back(g.variables().back().tag);
    }
    if (!measured.empty() && !manipulated.empty()) {
        const int loops = std::uniform_int_distribution<int>(0, max_loops)(rng);
        std::set<std::string> used_mv;
        for (int q = 0; q < loops; ++q) {
            const std::string& cv =
                measured[std::uniform_int_distribution<std::size_t>(0, measured.size() - 1)(rng)];
            const std::string& mv = manipulated[std::uniform_int_distribution<std::size_t>(
                0, manipulated.size() - 1)(rng)];
            if (!used_mv.insert(mv).second) continue;
            g.add_loop(cv, mv);
        }
    }
    g.finalize();
    return g;
}

inline bool graphs_equal(const cmar::FlowsheetGraph& a, const cmar::FlowsheetGraph& b) {
    if (a.nodes().size() != b.nodes().size() || a.edges() != b.edges() ||
        a.loops().size() != b.loops().size() || a.variables().size() != b.variables().size())
        return false;
    for (std::size_t i = 0; i < a.nodes().size(); ++i) {
        const auto& na = a.nodes()[i];
        const auto& nb = b.nodes()[i];
        if (na.id != nb.id || na.kind != nb.kind || na.name != nb.name) return false;
    }
    for (std::size_t i = 0; i < a.variables().size(); ++i) {
        const auto& va = a.variables()[i];
        const auto& vb = b.variables()[i];
        if (va.tag != vb.tag || va.node != vb.node || va.role != vb.role) return false;
    }
    for (std::size_t i = 0; i < a.loops().size(); ++i)
        if (a.loops()[i].cv != b.loops()[i].cv || a.loops()[i].mv != b.loops()[i].mv) return false;
    return true;
}

// Correlated normal-operation process: within each block, variables load on
// two latent factors with small independent noise, so a shift on one
// variable breaks the block's correlation structure and stands out. The
// plant's distribution (factor wiring, loadings, offsets, scales) is fixed
// at construction; sample() draws any number of runs from that same
// distribution. Shared variables keep the factor of the first block that
// owns them.
class SyntheticPlant {
public:
    SyntheticPlant(const std::vector<cmar::MonitoringBlock>& blocks,
                   std::vector<std::string> columns, std::uint64_t seed, double noise = 0.25)
        : columns_(std::move(columns)), noise_(noise) {
        const int p = static_cast<int>(columns_.size());
        factor_of_.assign(p, -1);
        loading_.assign(p, 1.0);
        offset_.assign(p, 0.0);
        scale_.assign(p, 1.0);
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> load_dist(0.8, 1.2);
        std::uniform_real_distribution<double> offset_dist(-2.0, 2.0);
        std::uniform_real_distribution<double> scale_dist(0.5, 3.0);
        factor_count_ = 0;
        for (const cmar::MonitoringBlock& b : blocks) {
            const int f0 = factor_count_;
            factor_count_ += 2;
            int q = 0;
            for (const std::string& tag : b.variables) {
                const auto it = std::find(columns_.begin(), columns_.end(), tag);
                if (it == columns_.end())
                    throw std::runtime_error("tag missing from columns: " + tag);
                const int j = static_cast<int>(it - columns_.begin());
                if (factor_of_[j] < 0) {
                    factor_of_[j] = f0 + (q % 2);
                    loading_[j] = load_dist(rng) * (q % 3 == 2 ? -1.0 : 1.0);
                    offset_[j] = offset_dist(rng);
                    scale_[j] = scale_dist(rng);
                }
                ++q;
            }
        }
    }

    Eigen::MatrixXd sample(int n, std::mt19937_64& rng) const {
        const int p = static_cast<int>(columns_.size());
        std::normal_distribution<double> gauss(0.0, 1.0);
        Eigen::MatrixXd X(n, p);
        std::vector<double> f(factor_count_);
        for (int i = 0; i < n; ++i) {
            for (double& v : f) v = gauss(rng);
            for (int j = 0; j < p; ++j)
                X(i, j) = offset_[j] +
                          scale_[j] * (loading_[j] * f[factor_of_[j]] + noise_ * gauss(rng));
        }
        return X;
    }

    const std::vector<std::string>& columns() const { return columns_; }

private:
    std::vector<std::string> columns_;
    std::vector<int> factor_of_;
    std::vector<double> loading_, offset_, scale_;
    int factor_count_ = 0;
    double noise_;
};

}  // namespace testutil
