#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cmar/error.hpp"
#include "cmar/flowsheet.hpp"

// Two-phase decomposition of a flowsheet into monitoring blocks.
// Phase one iteratively merges unit-centered subgraphs whose share of the
// plant's measurements (MAR) falls below a threshold, always into the
// stream-adjacent neighbor with the smallest MAR. Phase two pulls each
// control loop's manipulated variable into the block holding its
// controlled variable.

namespace cmar {

struct DecompositionConfig {
    double delta = 0.15;             // MAR merge threshold, in (0, 1)
    bool exclusive_streams = false;  // assign boundary streams to one subgraph only
    bool control_aware = false;      // run phase two after phase one
    bool undirected_neighbors = false;  // also accept unit->stream adjacency when merging
    bool move_mv = false;            // phase two moves the MV instead of duplicating it
};

struct MonitoringBlock {
    std::string name;
    std::vector<std::string> units;      // unit node ids, flowsheet order
    std::vector<std::string> variables;  // tags in natural tag order
};

// Share of the partition's measurements held by subgraph s.
inline double mar(const Subgraph& s, const Partition& p, const FlowsheetGraph& g) {
    bool member = false;
    long total = 0;
    for (const Subgraph& sg : p.subgraphs) {
        total += measurement_count(sg, g);
        member = member || sg.id == s.id;
    }
    if (!member) throw input_error("subgraph " + std::to_string(s.id) + " is not in the partition");
    if (total <= 0)
        throw input_error("partition of " + std::to_string(p.subgraphs.size()) +
                          " subgraphs has zero measurements; MAR is undefined");
    return static_cast<double>(measurement_count(s, g)) / static_cast<double>(total);
}

struct MergePassResult {
    Partition partition;
    int merges = 0;
    std::vector<std::string> diagnostics;  // pool members left unmerged and why
};

namespace detail {

// Subgraphs reachable from s through a directed stream->unit edge
// (optionally unit->stream as well), excluding s itself. Returned as
// indices into the partition.
inline std::set<std::size_t> neighbor_subgraphs(const Partition& p, std::size_t self,
                                                const FlowsheetGraph& g,
                                                bool undirected_neighbors) {
    std::map<std::string, std::size_t> unit_home;
    for (std::size_t j = 0; j < p.subgraphs.size(); ++j)
        for (const std::string& id : p.subgraphs[j].nodes)
            if (g.node(id).kind == NodeKind::Unit) unit_home[id] = j;

    std::set<std::size_t> neighbors;
    for (const std::string& id : p.subgraphs[self].nodes) {
        if (g.node(id).kind != NodeKind::Stream) continue;
        std::vector<std::string> units = g.out_neighbors(id);
        if (undirected_neighbors) {
            const std::vector<std::string> up = g.in_neighbors(id);
            units.insert(units.end(), up.begin(), up.end());
        }
        for (const std::string& u : units) {
            const auto it = unit_home.find(u);
            if (it != unit_home.end() && it->second != self) neighbors.insert(it->second);
        }
    }
    return neighbors;
}

}  // namespace detail

// One merging pass: subgraphs with MAR below delta are processed in
// ascending MAR order (ties by smaller id) and merged into their
// smallest-MAR neighbor. A subgraph takes part in at most one merge per
// pass; pool members whose neighbors are all taken defer to the next pass.
inline MergePassResult merge_pass(const Partition& p, const FlowsheetGraph& g, double delta,
                                  bool undirected_neighbors = false) {
    const std::size_t n = p.subgraphs.size();
    std::vector<double> ratios(n);
    for (std::size_t i = 0; i < n; ++i) ratios[i] = mar(p.subgraphs[i], p, g);

    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < n; ++i)
        if (ratios[i] < delta) pool.push_back(i);
    std::sort(pool.begin(), pool.end(), [&](std::size_t a, std::size_t b) {
        if (ratios[a] != ratios[b]) return ratios[a] < ratios[b];
        return p.subgraphs[a].id < p.subgraphs[b].id;
    });

    MergePassResult result;
    std::vector<char> merged(n, 0);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i : pool) {
        if (merged[i]) continue;
        const std::set<std::size_t> neighbors =
            detail::neighbor_subgraphs(p, i, g, undirected_neighbors);
        std::size_t best = n;
        for (std::size_t j : neighbors) {
            if (merged[j]) continue;
            if (best == n || ratios[j] < ratios[best] ||
                (ratios[j] == ratios[best] && p.subgraphs[j].id < p.subgraphs[best].id))
                best = j;
        }
        if (best == n) {
            result.diagnostics.push_back(
                "subgraph " + std::to_string(p.subgraphs[i].id) +
                (neighbors.empty() ? " has no downstream neighbor; left unmerged"
                                   : " deferred: all neighbors already merged this pass"));
            continue;
        }
        merged[i] = merged[best] = 1;
        pairs.emplace_back(i, best);
    }

    for (std::size_t i = 0; i < n; ++i)
        if (!merged[i]) result.partition.subgraphs.push_back(p.subgraphs[i]);
    for (const auto& [a, b] : pairs) {
        Subgraph s;
        s.id = std::min(p.subgraphs[a].id, p.subgraphs[b].id);
        s.nodes = p.subgraphs[a].nodes;
        s.nodes.insert(p.subgraphs[b].nodes.begin(), p.subgraphs[b].nodes.end());
        result.partition.subgraphs.push_back(std::move(s));
    }
    std::sort(result.partition.subgraphs.begin(), result.partition.subgraphs.end(),
              [](const Subgraph& a, const Subgraph& b) { return a.id < b.id; });
    result.merges = static_cast<int>(pairs.size());
    return result;
}

// Phase one: repeat merge passes until none applies.
inline Partition mar_decompose(const FlowsheetGraph& g, const DecompositionConfig& cfg,
                               std::vector<std::string>* diagnostics = nullptr) {
    if (!(cfg.delta > 0.0) || !(cfg.delta < 1.0))
        throw input_error("delta must lie strictly in (0, 1)");
    Partition p = initial_subgraphs(g, cfg.exclusive_streams);
    while (true) {
        MergePassResult pass = merge_pass(p, g, cfg.delta, cfg.undirected_neighbors);
        if (diagnostics)
            diagnostics->insert(diagnostics->end(), pass.diagnostics.begin(),
                                pass.diagnostics.end());
        p = std::move(pass.partition);
        if (pass.merges == 0) break;
    }
    return p;
}

// One block per subgraph: all tags on the subgraph's nodes, natural tag
// order, named after its unit nodes.
inline std::vector<MonitoringBlock> blocks_from_partition(const Partition& p,
                                                          const FlowsheetGraph& g) {
    std::vector<MonitoringBlock> blocks;
    for (const Subgraph& s : p.subgraphs) {
        MonitoringBlock b;
        for (const std::string& id : s.nodes) {
            if (g.node(id).kind == NodeKind::Unit) b.units.push_back(id);
            for (const std::string& tag : g.variables_on(id)) b.variables.push_back(tag);
        }
        std::sort(b.units.begin(), b.units.end(), [&](const std::string& a, const std::string& c) {
            return g.node_order(a) < g.node_order(c);
        });
        std::sort(b.variables.begin(), b.variables.end(), detail::NaturalLess{});
        if (b.variables.empty()) {
            std::string who = "subgraph " + std::to_string(s.id) + " (";
            for (std::size_t i = 0; i < b.units.size(); ++i)
                who += (i ? ", " : "") + b.units[i];
            throw input_error(who + ") carries no variables; lower delta or fix the flowsheet");
        }
        for (std::size_t i = 0; i < b.units.size(); ++i)
            b.name += (i ? "+" : "") + b.units[i];
        blocks.push_back(std::move(b));
    }
    return blocks;
}

// Phase two: for every control loop whose CV and MV live in different
// blocks, bring the MV into the CV's block. By default the MV keeps its
// original membership (set union); with move_mv it is removed from every
// other block instead.
inline void control_refine(std::vector<MonitoringBlock>& blocks,
                           const std::vector<ControlLoopPair>& loops, bool move_mv = false) {
    auto find_block = [&](const std::string& tag) -> std::size_t {
        for (std::size_t i = 0; i < blocks.size(); ++i)
            if (std::find(blocks[i].variables.begin(), blocks[i].variables.end(), tag) !=
                blocks[i].variables.end())
                return i;
        return blocks.size();
    };
    for (const ControlLoopPair& q : loops) {
        const std::size_t cv_block = find_block(q.cv);
        if (cv_block == blocks.size())
            throw input_error("control loop (" + q.cv + ", " + q.mv + "): '" + q.cv +
                              "' is not in any block");
        if (find_block(q.mv) == blocks.size())
            throw input_error("control loop (" + q.cv + ", " + q.mv + "): '" + q.mv +
                              "' is not in any block");
        std::vector<std::string>& vars = blocks[cv_block].variables;
        const bool present = std::find(vars.begin(), vars.end(), q.mv) != vars.end();
        if (!present)
            vars.insert(std::upper_bound(vars.begin(), vars.end(), q.mv, detail::NaturalLess{}),
                        q.mv);
        if (move_mv) {
            for (std::size_t i = 0; i < blocks.size(); ++i) {
                if (i == cv_block) continue;
                auto& other = blocks[i].variables;
                other.erase(std::remove(other.begin(), other.end(), q.mv), other.end());
                if (other.empty())
                    throw computation_error("moving '" + q.mv + "' empties block '" +
                                            blocks[i].name + "'");
            }
        }
    }
}

// Full pipeline: phase one, block construction, optional phase two.
inline std::vector<MonitoringBlock> decompose_blocks(const FlowsheetGraph& g,
                                                     const DecompositionConfig& cfg,
                                                     std::vector<std::string>* diagnostics = nullptr) {
    std::vector<MonitoringBlock> blocks =
        blocks_from_partition(mar_decompose(g, cfg, diagnostics), g);
    if (cfg.control_aware) control_refine(blocks, g.loops(), cfg.move_mv);
    return blocks;
}

inline nlohmann::json blocks_to_json(const std::vector<MonitoringBlock>& blocks) {
    nlohmann::json doc = nlohmann::json::array();
    for (const MonitoringBlock& b : blocks)
        doc.push_back({{"name", b.name}, {"units", b.units}, {"variables", b.variables}});
    return doc;
}

inline std::vector<MonitoringBlock> blocks_from_json(const nlohmann::json& doc) {
    if (!doc.is_array()) throw input_error("blocks document must be a JSON array");
    std::vector<MonitoringBlock> blocks;
    for (const nlohmann::json& j : doc) {
        MonitoringBlock b;
        b.name = j.at("name").get<std::string>();
        b.units = j.at("units").get<std::vector<std::string>>();
        b.variables = j.at("variables").get<std::vector<std::string>>();
        if (b.variables.empty())
            throw input_error("block '" + b.name + "' has no variables");
        blocks.push_back(std::move(b));
    }
    return blocks;
}

}  // namespace cmar
