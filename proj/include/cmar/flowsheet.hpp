#pragma once

#include <algorithm>
#include <cctype>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cmar/error.hpp"

// Plant topology: a directed graph whose nodes are unit operations and
// process streams, with measurement tags and control-loop pairs attached.
// Graphs are built (by the parser or programmatically), finalized once,
// and immutable afterwards; all queries are const and safe to share.

namespace cmar {

enum class NodeKind { Unit, Stream };
enum class VarRole { Measured, Manipulated };

struct FlowsheetNode {
    std::string id;
    NodeKind kind = NodeKind::Unit;
    std::string name;
};

struct VariableTag {
    std::string tag;
    std::string node;
    VarRole role = VarRole::Measured;
};

struct ControlLoopPair {
    std::string cv;  // measured tag
    std::string mv;  // manipulated tag
};

namespace detail {

// Orders strings with embedded numbers numerically: XMEAS(2) < XMEAS(10).
inline bool natural_less(std::string_view a, std::string_view b) {
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const unsigned char ca = a[i], cb = b[j];
        if (std::isdigit(ca) && std::isdigit(cb)) {
            std::size_t ia = i, jb = j;
            while (ia < a.size() && std::isdigit(static_cast<unsigned char>(a[ia]))) ++ia;
            while (jb < b.size() && std::isdigit(static_cast<unsigned char>(b[jb]))) ++jb;
            const std::string_view na = a.substr(i, ia - i), nb = b.substr(j, jb - j);
            const std::string_view ta = na.substr(std::min(na.find_first_not_of('0'), na.size()));
            const std::string_view tb = nb.substr(std::min(nb.find_first_not_of('0'), nb.size()));
            if (ta.size() != tb.size()) return ta.size() < tb.size();
            if (ta != tb) return ta < tb;
            i = ia;
            j = jb;
            continue;
        }
        if (ca != cb) return ca < cb;
        ++i;
        ++j;
    }
    return a.size() - i < b.size() - j;
}

struct NaturalLess {
    bool operator()(std::string_view a, std::string_view b) const { return natural_less(a, b); }
};

}  // namespace detail

class FlowsheetGraph {
public:
    void add_node(std::string id, NodeKind kind, std::string name) {
        if (id.empty()) throw input_error("node id must be non-empty");
        if (node_index_.count(id)) throw input_error("duplicate node id '" + id + "'");
        node_index_.emplace(id, nodes_.size());
        adjacency_.emplace_back();
        vars_on_node_.emplace_back();
        nodes_.push_back({std::move(id), kind, std::move(name)});
    }

    void add_edge(const std::string& from, const std::string& to) {
        const std::size_t a = require_node(from);
        const std::size_t b = require_node(to);
        if (nodes_[a].kind == nodes_[b].kind) {
            const char* kind = nodes_[a].kind == NodeKind::Unit ? "unit" : "stream";
            throw input_error("edge '" + from + "' -> '" + to + "' connects two " + kind +
                              " nodes; edges must join a unit and a stream");
        }
        edges_.emplace_back(from, to);
        adjacency_[a].out.push_back(b);
        adjacency_[b].in.push_back(a);
    }

    void add_variable(std::string tag, const std::string& node, VarRole role) {
        if (tag.empty()) throw input_error("variable tag must be non-empty");
        if (var_index_.count(tag)) throw input_error("duplicate variable tag '" + tag + "'");
        const std::size_t n = require_node(node);
        var_index_.emplace(tag, variables_.size());
        vars_on_node_[n].push_back(variables_.size());
        variables_.push_back({std::move(tag), node, role});
    }

    void add_loop(const std::string& cv_tag, const std::string& mv_tag) {
        const VariableTag& cv = require_variable(cv_tag);
        const VariableTag& mv = require_variable(mv_tag);
        if (cv.role != VarRole::Measured)
            throw input_error("loop controlled variable '" + cv_tag + "' is not a measured tag");
        if (mv.role != VarRole::Manipulated)
            throw input_error("loop manipulated variable '" + mv_tag + "' is not a manipulated tag");
        loops_.push_back({cv_tag, mv_tag});
    }

    // Structural checks that need the whole graph: weak connectivity and no
    // dangling streams.
    void finalize() const {
        if (nodes_.empty()) throw input_error("flowsheet has no nodes");
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            if (nodes_[i].kind == NodeKind::Stream && adjacency_[i].in.empty() &&
                adjacency_[i].out.empty())
                throw input_error("stream '" + nodes_[i].id + "' is not connected to any unit");
        }
        std::vector<char> seen(nodes_.size(), 0);
        std::deque<std::size_t> queue{0};
        seen[0] = 1;
        std::size_t reached = 1;
        while (!queue.empty()) {
            const std::size_t n = queue.front();
            queue.pop_front();
            for (const auto& list : {adjacency_[n].out, adjacency_[n].in}) {
                for (std::size_t m : list) {
                    if (!seen[m]) {
                        seen[m] = 1;
                        ++reached;
                        queue.push_back(m);
                    }
                }
            }
        }
        if (reached != nodes_.size()) {
            for (std::size_t i = 0; i < nodes_.size(); ++i)
                if (!seen[i])
                    throw input_error("flowsheet is not weakly connected: node '" + nodes_[i].id +
                                      "' is unreachable from '" + nodes_[0].id + "'");
        }
    }

    const std::vector<FlowsheetNode>& nodes() const { return nodes_; }
    const std::vector<std::pair<std::string, std::string>>& edges() const { return edges_; }
    const std::vector<VariableTag>& variables() const { return variables_; }
    const std::vector<ControlLoopPair>& loops() const { return loops_; }

    bool has_node(const std::string& id) const { return node_index_.count(id) != 0; }

    const FlowsheetNode& node(const std::string& id) const { return nodes_[require_node(id)]; }

    std::size_t node_order(const std::string& id) const { return require_node(id); }

    bool has_variable(const std::string& tag) const { return var_index_.count(tag) != 0; }

    const VariableTag& variable(const std::string& tag) const {
        return require_variable(tag);
    }

    // Tags attached to one node, in declaration order.
    std::vector<std::string> variables_on(const std::string& id) const {
        std::vector<std::string> out;
        for (std::size_t v : vars_on_node_[require_node(id)]) out.push_back(variables_[v].tag);
        return out;
    }

    std::size_t variable_count_on(const std::string& id) const {
        return vars_on_node_[require_node(id)].size();
    }

    std::vector<std::string> out_neighbors(const std::string& id) const {
        return neighbor_ids(adjacency_[require_node(id)].out);
    }

    std::vector<std::string> in_neighbors(const std::string& id) const {
        return neighbor_ids(adjacency_[require_node(id)].in);
    }

private:
    struct Adjacency {
        std::vector<std::size_t> out;
        std::vector<std::size_t> in;
    };

    std::size_t require_node(const std::string& id) const {
        auto it = node_index_.find(id);
        if (it == node_index_.end()) throw input_error("unknown node '" + id + "'");
        return it->second;
    }

    const VariableTag& require_variable(const std::string& tag) const {
        auto it = var_index_.find(tag);
        if (it == var_index_.end()) throw input_error("unknown variable tag '" + tag + "'");
        return variables_[it->second];
    }

    std::vector<std::string> neighbor_ids(const std::vector<std::size_t>& idx) const {
        std::vector<std::string> out;
        for (std::size_t i : idx) out.push_back(nodes_[i].id);
        return out;
    }

    std::vector<FlowsheetNode> nodes_;
    std::vector<std::pair<std::string, std::string>> edges_;
    std::vector<VariableTag> variables_;
    std::vector<ControlLoopPair> loops_;
    std::unordered_map<std::string, std::size_t> node_index_;
    std::unordered_map<std::string, std::size_t> var_index_;
    std::vector<Adjacency> adjacency_;
    std::vector<std::vector<std::size_t>> vars_on_node_;
};

// A set of nodes treated as one candidate monitoring region. The id is
// stable across merge passes (a merged subgraph keeps the smaller id).
struct Subgraph {
    int id = 0;
    std::set<std::string> nodes;
};

struct Partition {
    std::vector<Subgraph> subgraphs;
};

namespace detail {

inline std::vector<std::string> split_tokens(std::string_view line) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t j = i;
        while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
        if (j > i) tokens.emplace_back(line.substr(i, j - i));
        i = j;
    }
    return tokens;
}

}  // namespace detail

// Parses the line-oriented flowsheet format:
//   unit <id> <name>      stream <id> <name>      edge <from> <to>
//   var <tag> <node> measured|manipulated         loop <cv_tag> <mv_tag>
// '#' starts a comment. Node records must precede edges and var records
// must precede loops. Every reported error carries its line number.
inline FlowsheetGraph parse_flowsheet(std::string_view text) {
    FlowsheetGraph g;
    std::size_t lineno = 0;
    bool saw_edge = false;
    bool saw_loop = false;

    auto fail = [&](const std::string& msg) -> void {
        throw input_error("line " + std::to_string(lineno) + ": " + msg);
    };

    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = std::min(text.find('\n', pos), text.size());
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++lineno;
        if (const std::size_t hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        const std::vector<std::string> tok = detail::split_tokens(line);
        if (tok.empty()) {
            if (eol == text.size()) break;
            continue;
        }
        try {
            const std::string& rec = tok[0];
            if (rec == "unit" || rec == "stream") {
                if (saw_edge) fail("node record after the first edge record");
                if (tok.size() < 3) fail("expected '" + rec + " <id> <name>'");
                std::string name = tok[2];
                for (std::size_t i = 3; i < tok.size(); ++i) name += " " + tok[i];
                g.add_node(tok[1], rec == "unit" ? NodeKind::Unit : NodeKind::Stream,
                           std::move(name));
            } else if (rec == "edge") {
                if (tok.size() != 3) fail("expected 'edge <from> <to>'");
                saw_edge = true;
                g.add_edge(tok[1], tok[2]);
            } else if (rec == "var") {
                if (saw_loop) fail("var record after the first loop record");
                if (tok.size() != 4) fail("expected 'var <tag> <node> measured|manipulated'");
                VarRole role;
                if (tok[3] == "measured")
                    role = VarRole::Measured;
                else if (tok[3] == "manipulated")
                    role = VarRole::Manipulated;
                else
                    fail("variable role must be 'measured' or 'manipulated', got '" + tok[3] + "'");
                g.add_variable(tok[1], tok[2], role);
            } else if (rec == "loop") {
                if (tok.size() != 3) fail("expected 'loop <cv_tag> <mv_tag>'");
                saw_loop = true;
                g.add_loop(tok[1], tok[2]);
            } else {
                fail("unknown record '" + rec + "'");
            }
        } catch (const input_error& e) {
            const std::string what = e.what();
            if (what.rfind("line ", 0) == 0) throw;
            fail(what);
        }
        if (eol == text.size()) break;
    }
    g.finalize();
    return g;
}

// Canonical serialization: nodes, edges, vars, loops, single-space tokens.
// Parsing the output reproduces the graph exactly.
inline std::string serialize_flowsheet(const FlowsheetGraph& g) {
    std::ostringstream os;
    for (const FlowsheetNode& n : g.nodes())
        os << (n.kind == NodeKind::Unit ? "unit " : "stream ") << n.id << ' ' << n.name << '\n';
    for (const auto& [from, to] : g.edges()) os << "edge " << from << ' ' << to << '\n';
    for (const VariableTag& v : g.variables())
        os << "var " << v.tag << ' ' << v.node << ' '
           << (v.role == VarRole::Measured ? "measured" : "manipulated") << '\n';
    for (const ControlLoopPair& q : g.loops()) os << "loop " << q.cv << ' ' << q.mv << '\n';
    return os.str();
}

// One subgraph per unit: the unit plus every stream adjacent in either
// direction. Streams between two units appear in both subgraphs unless
// exclusive_streams is set, in which case each stream goes to the unit it
// flows into (falling back to its source unit for terminal streams).
inline Partition initial_subgraphs(const FlowsheetGraph& g, bool exclusive_streams = false) {
    std::vector<std::string> units;
    for (const FlowsheetNode& n : g.nodes())
        if (n.kind == NodeKind::Unit) units.push_back(n.id);

    std::map<std::string, std::string> stream_owner;
    if (exclusive_streams) {
        for (const FlowsheetNode& n : g.nodes()) {
            if (n.kind != NodeKind::Stream) continue;
            std::string best;
            std::size_t best_order = 0;
            for (const auto& lists : {g.out_neighbors(n.id), g.in_neighbors(n.id)}) {
                for (const std::string& u : lists) {
                    const std::size_t order = g.node_order(u);
                    if (best.empty() || order < best_order) {
                        best = u;
                        best_order = order;
                    }
                }
                if (!best.empty()) break;  // downstream units take precedence
            }
            stream_owner[n.id] = best;
        }
    }

    Partition p;
    int next_id = 0;
    for (const std::string& u : units) {
        Subgraph s;
        s.id = next_id++;
        s.nodes.insert(u);
        for (const auto& lists : {g.out_neighbors(u), g.in_neighbors(u)}) {
            for (const std::string& m : lists) {
                if (exclusive_streams && stream_owner[m] != u) continue;
                s.nodes.insert(m);
            }
        }
        p.subgraphs.push_back(std::move(s));
    }
    return p;
}

// Number of variable tags (measured and manipulated) attached to the
// subgraph's nodes.
inline int measurement_count(const Subgraph& s, const FlowsheetGraph& g) {
    int count = 0;
    for (const std::string& id : s.nodes) count += static_cast<int>(g.variable_count_on(id));
    return count;
}

}  // namespace cmar
