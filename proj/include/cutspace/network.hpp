#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "cutspace/error.hpp"

namespace cutspace {

using Json = nlohmann::ordered_json;

enum class NodeKind { Data, Param };

// One vertex of the network. `parents` are node indices in document order;
// the parent list order fixes the CPT row indexing (last parent fastest).
struct Node {
    std::string name;
    NodeKind kind = NodeKind::Param;
    std::vector<int> parents;
    int states = 0;                         // 0 when no discrete spec
    std::vector<std::vector<double>> cpt;   // one row per parent-state combination
};

// Directed acyclic network over named nodes bipartitioned into data nodes X
// and parameter nodes Theta. Immutable after construction; the node order of
// the source document is the canonical order used by every renderer.
class BayesNet {
  public:
    BayesNet() = default;

    explicit BayesNet(std::vector<Node> nodes) : nodes_(std::move(nodes)) {
        for (int i = 0; i < size(); ++i) {
            if (nodes_[i].name.empty())
                throw ValidationError("empty node id");
            if (!index_.emplace(nodes_[i].name, i).second)
                throw ValidationError("duplicate node id: " + nodes_[i].name);
        }
        children_.assign(size(), {});
        for (int i = 0; i < size(); ++i) {
            for (int p : nodes_[i].parents) {
                if (p < 0 || p >= size())
                    throw ValidationError("unresolved parent reference in node " + nodes_[i].name);
                children_[p].push_back(i);
            }
        }
        check_acyclic();
        check_cpts();
    }

    int size() const { return static_cast<int>(nodes_.size()); }
    const Node& node(int i) const { return nodes_.at(i); }
    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<int>& children(int i) const { return children_.at(i); }

    bool has(const std::string& name) const { return index_.count(name) > 0; }

    int index_of(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end())
            throw ValidationError("unknown node: " + name);
        return it->second;
    }

    const std::string& name(int i) const { return nodes_.at(i).name; }
    bool is_data(int i) const { return nodes_.at(i).kind == NodeKind::Data; }

    std::vector<int> data_nodes() const {
        std::vector<int> out;
        for (int i = 0; i < size(); ++i)
            if (is_data(i)) out.push_back(i);
        return out;
    }

    std::vector<int> param_nodes() const {
        std::vector<int> out;
        for (int i = 0; i < size(); ++i)
            if (!is_data(i)) out.push_back(i);
        return out;
    }

    // True when every node carries a discrete spec.
    bool discrete() const {
        return std::all_of(nodes_.begin(), nodes_.end(),
                           [](const Node& n) { return n.states > 0; });
    }

    // All u with a directed path u -> ... -> v; excludes v itself.
    std::set<int> ancestors(int v) const {
        if (v < 0 || v >= size())
            throw ValidationError("unknown node index");
        std::set<int> seen;
        std::vector<int> stack(nodes_[v].parents.begin(), nodes_[v].parents.end());
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            if (!seen.insert(u).second) continue;
            for (int p : nodes_[u].parents) stack.push_back(p);
        }
        return seen;
    }

    std::set<int> ancestors(const std::string& name) const { return ancestors(index_of(name)); }

  private:
    void check_acyclic() const {
        std::vector<int> indeg(size(), 0);
        for (int i = 0; i < size(); ++i) indeg[i] = static_cast<int>(nodes_[i].parents.size());
        std::vector<int> queue;
        for (int i = 0; i < size(); ++i)
            if (indeg[i] == 0) queue.push_back(i);
        int done = 0;
        while (!queue.empty()) {
            int u = queue.back();
            queue.pop_back();
            ++done;
            for (int c : children_[u])
                if (--indeg[c] == 0) queue.push_back(c);
        }
        if (done != size())
            throw ValidationError("cycle in parent relation");
    }

    void check_cpts() const {
        int with = 0;
        for (const Node& n : nodes_)
            if (n.states > 0) ++with;
        if (with == 0) return;
        if (with != size())
            throw ValidationError("mixed discrete specification: all nodes need a CPT or none");
        for (const Node& n : nodes_) {
            if (n.states < 2)
                throw ValidationError("node " + n.name + ": state count must be >= 2");
            std::size_t rows = 1;
            for (int p : n.parents) rows *= static_cast<std::size_t>(nodes_[p].states);
            if (n.cpt.size() != rows)
                throw ValidationError("node " + n.name + ": CPT row count must equal product of parent state counts");
            for (const auto& row : n.cpt) {
                if (row.size() != static_cast<std::size_t>(n.states))
                    throw ValidationError("node " + n.name + ": CPT row length must equal state count");
                double sum = 0.0;
                for (double x : row) {
                    if (!(x >= 0.0))
                        throw ValidationError("node " + n.name + ": CPT entries must be nonnegative");
                    sum += x;
                }
                if (std::abs(sum - 1.0) > 1e-9)
                    throw ValidationError("node " + n.name + ": CPT row must sum to 1");
            }
        }
    }

    std::vector<Node> nodes_;
    std::unordered_map<std::string, int> index_;
    std::vector<std::vector<int>> children_;
};

// Observed states for data nodes, keyed by node index.
using Evidence = std::map<int, int>;

namespace detail {

inline std::string line_col(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') { ++line; col = 1; }
        else ++col;
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline Json parse_json(const std::string& text) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string(e.what()) + " (" + line_col(text, e.byte) + ")");
    }
}

} // namespace detail

inline BayesNet network_from_json(const Json& doc) {
    if (!doc.is_object() || !doc.contains("nodes") || !doc["nodes"].is_array())
        throw ParseError("network document must be an object with a \"nodes\" array");
    std::unordered_map<std::string, int> ids;
    const Json& arr = doc["nodes"];
    for (int i = 0; i < static_cast<int>(arr.size()); ++i) {
        const Json& jn = arr[i];
        if (!jn.is_object() || !jn.contains("id") || !jn["id"].is_string())
            throw ParseError("node " + std::to_string(i) + ": missing string \"id\"");
        ids.emplace(jn["id"].get<std::string>(), i);
    }
    std::vector<Node> nodes;
    for (const Json& jn : arr) {
        Node n;
        n.name = jn["id"].get<std::string>();
        std::string kind = jn.value("kind", std::string());
        if (kind == "data") n.kind = NodeKind::Data;
        else if (kind == "param") n.kind = NodeKind::Param;
        else throw ParseError("node " + n.name + ": \"kind\" must be \"data\" or \"param\"");
        if (jn.contains("parents")) {
            if (!jn["parents"].is_array())
                throw ParseError("node " + n.name + ": \"parents\" must be an array");
            for (const Json& jp : jn["parents"]) {
                if (!jp.is_string())
                    throw ParseError("node " + n.name + ": parent ids must be strings");
                auto it = ids.find(jp.get<std::string>());
                if (it == ids.end())
                    throw ValidationError("node " + n.name + ": unknown parent " + jp.get<std::string>());
                n.parents.push_back(it->second);
            }
        }
        if (jn.contains("states")) {
            n.states = jn["states"].get<int>();
            if (!jn.contains("cpt"))
                throw ParseError("node " + n.name + ": \"states\" requires \"cpt\"");
            for (const Json& row : jn["cpt"])
                n.cpt.push_back(row.get<std::vector<double>>());
        } else if (jn.contains("cpt")) {
            throw ParseError("node " + n.name + ": \"cpt\" requires \"states\"");
        }
        nodes.push_back(std::move(n));
    }
    return BayesNet(std::move(nodes));
}

inline BayesNet parse_network(const std::string& text) {
    return network_from_json(detail::parse_json(text));
}

inline Json network_to_json(const BayesNet& net) {
    Json arr = Json::array();
    for (const Node& n : net.nodes()) {
        Json jn;
        jn["id"] = n.name;
        jn["kind"] = n.kind == NodeKind::Data ? "data" : "param";
        Json parents = Json::array();
        for (int p : n.parents) parents.push_back(net.name(p));
        jn["parents"] = parents;
        if (n.states > 0) {
            jn["states"] = n.states;
            jn["cpt"] = n.cpt;
        }
        arr.push_back(std::move(jn));
    }
    return Json{{"nodes", std::move(arr)}};
}

inline std::string render_network(const BayesNet& net) { return network_to_json(net).dump(2); }

inline Evidence evidence_from_json(const BayesNet& net, const Json& doc) {
    if (!doc.is_object() || !doc.contains("observe") || !doc["observe"].is_object())
        throw ParseError("evidence document must be an object with an \"observe\" object");
    Evidence ev;
    for (auto it = doc["observe"].begin(); it != doc["observe"].end(); ++it) {
        int v = net.index_of(it.key());
        if (!net.is_data(v))
            throw ValidationError("evidence key " + it.key() + " is not a data node");
        int state = it.value().get<int>();
        if (state < 0 || (net.node(v).states > 0 && state >= net.node(v).states))
            throw ValidationError("evidence state for " + it.key() + " out of range");
        ev[v] = state;
    }
    return ev;
}

inline Evidence parse_evidence(const BayesNet& net, const std::string& text) {
    return evidence_from_json(net, detail::parse_json(text));
}

inline Json evidence_to_json(const BayesNet& net, const Evidence& ev) {
    Json obs = Json::object();
    for (auto [v, s] : ev) obs[net.name(v)] = s;
    return Json{{"observe", std::move(obs)}};
}

} // namespace cutspace
