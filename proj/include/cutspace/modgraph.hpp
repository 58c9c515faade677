#pragma once

#include <algorithm>
#include <functional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cutspace/modules.hpp"

namespace cutspace {

// Intersection graph of the modules: one vertex per module (same indexing as
// the ModuleSet), an edge wherever two member sets intersect.
struct UndirectedModuleGraph {
    int vertex_count = 0;
    std::vector<std::pair<int, int>> edges;   // i < j, sorted lexicographically

    bool has_edge(int a, int b) const {
        if (a > b) std::swap(a, b);
        return std::binary_search(edges.begin(), edges.end(), std::make_pair(a, b));
    }
};

// An acyclic orientation of the module graph plus a topological ordering of
// the module indices. `arcs[k]` orients `h.edges[k]`.
struct DirectedModuleGraph {
    UndirectedModuleGraph h;
    std::vector<std::pair<int, int>> arcs;
    std::vector<int> order;

    bool operator==(const DirectedModuleGraph& o) const {
        return h.vertex_count == o.h.vertex_count && h.edges == o.h.edges &&
               arcs == o.arcs && order == o.order;
    }
};

inline UndirectedModuleGraph build_undirected(const ModuleSet& ms) {
    UndirectedModuleGraph g;
    g.vertex_count = ms.module_count();
    for (int i = 0; i < g.vertex_count; ++i) {
        for (int j = i + 1; j < g.vertex_count; ++j) {
            const auto& a = ms.modules[i].members;
            const auto& b = ms.modules[j].members;
            bool meet = std::any_of(a.begin(), a.end(),
                                    [&](int v) { return b.count(v) > 0; });
            if (meet) g.edges.emplace_back(i, j);
        }
    }
    return g;
}

namespace detail {

// Kahn's algorithm with lowest-index tie-breaking; empty result on a cycle.
inline std::vector<int> kahn_order(int n, const std::vector<std::pair<int, int>>& arcs) {
    std::vector<int> indeg(n, 0);
    std::vector<std::vector<int>> out(n);
    for (auto [a, b] : arcs) {
        out[a].push_back(b);
        ++indeg[b];
    }
    std::set<int> ready;
    for (int v = 0; v < n; ++v)
        if (indeg[v] == 0) ready.insert(v);
    std::vector<int> order;
    while (!ready.empty()) {
        int v = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(v);
        for (int c : out[v])
            if (--indeg[c] == 0) ready.insert(c);
    }
    if (static_cast<int>(order.size()) != n) order.clear();
    return order;
}

inline bool reaches(int from, int to, int n, const std::vector<std::pair<int, int>>& arcs) {
    std::vector<std::vector<int>> out(n);
    for (auto [a, b] : arcs) out[a].push_back(b);
    std::vector<int> stack{from};
    std::vector<char> seen(n, 0);
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        if (v == to) return true;
        if (seen[v]) continue;
        seen[v] = 1;
        for (int c : out[v]) stack.push_back(c);
    }
    return false;
}

} // namespace detail

// Deterministic topological ordering of an orientation (lowest index first
// among the ready vertices). Throws on a cyclic orientation.
inline std::vector<int> topological_order(int vertex_count,
                                          const std::vector<std::pair<int, int>>& arcs) {
    std::vector<int> order = detail::kahn_order(vertex_count, arcs);
    if (order.empty() && vertex_count > 0)
        throw ValidationError("cycle in module graph orientation");
    return order;
}

inline std::vector<int> topological_order(const DirectedModuleGraph& g) {
    return topological_order(g.h.vertex_count, g.arcs);
}

inline void validate_ordering(const DirectedModuleGraph& g) {
    if (static_cast<int>(g.order.size()) != g.h.vertex_count)
        throw ValidationError("ordering must be a permutation of the module indices");
    std::vector<int> pos(g.h.vertex_count, -1);
    for (int p = 0; p < static_cast<int>(g.order.size()); ++p) {
        int v = g.order[p];
        if (v < 0 || v >= g.h.vertex_count || pos[v] != -1)
            throw ValidationError("ordering must be a permutation of the module indices");
        pos[v] = p;
    }
    for (auto [a, b] : g.arcs)
        if (pos[a] >= pos[b])
            throw ValidationError("ordering is inconsistent with an edge direction");
}

// Every acyclic orientation of `h`, each carrying its canonical topological
// ordering. Backtracks over edges with an incremental cycle check rather
// than filtering all 2^|E| assignments.
inline std::vector<DirectedModuleGraph> enumerate_orientations(const UndirectedModuleGraph& h,
                                                               int max_edges = 20) {
    if (static_cast<int>(h.edges.size()) > max_edges)
        throw CapExceeded("orientation enumeration over " + std::to_string(h.edges.size()) +
                          " edges (cap " + std::to_string(max_edges) + ")");
    std::vector<DirectedModuleGraph> out;
    std::vector<std::pair<int, int>> arcs;
    std::function<void(std::size_t)> rec = [&](std::size_t k) {
        if (k == h.edges.size()) {
            DirectedModuleGraph g;
            g.h = h;
            g.arcs = arcs;
            g.order = topological_order(g);
            out.push_back(std::move(g));
            return;
        }
        auto [a, b] = h.edges[k];
        // a->b closes a cycle only via an existing b->a path, and vice versa
        if (!detail::reaches(b, a, h.vertex_count, arcs)) {
            arcs.emplace_back(a, b);
            rec(k + 1);
            arcs.pop_back();
        }
        if (!detail::reaches(a, b, h.vertex_count, arcs)) {
            arcs.emplace_back(b, a);
            rec(k + 1);
            arcs.pop_back();
        }
    };
    rec(0);
    return out;
}

// All topological orderings of one orientation (test support for the
// ordering-independence properties; factorial in the worst case).
inline std::vector<std::vector<int>> all_topological_orders(const DirectedModuleGraph& g) {
    int n = g.h.vertex_count;
    std::vector<int> indeg(n, 0);
    std::vector<std::vector<int>> out(n);
    for (auto [a, b] : g.arcs) {
        out[a].push_back(b);
        ++indeg[b];
    }
    std::vector<std::vector<int>> orders;
    std::vector<int> cur;
    std::vector<char> used(n, 0);
    std::function<void()> rec = [&]() {
        if (static_cast<int>(cur.size()) == n) {
            orders.push_back(cur);
            return;
        }
        for (int v = 0; v < n; ++v) {
            if (used[v] || indeg[v] != 0) continue;
            used[v] = 1;
            for (int c : out[v]) --indeg[c];
            cur.push_back(v);
            rec();
            cur.pop_back();
            for (int c : out[v]) ++indeg[c];
            used[v] = 0;
        }
    };
    rec();
    return orders;
}

inline int resolve_module_label(const Partition& p, const std::string& label) {
    for (int i = 0; i < static_cast<int>(p.labels.size()); ++i)
        if (p.labels[i] == label) return i;
    throw ValidationError("unknown module label: " + label);
}

inline DirectedModuleGraph orientation_from_json(const ModuleSet& ms, const Json& doc) {
    UndirectedModuleGraph h = build_undirected(ms);
    if (!doc.is_object() || !doc.contains("directions"))
        throw ParseError("orientation document must be an object with a \"directions\" array");
    if (doc.contains("edges")) {
        std::vector<std::pair<int, int>> given;
        for (const Json& je : doc["edges"]) {
            int a = resolve_module_label(ms.partition, je.at(0).get<std::string>());
            int b = resolve_module_label(ms.partition, je.at(1).get<std::string>());
            if (a > b) std::swap(a, b);
            given.emplace_back(a, b);
        }
        std::sort(given.begin(), given.end());
        if (given != h.edges)
            throw ValidationError("edge list does not match the module intersection graph");
    }
    DirectedModuleGraph g;
    g.h = h;
    std::map<std::pair<int, int>, std::pair<int, int>> chosen;
    for (const Json& jd : doc["directions"]) {
        int from = resolve_module_label(ms.partition, jd.at(0).get<std::string>());
        int to = resolve_module_label(ms.partition, jd.at(1).get<std::string>());
        auto key = std::minmax(from, to);
        if (!h.has_edge(from, to))
            throw ValidationError("direction given for a non-edge of the module graph");
        if (!chosen.emplace(std::make_pair(key.first, key.second), std::make_pair(from, to)).second)
            throw ValidationError("duplicate direction for one edge");
    }
    for (auto [a, b] : h.edges) {
        auto it = chosen.find({a, b});
        if (it == chosen.end())
            throw ValidationError("missing direction for a module graph edge");
        g.arcs.push_back(it->second);
    }
    g.order = topological_order(g);
    return g;
}

inline DirectedModuleGraph parse_orientation(const ModuleSet& ms, const std::string& text) {
    return orientation_from_json(ms, detail::parse_json(text));
}

inline Json orientation_to_json(const ModuleSet& ms, const DirectedModuleGraph& g) {
    Json edges = Json::array();
    for (auto [a, b] : g.h.edges)
        edges.push_back(Json::array({ms.partition.label(a), ms.partition.label(b)}));
    Json dirs = Json::array();
    for (auto [a, b] : g.arcs)
        dirs.push_back(Json::array({ms.partition.label(a), ms.partition.label(b)}));
    Json ord = Json::array();
    for (int v : g.order) ord.push_back(ms.partition.label(v));
    return Json{{"edges", std::move(edges)}, {"directions", std::move(dirs)}, {"order", std::move(ord)}};
}

} // namespace cutspace
