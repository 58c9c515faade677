#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cutspace/modgraph.hpp"

namespace cutspace {

enum class Tag : char { T = 'T', C = 'C' };

// Decision (D_theta, x_theta) for one shared parameter. Vertex positions are
// 1-based and rank the modules containing theta by the topological ordering.
// `cond` wires each C vertex to its unique T neighbour at a smaller position.
struct Decision {
    int theta = -1;
    std::vector<Tag> tags;      // tags[k] is the tag of vertex k+1
    int x = 1;                  // kept position, 1-based
    std::map<int, int> cond;    // C position -> T position

    int size() const { return static_cast<int>(tags.size()); }
    Tag tag(int pos) const { return tags.at(pos - 1); }

    bool operator==(const Decision& o) const {
        return theta == o.theta && tags == o.tags && x == o.x && cond == o.cond;
    }
    bool operator!=(const Decision& o) const { return !(*this == o); }

    std::vector<int> t_positions() const {
        std::vector<int> out;
        for (int p = 1; p <= size(); ++p)
            if (tag(p) == Tag::T) out.push_back(p);
        return out;
    }
};

// One decision per shared parameter, keyed by parameter node index.
using DecisionSet = std::map<int, Decision>;

// First violated condition by name, or nullopt when the decision is valid.
inline std::optional<std::string> validate_decision(const Decision& d, int m_theta_count) {
    if (d.size() != m_theta_count)
        return "vertex count must equal the number of modules containing the parameter";
    if (d.size() == 0)
        return "decision needs at least one vertex";
    if (d.tag(1) != Tag::T)
        return "v1 must be in T";
    if (d.x < 1 || d.x > d.size())
        return "kept index out of range";
    if (d.tag(d.x) != Tag::T)
        return "kept vertex must be in T";
    for (int p = 1; p <= d.size(); ++p) {
        bool wired = d.cond.count(p) > 0;
        if (d.tag(p) == Tag::C && !wired)
            return "C vertex must have precisely one neighbour";
        if (d.tag(p) == Tag::T && wired)
            return "T vertex cannot carry a conditioning edge";
        if (!wired) continue;
        int n = d.cond.at(p);
        if (n < 1 || n > d.size() || d.tag(n) != Tag::T)
            return "neighbour of a C vertex must be a T vertex";
        if (n >= p)
            return "neighbour of a C vertex must have a smaller index";
    }
    return std::nullopt;
}

// All valid decisions for a parameter in `m_theta_count` modules.
// Deterministic order: T/C taggings in binary-counter order with vertex 2 as
// the low bit (0 = T), kept index ascending over T positions, conditioning
// wires in mixed-radix order with the last C vertex varying fastest.
inline std::vector<Decision> enumerate_decisions(int m_theta_count, int theta = -1) {
    if (m_theta_count < 1)
        throw ValidationError("decision enumeration needs at least one module");
    std::vector<Decision> out;
    int free_vertices = m_theta_count - 1;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << free_vertices); ++mask) {
        std::vector<Tag> tags(m_theta_count, Tag::T);
        for (int k = 0; k < free_vertices; ++k)
            if (mask >> k & 1) tags[k + 1] = Tag::C;
        std::vector<int> ts, cs;
        for (int p = 1; p <= m_theta_count; ++p)
            (tags[p - 1] == Tag::T ? ts : cs).push_back(p);
        // candidate neighbours per C vertex: T positions below it, ascending
        std::vector<std::vector<int>> choices;
        bool feasible = true;
        for (int c : cs) {
            std::vector<int> below;
            for (int t : ts)
                if (t < c) below.push_back(t);
            if (below.empty()) feasible = false;
            choices.push_back(std::move(below));
        }
        if (!feasible) continue;
        for (int x : ts) {
            std::vector<std::size_t> pick(cs.size(), 0);
            while (true) {
                Decision d;
                d.theta = theta;
                d.tags = tags;
                d.x = x;
                for (std::size_t k = 0; k < cs.size(); ++k)
                    d.cond[cs[k]] = choices[k][pick[k]];
                out.push_back(std::move(d));
                int k = static_cast<int>(cs.size()) - 1;
                while (k >= 0 && ++pick[k] == choices[k].size()) pick[k--] = 0;
                if (k < 0) break;
            }
        }
    }
    return out;
}

// |T| * prod over C vertices of the count of T vertices below, summed over
// the 2^(n-1) taggings.
inline std::uint64_t count_decisions(int m_theta_count) {
    if (m_theta_count < 1)
        throw ValidationError("decision count needs at least one module");
    int free_vertices = m_theta_count - 1;
    std::uint64_t total = 0;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << free_vertices); ++mask) {
        std::uint64_t prod = 1;
        int t_count = 1;   // v1
        for (int p = 2; p <= m_theta_count; ++p) {
            if (mask >> (p - 2) & 1) prod *= static_cast<std::uint64_t>(t_count);
            else ++t_count;
        }
        total += prod * static_cast<std::uint64_t>(t_count);
    }
    return total;
}

// Per-tagging decision counts in enumeration order (reporting support).
inline std::vector<std::uint64_t> count_decisions_by_tagging(int m_theta_count) {
    std::vector<std::uint64_t> out;
    int free_vertices = m_theta_count - 1;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << free_vertices); ++mask) {
        std::uint64_t prod = 1;
        int t_count = 1;
        for (int p = 2; p <= m_theta_count; ++p) {
            if (mask >> (p - 2) & 1) prod *= static_cast<std::uint64_t>(t_count);
            else ++t_count;
        }
        out.push_back(prod * static_cast<std::uint64_t>(t_count));
    }
    return out;
}

// Modules containing v, ranked by the ordering of g.
inline std::vector<int> modules_in_order(const ModuleSet& ms, const DirectedModuleGraph& g, int v) {
    std::vector<int> out;
    for (int m : g.order)
        if (ms.modules[m].members.count(v)) out.push_back(m);
    return out;
}

// Cartesian product of the per-parameter decision sequences, shared
// parameters in canonical node order with the last one varying fastest.
inline std::vector<DecisionSet> enumerate_decision_sets(const ModuleSet& ms,
                                                        const DirectedModuleGraph& g,
                                                        std::uint64_t max_sets = 1000000) {
    std::vector<int> params = ms.shared_params;
    std::vector<std::vector<Decision>> per_param;
    std::uint64_t total = 1;
    for (int theta : params) {
        int count = static_cast<int>(modules_in_order(ms, g, theta).size());
        per_param.push_back(enumerate_decisions(count, theta));
        total *= per_param.back().size();
        if (total > max_sets)
            throw CapExceeded("decision set enumeration over " + std::to_string(total) +
                              " sets (cap " + std::to_string(max_sets) + ")");
    }
    std::vector<DecisionSet> out;
    std::vector<std::size_t> pick(params.size(), 0);
    while (true) {
        DecisionSet ds;
        for (std::size_t k = 0; k < params.size(); ++k)
            ds[params[k]] = per_param[k][pick[k]];
        out.push_back(std::move(ds));
        int k = static_cast<int>(params.size()) - 1;
        while (k >= 0 && ++pick[k] == per_param[k].size()) pick[k--] = 0;
        if (k < 0) break;
    }
    return out;
}

inline Json decision_to_json(const BayesNet& net, const Decision& d) {
    Json tags = Json::array();
    for (Tag t : d.tags) tags.push_back(t == Tag::T ? "T" : "C");
    Json cond = Json::object();
    for (auto [c, t] : d.cond) cond[std::to_string(c)] = t;
    return Json{{"theta", net.name(d.theta)}, {"tags", std::move(tags)}, {"x", d.x}, {"cond", std::move(cond)}};
}

inline Json decision_set_to_json(const BayesNet& net, const DecisionSet& ds) {
    Json arr = Json::array();
    for (const auto& [theta, d] : ds) arr.push_back(decision_to_json(net, d));
    return arr;
}

inline Decision decision_from_json(const BayesNet& net, const Json& doc) {
    Decision d;
    d.theta = net.index_of(doc.at("theta").get<std::string>());
    for (const Json& jt : doc.at("tags")) {
        std::string s = jt.get<std::string>();
        if (s != "T" && s != "C")
            throw ParseError("decision tag must be \"T\" or \"C\"");
        d.tags.push_back(s == "T" ? Tag::T : Tag::C);
    }
    d.x = doc.value("x", 1);
    if (doc.contains("cond"))
        for (auto it = doc["cond"].begin(); it != doc["cond"].end(); ++it)
            d.cond[std::stoi(it.key())] = it.value().get<int>();
    if (auto bad = validate_decision(d, d.size()))
        throw ValidationError("decision for " + net.name(d.theta) + ": " + *bad);
    return d;
}

// A decision-set document is an array of decision documents. Validated
// against the module structure: one decision per shared parameter, with the
// vertex count of each matching the number of modules containing it.
inline DecisionSet decision_set_from_json(const BayesNet& net, const ModuleSet& ms,
                                          const DirectedModuleGraph& g, const Json& doc) {
    if (!doc.is_array())
        throw ParseError("decision-set document must be an array");
    DecisionSet ds;
    for (const Json& jd : doc) {
        Decision d = decision_from_json(net, jd);
        if (!ms.is_shared(d.theta))
            throw ValidationError("decision given for non-shared parameter " + net.name(d.theta));
        int count = static_cast<int>(modules_in_order(ms, g, d.theta).size());
        if (auto bad = validate_decision(d, count))
            throw ValidationError("decision for " + net.name(d.theta) + ": " + *bad);
        if (!ds.emplace(d.theta, std::move(d)).second)
            throw ValidationError("duplicate decision for " + net.name(d.theta));
    }
    for (int theta : ms.shared_params)
        if (!ds.count(theta))
            throw ValidationError("missing decision for shared parameter " + net.name(theta));
    return ds;
}

inline DecisionSet parse_decision_set(const BayesNet& net, const ModuleSet& ms,
                                      const DirectedModuleGraph& g, const std::string& text) {
    return decision_set_from_json(net, ms, g, detail::parse_json(text));
}

} // namespace cutspace
