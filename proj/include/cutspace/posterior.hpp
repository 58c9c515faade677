#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cutspace/decisions.hpp"

namespace cutspace {

// How tilde copies are integrated out of the final posterior: weighted by
// the marginal prior of the underlying parameter, or as a plain marginal.
enum class TildeMode { PriorWeighted, PlainMarginal };

inline std::string to_string(TildeMode m) {
    return m == TildeMode::PriorWeighted ? "prior-weighted" : "plain-marginal";
}

inline TildeMode tilde_mode_from_string(const std::string& s) {
    if (s == "prior-weighted") return TildeMode::PriorWeighted;
    if (s == "plain-marginal") return TildeMode::PlainMarginal;
    throw ParseError("mode must be \"prior-weighted\" or \"plain-marginal\"");
}

// One incarnation of a parameter: the kept version updated at the kept
// module, or a tilde copy created in some other updating module. Ranks of
// tilde copies are consecutive from 2 in order of the creating modules.
struct VersionRef {
    int theta = -1;
    bool kept = false;
    int module = -1;   // block index of the creating module
    int rank = 0;      // 0 for the kept version, >= 2 for tilde copies

    bool operator==(const VersionRef& o) const {
        return theta == o.theta && kept == o.kept && module == o.module && rank == o.rank;
    }
    bool operator<(const VersionRef& o) const {
        if (theta != o.theta) return theta < o.theta;
        if (kept != o.kept) return kept < o.kept;
        return module < o.module;
    }
};

// Update term of one module: what gets updated, which tilde copies appear,
// and what the term conditions on. Trivial terms (no updated parameter)
// contribute the constant 1 but keep their classification recorded.
struct UpdateTerm {
    int module = -1;
    std::vector<int> members;
    std::vector<int> core;
    std::vector<int> update;
    std::vector<VersionRef> tildes;
    std::vector<int> cond_data;
    std::vector<VersionRef> cond_params;
    bool trivial = false;
};

// Update term for the parameters outside every module.
struct OrphanTerm {
    std::vector<int> params;
    std::vector<int> parent_data;
    std::vector<int> parent_params;
};

struct CutPosterior {
    std::vector<UpdateTerm> terms;         // in topological order
    std::optional<OrphanTerm> orphan;
    std::vector<VersionRef> tilde_vars;    // creation order
    TildeMode mode = TildeMode::PriorWeighted;
};

// Raw tagging of one module's variables before versions are resolved.
struct ModuleTags {
    std::vector<int> update;        // U
    std::vector<int> tilde;         // T-tagged shared parameters
    std::vector<int> cond_data;     // every data member
    std::vector<int> cond_params;   // C-tagged shared parameters
};

namespace detail {

inline int position_of(const std::vector<int>& modules, int module) {
    for (std::size_t k = 0; k < modules.size(); ++k)
        if (modules[k] == module) return static_cast<int>(k) + 1;
    return -1;
}

} // namespace detail

// Step-2 classification: data nodes are conditioned, intrinsic parameters
// updated, and shared parameters follow their decision at this module's
// rank among the modules containing them.
inline ModuleTags classify_module(const BayesNet& net, const ModuleSet& ms,
                                  const DirectedModuleGraph& g, const DecisionSet& ds, int i) {
    if (i < 0 || i >= ms.module_count())
        throw ValidationError("module index out of range");
    ModuleTags tags;
    for (int v : ms.modules[i].members) {
        if (net.is_data(v)) {
            tags.cond_data.push_back(v);
            continue;
        }
        std::vector<int> in = modules_in_order(ms, g, v);
        if (in.size() == 1) {
            tags.update.push_back(v);
            continue;
        }
        auto it = ds.find(v);
        if (it == ds.end())
            throw ValidationError("decision missing for shared parameter " + net.name(v));
        const Decision& d = it->second;
        if (d.size() != static_cast<int>(in.size()))
            throw ValidationError("decision for " + net.name(v) +
                                  " has wrong vertex count for this module structure");
        if (auto bad = validate_decision(d, static_cast<int>(in.size())))
            throw ValidationError("decision for " + net.name(v) + ": " + *bad);
        int y = detail::position_of(in, i);
        if (y == d.x) tags.update.push_back(v);
        else if (d.tag(y) == Tag::T) tags.tilde.push_back(v);
        else tags.cond_params.push_back(v);
    }
    return tags;
}

// Algorithm: walk the modules in topological order, classify each one,
// resolve every conditioned parameter to the version created at its decision
// neighbour, and assemble the ordered term list plus the orphan term.
inline CutPosterior build_posterior(const BayesNet& net, const ModuleSet& ms,
                                    const DirectedModuleGraph& g, const DecisionSet& ds,
                                    TildeMode mode = TildeMode::PriorWeighted) {
    if (g.h.vertex_count != ms.module_count())
        throw ValidationError("module graph size does not match the module set");
    validate_ordering(g);

    // rank the tilde copies of each shared parameter in creation order
    std::map<std::pair<int, int>, int> tilde_rank;   // (theta, module) -> rank
    for (int theta : ms.shared_params) {
        auto it = ds.find(theta);
        if (it == ds.end())
            throw ValidationError("decision missing for shared parameter " + net.name(theta));
        std::vector<int> in = modules_in_order(ms, g, theta);
        const Decision& d = it->second;
        if (d.size() != static_cast<int>(in.size()))
            throw ValidationError("decision for " + net.name(theta) +
                                  " has wrong vertex count for this module structure");
        int next = 2;
        for (int p = 1; p <= d.size(); ++p)
            if (d.tag(p) == Tag::T && p != d.x) tilde_rank[{theta, in[p - 1]}] = next++;
    }

    CutPosterior post;
    post.mode = mode;
    for (int i : g.order) {
        ModuleTags tags = classify_module(net, ms, g, ds, i);
        UpdateTerm term;
        term.module = i;
        term.members.assign(ms.modules[i].members.begin(), ms.modules[i].members.end());
        term.core.assign(ms.modules[i].core.begin(), ms.modules[i].core.end());
        term.update = tags.update;
        term.cond_data = tags.cond_data;
        std::sort(term.update.begin(), term.update.end());
        std::sort(term.cond_data.begin(), term.cond_data.end());
        std::sort(tags.tilde.begin(), tags.tilde.end());
        for (int theta : tags.tilde)
            term.tildes.push_back({theta, false, i, tilde_rank.at({theta, i})});
        std::sort(tags.cond_params.begin(), tags.cond_params.end());
        for (int theta : tags.cond_params) {
            std::vector<int> in = modules_in_order(ms, g, theta);
            const Decision& d = ds.at(theta);
            int y = detail::position_of(in, i);
            int j = d.cond.at(y);
            int creator = in[j - 1];
            if (j == d.x) term.cond_params.push_back({theta, true, creator, 0});
            else term.cond_params.push_back({theta, false, creator, tilde_rank.at({theta, creator})});
        }
        term.trivial = term.update.empty();
        for (const VersionRef& v : term.tildes) post.tilde_vars.push_back(v);
        post.terms.push_back(std::move(term));
    }

    if (!ms.orphan_params.empty()) {
        OrphanTerm orphan;
        orphan.params = ms.orphan_params;
        std::sort(orphan.params.begin(), orphan.params.end());
        std::set<int> inside(orphan.params.begin(), orphan.params.end());
        std::set<int> pd, pp;
        for (int v : orphan.params)
            for (int p : net.node(v).parents) {
                if (inside.count(p)) continue;
                (net.is_data(p) ? pd : pp).insert(p);
            }
        orphan.parent_data.assign(pd.begin(), pd.end());
        orphan.parent_params.assign(pp.begin(), pp.end());
        post.orphan = std::move(orphan);
    }
    return post;
}

// Label-independent structural equality: terms are matched by the underlying
// module (frozen core and member sets, never indices), and the conditioned
// versions compare through the core of their creating module.
inline bool posterior_equal(const CutPosterior& a, const CutPosterior& b) {
    if (a.terms.size() != b.terms.size()) return false;
    if (a.orphan.has_value() != b.orphan.has_value()) return false;
    if (a.orphan && !(a.orphan->params == b.orphan->params &&
                      a.orphan->parent_data == b.orphan->parent_data &&
                      a.orphan->parent_params == b.orphan->parent_params))
        return false;

    auto core_of_module = [](const CutPosterior& p, int module) -> const std::vector<int>& {
        for (const UpdateTerm& t : p.terms)
            if (t.module == module) return t.core;
        throw ValidationError("conditioned version refers to an unknown module");
    };
    auto sorted_terms = [](const CutPosterior& p) {
        std::vector<const UpdateTerm*> out;
        for (const UpdateTerm& t : p.terms) out.push_back(&t);
        std::sort(out.begin(), out.end(),
                  [](const UpdateTerm* x, const UpdateTerm* y) { return x->core < y->core; });
        return out;
    };
    auto versions_key = [&](const CutPosterior& p, const std::vector<VersionRef>& vs) {
        std::vector<std::pair<std::pair<int, bool>, std::vector<int>>> key;
        for (const VersionRef& v : vs)
            key.push_back({{v.theta, v.kept}, core_of_module(p, v.module)});
        std::sort(key.begin(), key.end());
        return key;
    };

    std::vector<const UpdateTerm*> ta = sorted_terms(a), tb = sorted_terms(b);
    for (std::size_t k = 0; k < ta.size(); ++k) {
        const UpdateTerm& x = *ta[k];
        const UpdateTerm& y = *tb[k];
        if (x.core != y.core || x.members != y.members) return false;
        if (x.trivial != y.trivial) return false;
        if (x.update != y.update || x.cond_data != y.cond_data) return false;
        if (versions_key(a, x.tildes) != versions_key(b, y.tildes)) return false;
        if (versions_key(a, x.cond_params) != versions_key(b, y.cond_params)) return false;
    }
    return true;
}

enum class RenderFormat { Text, Latex };

namespace detail {

inline std::string version_name(const BayesNet& net, const VersionRef& v, RenderFormat fmt) {
    const std::string& base = net.name(v.theta);
    if (v.kept) return base;
    if (fmt == RenderFormat::Latex)
        return "\\tilde{" + base + "}" + (v.rank > 2 ? "^{(" + std::to_string(v.rank) + ")}" : "");
    return base + "~" + (v.rank > 2 ? "(" + std::to_string(v.rank) + ")" : "");
}

struct RenderAtom {
    int order;          // canonical node index of the underlying parameter
    std::string text;
};

inline std::string join_sorted(std::vector<RenderAtom> atoms) {
    std::sort(atoms.begin(), atoms.end(),
              [](const RenderAtom& a, const RenderAtom& b) { return a.order < b.order; });
    std::string out;
    for (std::size_t k = 0; k < atoms.size(); ++k) {
        if (k) out += ",";
        out += atoms[k].text;
    }
    return out;
}

inline std::string render_term(const BayesNet& net, const UpdateTerm& t, RenderFormat fmt) {
    if (t.trivial) return "1";
    std::vector<RenderAtom> lhs, rhs;
    for (int v : t.update) lhs.push_back({v, net.name(v)});
    for (const VersionRef& v : t.tildes) lhs.push_back({v.theta, version_name(net, v, fmt)});
    for (const VersionRef& v : t.cond_params) rhs.push_back({v.theta, version_name(net, v, fmt)});
    for (int v : t.cond_data) rhs.push_back({v, net.name(v)});
    std::string out = "p(" + join_sorted(std::move(lhs));
    std::string cond = join_sorted(std::move(rhs));
    if (!cond.empty()) out += "|" + cond;
    return out + ")";
}

} // namespace detail

// Deterministic canonical rendering; factors in topological order, variables
// within each factor in canonical node order, tilde copies integrated out at
// the end (with their marginal priors in prior-weighted mode).
inline std::string render(const BayesNet& net, const CutPosterior& p,
                          RenderFormat fmt = RenderFormat::Text) {
    std::vector<std::string> parts;
    if (p.orphan) {
        std::vector<detail::RenderAtom> lhs, rhs;
        for (int v : p.orphan->params) lhs.push_back({v, net.name(v)});
        for (int v : p.orphan->parent_params) rhs.push_back({v, net.name(v)});
        for (int v : p.orphan->parent_data) rhs.push_back({v, net.name(v)});
        std::string f = "p(" + detail::join_sorted(std::move(lhs));
        std::string cond = detail::join_sorted(std::move(rhs));
        if (!cond.empty()) f += "|" + cond;
        parts.push_back(f + ")");
    }
    bool wrap = !p.tilde_vars.empty();
    if (wrap) parts.push_back(fmt == RenderFormat::Latex ? "\\int" : "∫");
    for (const UpdateTerm& t : p.terms) parts.push_back(detail::render_term(net, t, fmt));
    if (wrap) {
        if (p.mode == TildeMode::PriorWeighted)
            for (const VersionRef& v : p.tilde_vars)
                parts.push_back((fmt == RenderFormat::Latex ? "\\pi(" : "π(") +
                                detail::version_name(net, v, fmt) + ")");
        for (const VersionRef& v : p.tilde_vars)
            parts.push_back("d" + detail::version_name(net, v, fmt));
    }
    std::string out;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        if (k) out += " ";
        out += parts[k];
    }
    return out;
}

struct EnumerationCaps {
    int max_orientation_edges = 20;
    std::uint64_t max_decision_sets = 1000000;
};

struct BuiltPosterior {
    int orientation = 0;      // index into the orientation enumeration
    int decision_index = 0;   // index into that orientation's decision sets
    int distinct_index = 0;   // index into `distinct`
};

struct PosteriorEnumeration {
    ModuleSet ms;
    std::vector<DirectedModuleGraph> orientations;
    std::vector<std::vector<DecisionSet>> decision_sets;   // per orientation
    std::vector<CutPosterior> distinct;                    // first-seen order
    std::vector<BuiltPosterior> built;
};

// Orientations x decision sets, built and deduplicated by posterior_equal.
inline PosteriorEnumeration enumerate_posteriors(const BayesNet& net, const Partition& partition,
                                                 TildeMode mode = TildeMode::PriorWeighted,
                                                 const EnumerationCaps& caps = {}) {
    PosteriorEnumeration out;
    out.ms = form_module_set(net, partition);
    UndirectedModuleGraph h = build_undirected(out.ms);
    out.orientations = enumerate_orientations(h, caps.max_orientation_edges);
    for (int oi = 0; oi < static_cast<int>(out.orientations.size()); ++oi) {
        const DirectedModuleGraph& g = out.orientations[oi];
        out.decision_sets.push_back(enumerate_decision_sets(out.ms, g, caps.max_decision_sets));
        for (int di = 0; di < static_cast<int>(out.decision_sets[oi].size()); ++di) {
            CutPosterior p = build_posterior(net, out.ms, g, out.decision_sets[oi][di], mode);
            int cls = -1;
            for (int k = 0; k < static_cast<int>(out.distinct.size()); ++k)
                if (posterior_equal(out.distinct[k], p)) { cls = k; break; }
            if (cls < 0) {
                cls = static_cast<int>(out.distinct.size());
                out.distinct.push_back(std::move(p));
            }
            out.built.push_back({oi, di, cls});
        }
    }
    return out;
}

inline Json version_to_json(const BayesNet& net, const ModuleSet& ms, const VersionRef& v) {
    Json j{{"theta", net.name(v.theta)}};
    if (v.kept) {
        j["kept"] = true;
    } else {
        j["rank"] = v.rank;
        j["module"] = ms.partition.label(v.module);
    }
    return j;
}

inline Json posterior_to_json(const BayesNet& net, const ModuleSet& ms, const CutPosterior& p) {
    auto names = [&](const std::vector<int>& ids) {
        Json a = Json::array();
        for (int v : ids) a.push_back(net.name(v));
        return a;
    };
    Json terms = Json::array();
    for (const UpdateTerm& t : p.terms) {
        Json jt;
        jt["label"] = ms.partition.label(t.module);
        jt["module"] = names(t.members);
        jt["core"] = names(t.core);
        jt["update"] = names(t.update);
        Json tildes = Json::array();
        for (const VersionRef& v : t.tildes) tildes.push_back(version_to_json(net, ms, v));
        jt["tilde"] = std::move(tildes);
        jt["cond_data"] = names(t.cond_data);
        Json cps = Json::array();
        for (const VersionRef& v : t.cond_params) cps.push_back(version_to_json(net, ms, v));
        jt["cond_param"] = std::move(cps);
        jt["trivial"] = t.trivial;
        terms.push_back(std::move(jt));
    }
    Json doc{{"terms", std::move(terms)}};
    if (p.orphan)
        doc["orphan"] = Json{{"params", names(p.orphan->params)},
                             {"parent_data", names(p.orphan->parent_data)},
                             {"parent_params", names(p.orphan->parent_params)}};
    Json tv = Json::array();
    for (const VersionRef& v : p.tilde_vars) tv.push_back(version_to_json(net, ms, v));
    doc["tilde_vars"] = std::move(tv);
    doc["mode"] = to_string(p.mode);
    doc["render"] = render(net, p);
    return doc;
}

} // namespace cutspace
