#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "cutspace/posterior.hpp"

namespace cutspace {

// Identity of one table variable: a network node in its base incarnation
// (data node, kept version, orphan) or the tilde copy created in `module`.
struct VarKey {
    int node = -1;
    int module = -1;   // -1 for base incarnation

    bool operator==(const VarKey& o) const { return node == o.node && module == o.module; }
    bool operator<(const VarKey& o) const {
        return node != o.node ? node < o.node : module < o.module;
    }
};

inline VarKey key_of(const VersionRef& v) { return {v.theta, v.kept ? -1 : v.module}; }

struct FactorVar {
    VarKey key;
    int card = 0;
};

// Dense nonnegative table in row-major scope order (last variable fastest).
struct FactorTable {
    std::vector<FactorVar> scope;
    std::vector<double> values;

    std::size_t cells() const { return values.size(); }

    int position(const VarKey& k) const {
        for (int i = 0; i < static_cast<int>(scope.size()); ++i)
            if (scope[i].key == k) return i;
        return -1;
    }

    double total() const {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
};

inline FactorTable scalar_table(double value = 1.0) {
    FactorTable t;
    t.values = {value};
    return t;
}

namespace detail {

inline void check_cells(std::size_t cells, std::size_t max_cells) {
    if (cells > max_cells)
        throw CapExceeded("joint table of " + std::to_string(cells) + " cells (cap " +
                          std::to_string(max_cells) + ")");
}

inline std::vector<std::size_t> strides(const std::vector<FactorVar>& scope) {
    std::vector<std::size_t> s(scope.size(), 1);
    for (int i = static_cast<int>(scope.size()) - 2; i >= 0; --i)
        s[i] = s[i + 1] * static_cast<std::size_t>(scope[i + 1].card);
    return s;
}

} // namespace detail

inline FactorTable multiply(const FactorTable& a, const FactorTable& b,
                            std::size_t max_cells = 100000000) {
    FactorTable r;
    r.scope = a.scope;
    std::vector<int> b_pos_in_r;
    for (const FactorVar& v : b.scope) {
        int p = r.position(v.key);
        if (p < 0) {
            p = static_cast<int>(r.scope.size());
            r.scope.push_back(v);
        } else if (r.scope[p].card != v.card) {
            throw EvalError("variable cardinality mismatch in table product");
        }
        b_pos_in_r.push_back(p);
    }
    std::size_t cells = 1;
    for (const FactorVar& v : r.scope) cells *= static_cast<std::size_t>(v.card);
    detail::check_cells(cells, max_cells);
    std::vector<std::size_t> sa = detail::strides(a.scope);
    std::vector<std::size_t> sb = detail::strides(b.scope);
    r.values.assign(cells, 0.0);
    std::vector<int> asg(r.scope.size(), 0);
    for (std::size_t idx = 0; idx < cells; ++idx) {
        std::size_t ia = 0, ib = 0;
        for (std::size_t k = 0; k < a.scope.size(); ++k) ia += sa[k] * asg[k];
        for (std::size_t k = 0; k < b.scope.size(); ++k) ib += sb[k] * asg[b_pos_in_r[k]];
        r.values[idx] = a.values[ia] * b.values[ib];
        for (int k = static_cast<int>(r.scope.size()) - 1; k >= 0; --k) {
            if (++asg[k] < r.scope[k].card) break;
            asg[k] = 0;
        }
    }
    return r;
}

inline FactorTable sum_out(const FactorTable& t, const VarKey& key) {
    int pos = t.position(key);
    if (pos < 0) return t;
    FactorTable r;
    for (int i = 0; i < static_cast<int>(t.scope.size()); ++i)
        if (i != pos) r.scope.push_back(t.scope[i]);
    r.values.assign(t.values.size() / t.scope[pos].card, 0.0);
    std::vector<std::size_t> st = detail::strides(t.scope);
    std::vector<int> asg(t.scope.size(), 0);
    std::vector<std::size_t> sr = detail::strides(r.scope);
    for (std::size_t idx = 0; idx < t.values.size(); ++idx) {
        std::size_t ir = 0;
        for (int k = 0, rk = 0; k < static_cast<int>(t.scope.size()); ++k)
            if (k != pos) ir += sr[rk++] * asg[k];
        r.values[ir] += t.values[idx];
        for (int k = static_cast<int>(t.scope.size()) - 1; k >= 0; --k) {
            if (++asg[k] < t.scope[k].card) break;
            asg[k] = 0;
        }
    }
    return r;
}

// Fix one variable to a state and drop it from the scope.
inline FactorTable plug(const FactorTable& t, const VarKey& key, int state) {
    int pos = t.position(key);
    if (pos < 0) return t;
    if (state < 0 || state >= t.scope[pos].card)
        throw EvalError("evidence state out of range");
    FactorTable r;
    for (int i = 0; i < static_cast<int>(t.scope.size()); ++i)
        if (i != pos) r.scope.push_back(t.scope[i]);
    std::vector<std::size_t> st = detail::strides(t.scope);
    std::vector<int> asg(t.scope.size(), 0);
    r.values.reserve(t.values.size() / t.scope[pos].card);
    for (std::size_t idx = 0; idx < t.values.size(); ++idx) {
        if (asg[pos] == state) r.values.push_back(t.values[idx]);
        for (int k = static_cast<int>(t.scope.size()) - 1; k >= 0; --k) {
            if (++asg[k] < t.scope[k].card) break;
            asg[k] = 0;
        }
    }
    return r;
}

inline FactorTable normalized(FactorTable t) {
    double s = t.total();
    if (!(s > 0.0) || !std::isfinite(s))
        throw EvalError("zero normalizer");
    for (double& v : t.values) v /= s;
    return t;
}

// Reorder the scope canonically (by variable key) for stable comparisons.
inline FactorTable canonical_scope(const FactorTable& t) {
    std::vector<int> perm(t.scope.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
    std::sort(perm.begin(), perm.end(),
              [&](int a, int b) { return t.scope[a].key < t.scope[b].key; });
    FactorTable r;
    for (int i : perm) r.scope.push_back(t.scope[i]);
    r.values.assign(t.values.size(), 0.0);
    std::vector<std::size_t> st = detail::strides(t.scope);
    std::vector<std::size_t> sr = detail::strides(r.scope);
    std::vector<int> asg(t.scope.size(), 0);
    for (std::size_t idx = 0; idx < t.values.size(); ++idx) {
        std::size_t ir = 0;
        for (std::size_t k = 0; k < perm.size(); ++k) ir += sr[k] * asg[perm[k]];
        r.values[ir] = t.values[idx];
        for (int k = static_cast<int>(t.scope.size()) - 1; k >= 0; --k) {
            if (++asg[k] < t.scope[k].card) break;
            asg[k] = 0;
        }
    }
    return r;
}

enum class MissingData { Error, Marginalize };

struct EvalOptions {
    MissingData missing = MissingData::Error;
    std::size_t max_cells = 10000000;
};

namespace detail {

// CPT of `v` as a factor, each raw node mapped to a variable key.
template <typename KeyFn>
FactorTable cpt_factor(const BayesNet& net, int v, KeyFn&& key_fn) {
    const Node& n = net.node(v);
    if (n.states <= 0)
        throw EvalError("node " + n.name + " has no CPT; numeric evaluation needs a fully discrete network");
    FactorTable t;
    for (int p : n.parents) t.scope.push_back({key_fn(p), net.node(p).states});
    t.scope.push_back({key_fn(v), n.states});
    for (const auto& row : n.cpt)
        t.values.insert(t.values.end(), row.begin(), row.end());
    return t;
}

// Within one update term every raw node has exactly one incarnation.
inline VarKey term_key(const BayesNet& net, const UpdateTerm& term, int raw) {
    if (net.is_data(raw)) return {raw, -1};
    for (int u : term.update)
        if (u == raw) return {raw, -1};
    for (const VersionRef& v : term.tildes)
        if (v.theta == raw) return key_of(v);
    for (const VersionRef& v : term.cond_params)
        if (v.theta == raw) return key_of(v);
    throw ValidationError("node " + net.name(raw) + " has no incarnation in the update term");
}

// Unnormalized joint of an update term with evidence applied, over the
// term's updated variables, tilde copies and conditioned versions.
inline FactorTable term_joint(const BayesNet& net, const UpdateTerm& term, const Evidence& evidence,
                              const EvalOptions& opts) {
    auto keys = [&](int raw) { return term_key(net, term, raw); };
    FactorTable joint = scalar_table();
    for (int u : term.update) joint = multiply(joint, cpt_factor(net, u, keys), opts.max_cells);
    for (const VersionRef& v : term.tildes)
        joint = multiply(joint, cpt_factor(net, v.theta, keys), opts.max_cells);
    for (const VersionRef& v : term.cond_params)
        joint = multiply(joint, cpt_factor(net, v.theta, keys), opts.max_cells);
    for (int x : term.cond_data) joint = multiply(joint, cpt_factor(net, x, keys), opts.max_cells);
    for (int x : term.cond_data) {
        auto it = evidence.find(x);
        if (it != evidence.end()) {
            joint = plug(joint, {x, -1}, it->second);
        } else if (opts.missing == MissingData::Marginalize) {
            joint = sum_out(joint, {x, -1});
        } else {
            throw EvalError("missing evidence for data node " + net.name(x));
        }
    }
    return joint;
}

// Normalize over the non-conditioned variables within every slice of the
// conditioned ones; all-zero slices stay zero.
inline FactorTable conditional_on(const FactorTable& joint, const std::vector<VarKey>& cond) {
    FactorTable sums = joint;
    for (const FactorVar& v : joint.scope) {
        bool is_cond = false;
        for (const VarKey& k : cond)
            if (v.key == k) { is_cond = true; break; }
        if (!is_cond) sums = sum_out(sums, v.key);
    }
    FactorTable r = joint;
    std::vector<std::size_t> sj = strides(joint.scope);
    std::vector<std::size_t> ss = strides(sums.scope);
    std::vector<int> pos;
    for (const FactorVar& v : sums.scope) pos.push_back(joint.position(v.key));
    std::vector<int> asg(joint.scope.size(), 0);
    for (std::size_t idx = 0; idx < joint.values.size(); ++idx) {
        std::size_t is = 0;
        for (std::size_t k = 0; k < pos.size(); ++k) is += ss[k] * asg[pos[k]];
        r.values[idx] = sums.values[is] > 0.0 ? joint.values[idx] / sums.values[is] : 0.0;
        for (int k = static_cast<int>(joint.scope.size()) - 1; k >= 0; --k) {
            if (++asg[k] < joint.scope[k].card) break;
            asg[k] = 0;
        }
    }
    return r;
}

} // namespace detail

// Prior marginal of one parameter (no evidence), by eliminating its
// ancestral closure.
inline FactorTable prior_marginal(const BayesNet& net, int theta,
                                  std::size_t max_cells = 10000000) {
    std::set<int> anc = net.ancestors(theta);
    anc.insert(theta);
    FactorTable t = scalar_table();
    auto base = [](int raw) { return VarKey{raw, -1}; };
    for (int v : anc) t = multiply(t, detail::cpt_factor(net, v, base), max_cells);
    for (int v : anc)
        if (v != theta) t = sum_out(t, {v, -1});
    return normalized(std::move(t));
}

// Normalized table of one update term over its updated variables and tilde
// copies, with conditioned versions averaged under the `given` tables.
inline FactorTable eval_term(const BayesNet& net, const UpdateTerm& term, const Evidence& evidence,
                             const std::map<VarKey, FactorTable>& given = {},
                             const EvalOptions& opts = {}) {
    if (term.trivial) return scalar_table();
    FactorTable joint = detail::term_joint(net, term, evidence, opts);
    std::vector<VarKey> cond;
    for (const VersionRef& v : term.cond_params) cond.push_back(key_of(v));
    FactorTable conditional = detail::conditional_on(joint, cond);
    for (const VersionRef& v : term.cond_params) {
        auto it = given.find(key_of(v));
        if (it == given.end())
            throw EvalError("missing given table for conditioned version of " + net.name(v.theta));
        conditional = multiply(conditional, it->second, opts.max_cells);
        conditional = sum_out(conditional, key_of(v));
    }
    return canonical_scope(normalized(std::move(conditional)));
}

// Exact joint over the kept parameter versions: thread the update terms in
// topological order, include the orphan term, integrate the tilde copies out
// (against their marginal priors in prior-weighted mode) and normalize.
inline FactorTable eval_posterior(const BayesNet& net, const CutPosterior& p,
                                  const Evidence& evidence, const EvalOptions& opts = {}) {
    FactorTable joint = scalar_table();
    for (const UpdateTerm& term : p.terms) {
        if (term.trivial) continue;
        FactorTable raw = detail::term_joint(net, term, evidence, opts);
        std::vector<VarKey> cond;
        for (const VersionRef& v : term.cond_params) cond.push_back(key_of(v));
        joint = multiply(joint, detail::conditional_on(raw, cond), opts.max_cells);
    }
    if (p.orphan) {
        auto base = [](int raw) { return VarKey{raw, -1}; };
        for (int v : p.orphan->params)
            joint = multiply(joint, detail::cpt_factor(net, v, base), opts.max_cells);
        for (int x : p.orphan->parent_data) {
            auto it = evidence.find(x);
            if (it == evidence.end())
                throw EvalError("missing evidence for data node " + net.name(x) +
                                " (parent of an orphan parameter)");
            joint = plug(joint, {x, -1}, it->second);
        }
    }
    for (const VersionRef& v : p.tilde_vars) {
        VarKey k = key_of(v);
        if (p.mode == TildeMode::PriorWeighted) {
            FactorTable prior = prior_marginal(net, v.theta, opts.max_cells);
            prior.scope[0].key = k;
            joint = multiply(joint, prior, opts.max_cells);
        }
        joint = sum_out(joint, k);
    }
    return canonical_scope(normalized(std::move(joint)));
}

// Brute-force exact posterior over all parameters: the oracle the cut
// machinery is checked against.
inline FactorTable full_bayes(const BayesNet& net, const Evidence& evidence,
                              std::size_t max_cells = 10000000) {
    if (!net.discrete())
        throw EvalError("numeric evaluation needs a fully discrete network");
    auto base = [](int raw) { return VarKey{raw, -1}; };
    FactorTable joint = scalar_table();
    for (int v = 0; v < net.size(); ++v) {
        FactorTable f = detail::cpt_factor(net, v, base);
        for (const auto& [node, state] : evidence) f = plug(f, {node, -1}, state);
        joint = multiply(joint, f, max_cells);
    }
    for (int v : net.data_nodes())
        if (!evidence.count(v)) joint = sum_out(joint, {v, -1});
    return canonical_scope(normalized(std::move(joint)));
}

// Held-out log predictive density and its per-node breakdown.
struct Score {
    double log_pred = 0.0;
    std::map<int, double> per_node;
};

namespace detail {

// Data likelihood table over the kept parameter versions: plug `fixed`,
// sum every other data node out, entrywise-divide by the same table built
// without the `target` nodes.
inline FactorTable data_likelihood(const BayesNet& net, const Evidence& fixed,
                                   const EvalOptions& opts) {
    auto base = [](int raw) { return VarKey{raw, -1}; };
    FactorTable t = scalar_table();
    for (int x : net.data_nodes()) {
        FactorTable f = cpt_factor(net, x, base);
        t = multiply(t, f, opts.max_cells);
    }
    for (const auto& [node, state] : fixed) t = plug(t, {node, -1}, state);
    for (int x : net.data_nodes())
        if (!fixed.count(x)) t = sum_out(t, {x, -1});
    return canonical_scope(t);
}

inline double expected_ratio(const FactorTable& post, const FactorTable& num,
                             const FactorTable& den) {
    // all three share the canonical parameter scope
    if (post.scope.size() != num.scope.size())
        throw EvalError("posterior scope does not match the likelihood scope");
    double acc = 0.0;
    for (std::size_t i = 0; i < post.values.size(); ++i) {
        if (post.values[i] == 0.0) continue;
        if (den.values[i] > 0.0) acc += post.values[i] * num.values[i] / den.values[i];
    }
    return acc;
}

} // namespace detail

// Posterior-predictive probability of the held-out observations given the
// training observations under posterior p: the conditional data likelihood
// averaged over eval_posterior(net, p, train).
inline Score score_log_pred(const BayesNet& net, const CutPosterior& p, const Evidence& train,
                            const Evidence& heldout, EvalOptions opts = {}) {
    for (const auto& [node, state] : heldout)
        if (train.count(node))
            throw ValidationError("train and held-out evidence must be disjoint");
    Score score;
    if (heldout.empty()) return score;
    opts.missing = MissingData::Marginalize;
    FactorTable post = eval_posterior(net, p, train, opts);
    FactorTable den = detail::data_likelihood(net, train, opts);
    Evidence all = train;
    for (const auto& [node, state] : heldout) all[node] = state;
    FactorTable num = detail::data_likelihood(net, all, opts);
    double pred = detail::expected_ratio(post, num, den);
    score.log_pred = pred > 0.0 ? std::log(pred) : -std::numeric_limits<double>::infinity();
    for (const auto& [node, state] : heldout) {
        Evidence one = train;
        one[node] = state;
        FactorTable num_one = detail::data_likelihood(net, one, opts);
        double pred_one = detail::expected_ratio(post, num_one, den);
        score.per_node[node] =
            pred_one > 0.0 ? std::log(pred_one) : -std::numeric_limits<double>::infinity();
    }
    return score;
}

inline Json score_to_json(const BayesNet& net, const Score& s) {
    Json per = Json::object();
    for (auto [node, v] : s.per_node) per[net.name(node)] = v;
    return Json{{"log_pred", s.log_pred}, {"per_node", std::move(per)}};
}

inline Json table_to_json(const BayesNet& net, const FactorTable& t) {
    Json scope = Json::array();
    for (const FactorVar& v : t.scope) {
        Json jv{{"node", net.name(v.key.node)}, {"states", v.card}};
        if (v.key.module >= 0) jv["tilde_module"] = v.key.module;
        scope.push_back(std::move(jv));
    }
    return Json{{"scope", std::move(scope)}, {"values", t.values}};
}

} // namespace cutspace
