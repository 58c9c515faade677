#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cutspace/network.hpp"

namespace cutspace {

// Partition of the data nodes into nonempty disjoint blocks. Block order is
// the document order and is preserved by the induced ModuleSet. Labels are
// optional aliases used by orientation documents and reports.
struct Partition {
    std::vector<std::vector<int>> blocks;
    std::vector<std::string> labels;

    const std::string& label(int i) const { return labels.at(i); }

    int block_of(int data_node) const {
        for (int b = 0; b < static_cast<int>(blocks.size()); ++b)
            for (int v : blocks[b])
                if (v == data_node) return b;
        return -1;
    }
};

// A module: the block that seeds it plus every vertex collected by the
// path-closure rules (boundary data nodes from other blocks included).
struct Module {
    std::set<int> core;
    std::set<int> members;
};

struct ModuleSet {
    Partition partition;
    std::vector<Module> modules;                 // one per block, same order
    std::vector<int> shared_params;              // in >= 2 modules
    std::map<int, std::vector<int>> intrinsic;   // module index -> params in exactly that module
    std::vector<int> orphan_params;              // in no module

    int module_count() const { return static_cast<int>(modules.size()); }

    // Indices of the modules whose member set contains v, ascending.
    std::vector<int> modules_containing(int v) const {
        std::vector<int> out;
        for (int m = 0; m < module_count(); ++m)
            if (modules[m].members.count(v)) out.push_back(m);
        return out;
    }

    bool is_shared(int v) const {
        return std::find(shared_params.begin(), shared_params.end(), v) != shared_params.end();
    }
};

inline void validate_partition(const BayesNet& net, const Partition& partition) {
    std::set<int> seen;
    for (const auto& block : partition.blocks) {
        if (block.empty())
            throw ValidationError("partition block is empty");
        for (int v : block) {
            if (v < 0 || v >= net.size())
                throw ValidationError("partition references unknown node");
            if (!net.is_data(v))
                throw ValidationError("partition block contains non-data node " + net.name(v));
            if (!seen.insert(v).second)
                throw ValidationError("partition blocks are not disjoint at " + net.name(v));
        }
    }
    if (seen.size() != net.data_nodes().size())
        throw ValidationError("partition blocks must cover all data nodes");
    if (!partition.labels.empty() && partition.labels.size() != partition.blocks.size())
        throw ValidationError("partition label count must match block count");
}

// Module formation: collect every vertex that reaches the core along a
// directed path whose vertices after it avoid off-core data nodes. This is a
// reverse sweep from the core that stops expanding at off-core data nodes,
// equivalent to the path-collection rules but linear time.
inline Module form_module(const BayesNet& net, const std::set<int>& core) {
    if (core.empty())
        throw ValidationError("module core is empty");
    for (int v : core) {
        if (v < 0 || v >= net.size())
            throw ValidationError("module core references unknown node");
        if (!net.is_data(v))
            throw ValidationError("module core contains non-data node " + net.name(v));
    }
    Module m;
    m.core = core;
    std::vector<int> stack(core.begin(), core.end());
    m.members = core;
    while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        for (int p : net.node(u).parents) {
            if (!m.members.insert(p).second) continue;
            // off-core data nodes enter as boundary vertices and stop the sweep
            if (!net.is_data(p) || core.count(p)) stack.push_back(p);
        }
    }
    return m;
}

inline ModuleSet form_module_set(const BayesNet& net, const Partition& partition) {
    validate_partition(net, partition);
    ModuleSet ms;
    ms.partition = partition;
    if (ms.partition.labels.empty())
        for (std::size_t b = 0; b < partition.blocks.size(); ++b)
            ms.partition.labels.push_back(std::to_string(b));
    for (const auto& block : partition.blocks)
        ms.modules.push_back(form_module(net, std::set<int>(block.begin(), block.end())));
    for (int v : net.param_nodes()) {
        std::vector<int> in = ms.modules_containing(v);
        if (in.empty()) ms.orphan_params.push_back(v);
        else if (in.size() == 1) ms.intrinsic[in[0]].push_back(v);
        else ms.shared_params.push_back(v);
    }
    return ms;
}

// Replace blocks i and j by their union; the merged block takes the lower
// index and the remaining blocks reindex contiguously.
inline ModuleSet merge_modules(const BayesNet& net, const ModuleSet& ms, int i, int j) {
    int n = static_cast<int>(ms.partition.blocks.size());
    if (i < 0 || j < 0 || i >= n || j >= n)
        throw ValidationError("block index out of range");
    if (i == j)
        throw ValidationError("cannot merge a block with itself");
    int lo = std::min(i, j), hi = std::max(i, j);
    Partition merged;
    for (int b = 0; b < n; ++b) {
        if (b == hi) continue;
        std::vector<int> block = ms.partition.blocks[b];
        if (b == lo) {
            block.insert(block.end(), ms.partition.blocks[hi].begin(), ms.partition.blocks[hi].end());
            std::sort(block.begin(), block.end());
            merged.labels.push_back(ms.partition.label(lo) + "+" + ms.partition.label(hi));
        } else {
            merged.labels.push_back(ms.partition.label(b));
        }
        merged.blocks.push_back(std::move(block));
    }
    return form_module_set(net, merged);
}

inline Partition partition_from_json(const BayesNet& net, const Json& doc) {
    if (!doc.is_object() || !doc.contains("blocks") || !doc["blocks"].is_array())
        throw ParseError("partition document must be an object with a \"blocks\" array");
    Partition p;
    for (const Json& jb : doc["blocks"]) {
        std::vector<int> block;
        for (const Json& jv : jb) block.push_back(net.index_of(jv.get<std::string>()));
        p.blocks.push_back(std::move(block));
    }
    if (doc.contains("labels"))
        p.labels = doc["labels"].get<std::vector<std::string>>();
    validate_partition(net, p);
    return p;
}

inline Partition parse_partition(const BayesNet& net, const std::string& text) {
    return partition_from_json(net, detail::parse_json(text));
}

inline Json partition_to_json(const BayesNet& net, const Partition& p) {
    Json blocks = Json::array();
    for (const auto& block : p.blocks) {
        Json jb = Json::array();
        for (int v : block) jb.push_back(net.name(v));
        blocks.push_back(std::move(jb));
    }
    Json doc{{"blocks", std::move(blocks)}};
    if (!p.labels.empty()) doc["labels"] = p.labels;
    return doc;
}

inline Json module_set_to_json(const BayesNet& net, const ModuleSet& ms) {
    auto names = [&](const auto& ids) {
        Json a = Json::array();
        for (int v : ids) a.push_back(net.name(v));
        return a;
    };
    Json mods = Json::array();
    for (int m = 0; m < ms.module_count(); ++m) {
        Json jm;
        jm["label"] = ms.partition.label(m);
        jm["core"] = names(ms.modules[m].core);
        jm["members"] = names(ms.modules[m].members);
        auto it = ms.intrinsic.find(m);
        jm["intrinsic"] = it == ms.intrinsic.end() ? Json::array() : names(it->second);
        mods.push_back(std::move(jm));
    }
    return Json{{"modules", std::move(mods)},
                {"shared", names(ms.shared_params)},
                {"orphan", names(ms.orphan_params)}};
}

} // namespace cutspace
