#pragma once

// Exact maximization of the tree score over feasible creatives.
//
// d[i][j] is the best score of the subtree hanging from element j of
// ingredient i:
//   d[i][j] = w_j + sum_{m in children(i)} max_{t in m, (j,t) present} (v_{j,t} + d[m][t])
// Absent edges are skipped; an element whose child has no usable edge is
// excluded (-inf) and the exclusion propagates upward.

#include <cstdint>
#include <limits>
#include <vector>

#include "aes/ctr_model.hpp"
#include "aes/graph.hpp"

namespace aes {

struct DpCounter {
    std::uint64_t vertex_visits = 0;
    std::uint64_t edge_relaxations = 0;

    std::uint64_t total() const { return vertex_visits + edge_relaxations; }
};

struct DpTable {
    std::vector<std::vector<double>> best;
    /// back[m][j]: best element of child ingredient m under parent element j, -1 if none.
    std::vector<std::vector<std::int64_t>> back;
};

struct Selection {
    Creative creative;
    double value = 0.0;
};

inline DpTable dp_table(const ElementGraph& graph, const WeightVector& weights, DpCounter* counter = nullptr)
{
    constexpr double excluded = -std::numeric_limits<double>::infinity();
    const auto& tree = graph.tree();
    const auto& idx = graph.features();
    if (static_cast<std::size_t>(weights.size()) != idx.dimension())
        throw Error("weight vector length does not match the graph's feature dimension");

    const std::size_t n = tree.size();
    DpTable t;
    t.best.resize(n);
    t.back.resize(n);
    DpCounter local;

    const auto& order = tree.preorder();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const auto i = *it;
        const auto li = tree.element_count(i);
        auto& d = t.best[i];
        d.resize(li);
        for (std::size_t j = 0; j < li; ++j) d[j] = weights[static_cast<Eigen::Index>(idx.vertex_coord(i, j))];
        local.vertex_visits += li;

        for (auto m : tree.children(i)) {
            const auto lm = tree.element_count(m);
            const auto& dm = t.best[m];
            const auto& coords = idx.edge_block(m);
            auto& back = t.back[m];
            back.assign(li, -1);
            for (std::size_t j = 0; j < li; ++j) {
                double top = excluded;
                std::int64_t arg = -1;
                const auto* row = coords.data() + j * lm;
                for (std::size_t s = 0; s < lm; ++s) {
                    if (row[s] < 0) continue;
                    ++local.edge_relaxations;
                    if (dm[s] == excluded) continue;
                    const double v = weights[row[s]] + dm[s];
                    if (v > top) {
                        top = v;
                        arg = static_cast<std::int64_t>(s);
                    }
                }
                back[j] = arg;
                d[j] = arg < 0 ? excluded : d[j] + top;
            }
        }
    }
    if (counter) {
        counter->vertex_visits += local.vertex_visits;
        counter->edge_relaxations += local.edge_relaxations;
    }
    return t;
}

namespace detail {
inline std::size_t best_root_element(const DpTable& t, std::size_t root)
{
    const auto& d = t.best[root];
    std::size_t arg = 0;
    for (std::size_t j = 1; j < d.size(); ++j)
        if (d[j] > d[arg]) arg = j;
    if (d[arg] == -std::numeric_limits<double>::infinity()) throw Error("no feasible creative");
    return arg;
}
} // namespace detail

inline double dp_max_value(const ElementGraph& graph, const WeightVector& weights, DpCounter* counter = nullptr)
{
    const auto t = dp_table(graph, weights, counter);
    const auto root = graph.tree().root();
    return weights[0] + t.best[root][detail::best_root_element(t, root)];
}

/// Ties go to the lowest element index at every decision.
inline Selection dp_argmax(const ElementGraph& graph, const WeightVector& weights, DpCounter* counter = nullptr)
{
    const auto t = dp_table(graph, weights, counter);
    const auto& tree = graph.tree();
    const auto root = tree.root();
    Selection sel;
    sel.creative.choice.assign(tree.size(), 0);
    sel.creative.choice[root] = detail::best_root_element(t, root);
    sel.value = weights[0] + t.best[root][sel.creative.choice[root]];
    for (auto i : tree.preorder())
        for (auto m : tree.children(i)) {
            const auto b = t.back[m][sel.creative.choice[i]];
            if (b < 0) throw Error("dp back-pointer missing on the optimal path");
            sel.creative.choice[m] = static_cast<std::size_t>(b);
        }
    return sel;
}

/// Exhaustive maximum; the lexicographically first creative wins ties.
inline Selection brute_force_argmax(const ElementGraph& graph, const WeightVector& weights,
                                    std::uint64_t* evaluated = nullptr)
{
    const auto& idx = graph.features();
    if (static_cast<std::size_t>(weights.size()) != idx.dimension())
        throw Error("weight vector length does not match the graph's feature dimension");
    Selection best;
    bool found = false;
    std::uint64_t count = 0;
    for_each_creative(graph, [&](const Creative& c) {
        ++count;
        const double v = idx.featurize(c).dot(weights);
        if (!found || v > best.value) {
            best.creative = c;
            best.value = v;
            found = true;
        }
    });
    if (evaluated) *evaluated += count;
    if (!found) throw Error("no feasible creative");
    return best;
}

} // namespace aes
