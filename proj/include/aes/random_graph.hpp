#pragma once

// Random element graphs for oracle checks.

#include <algorithm>
#include <string>
#include <vector>

#include "aes/common.hpp"
#include "aes/ctr_model.hpp"
#include "aes/graph.hpp"

namespace aes {

struct RandomGraphOptions {
    std::size_t max_ingredients = 6;
    std::size_t max_elements = 4;
    /// Probability that any single cross-ingredient pair on a tree edge is forbidden.
    double constraint_prob = 0.2;
};

/// Random tree shape, element counts, constraint mask and N(0,1) weights.
/// Redraws the mask until at least one creative is feasible.
inline ElementGraph random_element_graph(Rng& rng, const RandomGraphOptions& opt = {})
{
    if (opt.max_ingredients == 0 || opt.max_elements == 0) throw Error("random graph bounds must be positive");
    const std::size_t n = 1 + uniform_index(rng, opt.max_ingredients);
    std::vector<std::size_t> counts(n), parent(n, IngredientTree::npos);
    for (auto& c : counts) c = 1 + uniform_index(rng, opt.max_elements);
    for (std::size_t i = 1; i < n; ++i) parent[i] = uniform_index(rng, i);
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n; ++i) names.push_back("ing" + std::to_string(i));
    const auto tree = make_tree(counts, parent, names);

    for (;;) {
        std::vector<ForbiddenPair> constraints;
        for (std::size_t m = 0; m < n; ++m) {
            if (parent[m] == IngredientTree::npos) continue;
            for (std::size_t a = 0; a < counts[parent[m]]; ++a)
                for (std::size_t b = 0; b < counts[m]; ++b)
                    if (uniform01(rng) < opt.constraint_prob) constraints.push_back({{parent[m], a}, {m, b}});
        }
        ElementGraph shape;
        try {
            shape = build_element_graph(tree, constraints);
        } catch (const Error&) {
            continue;
        }
        bool any = false;
        for_each_creative(shape, [&](const Creative&) { any = true; });
        if (!any) continue;

        auto w = GraphWeights::zeros(tree);
        w.bias = standard_normal(rng);
        for (auto& row : w.vertices)
            for (auto& x : row) x = standard_normal(rng);
        for (auto& block : w.edges)
            for (auto& x : block) x = standard_normal(rng);
        return build_element_graph(tree, w, constraints);
    }
}

} // namespace aes
