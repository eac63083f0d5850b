#pragma once

// Ingredient trees, element graphs, creatives and the tree feature space.
//
// Ingredients are indexed 0..N-1. An element is identified by the pair
// (ingredient, local index); names are labels only. The element graph keeps
// one dense L_parent x L_child block per tree edge together with a presence
// mask: a forbidden element pair is an absent edge.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "aes/common.hpp"

namespace aes {

using WeightVector = Eigen::VectorXd;

struct Ingredient {
    std::string name;
    std::vector<std::string> elements;

    std::size_t element_count() const { return elements.size(); }
};

class IngredientTree {
public:
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    IngredientTree() = default;

    /// parent[i] is the parent ingredient of i, npos for the root.
    IngredientTree(std::vector<Ingredient> ingredients, std::vector<std::size_t> parent)
        : ingredients_(std::move(ingredients)), parent_(std::move(parent))
    {
        const std::size_t n = ingredients_.size();
        if (n == 0) throw Error("ingredient tree has no ingredients");
        if (parent_.size() != n) throw Error("parent list size does not match ingredient count");
        for (std::size_t i = 0; i < n; ++i) {
            if (ingredients_[i].element_count() == 0)
                throw Error("ingredient '" + ingredients_[i].name + "' has no elements");
            for (std::size_t k = 0; k < i; ++k)
                if (ingredients_[k].name == ingredients_[i].name)
                    throw Error("duplicate ingredient name '" + ingredients_[i].name + "'");
        }

        children_.assign(n, {});
        root_ = npos;
        for (std::size_t i = 0; i < n; ++i) {
            const auto p = parent_[i];
            if (p == npos) {
                if (root_ != npos) throw Error("ingredient tree has more than one root");
                root_ = i;
            } else if (p >= n || p == i) {
                throw Error("invalid parent for ingredient '" + ingredients_[i].name + "'");
            } else {
                children_[p].push_back(i);
            }
        }
        if (root_ == npos) throw Error("ingredient tree has no root");

        // Children are pushed in increasing id order already.
        preorder_.reserve(n);
        std::vector<std::size_t> stack{root_};
        while (!stack.empty()) {
            const auto i = stack.back();
            stack.pop_back();
            preorder_.push_back(i);
            for (auto it = children_[i].rbegin(); it != children_[i].rend(); ++it) stack.push_back(*it);
            if (preorder_.size() > n) break;
        }
        if (preorder_.size() != n) throw Error("ingredient tree is not connected or contains a cycle");
    }

    std::size_t size() const { return ingredients_.size(); }
    std::size_t root() const { return root_; }
    std::size_t parent(std::size_t i) const { return parent_.at(i); }
    const std::vector<std::size_t>& parents() const { return parent_; }
    const std::vector<std::size_t>& children(std::size_t i) const { return children_.at(i); }
    const Ingredient& ingredient(std::size_t i) const { return ingredients_.at(i); }
    const std::vector<Ingredient>& ingredients() const { return ingredients_; }
    std::size_t element_count(std::size_t i) const { return ingredients_[i].element_count(); }

    /// Root first; children visited in increasing id order.
    const std::vector<std::size_t>& preorder() const { return preorder_; }

    std::vector<std::size_t> element_counts() const
    {
        std::vector<std::size_t> counts(size());
        for (std::size_t i = 0; i < size(); ++i) counts[i] = element_count(i);
        return counts;
    }

    std::size_t element_total() const
    {
        std::size_t total = 0;
        for (const auto& ing : ingredients_) total += ing.element_count();
        return total;
    }

    /// Size of the unconstrained product space, prod L_i.
    std::uint64_t product_size() const
    {
        std::uint64_t p = 1;
        for (const auto& ing : ingredients_) p *= ing.element_count();
        return p;
    }

    bool adjacent(std::size_t a, std::size_t b) const
    {
        return (parent_.at(a) == b) || (parent_.at(b) == a);
    }

    std::optional<std::size_t> find(std::string_view name) const
    {
        for (std::size_t i = 0; i < size(); ++i)
            if (ingredients_[i].name == name) return i;
        return std::nullopt;
    }

    bool same_shape(const IngredientTree& other) const
    {
        return parent_ == other.parent_ && element_counts() == other.element_counts();
    }

private:
    std::vector<Ingredient> ingredients_;
    std::vector<std::size_t> parent_;
    std::vector<std::vector<std::size_t>> children_;
    std::vector<std::size_t> preorder_;
    std::size_t root_ = npos;
};

/// Builds a tree with generated names ("i0", "i0_e1", ...) unless names are given.
inline IngredientTree make_tree(const std::vector<std::size_t>& counts, std::vector<std::size_t> parent,
                                const std::vector<std::string>& names = {})
{
    std::vector<Ingredient> ings(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
        ings[i].name = i < names.size() ? names[i] : "i" + std::to_string(i);
        for (std::size_t e = 0; e < counts[i]; ++e) ings[i].elements.push_back(ings[i].name + "_e" + std::to_string(e));
    }
    return IngredientTree(std::move(ings), std::move(parent));
}

/// A chain 0 - 1 - ... - (N-1) rooted at 0.
inline IngredientTree make_chain(const std::vector<std::size_t>& counts)
{
    std::vector<std::size_t> parent(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) parent[i] = i == 0 ? IngredientTree::npos : i - 1;
    return make_tree(counts, std::move(parent));
}

struct Creative {
    std::vector<std::size_t> choice;

    std::size_t size() const { return choice.size(); }
    std::size_t operator[](std::size_t i) const { return choice[i]; }
    auto operator<=>(const Creative&) const = default;
};

struct ElementRef {
    std::size_t ingredient = 0;
    std::size_t element = 0;
};

struct ForbiddenPair {
    ElementRef a;
    ElementRef b;
};

/// Weights in graph layout. edges[c] is the row-major L_parent(c) x L_c block
/// of the tree edge ending at ingredient c; the root's entry is empty.
struct GraphWeights {
    double bias = 0.0;
    std::vector<std::vector<double>> vertices;
    std::vector<std::vector<double>> edges;

    static GraphWeights zeros(const IngredientTree& tree)
    {
        GraphWeights w;
        w.vertices.resize(tree.size());
        w.edges.resize(tree.size());
        for (std::size_t i = 0; i < tree.size(); ++i) {
            w.vertices[i].assign(tree.element_count(i), 0.0);
            if (i != tree.root()) w.edges[i].assign(tree.element_count(tree.parent(i)) * tree.element_count(i), 0.0);
        }
        return w;
    }
};

enum class FeatureKind { bias, vertex, edge };

/// Sparse 0/1 feature vector: the sorted list of active coordinates.
struct SparseFeatures {
    std::vector<std::size_t> index;

    double dot(const WeightVector& w) const
    {
        double s = 0.0;
        for (auto k : index) s += w[static_cast<Eigen::Index>(k)];
        return s;
    }

    WeightVector dense(std::size_t dim) const
    {
        WeightVector x = WeightVector::Zero(static_cast<Eigen::Index>(dim));
        for (auto k : index) x[static_cast<Eigen::Index>(k)] = 1.0;
        return x;
    }
};

/// Maps elements and present edges to coordinates of the tree feature space.
/// Coordinate 0 is the bias, then all elements ingredient by ingredient, then
/// the present edges of each tree edge (ordered by child id, row-major).
class FeatureIndexer {
public:
    FeatureIndexer() = default;

    FeatureIndexer(const IngredientTree& tree, const std::vector<std::vector<char>>& present)
        : counts_(tree.element_counts()), parent_(tree.parents())
    {
        const std::size_t n = counts_.size();
        vertex_offset_.resize(n);
        std::size_t next = 1;
        for (std::size_t i = 0; i < n; ++i) {
            vertex_offset_[i] = next;
            next += counts_[i];
        }
        vertex_end_ = next;
        edge_coord_.resize(n);
        for (std::size_t c = 0; c < n; ++c) {
            if (parent_[c] == IngredientTree::npos) continue;
            edge_coord_[c].assign(present[c].size(), -1);
            for (std::size_t k = 0; k < present[c].size(); ++k)
                if (present[c][k]) edge_coord_[c][k] = static_cast<std::int64_t>(next++);
        }
        dim_ = next;
    }

    std::size_t dimension() const { return dim_; }
    std::size_t ingredient_count() const { return counts_.size(); }
    std::size_t vertex_coord(std::size_t ingredient, std::size_t element) const
    {
        return vertex_offset_[ingredient] + element;
    }
    /// -1 when the edge is absent.
    std::int64_t edge_coord(std::size_t child, std::size_t parent_element, std::size_t child_element) const
    {
        return edge_coord_[child][parent_element * counts_[child] + child_element];
    }
    const std::vector<std::int64_t>& edge_block(std::size_t child) const { return edge_coord_[child]; }

    FeatureKind kind(std::size_t coord) const
    {
        if (coord == 0) return FeatureKind::bias;
        return coord < vertex_end_ ? FeatureKind::vertex : FeatureKind::edge;
    }

    void check_shape(const Creative& c) const
    {
        if (c.size() != counts_.size())
            throw Error("creative has " + std::to_string(c.size()) + " choices, expected " +
                        std::to_string(counts_.size()));
        for (std::size_t i = 0; i < counts_.size(); ++i)
            if (c[i] >= counts_[i])
                throw Error("element index " + std::to_string(c[i]) + " out of range for ingredient " +
                            std::to_string(i));
    }

    bool feasible(const Creative& c) const
    {
        check_shape(c);
        for (std::size_t i = 0; i < counts_.size(); ++i) {
            if (parent_[i] == IngredientTree::npos) continue;
            if (edge_coord(i, c[parent_[i]], c[i]) < 0) return false;
        }
        return true;
    }

    SparseFeatures featurize(const Creative& c) const
    {
        if (!feasible(c)) throw Error("cannot featurize an infeasible creative");
        SparseFeatures x;
        x.index.reserve(2 * counts_.size());
        x.index.push_back(0);
        for (std::size_t i = 0; i < counts_.size(); ++i) x.index.push_back(vertex_coord(i, c[i]));
        for (std::size_t i = 0; i < counts_.size(); ++i) {
            if (parent_[i] == IngredientTree::npos) continue;
            x.index.push_back(static_cast<std::size_t>(edge_coord(i, c[parent_[i]], c[i])));
        }
        return x;
    }

private:
    std::vector<std::size_t> counts_;
    std::vector<std::size_t> parent_;
    std::vector<std::size_t> vertex_offset_;
    std::vector<std::vector<std::int64_t>> edge_coord_;
    std::size_t vertex_end_ = 1;
    std::size_t dim_ = 1;
};

class ElementGraph {
public:
    ElementGraph() = default;

    ElementGraph(IngredientTree tree, GraphWeights weights, std::vector<std::vector<char>> present)
        : tree_(std::move(tree)), weights_(std::move(weights)), present_(std::move(present))
    {
        edge_count_ = 0;
        for (std::size_t c = 0; c < tree_.size(); ++c) {
            if (c == tree_.root()) continue;
            const auto n = static_cast<std::size_t>(std::count(present_[c].begin(), present_[c].end(), char{1}));
            if (n == 0)
                throw Error("no feasible creative: every element pair between '" +
                            tree_.ingredient(tree_.parent(c)).name + "' and '" + tree_.ingredient(c).name +
                            "' is forbidden");
            edge_count_ += n;
        }
        indexer_ = FeatureIndexer(tree_, present_);
    }

    const IngredientTree& tree() const { return tree_; }
    const FeatureIndexer& features() const { return indexer_; }
    const GraphWeights& weights() const { return weights_; }
    double bias() const { return weights_.bias; }

    double vertex_weight(std::size_t ingredient, std::size_t element) const
    {
        return weights_.vertices[ingredient][element];
    }
    double edge_weight(std::size_t child, std::size_t parent_element, std::size_t child_element) const
    {
        return weights_.edges[child][parent_element * tree_.element_count(child) + child_element];
    }
    bool edge_present(std::size_t child, std::size_t parent_element, std::size_t child_element) const
    {
        return present_[child][parent_element * tree_.element_count(child) + child_element] != 0;
    }
    const std::vector<std::vector<char>>& presence() const { return present_; }

    /// |V^E|
    std::size_t vertex_count() const { return tree_.element_total(); }
    /// |E^E|, present edges only.
    std::size_t edge_count() const { return edge_count_; }

    bool same_structure(const ElementGraph& other) const
    {
        return tree_.same_shape(other.tree_) && present_ == other.present_;
    }

    /// Same structure and mask, new weights.
    ElementGraph with_weights(GraphWeights w) const { return ElementGraph(tree_, std::move(w), present_); }

    /// The graph's own weights packed into the feature layout.
    WeightVector packed_weights() const
    {
        WeightVector w = WeightVector::Zero(static_cast<Eigen::Index>(indexer_.dimension()));
        w[0] = weights_.bias;
        for (std::size_t i = 0; i < tree_.size(); ++i)
            for (std::size_t e = 0; e < tree_.element_count(i); ++e)
                w[static_cast<Eigen::Index>(indexer_.vertex_coord(i, e))] = weights_.vertices[i][e];
        for (std::size_t c = 0; c < tree_.size(); ++c) {
            if (c == tree_.root()) continue;
            const auto& block = indexer_.edge_block(c);
            for (std::size_t k = 0; k < block.size(); ++k)
                if (block[k] >= 0) w[block[k]] = weights_.edges[c][k];
        }
        return w;
    }

private:
    IngredientTree tree_;
    GraphWeights weights_;
    std::vector<std::vector<char>> present_;
    FeatureIndexer indexer_;
    std::size_t edge_count_ = 0;
};

inline ElementGraph build_element_graph(IngredientTree tree, GraphWeights weights,
                                        const std::vector<ForbiddenPair>& constraints)
{
    const std::size_t n = tree.size();
    if (weights.vertices.size() != n || weights.edges.size() != n) throw Error("weights do not match the tree");
    std::vector<std::vector<char>> present(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (weights.vertices[i].size() != tree.element_count(i))
            throw Error("vertex weights missing for ingredient '" + tree.ingredient(i).name + "'");
        if (i == tree.root()) continue;
        const auto cells = tree.element_count(tree.parent(i)) * tree.element_count(i);
        if (weights.edges[i].size() != cells)
            throw Error("edge weights missing for tree edge into '" + tree.ingredient(i).name + "'");
        present[i].assign(cells, 1);
    }
    for (const auto& pair : constraints) {
        auto a = pair.a;
        auto b = pair.b;
        if (a.ingredient >= n || b.ingredient >= n) throw Error("constraint references an unknown ingredient");
        if (a.ingredient == b.ingredient || !tree.adjacent(a.ingredient, b.ingredient))
            throw Error("constraint between non-adjacent ingredients '" + tree.ingredient(a.ingredient).name +
                        "' and '" + tree.ingredient(b.ingredient).name + "'");
        if (tree.parent(a.ingredient) != b.ingredient) std::swap(a, b);
        // now b is the parent of a
        if (a.element >= tree.element_count(a.ingredient) || b.element >= tree.element_count(b.ingredient))
            throw Error("constraint references an element out of range");
        present[a.ingredient][b.element * tree.element_count(a.ingredient) + a.element] = 0;
    }
    return ElementGraph(std::move(tree), std::move(weights), std::move(present));
}

inline ElementGraph build_element_graph(IngredientTree tree, const std::vector<ForbiddenPair>& constraints = {})
{
    auto w = GraphWeights::zeros(tree);
    return build_element_graph(std::move(tree), std::move(w), constraints);
}

inline bool is_feasible(const ElementGraph& graph, const Creative& c) { return graph.features().feasible(c); }

inline SparseFeatures featurize(const FeatureIndexer& indexer, const Creative& c) { return indexer.featurize(c); }

/// Mixed-radix rank of a choice array over the unconstrained product space;
/// ingredient 0 is the most significant digit, so codes follow lexicographic order.
inline std::uint64_t creative_code(const IngredientTree& tree, const Creative& c)
{
    std::uint64_t code = 0;
    for (std::size_t i = 0; i < tree.size(); ++i) code = code * tree.element_count(i) + c[i];
    return code;
}

inline Creative creative_from_code(const IngredientTree& tree, std::uint64_t code)
{
    if (code >= tree.product_size()) throw Error("creative code " + std::to_string(code) + " out of range");
    Creative c;
    c.choice.assign(tree.size(), 0);
    for (std::size_t i = tree.size(); i-- > 0;) {
        c.choice[i] = static_cast<std::size_t>(code % tree.element_count(i));
        code /= tree.element_count(i);
    }
    return c;
}

/// Visits every feasible creative once, in lexicographic order of the choice array.
/// Infeasible prefixes are pruned as soon as both ends of a tree edge are fixed.
inline void for_each_creative(const ElementGraph& graph, const std::function<void(const Creative&)>& visit)
{
    const auto& tree = graph.tree();
    const std::size_t n = tree.size();
    // checks[i]: tree edges (as child ids) whose later endpoint is i
    std::vector<std::vector<std::size_t>> checks(n);
    for (std::size_t c = 0; c < n; ++c) {
        if (c == tree.root()) continue;
        checks[std::max(c, tree.parent(c))].push_back(c);
    }
    Creative cur;
    cur.choice.assign(n, 0);
    std::function<void(std::size_t)> rec = [&](std::size_t i) {
        if (i == n) {
            visit(cur);
            return;
        }
        for (std::size_t e = 0; e < tree.element_count(i); ++e) {
            cur.choice[i] = e;
            bool ok = true;
            for (auto c : checks[i])
                if (!graph.edge_present(c, cur.choice[tree.parent(c)], cur.choice[c])) {
                    ok = false;
                    break;
                }
            if (ok) rec(i + 1);
        }
    };
    rec(0);
}

inline std::vector<Creative> enumerate_creatives(const ElementGraph& graph)
{
    std::vector<Creative> out;
    for_each_creative(graph, [&](const Creative& c) { out.push_back(c); });
    return out;
}

} // namespace aes
