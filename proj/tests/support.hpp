#pragma once

// Independent oracles and test-only policies shared by the unit and acceptance suites.

#include <cstdint>
#include <limits>
#include <memory>
#include <vector>

#include <Eigen/QR>

#include "aes/aes.hpp"

namespace aes::testing {

/// Score of a creative read straight off the graph's weight tables.
inline double direct_score(const ElementGraph& g, const Creative& c)
{
    const auto& tree = g.tree();
    double s = g.bias();
    for (std::size_t i = 0; i < tree.size(); ++i) s += g.vertex_weight(i, c[i]);
    for (std::size_t i = 0; i < tree.size(); ++i)
        if (i != tree.root()) s += g.edge_weight(i, c[tree.parent(i)], c[i]);
    return s;
}

/// Odometer over the full product space; constraints checked on the whole creative.
inline Selection exhaustive_argmax(const ElementGraph& g)
{
    const auto& tree = g.tree();
    Selection best;
    best.value = -std::numeric_limits<double>::infinity();
    Creative c;
    c.choice.assign(tree.size(), 0);
    for (std::uint64_t code = 0; code < tree.product_size(); ++code) {
        c = creative_from_code(tree, code);
        bool ok = true;
        for (std::size_t i = 0; i < tree.size() && ok; ++i)
            if (i != tree.root() && !g.edge_present(i, c[tree.parent(i)], c[i])) ok = false;
        if (!ok) continue;
        const double v = direct_score(g, c);
        if (v > best.value) best = {c, v};
    }
    return best;
}

/// Ridge solution of argmin ||X w - r||^2 + ||w||^2 via Householder QR on [X; I].
inline Eigen::VectorXd ridge_qr(const Eigen::MatrixXd& x, const Eigen::VectorXd& r)
{
    const auto n = x.rows(), k = x.cols();
    Eigen::MatrixXd a(n + k, k);
    a << x, Eigen::MatrixXd::Identity(k, k);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n + k);
    b.head(n) = r;
    return a.householderQr().solve(b);
}

/// Always plays the argmax of the true weights.
class ClairvoyantPolicy final : public Policy {
public:
    ClairvoyantPolicy(CreativeSpacePtr space, WeightVector truth) : Policy(std::move(space)), truth_(std::move(truth))
    {
        best_ = dp_argmax(graph(), truth_).creative;
    }
    std::string name() const override { return "clairvoyant"; }
    Creative select(Rng&) override { return best_; }
    void observe(const Creative&, int) override {}
    void reset() override {}

private:
    WeightVector truth_;
    Creative best_;
};

/// Greedy DP on the running ridge mean, no exploration.
class GreedyDpPolicy final : public Policy {
public:
    explicit GreedyDpPolicy(CreativeSpacePtr space, std::size_t recompute_interval = 1000)
        : Policy(std::move(space)), options_{0.0, recompute_interval}
    {
        reset();
    }
    std::string name() const override { return "greedy_dp"; }
    Creative select(Rng&) override { return dp_argmax(graph(), posterior_.mean()).creative; }
    void observe(const Creative& c, int reward) override
    {
        posterior_.update(graph().features().featurize(c), reward);
    }
    void observe_batch(std::span<const Impression> batch) override
    {
        LinUcbPolicy::batch_update(posterior_, graph().features(), batch);
    }
    void reset() override { posterior_ = PosteriorState(graph().features().dimension(), options_); }

private:
    PosteriorOptions options_;
    PosteriorState posterior_;
};

inline ElementGraph graph_3x3x3_chain(std::uint64_t seed, std::vector<ForbiddenPair> constraints = {})
{
    auto tree = make_chain({3, 3, 3});
    auto rng = make_rng({seed, 33});
    auto w = GraphWeights::zeros(tree);
    w.bias = standard_normal(rng);
    for (auto& row : w.vertices)
        for (auto& x : row) x = standard_normal(rng);
    for (auto& block : w.edges)
        for (auto& x : block) x = standard_normal(rng);
    return build_element_graph(tree, w, constraints);
}

} // namespace aes::testing
