#pragma once

// Selection policies behind one interface.
//
// Every policy is trained in batches by the harness: select() is called with
// the model frozen, and observe()/observe_batch() feeds the collected
// impressions in order. Context-free policies index creatives by their rank in
// the lexicographic enumeration held by CreativeSpace.

#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "aes/ctr_model.hpp"
#include "aes/dp.hpp"
#include "aes/graph.hpp"

namespace aes {

/// The enumerated feasible creatives of a graph, with a code -> rank index.
class CreativeSpace {
public:
    explicit CreativeSpace(ElementGraph graph) : graph_(std::move(graph))
    {
        creatives_ = enumerate_creatives(graph_);
        rank_.reserve(creatives_.size() * 2);
        for (std::size_t r = 0; r < creatives_.size(); ++r) rank_.emplace(creative_code(graph_.tree(), creatives_[r]), r);
    }

    const ElementGraph& graph() const { return graph_; }
    const std::vector<Creative>& creatives() const { return creatives_; }
    std::size_t size() const { return creatives_.size(); }
    const Creative& at(std::size_t rank) const { return creatives_.at(rank); }

    /// Rank of a feasible creative, nullopt if infeasible. Malformed choice arrays throw.
    std::optional<std::size_t> rank_of(const Creative& c) const
    {
        graph_.features().check_shape(c);
        auto it = rank_.find(creative_code(graph_.tree(), c));
        if (it == rank_.end()) return std::nullopt;
        return it->second;
    }

private:
    ElementGraph graph_;
    std::vector<Creative> creatives_;
    std::unordered_map<std::uint64_t, std::size_t> rank_;
};

using CreativeSpacePtr = std::shared_ptr<const CreativeSpace>;

struct PolicyParams {
    double epsilon = 0.1;
    double lambda = 0.03;
    double alpha = 0.3;
    double sigma = 1.0;
    std::size_t hill_sweeps = 4;   // S
    std::size_t hill_restarts = 3; // K
    std::size_t resample_limit = 10;
    std::size_t recompute_interval = 1000;
};

struct Impression {
    Creative creative;
    int reward = 0;
};

class Policy {
public:
    explicit Policy(CreativeSpacePtr space) : space_(std::move(space))
    {
        if (!space_) throw Error("policy needs a creative space");
    }
    virtual ~Policy() = default;

    virtual std::string name() const = 0;
    virtual Creative select(Rng& rng) = 0;
    virtual void observe(const Creative& creative, int reward) = 0;
    virtual void observe_batch(std::span<const Impression> batch)
    {
        for (const auto& imp : batch) observe(imp.creative, imp.reward);
    }
    virtual void reset() = 0;
    /// Only MVT may return creatives that break visual constraints.
    virtual bool enforces_constraints() const { return true; }

    /// Search operations spent by the most recent select().
    std::uint64_t last_search_ops() const { return ops_; }
    const CreativeSpace& space() const { return *space_; }
    const ElementGraph& graph() const { return space_->graph(); }

protected:
    std::size_t rank_or_throw(const Creative& c) const
    {
        auto r = space_->rank_of(c);
        if (!r) throw Error("observed creative is not feasible");
        return *r;
    }

    CreativeSpacePtr space_;
    std::uint64_t ops_ = 0;
};

// ---------------------------------------------------------------------------
// Context-free statistics

struct PerCreativeStats {
    std::vector<std::uint64_t> impressions;
    std::vector<std::uint64_t> clicks;
    std::uint64_t total = 0;

    explicit PerCreativeStats(std::size_t n = 0) : impressions(n, 0), clicks(n, 0) {}

    std::size_t size() const { return impressions.size(); }
    void record(std::size_t rank, int reward)
    {
        ++impressions[rank];
        clicks[rank] += reward ? 1 : 0;
        ++total;
    }
    /// Unvisited creatives count as mean 1.0.
    double optimistic_mean(std::size_t rank) const
    {
        return impressions[rank] ? static_cast<double>(clicks[rank]) / static_cast<double>(impressions[rank]) : 1.0;
    }
};

inline std::size_t greedy_rank(const PerCreativeStats& stats)
{
    std::size_t arg = 0;
    double top = -1.0;
    for (std::size_t r = 0; r < stats.size(); ++r) {
        const double m = stats.optimistic_mean(r);
        if (m > top) {
            top = m;
            arg = r;
        }
    }
    return arg;
}

inline std::size_t egreedy_select(const PerCreativeStats& stats, Rng& rng, double epsilon)
{
    if (uniform01(rng) < epsilon) return uniform_index(rng, stats.size());
    return greedy_rank(stats);
}

/// UCB1 with the confidence radius scaled by lambda. Unvisited creatives go first.
inline std::size_t ucb_select(const PerCreativeStats& stats, std::uint64_t t, double lambda)
{
    if (t < 1) t = 1;
    const double log_t = std::log(static_cast<double>(t));
    std::size_t arg = 0;
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < stats.size(); ++r) {
        if (stats.impressions[r] == 0) return r;
        const double n = static_cast<double>(stats.impressions[r]);
        const double v = static_cast<double>(stats.clicks[r]) / n + lambda * std::sqrt(2.0 * log_t / n);
        if (v > top) {
            top = v;
            arg = r;
        }
    }
    return arg;
}

namespace detail {
/// Marsaglia-Tsang gamma variate for shape >= 1, unit scale.
inline double gamma_variate(double shape, Rng& rng)
{
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        const double x = standard_normal(rng);
        double v = 1.0 + c * x;
        if (v <= 0.0) continue;
        v = v * v * v;
        const double u = uniform01(rng);
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}
} // namespace detail

/// Beta(a, b) for a, b >= 1 as a ratio of gamma variates.
inline double beta_variate(double a, double b, Rng& rng)
{
    const double x = detail::gamma_variate(a, rng);
    const double y = detail::gamma_variate(b, rng);
    return x / (x + y);
}

/// Beta(1 + s, 1 + n - s) draw per creative, argmax.
inline std::size_t fullts_select(const PerCreativeStats& stats, Rng& rng, std::uint64_t* ops = nullptr)
{
    std::size_t arg = 0;
    double top = -1.0;
    for (std::size_t r = 0; r < stats.size(); ++r) {
        const double a = 1.0 + static_cast<double>(stats.clicks[r]);
        const double b = 1.0 + static_cast<double>(stats.impressions[r] - stats.clicks[r]);
        const double v = beta_variate(a, b, rng);
        if (v > top) {
            top = v;
            arg = r;
        }
    }
    if (ops) *ops += stats.size();
    return arg;
}

// ---------------------------------------------------------------------------
// Tree-model selections

inline Creative aes_select(const PosteriorState& posterior, const ElementGraph& graph, Rng& rng,
                           DpCounter* counter = nullptr)
{
    return dp_argmax(graph, sample_weights(posterior, rng), counter).creative;
}

/// Uniform feasible creative by per-ingredient rejection sampling.
inline Creative uniform_feasible(const CreativeSpace& space, Rng& rng)
{
    const auto& tree = space.graph().tree();
    Creative c;
    c.choice.resize(tree.size());
    for (int attempt = 0; attempt < 10000; ++attempt) {
        for (std::size_t i = 0; i < tree.size(); ++i) c.choice[i] = uniform_index(rng, tree.element_count(i));
        if (space.graph().features().feasible(c)) return c;
    }
    // Feasible set is a tiny fraction of the product space; draw from the list instead.
    return space.at(uniform_index(rng, space.size()));
}

inline Creative tegreedy_select(const PosteriorState& posterior, const CreativeSpace& space, Rng& rng,
                                double epsilon, DpCounter* counter = nullptr)
{
    if (uniform01(rng) < epsilon) return uniform_feasible(space, rng);
    return dp_argmax(space.graph(), posterior.mean(), counter).creative;
}

/// argmax x^T theta + alpha sqrt(x^T A^{-1} x) over the enumerated creatives.
inline std::size_t linucb_select(const PosteriorState& state, const CreativeSpace& space, double alpha,
                                 std::uint64_t* ops = nullptr)
{
    const auto& idx = space.graph().features();
    const auto& theta = state.mean();
    const auto& a_inv = state.precision_inverse();
    std::size_t arg = 0;
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < space.size(); ++r) {
        const auto x = idx.featurize(space.at(r));
        double quad = 0.0;
        for (auto p : x.index)
            for (auto q : x.index) quad += a_inv(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q));
        const double v = x.dot(theta) + alpha * std::sqrt(std::max(quad, 0.0));
        if (v > top) {
            top = v;
            arg = r;
        }
        if (ops) *ops += x.index.size() * x.index.size();
    }
    return arg;
}

// ---------------------------------------------------------------------------
// Ind-Egreedy

/// Per ingredient, per element impression and click counts. Every element of a
/// shown creative is credited with that impression's reward.
struct ElementStats {
    std::vector<PerCreativeStats> per_ingredient;

    explicit ElementStats(const IngredientTree& tree)
    {
        for (std::size_t i = 0; i < tree.size(); ++i) per_ingredient.emplace_back(tree.element_count(i));
    }
    void record(const Creative& c, int reward)
    {
        for (std::size_t i = 0; i < per_ingredient.size(); ++i) per_ingredient[i].record(c[i], reward);
    }
};

inline Creative ind_egreedy_select(const ElementStats& stats, const CreativeSpace& space, Rng& rng, double epsilon,
                                   std::size_t resample_limit)
{
    const auto& tree = space.graph().tree();
    const std::size_t n = tree.size();
    Creative c;
    c.choice.resize(n);
    std::vector<char> randomized(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (uniform01(rng) < epsilon) {
            randomized[i] = 1;
            c.choice[i] = uniform_index(rng, tree.element_count(i));
        } else {
            c.choice[i] = greedy_rank(stats.per_ingredient[i]);
        }
    }
    const auto& idx = space.graph().features();
    if (idx.feasible(c)) return c;
    const bool any_random = std::find(randomized.begin(), randomized.end(), 1) != randomized.end();
    if (any_random)
        for (std::size_t attempt = 0; attempt < resample_limit; ++attempt) {
            for (std::size_t i = 0; i < n; ++i)
                if (randomized[i]) c.choice[i] = uniform_index(rng, tree.element_count(i));
            if (idx.feasible(c)) return c;
        }
    return space.at(0);
}

// ---------------------------------------------------------------------------
// MVT: bias + every element + every cross-ingredient element pair

class MvtIndexer {
public:
    MvtIndexer() = default;
    explicit MvtIndexer(const IngredientTree& tree) : counts_(tree.element_counts())
    {
        const std::size_t n = counts_.size();
        vertex_offset_.resize(n);
        std::size_t next = 1;
        for (std::size_t i = 0; i < n; ++i) {
            vertex_offset_[i] = next;
            next += counts_[i];
        }
        pair_offset_.assign(n * n, 0);
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = j + 1; k < n; ++k) {
                pair_offset_[j * n + k] = next;
                next += counts_[j] * counts_[k];
            }
        dim_ = next;
    }

    std::size_t dimension() const { return dim_; }
    std::size_t ingredient_count() const { return counts_.size(); }
    std::size_t element_count(std::size_t i) const { return counts_[i]; }
    std::size_t vertex_coord(std::size_t i, std::size_t e) const { return vertex_offset_[i] + e; }

    /// Coordinate of the pair (element a of ingredient i, element b of ingredient k), i != k.
    std::size_t pair_coord(std::size_t i, std::size_t a, std::size_t k, std::size_t b) const
    {
        if (i > k) {
            std::swap(i, k);
            std::swap(a, b);
        }
        return pair_offset_[i * counts_.size() + k] + a * counts_[k] + b;
    }

    SparseFeatures featurize(const Creative& c) const
    {
        SparseFeatures x;
        const std::size_t n = counts_.size();
        x.index.push_back(0);
        for (std::size_t i = 0; i < n; ++i) x.index.push_back(vertex_coord(i, c[i]));
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = j + 1; k < n; ++k) x.index.push_back(pair_coord(j, c[j], k, c[k]));
        return x;
    }

private:
    std::vector<std::size_t> counts_;
    std::vector<std::size_t> vertex_offset_;
    std::vector<std::size_t> pair_offset_;
    std::size_t dim_ = 1;
};

struct MvtModel {
    MvtIndexer indexer;
    PosteriorState posterior;

    MvtModel() = default;
    MvtModel(const IngredientTree& tree, PosteriorOptions opt)
        : indexer(tree), posterior(indexer.dimension(), opt)
    {
    }
};

/// Coordinate ascent with random restarts. Each sweep visits the ingredients
/// in a fresh random order and sets each to its best element with the others
/// fixed. Visual constraints are ignored.
inline Creative hill_climb(const MvtIndexer& idx, const WeightVector& w, Rng& rng, std::size_t sweeps,
                           std::size_t restarts, std::uint64_t* ops = nullptr)
{
    const std::size_t n = idx.ingredient_count();
    Creative best;
    double best_score = -std::numeric_limits<double>::infinity();
    std::vector<std::size_t> order(n);
    std::uint64_t count = 0;
    for (std::size_t r = 0; r < std::max<std::size_t>(restarts, 1); ++r) {
        Creative c;
        c.choice.resize(n);
        for (std::size_t i = 0; i < n; ++i) c.choice[i] = uniform_index(rng, idx.element_count(i));
        for (std::size_t s = 0; s < sweeps; ++s) {
            for (std::size_t i = 0; i < n; ++i) order[i] = i;
            for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
            for (auto i : order) {
                std::size_t arg = 0;
                double top = -std::numeric_limits<double>::infinity();
                for (std::size_t e = 0; e < idx.element_count(i); ++e) {
                    double v = w[static_cast<Eigen::Index>(idx.vertex_coord(i, e))];
                    for (std::size_t k = 0; k < n; ++k)
                        if (k != i) v += w[static_cast<Eigen::Index>(idx.pair_coord(i, e, k, c[k]))];
                    count += n;
                    if (v > top) {
                        top = v;
                        arg = e;
                    }
                }
                c.choice[i] = arg;
            }
        }
        const double score = idx.featurize(c).dot(w);
        if (score > best_score) {
            best_score = score;
            best = c;
        }
    }
    if (ops) *ops += count;
    return best;
}

inline Creative mvt_select(const MvtModel& model, Rng& rng, std::size_t sweeps, std::size_t restarts,
                           std::uint64_t* ops = nullptr)
{
    return hill_climb(model.indexer, sample_weights(model.posterior, rng), rng, sweeps, restarts, ops);
}

// ---------------------------------------------------------------------------
// Policy implementations

class RandomPolicy final : public Policy {
public:
    using Policy::Policy;
    std::string name() const override { return "random"; }
    Creative select(Rng& rng) override
    {
        ops_ = 1;
        return space_->at(uniform_index(rng, space_->size()));
    }
    void observe(const Creative&, int) override {}
    void reset() override {}
};

class EgreedyPolicy final : public Policy {
public:
    EgreedyPolicy(CreativeSpacePtr space, double epsilon)
        : Policy(std::move(space)), epsilon_(epsilon), stats_(space_->size())
    {
    }
    std::string name() const override { return "egreedy"; }
    Creative select(Rng& rng) override
    {
        if (!greedy_) greedy_ = greedy_rank(stats_);
        ops_ = 1;
        if (uniform01(rng) < epsilon_) return space_->at(uniform_index(rng, space_->size()));
        return space_->at(*greedy_);
    }
    void observe(const Creative& c, int reward) override
    {
        stats_.record(rank_or_throw(c), reward);
        greedy_.reset();
    }
    void reset() override
    {
        stats_ = PerCreativeStats(space_->size());
        greedy_.reset();
    }
    const PerCreativeStats& stats() const { return stats_; }

private:
    double epsilon_;
    PerCreativeStats stats_;
    std::optional<std::size_t> greedy_;
};

class UcbPolicy final : public Policy {
public:
    UcbPolicy(CreativeSpacePtr space, double lambda)
        : Policy(std::move(space)), lambda_(lambda), stats_(space_->size())
    {
    }
    std::string name() const override { return "ucb"; }
    Creative select(Rng&) override
    {
        if (!choice_) choice_ = ucb_select(stats_, stats_.total, lambda_);
        ops_ = stats_.size();
        return space_->at(*choice_);
    }
    void observe(const Creative& c, int reward) override
    {
        stats_.record(rank_or_throw(c), reward);
        choice_.reset();
    }
    void reset() override
    {
        stats_ = PerCreativeStats(space_->size());
        choice_.reset();
    }

private:
    double lambda_;
    PerCreativeStats stats_;
    std::optional<std::size_t> choice_;
};

class FullTsPolicy final : public Policy {
public:
    explicit FullTsPolicy(CreativeSpacePtr space) : Policy(std::move(space)), stats_(space_->size()) {}
    std::string name() const override { return "full_ts"; }
    Creative select(Rng& rng) override
    {
        ops_ = 0;
        return space_->at(fullts_select(stats_, rng, &ops_));
    }
    void observe(const Creative& c, int reward) override { stats_.record(rank_or_throw(c), reward); }
    void reset() override { stats_ = PerCreativeStats(space_->size()); }

private:
    PerCreativeStats stats_;
};

class LinUcbPolicy final : public Policy {
public:
    LinUcbPolicy(CreativeSpacePtr space, double alpha, std::size_t recompute_interval)
        : Policy(std::move(space)), alpha_(alpha), options_{1.0, recompute_interval}
    {
        reset();
    }
    std::string name() const override { return "linucb"; }
    Creative select(Rng&) override
    {
        if (!choice_ || cached_version_ != state_.version()) {
            last_ops_ = 0;
            choice_ = linucb_select(state_, *space_, alpha_, &last_ops_);
            cached_version_ = state_.version();
        }
        ops_ = last_ops_;
        return space_->at(*choice_);
    }
    void observe(const Creative& c, int reward) override { state_.update(graph().features().featurize(c), reward); }
    void observe_batch(std::span<const Impression> batch) override { batch_update(state_, graph().features(), batch); }
    void reset() override
    {
        state_ = PosteriorState(graph().features().dimension(), options_);
        choice_.reset();
    }
    const PosteriorState& state() const { return state_; }

    static void batch_update(PosteriorState& st, const FeatureIndexer& idx, std::span<const Impression> batch)
    {
        std::vector<SparseFeatures> xs;
        std::vector<double> rs;
        xs.reserve(batch.size());
        rs.reserve(batch.size());
        for (const auto& imp : batch) {
            xs.push_back(idx.featurize(imp.creative));
            rs.push_back(imp.reward);
        }
        st.update_batch(xs, rs);
    }

private:
    double alpha_;
    PosteriorOptions options_;
    PosteriorState state_;
    std::optional<std::size_t> choice_;
    std::uint64_t cached_version_ = 0;
    std::uint64_t last_ops_ = 0;
};

class IndEgreedyPolicy final : public Policy {
public:
    IndEgreedyPolicy(CreativeSpacePtr space, double epsilon, std::size_t resample_limit)
        : Policy(std::move(space)), epsilon_(epsilon), resample_limit_(resample_limit), stats_(graph().tree())
    {
    }
    std::string name() const override { return "ind_egreedy"; }
    Creative select(Rng& rng) override
    {
        ops_ = graph().vertex_count();
        return ind_egreedy_select(stats_, *space_, rng, epsilon_, resample_limit_);
    }
    void observe(const Creative& c, int reward) override
    {
        graph().features().check_shape(c);
        stats_.record(c, reward);
    }
    void reset() override { stats_ = ElementStats(graph().tree()); }

private:
    double epsilon_;
    std::size_t resample_limit_;
    ElementStats stats_;
};

class TEgreedyPolicy final : public Policy {
public:
    TEgreedyPolicy(CreativeSpacePtr space, double epsilon, std::size_t recompute_interval)
        : Policy(std::move(space)), epsilon_(epsilon), options_{1.0, recompute_interval}
    {
        reset();
    }
    std::string name() const override { return "tegreedy"; }
    Creative select(Rng& rng) override
    {
        if (uniform01(rng) < epsilon_) {
            ops_ = 0;
            return uniform_feasible(*space_, rng);
        }
        if (!greedy_ || cached_version_ != posterior_.version()) {
            DpCounter counter;
            greedy_ = dp_argmax(graph(), posterior_.mean(), &counter).creative;
            greedy_ops_ = counter.total();
            cached_version_ = posterior_.version();
        }
        ops_ = greedy_ops_;
        return *greedy_;
    }
    void observe(const Creative& c, int reward) override
    {
        posterior_.update(graph().features().featurize(c), reward);
    }
    void observe_batch(std::span<const Impression> batch) override
    {
        LinUcbPolicy::batch_update(posterior_, graph().features(), batch);
    }
    void reset() override
    {
        posterior_ = PosteriorState(graph().features().dimension(), options_);
        greedy_.reset();
    }
    const PosteriorState& posterior() const { return posterior_; }

private:
    double epsilon_;
    PosteriorOptions options_;
    PosteriorState posterior_;
    std::optional<Creative> greedy_;
    std::uint64_t cached_version_ = 0;
    std::uint64_t greedy_ops_ = 0;
};

/// Which classes of tree features a Thompson policy models.
struct FeatureSubset {
    bool vertices = true;
    bool edges = true;
};

/// Thompson sampling on the tree model with DP argmax. The full feature set is
/// AES; dropping edges or vertices gives the Vertex-TS and Edge-TS ablations,
/// with the excluded weights fixed at zero.
class TreeThompsonPolicy final : public Policy {
public:
    TreeThompsonPolicy(CreativeSpacePtr space, FeatureSubset subset, PosteriorOptions options)
        : Policy(std::move(space)), subset_(subset), options_(options)
    {
        const auto& idx = graph().features();
        to_restricted_.assign(idx.dimension(), -1);
        for (std::size_t k = 0; k < idx.dimension(); ++k) {
            const auto kind = idx.kind(k);
            const bool keep = kind == FeatureKind::bias || (kind == FeatureKind::vertex && subset_.vertices) ||
                              (kind == FeatureKind::edge && subset_.edges);
            if (keep) {
                to_restricted_[k] = static_cast<std::int64_t>(kept_.size());
                kept_.push_back(k);
            }
        }
        reset();
    }

    std::string name() const override
    {
        if (subset_.vertices && subset_.edges) return "aes";
        return subset_.edges ? "edge_ts" : "vertex_ts";
    }

    Creative select(Rng& rng) override
    {
        DpCounter counter;
        Creative c;
        if (full()) {
            c = aes_select(posterior_, graph(), rng, &counter);
        } else {
            const auto wr = sample_weights(posterior_, rng);
            WeightVector w = WeightVector::Zero(static_cast<Eigen::Index>(to_restricted_.size()));
            for (std::size_t k = 0; k < kept_.size(); ++k) w[static_cast<Eigen::Index>(kept_[k])] = wr[static_cast<Eigen::Index>(k)];
            c = dp_argmax(graph(), w, &counter).creative;
        }
        ops_ = counter.total();
        return c;
    }

    void observe(const Creative& c, int reward) override { posterior_.update(project(c), reward); }

    void observe_batch(std::span<const Impression> batch) override
    {
        std::vector<SparseFeatures> xs;
        std::vector<double> rs;
        xs.reserve(batch.size());
        rs.reserve(batch.size());
        for (const auto& imp : batch) {
            xs.push_back(project(imp.creative));
            rs.push_back(imp.reward);
        }
        posterior_.update_batch(xs, rs);
    }

    void reset() override { posterior_ = PosteriorState(kept_.size(), options_); }

    const PosteriorState& posterior() const { return posterior_; }

private:
    bool full() const { return kept_.size() == to_restricted_.size(); }

    SparseFeatures project(const Creative& c) const
    {
        auto x = graph().features().featurize(c);
        if (full()) return x;
        SparseFeatures r;
        for (auto k : x.index)
            if (to_restricted_[k] >= 0) r.index.push_back(static_cast<std::size_t>(to_restricted_[k]));
        return r;
    }

    FeatureSubset subset_;
    PosteriorOptions options_;
    std::vector<std::size_t> kept_;
    std::vector<std::int64_t> to_restricted_;
    PosteriorState posterior_;
};

class MvtPolicy final : public Policy {
public:
    MvtPolicy(CreativeSpacePtr space, PosteriorOptions options, std::size_t sweeps, std::size_t restarts)
        : Policy(std::move(space)), options_(options), sweeps_(sweeps), restarts_(restarts)
    {
        reset();
    }
    std::string name() const override { return "mvt"; }
    bool enforces_constraints() const override { return false; }
    Creative select(Rng& rng) override
    {
        ops_ = 0;
        return mvt_select(model_, rng, sweeps_, restarts_, &ops_);
    }
    void observe(const Creative& c, int reward) override
    {
        graph().features().check_shape(c);
        model_.posterior.update(model_.indexer.featurize(c), reward);
    }
    void observe_batch(std::span<const Impression> batch) override
    {
        std::vector<SparseFeatures> xs;
        std::vector<double> rs;
        for (const auto& imp : batch) {
            graph().features().check_shape(imp.creative);
            xs.push_back(model_.indexer.featurize(imp.creative));
            rs.push_back(imp.reward);
        }
        model_.posterior.update_batch(xs, rs);
    }
    void reset() override { model_ = MvtModel(graph().tree(), options_); }
    const MvtModel& model() const { return model_; }

private:
    PosteriorOptions options_;
    std::size_t sweeps_;
    std::size_t restarts_;
    MvtModel model_;
};

inline const std::vector<std::string>& policy_names()
{
    static const std::vector<std::string> names{"random",   "egreedy", "ucb", "linucb",  "ind_egreedy", "tegreedy",
                                                "aes",      "mvt",     "full_ts", "edge_ts", "vertex_ts"};
    return names;
}

inline std::unique_ptr<Policy> make_policy(std::string_view name, CreativeSpacePtr space, const PolicyParams& p)
{
    const PosteriorOptions ts{p.sigma, p.recompute_interval};
    if (name == "random") return std::make_unique<RandomPolicy>(std::move(space));
    if (name == "egreedy") return std::make_unique<EgreedyPolicy>(std::move(space), p.epsilon);
    if (name == "ucb") return std::make_unique<UcbPolicy>(std::move(space), p.lambda);
    if (name == "linucb") return std::make_unique<LinUcbPolicy>(std::move(space), p.alpha, p.recompute_interval);
    if (name == "ind_egreedy")
        return std::make_unique<IndEgreedyPolicy>(std::move(space), p.epsilon, p.resample_limit);
    if (name == "tegreedy")
        return std::make_unique<TEgreedyPolicy>(std::move(space), p.epsilon, p.recompute_interval);
    if (name == "aes") return std::make_unique<TreeThompsonPolicy>(std::move(space), FeatureSubset{true, true}, ts);
    if (name == "edge_ts")
        return std::make_unique<TreeThompsonPolicy>(std::move(space), FeatureSubset{false, true}, ts);
    if (name == "vertex_ts")
        return std::make_unique<TreeThompsonPolicy>(std::move(space), FeatureSubset{true, false}, ts);
    if (name == "mvt") return std::make_unique<MvtPolicy>(std::move(space), ts, p.hill_sweeps, p.hill_restarts);
    if (name == "full_ts") return std::make_unique<FullTsPolicy>(std::move(space));
    throw Error("unknown policy '" + std::string(name) + "'");
}

} // namespace aes
