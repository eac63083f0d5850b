#pragma once

// Ground-truth click environments: synthetic tree-model worlds and replayed
// aggregate logs, plus Bernoulli feedback.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <boost/random/binomial_distribution.hpp>

#include "aes/ctr_model.hpp"
#include "aes/dp.hpp"
#include "aes/graph.hpp"
#include "aes/policies.hpp"

namespace aes {

/// Ingredient names of the default five-ingredient creative layout.
inline const std::vector<std::string>& default_ingredient_names()
{
    static const std::vector<std::string> names{"template", "picture_background", "picture_size", "text_font",
                                                "text_color"};
    return names;
}

/// template -> picture_background -> {picture_size, text_color}, text_color -> text_font.
inline std::vector<std::size_t> default_parents()
{
    constexpr auto none = IngredientTree::npos;
    return {none, 0, 1, 4, 1};
}

inline std::vector<std::size_t> default_element_counts() { return {2, 5, 4, 5, 1}; }

inline IngredientTree default_structure(const std::vector<std::size_t>& counts = default_element_counts())
{
    if (counts.size() != 5) throw Error("the default layout has five ingredients");
    return make_tree(counts, default_parents(), default_ingredient_names());
}

/// Splits `size` into `slots` element counts whose product is `size`, as
/// evenly as prime factorization allows (largest primes placed first, each
/// into the currently smallest slot).
inline std::vector<std::size_t> balanced_counts(std::size_t size, std::size_t slots = 5)
{
    if (size == 0) throw Error("creative count must be positive");
    std::vector<std::size_t> primes;
    auto rest = size;
    for (std::size_t p = 2; p * p <= rest; ++p)
        while (rest % p == 0) {
            primes.push_back(p);
            rest /= p;
        }
    if (rest > 1) primes.push_back(rest);
    std::sort(primes.rbegin(), primes.rend());
    std::vector<std::size_t> counts(slots, 1);
    for (auto p : primes) *std::min_element(counts.begin(), counts.end()) *= p;
    return counts;
}

/// Parses "200" (balanced split) or an explicit "2x5x4x5x1".
inline std::vector<std::size_t> parse_size_spec(const std::string& spec)
{
    std::vector<std::size_t> parts;
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, 'x')) {
        std::size_t pos = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(tok, &pos);
        } catch (const std::exception&) {
            throw Error("bad size '" + spec + "'");
        }
        if (pos != tok.size() || v == 0) throw Error("bad size '" + spec + "'");
        parts.push_back(static_cast<std::size_t>(v));
    }
    if (parts.empty()) throw Error("bad size '" + spec + "'");
    if (parts.size() == 1) return balanced_counts(parts[0]);
    if (parts.size() != 5) throw Error("explicit sizes need five factors: '" + spec + "'");
    return parts;
}

/// Click probabilities for every feasible creative of a space.
class Environment {
public:
    Environment(CreativeSpacePtr space, std::vector<double> ctr) : space_(std::move(space)), ctr_(std::move(ctr))
    {
        if (ctr_.size() != space_->size()) throw Error("environment must give a CTR for every feasible creative");
        for (auto p : ctr_)
            if (!(p >= 0.0 && p <= 1.0)) throw Error("CTR outside [0, 1]");
        best_rank_ = static_cast<std::size_t>(std::max_element(ctr_.begin(), ctr_.end()) - ctr_.begin());
    }

    const CreativeSpacePtr& space_ptr() const { return space_; }
    const CreativeSpace& space() const { return *space_; }
    const ElementGraph& graph() const { return space_->graph(); }
    const std::vector<double>& ctr() const { return ctr_; }
    double best_ctr() const { return ctr_[best_rank_]; }
    std::size_t best_rank() const { return best_rank_; }

    /// CTR of a creative; infeasible creatives are never clicked.
    double ctr_of(const Creative& c) const
    {
        auto r = space_->rank_of(c);
        return r ? ctr_[*r] : 0.0;
    }

private:
    CreativeSpacePtr space_;
    std::vector<double> ctr_;
    std::size_t best_rank_ = 0;
};

/// One impression: 1 with probability ctr(creative). Consumes exactly one
/// uniform draw so that policies sharing a feedback stream see the same noise.
inline int bernoulli_feedback(const Environment& env, const Creative& c, Rng& rng)
{
    const double p = env.ctr_of(c);
    return uniform01(rng) < p ? 1 : 0;
}

struct SyntheticOptions {
    double p_lo = 0.01;
    double p_hi = 0.30;
};

struct SyntheticEnv {
    ElementGraph graph;         // carries the drawn true weights
    WeightVector true_weights;  // packed in the tree feature layout
    std::vector<double> raw_score;
    std::shared_ptr<Environment> env;
    bool degenerate = false;    // every raw score equal, all CTRs at the midpoint
};

/// Draws every vertex and edge weight from N(0, 1), scores each feasible
/// creative with the tree model and maps scores affinely onto [p_lo, p_hi].
inline SyntheticEnv gen_synthetic(const ElementGraph& structure, std::uint64_t seed, SyntheticOptions opt = {})
{
    if (!(opt.p_lo > 0.0 && opt.p_lo < opt.p_hi && opt.p_hi < 1.0))
        throw Error("need 0 < p_lo < p_hi < 1");
    auto rng = make_rng({seed, 0x5e17});
    const auto& tree = structure.tree();
    auto w = GraphWeights::zeros(tree);
    for (auto& row : w.vertices)
        for (auto& x : row) x = standard_normal(rng);
    for (auto& block : w.edges)
        for (auto& x : block) x = standard_normal(rng);

    SyntheticEnv out;
    out.graph = structure.with_weights(std::move(w));
    out.true_weights = out.graph.packed_weights();
    auto space = std::make_shared<CreativeSpace>(out.graph);
    const auto& idx = out.graph.features();
    out.raw_score.reserve(space->size());
    for (const auto& c : space->creatives()) out.raw_score.push_back(idx.featurize(c).dot(out.true_weights));
    const auto [lo, hi] = std::minmax_element(out.raw_score.begin(), out.raw_score.end());
    std::vector<double> ctr(out.raw_score.size());
    if (*hi == *lo) {
        out.degenerate = true;
        std::fill(ctr.begin(), ctr.end(), 0.5 * (opt.p_lo + opt.p_hi));
    } else {
        const double scale = (opt.p_hi - opt.p_lo) / (*hi - *lo);
        for (std::size_t r = 0; r < ctr.size(); ++r)
            ctr[r] = std::clamp(opt.p_lo + (out.raw_score[r] - *lo) * scale, opt.p_lo, opt.p_hi);
    }
    out.env = std::make_shared<Environment>(std::move(space), std::move(ctr));
    return out;
}

// ---------------------------------------------------------------------------
// Replay logs

struct ReplayEntry {
    std::uint64_t impressions = 0;
    std::uint64_t clicks = 0;
    double ctr = 0.0;
};

struct ReplayEnv {
    /// Keyed by creative code (mixed-radix rank of the choice array).
    std::unordered_map<std::uint64_t, ReplayEntry> creatives;
    std::vector<std::string> warnings;
    std::uint64_t total_impressions = 0;
};

/// Accepts "c_<code>" (mixed-radix rank over the full product space) or a
/// dash-separated list of element indices such as "0-3-1-2-0".
inline Creative parse_creative_id(const IngredientTree& tree, const std::string& id)
{
    auto parse_u64 = [&](const std::string& s) {
        std::size_t pos = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(s, &pos);
        } catch (const std::exception&) {
            throw Error("bad creative id '" + id + "'");
        }
        if (pos != s.size() || s.empty() || s[0] == '-' || s[0] == '+') throw Error("bad creative id '" + id + "'");
        return static_cast<std::uint64_t>(v);
    };
    if (id.rfind("c_", 0) == 0) return creative_from_code(tree, parse_u64(id.substr(2)));
    Creative c;
    std::stringstream ss(id);
    std::string tok;
    while (std::getline(ss, tok, '-')) c.choice.push_back(static_cast<std::size_t>(parse_u64(tok)));
    if (c.size() != tree.size()) throw Error("creative id '" + id + "' does not have one element per ingredient");
    for (std::size_t i = 0; i < c.size(); ++i)
        if (c[i] >= tree.element_count(i)) throw Error("creative id '" + id + "' has an element out of range");
    return c;
}

inline std::string format_creative_id(const IngredientTree& tree, const Creative& c)
{
    return "c_" + std::to_string(creative_code(tree, c));
}

namespace detail {
inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv(const std::string& line)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(trim(tok));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}
} // namespace detail

/// Reads a pre-aggregated (creative_id,impressions,clicks) or raw
/// (creative_id,clicked) log. A header line naming the columns is optional.
inline ReplayEnv aggregate_logs(std::istream& in, const ElementGraph& graph)
{
    const auto& tree = graph.tree();
    ReplayEnv out;
    std::string line;
    std::size_t lineno = 0;
    std::optional<std::size_t> columns;
    auto fail = [&](const std::string& what) { throw Error("log line " + std::to_string(lineno) + ": " + what); };
    auto parse_count = [&](const std::string& s) {
        std::size_t pos = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(s, &pos);
        } catch (const std::exception&) {
            fail("expected a non-negative integer, got '" + s + "'");
        }
        if (pos != s.size() || s.empty() || s[0] == '-') fail("expected a non-negative integer, got '" + s + "'");
        return static_cast<std::uint64_t>(v);
    };
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto fields = detail::split_csv(t);
        if (fields.size() != 2 && fields.size() != 3) fail("expected 2 or 3 comma-separated fields");
        if (fields[0] == "creative_id") {
            if (columns) fail("repeated header");
            if ((fields.size() == 3 && (fields[1] != "impressions" || fields[2] != "clicks")) ||
                (fields.size() == 2 && fields[1] != "clicked"))
                fail("unknown header");
            columns = fields.size();
            continue;
        }
        if (!columns) columns = fields.size();
        if (fields.size() != *columns) fail("inconsistent column count");
        Creative c;
        try {
            c = parse_creative_id(tree, fields[0]);
        } catch (const Error& e) {
            fail(e.what());
        }
        if (!graph.features().feasible(c)) fail("creative '" + fields[0] + "' violates the graph's constraints");
        std::uint64_t impressions = 1, clicks = 0;
        if (fields.size() == 3) {
            impressions = parse_count(fields[1]);
            clicks = parse_count(fields[2]);
        } else {
            clicks = parse_count(fields[1]);
            if (clicks > 1) fail("clicked flag must be 0 or 1");
        }
        if (clicks > impressions) fail("more clicks than impressions");
        auto& entry = out.creatives[creative_code(tree, c)];
        entry.impressions += impressions;
        entry.clicks += clicks;
        out.total_impressions += impressions;
    }
    if (out.total_impressions == 0) throw Error("log has zero total impressions");
    for (auto it = out.creatives.begin(); it != out.creatives.end();) {
        if (it->second.impressions == 0) {
            out.warnings.push_back("creative c_" + std::to_string(it->first) + " has no impressions; excluded");
            it = out.creatives.erase(it);
        } else {
            it->second.ctr = static_cast<double>(it->second.clicks) / static_cast<double>(it->second.impressions);
            ++it;
        }
    }
    std::sort(out.warnings.begin(), out.warnings.end());
    return out;
}

inline ReplayEnv aggregate_logs(const std::string& path, const ElementGraph& graph)
{
    std::ifstream in(path);
    if (!in) throw Error("cannot open log file '" + path + "'");
    return aggregate_logs(in, graph);
}

/// Every feasible creative of the graph must appear in the replay data.
inline std::shared_ptr<Environment> make_replay_environment(const ReplayEnv& replay, const ElementGraph& graph)
{
    auto space = std::make_shared<CreativeSpace>(graph);
    std::vector<double> ctr(space->size());
    for (std::size_t r = 0; r < space->size(); ++r) {
        const auto code = creative_code(graph.tree(), space->at(r));
        auto it = replay.creatives.find(code);
        if (it == replay.creatives.end())
            throw Error("replay data has no impressions for feasible creative c_" + std::to_string(code));
        ctr[r] = it->second.ctr;
    }
    return std::make_shared<Environment>(std::move(space), std::move(ctr));
}

struct ReplayGenOptions {
    double mean_ctr = 0.03;
    std::uint64_t total_impressions = 850000;
    bool raw = false;
};

/// Writes a replay log whose per-creative CTRs follow a synthetic tree-model
/// world rescaled to the requested mean. Impressions are split evenly.
inline void write_synthetic_replay(std::ostream& out, const ElementGraph& graph, std::uint64_t seed,
                                   ReplayGenOptions opt = {})
{
    if (!(opt.mean_ctr > 0.0 && opt.mean_ctr < 1.0)) throw Error("mean_ctr must lie in (0, 1)");
    auto world = gen_synthetic(graph, seed);
    const auto& base = world.env->ctr();
    double mean = 0.0;
    for (auto p : base) mean += p;
    mean /= static_cast<double>(base.size());
    auto rng = make_rng({seed, 0x7e91a7});
    const auto n = base.size();
    const auto& tree = graph.tree();
    out << (opt.raw ? "creative_id,clicked\n" : "creative_id,impressions,clicks\n");
    for (std::size_t r = 0; r < n; ++r) {
        const double p = std::min(1.0, base[r] * opt.mean_ctr / mean);
        const std::uint64_t imps = opt.total_impressions / n + (r < opt.total_impressions % n ? 1 : 0);
        const auto id = format_creative_id(tree, world.env->space().at(r));
        if (opt.raw) {
            for (std::uint64_t k = 0; k < imps; ++k) out << id << ',' << (uniform01(rng) < p ? 1 : 0) << '\n';
        } else {
            const auto clicks = imps ? boost::random::binomial_distribution<std::int64_t>(static_cast<std::int64_t>(imps), p)(rng) : 0;
            out << id << ',' << imps << ',' << clicks << '\n';
        }
    }
}

} // namespace aes
