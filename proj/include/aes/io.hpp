#pragma once

// JSON graph files and experiment configs.
//
// Graph file:
//   { "ingredients": [ {"name": "template", "elements": ["t0", "t1"]}, ... ],
//     "root": "template",
//     "tree_edges": [ ["template", "picture_background"], ... ],
//     "constraints": [ {"a": ["picture_background", "light"], "b": ["text_color", "white"]} ],
//     "weights": { "bias": 0.0, "vertices": [[...], ...],
//                  "edges": [ {"parent": "...", "child": "...", "w": [[...], ...]} ] } }
// Ingredients and elements may be referenced by name or by index.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "aes/environment.hpp"
#include "aes/experiment.hpp"
#include "aes/graph.hpp"

namespace aes {

using Json = nlohmann::json;

namespace detail {

inline std::size_t resolve_ingredient(const IngredientTree& tree, const Json& j)
{
    if (j.is_number_unsigned()) {
        const auto i = j.get<std::size_t>();
        if (i >= tree.size()) throw Error("ingredient index " + std::to_string(i) + " out of range");
        return i;
    }
    if (j.is_string()) {
        auto i = tree.find(j.get<std::string>());
        if (!i) throw Error("unknown ingredient '" + j.get<std::string>() + "'");
        return *i;
    }
    throw Error("ingredient reference must be a name or an index");
}

inline std::size_t resolve_element(const IngredientTree& tree, std::size_t ing, const Json& j)
{
    const auto& elems = tree.ingredient(ing).elements;
    if (j.is_number_unsigned()) {
        const auto e = j.get<std::size_t>();
        if (e >= elems.size()) throw Error("element index out of range in '" + tree.ingredient(ing).name + "'");
        return e;
    }
    if (j.is_string()) {
        for (std::size_t e = 0; e < elems.size(); ++e)
            if (elems[e] == j.get<std::string>()) return e;
        throw Error("unknown element '" + j.get<std::string>() + "' in '" + tree.ingredient(ing).name + "'");
    }
    throw Error("element reference must be a name or an index");
}

inline ElementRef resolve_ref(const IngredientTree& tree, const Json& j)
{
    if (!j.is_array() || j.size() != 2) throw Error("constraint endpoint must be [ingredient, element]");
    const auto ing = resolve_ingredient(tree, j[0]);
    return {ing, resolve_element(tree, ing, j[1])};
}

} // namespace detail

inline ElementGraph graph_from_json(const Json& j)
{
    try {
        if (!j.is_object()) throw Error("graph must be a JSON object");
        std::vector<Ingredient> ings;
        for (const auto& ij : j.at("ingredients")) {
            Ingredient ing;
            ing.name = ij.at("name").get<std::string>();
            ing.elements = ij.at("elements").get<std::vector<std::string>>();
            ings.push_back(std::move(ing));
        }
        const auto n = ings.size();
        auto find = [&](const Json& ref) -> std::size_t {
            if (ref.is_number_unsigned() && ref.get<std::size_t>() < n) return ref.get<std::size_t>();
            if (ref.is_string())
                for (std::size_t i = 0; i < n; ++i)
                    if (ings[i].name == ref.get<std::string>()) return i;
            throw Error("unknown ingredient " + ref.dump());
        };
        std::vector<std::size_t> parent(n, IngredientTree::npos);
        const auto edges = j.value("tree_edges", Json::array());
        if (edges.size() + 1 != n)
            throw Error("a tree over " + std::to_string(n) + " ingredients needs " + std::to_string(n ? n - 1 : 0) +
                        " tree_edges");
        for (const auto& e : edges) {
            if (!e.is_array() || e.size() != 2) throw Error("tree edge must be [parent, child]");
            const auto p = find(e[0]);
            const auto c = find(e[1]);
            if (parent[c] != IngredientTree::npos) throw Error("ingredient '" + ings[c].name + "' has two parents");
            parent[c] = p;
        }
        if (j.contains("root")) {
            const auto r = find(j.at("root"));
            if (parent[r] != IngredientTree::npos) throw Error("declared root '" + ings[r].name + "' has a parent");
        }
        IngredientTree tree(std::move(ings), std::move(parent));

        std::vector<ForbiddenPair> constraints;
        for (const auto& cj : j.value("constraints", Json::array()))
            constraints.push_back({detail::resolve_ref(tree, cj.at("a")), detail::resolve_ref(tree, cj.at("b"))});

        auto w = GraphWeights::zeros(tree);
        if (j.contains("weights")) {
            const auto& wj = j.at("weights");
            w.bias = wj.value("bias", 0.0);
            if (wj.contains("vertices")) {
                const auto& vj = wj.at("vertices");
                if (vj.size() != tree.size()) throw Error("weights.vertices needs one list per ingredient");
                for (std::size_t i = 0; i < tree.size(); ++i) {
                    w.vertices[i] = vj[i].get<std::vector<double>>();
                    if (w.vertices[i].size() != tree.element_count(i))
                        throw Error("weights.vertices size mismatch for '" + tree.ingredient(i).name + "'");
                }
            }
            for (const auto& ej : wj.value("edges", Json::array())) {
                const auto p = detail::resolve_ingredient(tree, ej.at("parent"));
                const auto c = detail::resolve_ingredient(tree, ej.at("child"));
                if (tree.parent(c) != p) throw Error("weights.edges entry is not a tree edge");
                const auto rows = ej.at("w").get<std::vector<std::vector<double>>>();
                if (rows.size() != tree.element_count(p)) throw Error("edge weight block has wrong row count");
                std::vector<double> flat;
                for (const auto& row : rows) {
                    if (row.size() != tree.element_count(c)) throw Error("edge weight block has wrong column count");
                    flat.insert(flat.end(), row.begin(), row.end());
                }
                w.edges[c] = std::move(flat);
            }
        }
        return build_element_graph(std::move(tree), std::move(w), constraints);
    } catch (const Json::exception& e) {
        throw Error(std::string("graph: ") + e.what());
    }
}

inline ElementGraph load_graph_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw Error("cannot open graph file '" + path + "'");
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::exception& e) {
        throw Error("graph file '" + path + "': " + e.what());
    }
    return graph_from_json(j);
}

inline Json graph_to_json(const ElementGraph& g, bool include_weights)
{
    const auto& tree = g.tree();
    Json j;
    j["ingredients"] = Json::array();
    for (const auto& ing : tree.ingredients()) j["ingredients"].push_back({{"name", ing.name}, {"elements", ing.elements}});
    j["root"] = tree.ingredient(tree.root()).name;
    j["tree_edges"] = Json::array();
    j["constraints"] = Json::array();
    for (std::size_t c = 0; c < tree.size(); ++c) {
        if (c == tree.root()) continue;
        const auto p = tree.parent(c);
        j["tree_edges"].push_back({tree.ingredient(p).name, tree.ingredient(c).name});
        for (std::size_t a = 0; a < tree.element_count(p); ++a)
            for (std::size_t b = 0; b < tree.element_count(c); ++b)
                if (!g.edge_present(c, a, b))
                    j["constraints"].push_back({{"a", {tree.ingredient(p).name, tree.ingredient(p).elements[a]}},
                                                {"b", {tree.ingredient(c).name, tree.ingredient(c).elements[b]}}});
    }
    if (include_weights) {
        Json w;
        w["bias"] = g.bias();
        w["vertices"] = g.weights().vertices;
        w["edges"] = Json::array();
        for (std::size_t c = 0; c < tree.size(); ++c) {
            if (c == tree.root()) continue;
            const auto p = tree.parent(c);
            std::vector<std::vector<double>> rows(tree.element_count(p));
            for (std::size_t a = 0; a < rows.size(); ++a)
                for (std::size_t b = 0; b < tree.element_count(c); ++b) rows[a].push_back(g.edge_weight(c, a, b));
            w["edges"].push_back({{"parent", tree.ingredient(p).name}, {"child", tree.ingredient(c).name}, {"w", rows}});
        }
        j["weights"] = w;
    }
    return j;
}

// ---------------------------------------------------------------------------
// Experiment config

struct EnvSpec {
    std::string type = "synthetic"; // synthetic | replay
    SyntheticOptions synthetic;
    std::optional<std::uint64_t> seed;
    bool resample_per_rep = false;
    std::string log; // replay log path
};

struct ExperimentSpec {
    ExperimentConfig run;
    std::vector<std::string> policies;
    PolicyParams params;
    std::map<std::string, PolicyParams> per_policy;
    EnvSpec env;
    ElementGraph graph;
    bool master_seed_given = false;

    const PolicyParams& params_for(const std::string& policy) const
    {
        auto it = per_policy.find(policy);
        return it == per_policy.end() ? params : it->second;
    }
};

namespace detail {
inline void apply_params(PolicyParams& p, const Json& j)
{
    static const std::vector<std::string> known{"epsilon", "lambda", "alpha", "sigma", "S",
                                                "K", "resample_limit", "recompute_interval"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.value().is_object()) continue; // per-policy block
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw Error("unknown policy parameter '" + it.key() + "'");
    }
    p.epsilon = j.value("epsilon", p.epsilon);
    p.lambda = j.value("lambda", p.lambda);
    p.alpha = j.value("alpha", p.alpha);
    p.sigma = j.value("sigma", p.sigma);
    p.hill_sweeps = j.value("S", p.hill_sweeps);
    p.hill_restarts = j.value("K", p.hill_restarts);
    p.resample_limit = j.value("resample_limit", p.resample_limit);
    p.recompute_interval = j.value("recompute_interval", p.recompute_interval);
    if (!(p.epsilon >= 0.0 && p.epsilon <= 1.0)) throw Error("epsilon must lie in [0, 1]");
    if (p.lambda < 0.0 || p.alpha < 0.0 || p.sigma < 0.0) throw Error("lambda, alpha and sigma must be >= 0");
    if (p.recompute_interval == 0) throw Error("recompute_interval must be >= 1");
}
} // namespace detail

/// Relative paths inside the config resolve against `base_dir`.
inline ExperimentSpec parse_experiment_config(const Json& j, const std::filesystem::path& base_dir)
{
    try {
        ExperimentSpec s;
        static const std::vector<std::string> known{"graph",  "policy",     "policy_params", "batch_size", "n_batches",
                                                    "n_reps", "master_seed", "env",          "jobs",       "record_timing"};
        for (auto it = j.begin(); it != j.end(); ++it)
            if (std::find(known.begin(), known.end(), it.key()) == known.end())
                throw Error("unknown config key '" + it.key() + "'");

        if (!j.contains("graph")) {
            s.graph = build_element_graph(default_structure());
        } else if (j.at("graph").is_string()) {
            auto p = std::filesystem::path(j.at("graph").get<std::string>());
            if (p.is_relative()) p = base_dir / p;
            s.graph = load_graph_file(p.string());
        } else {
            s.graph = graph_from_json(j.at("graph"));
        }

        const auto& pj = j.at("policy");
        if (pj.is_string()) s.policies.push_back(pj.get<std::string>());
        else s.policies = pj.get<std::vector<std::string>>();
        if (s.policies.empty()) throw Error("config lists no policy");
        for (const auto& name : s.policies)
            if (std::find(policy_names().begin(), policy_names().end(), name) == policy_names().end())
                throw Error("unknown policy '" + name + "'");

        if (j.contains("policy_params")) {
            const auto& pp = j.at("policy_params");
            detail::apply_params(s.params, pp);
            for (const auto& name : s.policies) {
                auto p = s.params;
                if (pp.contains(name)) detail::apply_params(p, pp.at(name));
                s.per_policy[name] = p;
            }
        }

        s.run.batch_size = j.value("batch_size", s.run.batch_size);
        s.run.n_batches = j.value("n_batches", s.run.n_batches);
        s.run.n_reps = j.value("n_reps", s.run.n_reps);
        s.run.jobs = j.value("jobs", s.run.jobs);
        s.run.record_timing = j.value("record_timing", s.run.record_timing);
        if (j.contains("master_seed")) {
            s.run.master_seed = j.at("master_seed").get<std::uint64_t>();
            s.master_seed_given = true;
        }
        if (s.run.batch_size == 0) throw Error("batch_size must be >= 1");
        if (s.run.n_reps == 0) throw Error("n_reps must be >= 1");

        if (j.contains("env")) {
            const auto& ej = j.at("env");
            s.env.type = ej.value("type", std::string("synthetic"));
            s.env.synthetic.p_lo = ej.value("p_lo", s.env.synthetic.p_lo);
            s.env.synthetic.p_hi = ej.value("p_hi", s.env.synthetic.p_hi);
            if (ej.contains("seed")) s.env.seed = ej.at("seed").get<std::uint64_t>();
            s.env.resample_per_rep = ej.value("resample_per_rep", false);
            if (ej.contains("log")) {
                auto p = std::filesystem::path(ej.at("log").get<std::string>());
                if (p.is_relative()) p = base_dir / p;
                s.env.log = p.string();
            }
            if (s.env.type != "synthetic" && s.env.type != "replay")
                throw Error("env.type must be 'synthetic' or 'replay'");
        }
        return s;
    } catch (const Json::exception& e) {
        throw Error(std::string("config: ") + e.what());
    }
}

inline ExperimentSpec load_experiment_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file '" + path + "'");
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::exception& e) {
        throw Error("config file '" + path + "': " + e.what());
    }
    return parse_experiment_config(j, std::filesystem::path(path).parent_path());
}

/// Environment provider for a parsed config: a fixed world, or one per rep.
inline EnvironmentProvider make_environment_provider(const ExperimentSpec& spec)
{
    if (spec.env.type == "replay") {
        if (spec.env.log.empty()) throw Error("replay env needs a 'log' path");
        const auto replay = aggregate_logs(spec.env.log, spec.graph);
        std::shared_ptr<const Environment> env = make_replay_environment(replay, spec.graph);
        return [env](std::size_t) { return env; };
    }
    const auto seed = spec.env.seed.value_or(spec.run.master_seed);
    if (!spec.env.resample_per_rep) {
        std::shared_ptr<const Environment> env = gen_synthetic(spec.graph, seed, spec.env.synthetic).env;
        return [env](std::size_t) { return env; };
    }
    auto graph = spec.graph;
    auto opt = spec.env.synthetic;
    return [graph, opt, seed](std::size_t rep) -> std::shared_ptr<const Environment> {
        return gen_synthetic(graph, seed + 1000003 * (rep + 1), opt).env;
    };
}

} // namespace aes
