// Command-line front end: experiments, sweeps, DP verification and timing.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "aes/aes.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitAssert = 3;

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = aes::detail::trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::optional<std::uint64_t> env_seed()
{
    const char* v = std::getenv("AES_SEED");
    if (!v || !*v) return std::nullopt;
    try {
        std::size_t pos = 0;
        const auto s = std::stoull(v, &pos);
        if (pos != std::string(v).size()) throw std::invalid_argument("trailing");
        return s;
    } catch (const std::exception&) {
        throw aes::Error(std::string("AES_SEED is not an unsigned integer: '") + v + "'");
    }
}

std::uint64_t pick_seed(std::optional<std::uint64_t> flag, std::uint64_t fallback)
{
    if (flag) return *flag;
    if (auto e = env_seed()) return *e;
    return fallback;
}

std::ofstream open_out(const fs::path& p)
{
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw aes::Error("cannot write '" + p.string() + "'");
    return out;
}

void check_policies(const std::vector<std::string>& names)
{
    if (names.empty()) throw aes::Error("no policy given");
    for (const auto& n : names)
        if (std::find(aes::policy_names().begin(), aes::policy_names().end(), n) == aes::policy_names().end())
            throw aes::Error("unknown policy '" + n + "'");
}

void write_run(const fs::path& out_dir, const aes::ExperimentSpec& spec)
{
    fs::create_directories(out_dir);
    const auto provider = aes::make_environment_provider(spec);
    std::vector<aes::SummaryRow> summary;
    for (const auto& name : spec.policies) {
        const auto rec = aes::run_experiment(spec.run, provider, aes::policy_factory(name, spec.params_for(name)));
        auto out = open_out(out_dir / ("metrics_" + name + ".csv"));
        aes::write_metrics_csv(out, rec);
        summary.push_back(aes::summarize(rec));
        if (!rec.aggregate.empty())
            std::cout << fmt::format("{:<12} final_ctr={:.5f} ± {:.5f}  regret={:.1f} ± {:.1f}\n", name,
                                     summary.back().final_ctr_mean, summary.back().final_ctr_std,
                                     summary.back().final_regret_mean, summary.back().final_regret_std);
    }
    auto out = open_out(out_dir / "summary.csv");
    aes::write_summary_csv(out, summary);
}

struct SimulateArgs {
    std::string config;
    std::string out = "results";
    std::optional<std::size_t> jobs;
    std::optional<std::uint64_t> seed;
    bool deterministic = false;
};

int cmd_simulate(const SimulateArgs& a)
{
    auto spec = aes::load_experiment_config(a.config);
    if (!spec.master_seed_given || a.seed) spec.run.master_seed = pick_seed(a.seed, spec.run.master_seed);
    if (a.jobs) spec.run.jobs = *a.jobs;
    if (a.deterministic) spec.run.record_timing = false;
    write_run(a.out, spec);
    return kExitOk;
}

struct ReplayArgs {
    std::string log;
    std::string graph;
    std::string config;
    std::string policies = "random,egreedy,ucb,linucb,ind_egreedy,tegreedy,aes";
    std::size_t n_batches = 500;
    std::size_t n_reps = 50;
    std::size_t batch_size = 1000;
    std::string out = "results";
    std::optional<std::size_t> jobs;
    std::optional<std::uint64_t> seed;
    bool deterministic = false;
};

int cmd_replay(const ReplayArgs& a)
{
    aes::ExperimentSpec spec;
    if (!a.config.empty()) {
        spec = aes::load_experiment_config(a.config);
    } else {
        spec.graph = a.graph.empty() ? aes::build_element_graph(aes::default_structure()) : aes::load_graph_file(a.graph);
        spec.policies = split_list(a.policies);
        spec.run.n_batches = a.n_batches;
        spec.run.n_reps = a.n_reps;
        spec.run.batch_size = a.batch_size;
    }
    if (!a.config.empty() && !a.graph.empty()) spec.graph = aes::load_graph_file(a.graph);
    check_policies(spec.policies);
    if (spec.run.batch_size == 0 || spec.run.n_reps == 0) throw aes::Error("batch size and reps must be >= 1");
    spec.env.type = "replay";
    if (!a.log.empty()) spec.env.log = a.log;
    if (!spec.master_seed_given || a.seed) spec.run.master_seed = pick_seed(a.seed, spec.run.master_seed);
    if (a.jobs) spec.run.jobs = *a.jobs;
    if (a.deterministic) spec.run.record_timing = false;
    const auto replay = aes::aggregate_logs(spec.env.log, spec.graph);
    for (const auto& w : replay.warnings) std::cerr << "warning: " << w << '\n';
    write_run(a.out, spec);
    return kExitOk;
}

struct SweepArgs {
    std::string sizes = "32,200,1200";
    std::string policies = "aes,egreedy,ind_egreedy";
    std::size_t n_batches = 500;
    std::size_t n_reps = 20;
    std::size_t batch_size = 1000;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> jobs;
    std::string out = "sweep.csv";
};

int cmd_sweep(const SweepArgs& a)
{
    const auto policies = split_list(a.policies);
    check_policies(policies);
    std::vector<std::vector<std::size_t>> sets;
    for (const auto& s : split_list(a.sizes)) sets.push_back(aes::parse_size_spec(s));
    if (sets.empty()) throw aes::Error("no sizes given");
    aes::ExperimentConfig cfg;
    cfg.n_batches = a.n_batches;
    cfg.n_reps = a.n_reps;
    cfg.batch_size = a.batch_size;
    cfg.master_seed = pick_seed(a.seed, 0);
    cfg.record_timing = false;
    if (a.jobs) cfg.jobs = *a.jobs;
    if (cfg.batch_size == 0 || cfg.n_reps == 0) throw aes::Error("batch size and reps must be >= 1");
    const auto rows = aes::sweep_search_space(aes::default_structure(), sets, policies, cfg, aes::PolicyParams{}, {},
                                              cfg.master_seed);
    auto out = open_out(a.out);
    aes::write_sweep_csv(out, rows);
    aes::write_sweep_csv(std::cout, rows);
    return kExitOk;
}

struct DpCheckArgs {
    std::size_t trials = 1000;
    std::size_t max_elements = 4;
    std::size_t max_ingredients = 6;
    double constraint_prob = 0.2;
    std::optional<std::uint64_t> seed;
};

int cmd_dp_check(const DpCheckArgs& a)
{
    std::size_t biggest = 1;
    for (std::size_t i = 0; i < a.max_ingredients; ++i) biggest *= a.max_elements;
    if (a.max_elements == 0 || a.max_ingredients == 0) throw aes::Error("--max-elements and --max-ingredients must be >= 1");
    if (biggest > 100000) throw aes::Error("graphs this large would exceed 100000 creatives; lower --max-elements");
    auto rng = aes::make_rng({pick_seed(a.seed, 0), 0xd9});
    aes::RandomGraphOptions opt{a.max_ingredients, a.max_elements, a.constraint_prob};
    std::size_t pass = 0, fail = 0;
    for (std::size_t t = 0; t < a.trials; ++t) {
        const auto g = aes::random_element_graph(rng, opt);
        const auto w = g.packed_weights();
        const auto dp = aes::dp_argmax(g, w);
        const auto bf = aes::brute_force_argmax(g, w);
        const bool ok = dp.creative == bf.creative && std::abs(dp.value - bf.value) <= 1e-12;
        if (ok) {
            ++pass;
        } else {
            ++fail;
            std::cerr << fmt::format("trial {}: dp value {} vs brute force {}\n", t, dp.value, bf.value);
        }
    }
    std::cout << fmt::format("dp-check: {}/{} pass, {} fail\n", pass, a.trials, fail);
    return fail ? kExitAssert : kExitOk;
}

struct SpeedArgs {
    std::string sizes = "32,200,1200";
    std::string policies = "aes,mvt,full_ts";
    std::size_t impressions = 10000;
    std::size_t reps = 10;
    std::size_t batch_size = 1000;
    std::optional<std::uint64_t> seed;
    std::string out;
};

int cmd_speed_test(const SpeedArgs& a)
{
    const auto policies = split_list(a.policies);
    check_policies(policies);
    const auto sizes = split_list(a.sizes);
    if (sizes.empty()) throw aes::Error("no sizes given");
    if (a.batch_size == 0) throw aes::Error("batch size must be >= 1");
    const auto seed = pick_seed(a.seed, 0);
    std::vector<aes::TimingRow> rows;
    std::optional<double> aes_t, full_t;
    for (std::size_t s = 0; s < sizes.size(); ++s) {
        const auto counts = aes::parse_size_spec(sizes[s]);
        const auto world = aes::gen_synthetic(aes::build_element_graph(aes::default_structure(counts)), seed + s);
        aes_t.reset();
        full_t.reset();
        for (const auto& p : policies) {
            rows.push_back(aes::timing_benchmark(p, *world.env, a.impressions, a.reps, a.batch_size, {}, seed));
            if (p == "aes") aes_t = rows.back().mean_select_time;
            if (p == "full_ts") full_t = rows.back().mean_select_time;
        }
    }
    if (!a.out.empty()) {
        auto out = open_out(a.out);
        aes::write_timing_csv(out, rows);
    }
    aes::write_timing_csv(std::cout, rows);
    if (aes_t && full_t && a.impressions > 0 && rows.back().n_creatives >= 1200 && !(*aes_t < *full_t)) {
        std::cerr << fmt::format("assertion failed: aes selection {:.6f}s is not below full_ts {:.6f}s\n", *aes_t,
                                 *full_t);
        return kExitAssert;
    }
    return kExitOk;
}

struct GenGraphArgs {
    std::string sizes = "2x5x4x5x1";
    std::size_t constraints = 0;
    bool weights = false;
    std::optional<std::uint64_t> seed;
    std::string out;
};

int cmd_gen_graph(const GenGraphArgs& a)
{
    const auto tree = aes::default_structure(aes::parse_size_spec(a.sizes));
    auto rng = aes::make_rng({pick_seed(a.seed, 0), 0x96});
    std::vector<aes::ForbiddenPair> forbidden;
    std::vector<std::pair<std::size_t, std::size_t>> cells;
    for (std::size_t c = 0; c < tree.size(); ++c) {
        if (c == tree.root()) continue;
        for (std::size_t k = 0; k < tree.element_count(tree.parent(c)) * tree.element_count(c); ++k) cells.emplace_back(c, k);
    }
    for (std::size_t k = 0; k < a.constraints && !cells.empty(); ++k) {
        const auto pick = aes::uniform_index(rng, cells.size());
        const auto [c, cell] = cells[pick];
        cells.erase(cells.begin() + static_cast<std::ptrdiff_t>(pick));
        const auto lc = tree.element_count(c);
        forbidden.push_back({{tree.parent(c), cell / lc}, {c, cell % lc}});
    }
    aes::ElementGraph g = aes::build_element_graph(tree, forbidden);
    if (a.weights) g = aes::gen_synthetic(g, pick_seed(a.seed, 0)).graph;
    const auto text = aes::graph_to_json(g, a.weights).dump(2) + "\n";
    if (a.out.empty()) {
        std::cout << text;
    } else {
        auto out = open_out(a.out);
        out << text;
    }
    return kExitOk;
}

struct GenReplayArgs {
    std::string graph;
    double mean_ctr = 0.03;
    std::uint64_t impressions = 850000;
    bool raw = false;
    std::optional<std::uint64_t> seed;
    std::string out;
};

int cmd_gen_replay(const GenReplayArgs& a)
{
    const auto g = a.graph.empty() ? aes::build_element_graph(aes::default_structure()) : aes::load_graph_file(a.graph);
    aes::ReplayGenOptions opt{a.mean_ctr, a.impressions, a.raw};
    if (a.out.empty()) {
        aes::write_synthetic_replay(std::cout, g, pick_seed(a.seed, 0), opt);
    } else {
        auto out = open_out(a.out);
        aes::write_synthetic_replay(out, g, pick_seed(a.seed, 0), opt);
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Tree-structured ad creative selection: experiments and benchmarks"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "aes_cli 1.0");

    SimulateArgs sim;
    auto* s_sim = app.add_subcommand("simulate", "Run a synthetic or replay experiment from a JSON config");
    s_sim->add_option("--config", sim.config, "Experiment config (JSON)")->required();
    s_sim->add_option("--out", sim.out, "Output directory")->capture_default_str();
    s_sim->add_option("--jobs", sim.jobs, "Concurrent repetitions (default: all cores)");
    s_sim->add_option("--seed", sim.seed, "Master seed (overrides config and AES_SEED)");
    s_sim->add_flag("--deterministic", sim.deterministic, "Write 0 for timing columns so reruns are byte-identical");

    ReplayArgs rep;
    auto* s_rep = app.add_subcommand("replay", "Run policies against a replayed impression log");
    s_rep->add_option("--log", rep.log, "Impression log CSV");
    s_rep->add_option("--graph", rep.graph, "Graph JSON (default structure if omitted)");
    s_rep->add_option("--config", rep.config, "Experiment config; the env is forced to replay");
    s_rep->add_option("--policies", rep.policies, "Comma-separated policy names")->capture_default_str();
    s_rep->add_option("--n-batches", rep.n_batches)->capture_default_str();
    s_rep->add_option("--n-reps", rep.n_reps)->capture_default_str();
    s_rep->add_option("--batch-size", rep.batch_size)->capture_default_str();
    s_rep->add_option("--out", rep.out, "Output directory")->capture_default_str();
    s_rep->add_option("--jobs", rep.jobs);
    s_rep->add_option("--seed", rep.seed);
    s_rep->add_flag("--deterministic", rep.deterministic);

    SweepArgs sw;
    auto* s_sw = app.add_subcommand("sweep", "Final regret across search-space sizes");
    s_sw->add_option("--sizes", sw.sizes, "Comma-separated sizes: a creative count or AxBxC...")->capture_default_str();
    s_sw->add_option("--policies", sw.policies)->capture_default_str();
    s_sw->add_option("--n-batches", sw.n_batches)->capture_default_str();
    s_sw->add_option("--n-reps", sw.n_reps)->capture_default_str();
    s_sw->add_option("--batch-size", sw.batch_size)->capture_default_str();
    s_sw->add_option("--seed", sw.seed);
    s_sw->add_option("--jobs", sw.jobs);
    s_sw->add_option("--out", sw.out)->capture_default_str();

    DpCheckArgs dc;
    auto* s_dc = app.add_subcommand("dp-check", "Compare the DP argmax with brute-force enumeration");
    s_dc->add_option("--trials", dc.trials)->capture_default_str();
    s_dc->add_option("--max-elements", dc.max_elements)->capture_default_str();
    s_dc->add_option("--max-ingredients", dc.max_ingredients)->capture_default_str();
    s_dc->add_option("--constraint-prob", dc.constraint_prob)->capture_default_str()->check(CLI::Range(0.0, 1.0));
    s_dc->add_option("--seed", dc.seed);

    SpeedArgs sp;
    auto* s_sp = app.add_subcommand("speed-test", "Selection-time benchmark across search-space sizes");
    s_sp->add_option("--sizes", sp.sizes)->capture_default_str();
    s_sp->add_option("--policies", sp.policies)->capture_default_str();
    s_sp->add_option("--impressions", sp.impressions)->capture_default_str();
    s_sp->add_option("--reps", sp.reps)->capture_default_str();
    s_sp->add_option("--batch-size", sp.batch_size)->capture_default_str();
    s_sp->add_option("--seed", sp.seed);
    s_sp->add_option("--out", sp.out, "CSV path (stdout always gets a copy)");

    GenGraphArgs gg;
    auto* s_gg = app.add_subcommand("gen-graph", "Write a graph JSON in the default five-ingredient layout");
    s_gg->add_option("--sizes", gg.sizes, "Element counts AxBxCxDxE or a creative count")->capture_default_str();
    s_gg->add_option("--constraints", gg.constraints, "Number of random forbidden pairs")->capture_default_str();
    s_gg->add_flag("--weights", gg.weights, "Include N(0,1) weights");
    s_gg->add_option("--seed", gg.seed);
    s_gg->add_option("--out", gg.out);

    GenReplayArgs gr;
    auto* s_gr = app.add_subcommand("gen-replay", "Fabricate an aggregated or raw impression log");
    s_gr->add_option("--graph", gr.graph);
    s_gr->add_option("--mean-ctr", gr.mean_ctr)->capture_default_str();
    s_gr->add_option("--impressions", gr.impressions)->capture_default_str();
    s_gr->add_flag("--raw", gr.raw, "One row per impression");
    s_gr->add_option("--seed", gr.seed);
    s_gr->add_option("--out", gr.out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*s_sim) return cmd_simulate(sim);
        if (*s_rep) return cmd_replay(rep);
        if (*s_sw) return cmd_sweep(sw);
        if (*s_dc) return cmd_dp_check(dc);
        if (*s_sp) return cmd_speed_test(sp);
        if (*s_gg) return cmd_gen_graph(gg);
        if (*s_gr) return cmd_gen_replay(gr);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}
