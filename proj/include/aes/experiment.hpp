#pragma once

// Batched bandit experiments: repetitions, delayed feedback, regret and CTR
// metrics, search-space sweeps and selection timing.

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "aes/environment.hpp"
#include "aes/policies.hpp"

namespace aes {

struct ExperimentConfig {
    std::size_t batch_size = 1000;
    std::size_t n_batches = 0;
    std::size_t n_reps = 1;
    std::uint64_t master_seed = 0;
    /// Worker threads for repetitions; 0 picks the hardware concurrency.
    std::size_t jobs = 0;
    /// When false, sel_time_ns is written as 0 so that reruns are byte-identical.
    bool record_timing = true;
    /// Keep every selected creative (as its code) for offline regret checks.
    bool keep_trace = false;
};

struct BatchRow {
    std::size_t batch = 0; // 1-based
    std::uint64_t impressions = 0;
    std::uint64_t clicks = 0;
    double overall_ctr = 0.0;
    double cum_regret = 0.0;
    std::int64_t sel_time_ns = 0;
    std::uint64_t infeasible_count = 0;

    bool operator==(const BatchRow&) const = default;
};

/// Creative codes chosen in each batch.
using SelectionTrace = std::vector<std::vector<std::uint64_t>>;

struct RepMetrics {
    std::vector<BatchRow> rows;
    SelectionTrace trace;
};

struct BatchAggregate {
    double ctr_mean = 0.0;
    double ctr_std = 0.0;
    double regret_mean = 0.0;
    double regret_std = 0.0;
};

struct MetricsRecord {
    std::string policy;
    std::vector<RepMetrics> reps;
    std::vector<BatchAggregate> aggregate;

    std::size_t batches() const { return aggregate.size(); }
};

using PolicyFactory = std::function<std::unique_ptr<Policy>(CreativeSpacePtr)>;
using EnvironmentProvider = std::function<std::shared_ptr<const Environment>(std::size_t rep)>;

inline PolicyFactory policy_factory(std::string name, PolicyParams params)
{
    return [name = std::move(name), params](CreativeSpacePtr space) { return make_policy(name, std::move(space), params); };
}

namespace detail {

inline void mean_std(const std::vector<double>& xs, double& mean, double& sd)
{
    mean = 0.0;
    for (auto x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (auto x : xs) ss += (x - mean) * (x - mean);
    sd = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
}

/// Runs fn(rep) for rep in [0, n) on up to `jobs` threads; rethrows the first error.
inline void parallel_reps(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn)
{
    if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min(jobs, n);
    if (jobs <= 1) {
        for (std::size_t r = 0; r < n; ++r) fn(r);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> workers;
    for (std::size_t j = 0; j < jobs; ++j)
        workers.emplace_back([&] {
            for (std::size_t r = next++; r < n; r = next++) {
                try {
                    fn(r);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& w : workers) w.join();
    if (error) std::rethrow_exception(error);
}

} // namespace detail

inline RepMetrics run_repetition(const ExperimentConfig& cfg, const Environment& env, Policy& policy, std::size_t rep)
{
    if (!policy.graph().same_structure(env.graph())) throw Error("policy and environment use different graphs");
    policy.reset();
    auto policy_rng = make_rng({cfg.master_seed, rep, 1});
    auto feedback_rng = make_rng({cfg.master_seed, rep, 2});
    const auto& space = env.space();
    const auto& tree = env.graph().tree();
    const double best = env.best_ctr();

    RepMetrics out;
    out.rows.reserve(cfg.n_batches);
    std::vector<Impression> batch(cfg.batch_size);
    BatchRow acc;
    for (std::size_t b = 1; b <= cfg.n_batches; ++b) {
        std::int64_t sel_ns = 0;
        std::vector<std::uint64_t> codes;
        if (cfg.keep_trace) codes.reserve(cfg.batch_size);
        for (auto& imp : batch) {
            if (cfg.record_timing) {
                const auto t0 = std::chrono::steady_clock::now();
                imp.creative = policy.select(policy_rng);
                sel_ns += std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0)
                              .count();
            } else {
                imp.creative = policy.select(policy_rng);
            }
            const auto rank = space.rank_of(imp.creative);
            if (!rank) {
                if (policy.enforces_constraints())
                    throw Error("policy '" + policy.name() + "' selected an infeasible creative");
                ++acc.infeasible_count;
            }
            const double p = rank ? env.ctr()[*rank] : 0.0;
            imp.reward = uniform01(feedback_rng) < p ? 1 : 0;
            acc.clicks += static_cast<std::uint64_t>(imp.reward);
            acc.cum_regret += best - p;
            if (cfg.keep_trace) codes.push_back(creative_code(tree, imp.creative));
        }
        acc.impressions += cfg.batch_size;
        policy.observe_batch(batch);
        acc.batch = b;
        acc.overall_ctr = static_cast<double>(acc.clicks) / static_cast<double>(acc.impressions);
        acc.sel_time_ns = sel_ns;
        out.rows.push_back(acc);
        if (cfg.keep_trace) out.trace.push_back(std::move(codes));
    }
    return out;
}

inline MetricsRecord run_experiment(const ExperimentConfig& cfg, const EnvironmentProvider& env_for_rep,
                                    const PolicyFactory& factory)
{
    if (cfg.batch_size == 0) throw Error("batch_size must be >= 1");
    if (cfg.n_reps == 0) throw Error("n_reps must be >= 1");
    MetricsRecord rec;
    rec.reps.resize(cfg.n_reps);
    std::vector<std::string> names(cfg.n_reps);
    detail::parallel_reps(cfg.n_reps, cfg.jobs, [&](std::size_t rep) {
        const auto env = env_for_rep(rep);
        auto policy = factory(env->space_ptr());
        names[rep] = policy->name();
        rec.reps[rep] = run_repetition(cfg, *env, *policy, rep);
    });
    rec.policy = names[0];
    rec.aggregate.resize(cfg.n_batches);
    std::vector<double> ctr(cfg.n_reps), regret(cfg.n_reps);
    for (std::size_t b = 0; b < cfg.n_batches; ++b) {
        for (std::size_t r = 0; r < cfg.n_reps; ++r) {
            ctr[r] = rec.reps[r].rows[b].overall_ctr;
            regret[r] = rec.reps[r].rows[b].cum_regret;
        }
        detail::mean_std(ctr, rec.aggregate[b].ctr_mean, rec.aggregate[b].ctr_std);
        detail::mean_std(regret, rec.aggregate[b].regret_mean, rec.aggregate[b].regret_std);
    }
    return rec;
}

inline MetricsRecord run_experiment(const ExperimentConfig& cfg, std::shared_ptr<const Environment> env,
                                    const PolicyFactory& factory)
{
    return run_experiment(cfg, [env](std::size_t) { return env; }, factory);
}

/// Cumulative expected regret per batch, sum_t (best_ctr - ctr(c_t)); infeasible picks count as CTR 0.
inline std::vector<double> compute_regret(const SelectionTrace& trace, const Environment& env)
{
    const auto& tree = env.graph().tree();
    std::vector<double> out;
    out.reserve(trace.size());
    double acc = 0.0;
    for (const auto& batch : trace) {
        for (auto code : batch) acc += env.best_ctr() - env.ctr_of(creative_from_code(tree, code));
        out.push_back(acc);
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr std::string_view kMetricsHeader =
    "policy,rep,batch,impressions,clicks,overall_ctr,cum_regret,sel_time_ns,infeasible_count";

inline void write_metrics_csv(std::ostream& out, const MetricsRecord& rec, bool header = true)
{
    if (header) out << kMetricsHeader << '\n';
    for (std::size_t r = 0; r < rec.reps.size(); ++r)
        for (const auto& row : rec.reps[r].rows)
            out << fmt::format("{},{},{},{},{},{},{},{},{}\n", rec.policy, r, row.batch, row.impressions, row.clicks,
                               row.overall_ctr, row.cum_regret, row.sel_time_ns, row.infeasible_count);
}

struct MetricsCsvRow {
    std::string policy;
    std::size_t rep = 0;
    BatchRow row;
};

inline std::vector<MetricsCsvRow> read_metrics_csv(std::istream& in)
{
    std::vector<MetricsCsvRow> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1) {
            if (line != kMetricsHeader) throw Error("metrics CSV: unexpected header");
            continue;
        }
        if (line.empty()) continue;
        const auto f = detail::split_csv(line);
        if (f.size() != 9) throw Error("metrics CSV line " + std::to_string(lineno) + ": expected 9 fields");
        try {
            MetricsCsvRow m;
            m.policy = f[0];
            m.rep = std::stoull(f[1]);
            m.row.batch = std::stoull(f[2]);
            m.row.impressions = std::stoull(f[3]);
            m.row.clicks = std::stoull(f[4]);
            m.row.overall_ctr = std::stod(f[5]);
            m.row.cum_regret = std::stod(f[6]);
            m.row.sel_time_ns = std::stoll(f[7]);
            m.row.infeasible_count = std::stoull(f[8]);
            rows.push_back(std::move(m));
        } catch (const std::logic_error&) {
            throw Error("metrics CSV line " + std::to_string(lineno) + ": bad number");
        }
    }
    return rows;
}

struct SummaryRow {
    std::string policy;
    double final_ctr_mean = 0.0;
    double final_ctr_std = 0.0;
    double final_regret_mean = 0.0;
    double final_regret_std = 0.0;
    double infeasible_mean = 0.0;
};

inline SummaryRow summarize(const MetricsRecord& rec)
{
    SummaryRow s;
    s.policy = rec.policy;
    if (rec.aggregate.empty()) return s;
    const auto& last = rec.aggregate.back();
    s.final_ctr_mean = last.ctr_mean;
    s.final_ctr_std = last.ctr_std;
    s.final_regret_mean = last.regret_mean;
    s.final_regret_std = last.regret_std;
    for (const auto& rep : rec.reps) s.infeasible_mean += static_cast<double>(rep.rows.back().infeasible_count);
    s.infeasible_mean /= static_cast<double>(rec.reps.size());
    return s;
}

inline void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows)
{
    out << "policy,final_ctr_mean,final_ctr_std,final_regret_mean,final_regret_std,infeasible_mean\n";
    for (const auto& s : rows)
        out << fmt::format("{},{},{},{},{},{}\n", s.policy, s.final_ctr_mean, s.final_ctr_std, s.final_regret_mean,
                           s.final_regret_std, s.infeasible_mean);
}

// ---------------------------------------------------------------------------
// Search-space sweep

struct SweepRow {
    std::string policy;
    std::vector<std::size_t> counts;
    std::size_t n_creatives = 0;
    double regret_mean = 0.0;
    double regret_std = 0.0;
    double ctr_mean = 0.0;
};

/// Keeps the base tree's shape and names and swaps in each set of element
/// counts; every size gets its own synthetic world drawn from env_seed.
inline std::vector<SweepRow> sweep_search_space(const IngredientTree& base,
                                                const std::vector<std::vector<std::size_t>>& count_sets,
                                                const std::vector<std::string>& policies, const ExperimentConfig& cfg,
                                                const PolicyParams& params, SyntheticOptions env_opt,
                                                std::uint64_t env_seed)
{
    std::vector<std::string> names;
    for (const auto& ing : base.ingredients()) names.push_back(ing.name);
    std::vector<SweepRow> out;
    for (std::size_t s = 0; s < count_sets.size(); ++s) {
        const auto tree = make_tree(count_sets[s], base.parents(), names);
        const auto world = gen_synthetic(build_element_graph(tree), env_seed + s, env_opt);
        std::shared_ptr<const Environment> env = world.env;
        for (const auto& p : policies) {
            const auto rec = run_experiment(cfg, env, policy_factory(p, params));
            const auto sum = summarize(rec);
            out.push_back({p, count_sets[s], env->space().size(), sum.final_regret_mean, sum.final_regret_std,
                           sum.final_ctr_mean});
        }
    }
    return out;
}

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows)
{
    out << "policy,n_creatives,element_counts,regret_mean,regret_std,ctr_mean\n";
    for (const auto& r : rows) {
        std::string counts;
        for (std::size_t i = 0; i < r.counts.size(); ++i) counts += (i ? "x" : "") + std::to_string(r.counts[i]);
        out << fmt::format("{},{},{},{},{},{}\n", r.policy, r.n_creatives, counts, r.regret_mean, r.regret_std,
                           r.ctr_mean);
    }
}

// ---------------------------------------------------------------------------
// Timing

struct TimingRow {
    std::string policy;
    std::size_t n_creatives = 0;
    double mean_time = 0.0; // seconds of select + update per repetition
    double std_time = 0.0;
    double mean_select_time = 0.0;
    double ops_per_select = 0.0;
};

/// Wall-clock of selection plus posterior/statistics updates for `impressions`
/// impressions (batched), repeated `reps` times. Feedback sampling is excluded.
inline TimingRow timing_benchmark(const std::string& policy_name, const Environment& env, std::size_t impressions,
                                  std::size_t reps, std::size_t batch_size, const PolicyParams& params,
                                  std::uint64_t seed)
{
    using clock = std::chrono::steady_clock;
    TimingRow row;
    row.policy = policy_name;
    row.n_creatives = env.space().size();
    std::vector<double> totals, selects;
    double ops = 0.0;
    std::size_t selections = 0;
    for (std::size_t rep = 0; rep < std::max<std::size_t>(reps, 1); ++rep) {
        auto policy = make_policy(policy_name, env.space_ptr(), params);
        auto prng = make_rng({seed, rep, 1});
        auto frng = make_rng({seed, rep, 2});
        std::chrono::nanoseconds total{0}, select{0};
        std::vector<Impression> batch;
        batch.reserve(batch_size);
        for (std::size_t t = 0; t < impressions; ++t) {
            const auto t0 = clock::now();
            Impression imp{policy->select(prng), 0};
            const auto dt = clock::now() - t0;
            total += dt;
            select += dt;
            ops += static_cast<double>(policy->last_search_ops());
            ++selections;
            imp.reward = uniform01(frng) < env.ctr_of(imp.creative) ? 1 : 0;
            batch.push_back(std::move(imp));
            if (batch.size() == batch_size || t + 1 == impressions) {
                const auto t1 = clock::now();
                policy->observe_batch(batch);
                total += clock::now() - t1;
                batch.clear();
            }
        }
        totals.push_back(std::chrono::duration<double>(total).count());
        selects.push_back(std::chrono::duration<double>(select).count());
    }
    double sel_sd = 0.0;
    detail::mean_std(totals, row.mean_time, row.std_time);
    detail::mean_std(selects, row.mean_select_time, sel_sd);
    row.ops_per_select = selections ? ops / static_cast<double>(selections) : 0.0;
    return row;
}

inline void write_timing_csv(std::ostream& out, const std::vector<TimingRow>& rows)
{
    out << "policy,n_creatives,mean_time,std_time,ops_count\n";
    for (const auto& r : rows)
        out << fmt::format("{},{},{},{},{}\n", r.policy, r.n_creatives, r.mean_time, r.std_time, r.ops_per_select);
}

} // namespace aes
