/*
 Copyright 2026 The cpcmdp Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

// Seeded random instances and the batch benchmark driver.

#pragma once

#include "cpcmdp/core.hpp"
#include "cpcmdp/io.hpp"
#include "cpcmdp/oracles.hpp"
#include "cpcmdp/solver.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace cpcmdp {

struct InstanceSpec {
    std::uint64_t seed = 0;
    Eigen::Index n_states = 10;
    Eigen::Index n_actions = 3;
    Eigen::Index m = 2;
    double gamma = 0.9;
    double reward_scale = 1.0;
    double constraint_tightness = 0.5;
    /// Successors per (s,a) besides the self-loop nudge.
    Eigen::Index kernel_sparsity = 3;
    int max_retries = 50;

    void validate() const {
        detail::require(n_states >= 1 && n_actions >= 1 && m >= 0,
                        "InstanceSpec: sizes must be positive");
        detail::require(gamma > 0.0 && gamma < 1.0, "InstanceSpec: gamma must lie in (0,1)");
        detail::require(reward_scale > 0.0, "InstanceSpec: reward_scale must be positive");
        detail::require(constraint_tightness >= 0.0 && constraint_tightness < 1.0,
                        "InstanceSpec: tightness must lie in [0,1)");
        detail::require(kernel_sparsity >= 1, "InstanceSpec: kernel_sparsity must be >= 1");
        detail::require(max_retries >= 1, "InstanceSpec: max_retries must be >= 1");
    }
};

namespace detail {

/// Platform-independent uniform double in [0,1).
inline double uniform01(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

inline constexpr double kSelfLoopMass = 1e-3;

inline TabularCmdp draw_instance(const InstanceSpec& spec, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const auto ns = spec.n_states;
    const auto na = spec.n_actions;
    const auto width = std::min(spec.kernel_sparsity, ns);

    Matrix kernel = Matrix::Zero(ns * na, ns);
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(ns));
    for (Eigen::Index s = 0; s < ns; ++s) {
        for (Eigen::Index a = 0; a < na; ++a) {
            std::iota(perm.begin(), perm.end(), Eigen::Index(0));
            // Partial Fisher-Yates: the first `width` entries are the successors.
            for (Eigen::Index j = 0; j < width; ++j) {
                const auto pick = j + Eigen::Index(rng() % std::uint64_t(ns - j));
                std::swap(perm[std::size_t(j)], perm[std::size_t(pick)]);
            }
            Vector w(width);
            for (Eigen::Index j = 0; j < width; ++j)
                w[j] = 1.0 - uniform01(rng);
            w *= (1.0 - kSelfLoopMass) / w.sum();
            auto row = kernel.row(s * na + a);
            for (Eigen::Index j = 0; j < width; ++j)
                row[perm[std::size_t(j)]] += w[j];
            row[s] += kSelfLoopMass;
            row /= row.sum();
        }
    }

    std::vector<RewardTable> rewards;
    for (Eigen::Index i = 0; i <= spec.m; ++i) {
        RewardTable r(ns, na);
        for (Eigen::Index s = 0; s < ns; ++s)
            for (Eigen::Index a = 0; a < na; ++a)
                r(s, a) = spec.reward_scale * (1.0 - uniform01(rng));
        rewards.push_back(std::move(r));
    }

    Vector rho(ns);
    for (Eigen::Index s = 0; s < ns; ++s)
        rho[s] = 1.0 - uniform01(rng);
    rho /= rho.sum();

    TabularCmdp draft(ns, na, std::move(kernel), std::move(rewards), Vector::Zero(spec.m),
                      spec.gamma, std::move(rho));

    // c_i = tightness * max_pi V_i.
    Vector c(spec.m);
    for (Eigen::Index i = 0; i < spec.m; ++i) {
        const HardOptimum opt = value_iteration(draft, draft.reward(std::size_t(i) + 1), 1e-12);
        c[i] = spec.constraint_tightness * draft.rho().dot(opt.values);
    }
    return draft.with_thresholds(std::move(c));
}

} // namespace detail

/// Deterministic in spec.seed. Re-rolls with derived seeds until the Slater
/// margin exceeds 0.01 reward_scale/(1-gamma).
inline TabularCmdp generate_instance(const InstanceSpec& spec) {
    spec.validate();
    const double floor = 0.01 * spec.reward_scale / (1.0 - spec.gamma);
    for (int attempt = 0; attempt < spec.max_retries; ++attempt) {
        const std::uint64_t seed = spec.seed + std::uint64_t(attempt) * 0x9E3779B97F4A7C15ULL;
        TabularCmdp cmdp = detail::draw_instance(spec, seed);
        if (spec.m == 0 || slater_margin(cmdp) > floor)
            return cmdp;
    }
    throw ModelError("generate_instance: no instance with a sufficient Slater margin after " +
                     std::to_string(spec.max_retries) + " draws");
}

inline InstanceSpec instance_spec_from_json(const nlohmann::json& j) {
    InstanceSpec s;
    s.seed = j.value("seed", std::uint64_t(0));
    s.n_states = j.value("n_states", s.n_states);
    s.n_actions = j.value("n_actions", s.n_actions);
    s.m = j.value("m", s.m);
    s.gamma = j.value("gamma", s.gamma);
    s.reward_scale = j.value("reward_scale", s.reward_scale);
    s.constraint_tightness = j.value("constraint_tightness", s.constraint_tightness);
    s.kernel_sparsity = j.value("kernel_sparsity", s.kernel_sparsity);
    s.max_retries = j.value("max_retries", s.max_retries);
    s.validate();
    return s;
}

struct NamedSolver {
    std::string name;
    DualConfig config;
};

inline NamedSolver solver_from_json(const nlohmann::json& j) {
    NamedSolver out;
    out.name = j.value("name", std::string("default"));
    DualConfig& c = out.config;
    if (j.contains("tau"))
        c.tau = j.at("tau").get<double>();
    c.delta = j.value("delta", c.delta);
    c.mu = j.value("mu", c.mu);
    if (j.contains("b_lambda"))
        c.b_lambda = j.at("b_lambda").get<double>();
    if (j.contains("xi"))
        c.slater_xi = j.at("xi").get<double>();
    c.vaidya.eta = j.value("eta", c.vaidya.eta);
    c.vaidya.zeta = j.value("zeta", c.vaidya.zeta);
    c.vaidya.newton_tol = j.value("newton_tol", c.vaidya.newton_tol);
    c.vaidya.allow_unsafe = j.value("unsafe_params", false);
    c.t_outer = j.value("t_outer", c.t_outer);
    c.oracle_check = true;
    return out;
}

struct BenchConfig {
    std::vector<InstanceSpec> instances;
    std::vector<NamedSolver> solvers;
    std::string output_dir = "bench_out";
    int threads = 1;
    bool record_wall_time = false;
    /// Grid step (as a fraction of B_lambda) for the dual optimum used by the slope fit.
    double slope_grid_fraction = 0.02;
    int slope_grid_refine = 3;
};

/// Schema: {"instances": [spec...], "instance_batch": {"seeds": [...], ...spec},
/// "solvers": [{name, tau, delta, mu, eta, zeta, t_outer, unsafe_params, ...}],
/// "output_dir", "threads", "record_wall_time"}.
inline BenchConfig bench_config_from_json(const nlohmann::json& j) {
    BenchConfig cfg;
    if (j.contains("instances"))
        for (const auto& spec : j.at("instances"))
            cfg.instances.push_back(instance_spec_from_json(spec));
    if (j.contains("instance_batch")) {
        const auto& batch = j.at("instance_batch");
        nlohmann::json base = batch;
        base.erase("seeds");
        for (const auto& seed : batch.at("seeds")) {
            base["seed"] = seed.get<std::uint64_t>();
            cfg.instances.push_back(instance_spec_from_json(base));
        }
    }
    if (j.contains("solvers"))
        for (const auto& s : j.at("solvers"))
            cfg.solvers.push_back(solver_from_json(s));
    if (cfg.solvers.empty())
        cfg.solvers.push_back(solver_from_json(nlohmann::json::object()));
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
    cfg.threads = std::max(1, j.value("threads", 1));
    cfg.record_wall_time = j.value("record_wall_time", false);
    cfg.slope_grid_fraction = j.value("slope_grid_fraction", cfg.slope_grid_fraction);
    cfg.slope_grid_refine = j.value("slope_grid_refine", cfg.slope_grid_refine);
    return cfg;
}

/// Least-squares slope of y against x.
inline double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = double(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxx > 0.0 ? sxy / sxx : 0.0;
}

struct SlopeFit {
    std::optional<double> slope;
    double dual_optimum = 0.0;
    /// Decades spanned by the decaying segment of the best-so-far gap.
    double decades = 0.0;
};

/// Regresses log(best_so_far - d*) on t over the rows where the gap exceeds
/// the NPG floor 6 tau gamma delta.
inline SlopeFit best_gap_slope(const TabularCmdp& cmdp, const Solution& sol, double dual_optimum) {
    SlopeFit fit;
    fit.dual_optimum = dual_optimum;
    const double floor = 6.0 * sol.settings.tau * cmdp.gamma() * sol.settings.delta;
    std::vector<double> ts;
    std::vector<double> logs;
    for (const TraceRow& r : sol.trace) {
        if (!r.best_so_far)
            continue;
        const double gap = *r.best_so_far - dual_optimum;
        if (!(gap > floor))
            break;
        ts.push_back(double(r.t));
        logs.push_back(std::log(gap));
    }
    if (ts.size() >= 2) {
        fit.slope = fit_slope(ts, logs);
        fit.decades = (logs.front() - logs.back()) / std::log(10.0);
    }
    return fit;
}

struct BenchRecord {
    std::uint64_t seed = 0;
    std::string solver;
    bool ok = false;
    std::string error;
    nlohmann::json summary;
    std::string trace_csv;
};

inline BenchRecord run_bench_job(const InstanceSpec& spec, const NamedSolver& solver,
                                 const BenchConfig& cfg) {
    BenchRecord rec;
    rec.seed = spec.seed;
    rec.solver = solver.name;
    try {
        const auto start = std::chrono::steady_clock::now();
        const TabularCmdp cmdp = generate_instance(spec);
        const Solution sol = solve(cmdp, solver.config);
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                                .count();
        nlohmann::json& s = rec.summary;
        s["seed"] = spec.seed;
        s["solver"] = solver.name;
        s["status"] = "ok";
        const double scale = cmdp.reward_max(0) / (1.0 - cmdp.gamma());
        s["r0_scale"] = scale;
        s["final_gap"] = sol.diagnostics.measured_gap ? nlohmann::json(*sol.diagnostics.measured_gap)
                                                      : nlohmann::json(nullptr);
        s["final_violation"] = sol.diagnostics.measured_violation
                                   ? nlohmann::json(*sol.diagnostics.measured_violation)
                                   : nlohmann::json(nullptr);
        s["iterations"] = sol.trace.size();
        s["lambda"] = to_json(sol.lambda);
        s["tau"] = sol.settings.tau;
        s["xi"] = sol.settings.xi;
        s["b_lambda"] = sol.settings.b_lambda;
        s["epsilon"] = sol.settings.epsilon;
        s["epsilon_alt"] = sol.settings.epsilon_alt;
        s["drop_rollbacks"] = sol.drop_rollbacks;
        if (cfg.record_wall_time)
            s["wall_time_s"] = wall;
        if (cmdp.n_constraints() >= 1 && cmdp.n_constraints() <= 2) {
            const DualMinimum dmin =
                grid_dual_min(cmdp, sol.settings.tau, sol.settings.b_lambda,
                              cfg.slope_grid_fraction * sol.settings.b_lambda, cfg.slope_grid_refine);
            const SlopeFit fit = best_gap_slope(cmdp, sol, dmin.value);
            s["dual_optimum"] = dmin.value;
            s["slope"] = fit.slope ? nlohmann::json(*fit.slope) : nlohmann::json(nullptr);
            s["slope_decades"] = fit.decades;
        } else {
            s["dual_optimum"] = nullptr;
            s["slope"] = nullptr;
            s["slope_decades"] = nullptr;
        }
        std::ostringstream csv;
        write_trace_csv(csv, sol.trace);
        rec.trace_csv = csv.str();
        rec.ok = true;
    } catch (const std::exception& e) {
        rec.error = e.what();
        rec.summary = {{"seed", spec.seed}, {"solver", solver.name}, {"status", "error"},
                       {"error", rec.error}};
    }
    return rec;
}

/// Runs every (instance, solver) pair; results are merged in config order so
/// the output does not depend on scheduling. Returns the summary document.
inline nlohmann::json run_benchmark(const BenchConfig& cfg) {
    std::vector<std::pair<std::size_t, std::size_t>> jobs;
    for (std::size_t i = 0; i < cfg.instances.size(); ++i)
        for (std::size_t s = 0; s < cfg.solvers.size(); ++s)
            jobs.emplace_back(i, s);
    std::vector<BenchRecord> records(jobs.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t j = next++; j < jobs.size(); j = next++)
            records[j] = run_bench_job(cfg.instances[jobs[j].first], cfg.solvers[jobs[j].second], cfg);
    };
    const int n_threads = std::max(1, std::min<int>(cfg.threads, int(jobs.size())));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t)
            pool.emplace_back(worker);
        for (auto& th : pool)
            th.join();
    }

    namespace fs = std::filesystem;
    fs::create_directories(cfg.output_dir);
    nlohmann::json summary;
    summary["runs"] = nlohmann::json::array();
    for (const BenchRecord& rec : records) {
        nlohmann::json entry = rec.summary;
        if (rec.ok) {
            const std::string name =
                "trace_" + std::to_string(rec.seed) + "_" + rec.solver + ".csv";
            std::ofstream(fs::path(cfg.output_dir) / name) << rec.trace_csv;
            entry["trace"] = name;
        }
        summary["runs"].push_back(std::move(entry));
    }
    std::ofstream(fs::path(cfg.output_dir) / "summary.json") << summary.dump(2) << '\n';
    return summary;
}

} // namespace cpcmdp
