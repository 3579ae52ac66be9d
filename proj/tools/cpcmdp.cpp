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

// cpcmdp: command-line front end.
//
//   cpcmdp gen      --seed 7 [--states 10 --actions 3 --m 2 ...] [-o inst.json]
//   cpcmdp solve    --instance inst.json [--tau 1e-3 --t-outer 150 --trace t.csv]
//   cpcmdp oracle   --instance inst.json --mode lp|slater|softvi|griddual
//   cpcmdp npg      --instance inst.json --tau 0.1 [--lambda 1,2 | --reward-index 0]
//   cpcmdp cutplane --dim 3 --seed 1 [--eta 1000 --zeta 0.1 --unsafe-params]
//   cpcmdp bench    --config bench.json [--threads 4]
//   cpcmdp check    [--criteria 1,3,5]
//
// Results go to stdout as JSON (CSV for traces); errors to stderr with exit 1.

#include "cpcmdp/bench.hpp"
#include "cpcmdp/io.hpp"
#include "cpcmdp/verify.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

using namespace cpcmdp;
using nlohmann::json;

namespace {

json policy_json(const Policy& pi) { return to_json(pi.probs()); }

json optional_json(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

Vector parse_vector(const std::vector<double>& xs) {
    Vector v(Eigen::Index(xs.size()));
    for (std::size_t i = 0; i < xs.size(); ++i)
        v[Eigen::Index(i)] = xs[i];
    return v;
}

void emit(const json& j, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << j.dump(2) << '\n';
        return;
    }
    std::ofstream out(path);
    if (!out)
        throw ModelError("cannot write " + path);
    out << j.dump(2) << '\n';
}

json diagnostics_json(const DiagnosticsReport& d) {
    json j;
    j["epsilon"] = d.epsilon_theorem1;
    j["epsilon_alt"] = d.epsilon_alt;
    j["tau"] = d.tau;
    j["delta"] = d.delta;
    j["xi"] = d.xi;
    j["b_lambda"] = d.b_lambda;
    j["b_d"] = d.b_d;
    j["b_d_upper"] = d.b_d_upper;
    j["radius_outer"] = d.radius_outer;
    j["radius_inner"] = d.radius_inner;
    j["dual_gap_bound"] = d.dual_gap_bound;
    j["l_beta"] = optional_json(d.l_beta);
    j["l_d"] = optional_json(d.l_d);
    j["gap_bound"] = optional_json(d.gap_bound);
    j["violation_bound"] = optional_json(d.violation_bound);
    if (d.corollary) {
        j["corollary"] = {{"target", d.corollary->target},
                          {"c_epsilon", d.corollary->c_epsilon},
                          {"c_delta", d.corollary->c_delta},
                          {"t_required", d.corollary->t_required}};
    }
    j["lp_optimum"] = optional_json(d.lp_optimum);
    j["measured_gap"] = optional_json(d.measured_gap);
    j["measured_violation"] = optional_json(d.measured_violation);
    return j;
}

struct SolveOpts {
    std::string instance;
    std::optional<double> tau;
    double delta = 1e-6;
    double mu = 0.0;
    std::optional<double> xi;
    std::optional<double> b_lambda;
    double eta = 1e-4;
    double zeta = 1e-7;
    int t_outer = 150;
    bool oracle_check = false;
    bool unsafe = false;
    std::optional<double> c_m;
    std::optional<double> beta;
    std::optional<double> target;
    std::string trace;
    std::string out;
};

int run_solve(const SolveOpts& o) {
    const TabularCmdp cmdp = load_cmdp(o.instance);
    DualConfig cfg;
    cfg.tau = o.tau;
    cfg.delta = o.delta;
    cfg.mu = o.mu;
    cfg.slater_xi = o.xi;
    cfg.b_lambda = o.b_lambda;
    cfg.vaidya.eta = o.eta;
    cfg.vaidya.zeta = o.zeta;
    cfg.vaidya.allow_unsafe = o.unsafe;
    cfg.t_outer = o.t_outer;
    cfg.oracle_check = o.oracle_check;
    cfg.target_accuracy = o.target;
    if (o.c_m || o.beta)
        cfg.mixing = MixingConstants{o.c_m.value_or(1.0), o.beta.value_or(0.5)};
    const Solution sol = solve(cmdp, cfg);
    if (!o.trace.empty()) {
        std::ofstream csv(o.trace);
        if (!csv)
            throw ModelError("cannot write " + o.trace);
        write_trace_csv(csv, sol.trace);
    }
    json j;
    j["lambda"] = to_json(sol.lambda);
    j["policy"] = policy_json(sol.policy);
    j["constraint_values"] = to_json(constraint_values(cmdp, sol.policy));
    j["objective_value"] = value(cmdp, sol.policy, cmdp.reward(0));
    j["iterations"] = sol.trace.size();
    j["drop_rollbacks"] = sol.drop_rollbacks;
    j["diagnostics"] = diagnostics_json(sol.diagnostics);
    emit(j, o.out);
    return 0;
}

RewardTable pick_reward(const TabularCmdp& cmdp, const std::vector<double>& lambda, std::size_t index) {
    if (!lambda.empty()) {
        if (Eigen::Index(lambda.size()) != cmdp.n_constraints())
            throw ModelError("--lambda needs " + std::to_string(cmdp.n_constraints()) + " entries");
        return combined_reward(cmdp, parse_vector(lambda));
    }
    if (index >= cmdp.rewards().size())
        throw ModelError("--reward-index out of range");
    return cmdp.reward(index);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cutting-plane primal-dual solver for tabular constrained MDPs"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "Emit a seeded random instance");
    InstanceSpec spec;
    std::string gen_out;
    gen->add_option("--seed", spec.seed, "Random seed")->required();
    gen->add_option("--states", spec.n_states, "Number of states")->capture_default_str();
    gen->add_option("--actions", spec.n_actions, "Number of actions")->capture_default_str();
    gen->add_option("--m", spec.m, "Number of constraints")->capture_default_str();
    gen->add_option("--gamma", spec.gamma, "Discount factor")->capture_default_str();
    gen->add_option("--reward-scale", spec.reward_scale)->capture_default_str();
    gen->add_option("--tightness", spec.constraint_tightness)->capture_default_str();
    gen->add_option("--sparsity", spec.kernel_sparsity, "Successors per (s,a)")->capture_default_str();
    gen->add_option("--max-retries", spec.max_retries)->capture_default_str();
    gen->add_option("-o,--output", gen_out, "Output file (default stdout)");

    // solve
    auto* sv = app.add_subcommand("solve", "Run the cutting-plane primal-dual solver");
    SolveOpts so;
    sv->add_option("--instance", so.instance, "Instance JSON")->required();
    sv->add_option("--tau", so.tau, "Entropy coefficient (default from the epsilon formula)");
    sv->add_option("--delta", so.delta, "Inner NPG accuracy")->capture_default_str();
    sv->add_option("--mu", so.mu, "Dual regularization")->capture_default_str();
    sv->add_option("--xi", so.xi, "Slater margin (default from the LP)");
    sv->add_option("--b-lambda", so.b_lambda, "Dual radius override");
    sv->add_option("--eta", so.eta)->capture_default_str();
    sv->add_option("--zeta", so.zeta)->capture_default_str();
    sv->add_option("--t-outer", so.t_outer, "Cutting-plane iterations")->capture_default_str();
    sv->add_flag("--oracle-check", so.oracle_check, "Compare against the LP optimum");
    sv->add_flag("--unsafe-params", so.unsafe, "Allow eta/zeta outside the analysed regime");
    sv->add_option("--c-m", so.c_m, "Mixing constant C_M");
    sv->add_option("--beta", so.beta, "Mixing rate beta");
    sv->add_option("--target", so.target, "Target accuracy for the iteration-count report");
    sv->add_option("--trace", so.trace, "Write the convergence trace CSV here");
    sv->add_option("-o,--output", so.out, "Output file (default stdout)");
    std::uint64_t solve_seed = 0;
    sv->add_option("--seed", solve_seed, "Accepted for uniformity; the solver is deterministic");

    // oracle
    auto* orc = app.add_subcommand("oracle", "Exact reference oracles");
    std::string orc_instance, orc_mode = "lp", orc_out;
    double orc_tau = 0.1, orc_tol = 1e-12, orc_res = 0.0;
    int orc_refine = 3;
    std::vector<double> orc_lambda;
    std::size_t orc_index = 0;
    orc->add_option("--instance", orc_instance)->required();
    orc->add_option("--mode", orc_mode)
        ->check(CLI::IsMember({"lp", "slater", "softvi", "griddual"}))
        ->capture_default_str();
    orc->add_option("--tau", orc_tau, "Entropy coefficient (softvi, griddual)")->capture_default_str();
    orc->add_option("--tol", orc_tol)->capture_default_str();
    orc->add_option("--lambda", orc_lambda, "Multipliers to combine rewards (softvi)")->delimiter(',');
    orc->add_option("--reward-index", orc_index)->capture_default_str();
    orc->add_option("--resolution", orc_res, "Grid step (griddual; default B/50)");
    orc->add_option("--refine", orc_refine)->capture_default_str();
    orc->add_option("-o,--output", orc_out);

    // npg
    auto* np = app.add_subcommand("npg", "Entropy-regularized natural policy gradient");
    std::string np_instance, np_out;
    double np_tau = 0.1, np_delta = 1e-6;
    std::vector<double> np_lambda;
    std::size_t np_index = 0;
    bool np_history = false;
    np->add_option("--instance", np_instance)->required();
    np->add_option("--tau", np_tau)->capture_default_str();
    np->add_option("--delta", np_delta)->capture_default_str();
    auto* np_l = np->add_option("--lambda", np_lambda, "Solve r0 + sum lambda_i r_i")->delimiter(',');
    np->add_option("--reward-index", np_index)->excludes(np_l)->capture_default_str();
    np->add_flag("--history", np_history, "Report distance to the soft optimum per iteration");
    np->add_option("-o,--output", np_out);

    // cutplane
    auto* cp = app.add_subcommand("cutplane", "Vaidya's method on ||x - x0||^2 over [-1,1]^m");
    Eigen::Index cp_dim = 2;
    std::uint64_t cp_seed = 0;
    VaidyaParams cp_params;
    double cp_noise = 0.0;
    cp->add_option("--dim", cp_dim)->capture_default_str();
    cp->add_option("--seed", cp_seed, "Seed for x0")->capture_default_str();
    cp->add_option("--eta", cp_params.eta)->capture_default_str();
    cp->add_option("--zeta", cp_params.zeta)->capture_default_str();
    cp->add_option("--t-max", cp_params.t_max)->capture_default_str();
    cp->add_option("--noise", cp_noise, "Alternating additive oracle perturbation")->capture_default_str();
    cp->add_flag("--unsafe-params", cp_params.allow_unsafe);

    // bench
    auto* bn = app.add_subcommand("bench", "Config-driven batch of solves");
    std::string bn_config, bn_dir;
    int bn_threads = 0;
    bn->add_option("--config", bn_config, "Bench config JSON")->required();
    bn->add_option("--output-dir", bn_dir, "Override output_dir");
    bn->add_option("--threads", bn_threads, "Override threads");

    // check
    auto* ck = app.add_subcommand("check", "Run the verification suites");
    std::vector<int> ck_only;
    bool ck_verbose = false;
    ck->add_option("--criteria", ck_only, "Subset to run, e.g. 1,3")->delimiter(',');
    ck->add_flag("-v,--verbose", ck_verbose, "Print detail lines");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            emit(cmdp_to_json(generate_instance(spec)), gen_out);
            return 0;
        }
        if (*sv)
            return run_solve(so);
        if (*orc) {
            const TabularCmdp cmdp = load_cmdp(orc_instance);
            json j;
            j["mode"] = orc_mode;
            if (orc_mode == "lp") {
                const LpSolution lp = lp_solve_cmdp(cmdp);
                j["status"] = lp::to_string(lp.status);
                if (lp.status == lp::Status::Optimal) {
                    j["optimal_value"] = lp.optimal_value;
                    j["occupancy"] = to_json(lp.occupancy);
                    j["policy"] = policy_json(lp.policy);
                }
            } else if (orc_mode == "slater") {
                const SlaterResult s = slater_solve(cmdp);
                j["margin"] = s.margin;
                j["policy"] = policy_json(s.policy);
            } else if (orc_mode == "softvi") {
                const auto opt = soft_value_iteration(cmdp, pick_reward(cmdp, orc_lambda, orc_index),
                                                      orc_tau, orc_tol);
                j["values"] = to_json(opt.values);
                j["policy"] = policy_json(opt.policy);
                j["iterations"] = opt.iterations;
            } else {
                const double b = compute_b_lambda(cmdp, slater_margin(cmdp));
                const DualMinimum d =
                    grid_dual_min(cmdp, orc_tau, b, orc_res > 0 ? orc_res : b / 50, orc_refine, orc_tol);
                j["b_lambda"] = b;
                j["lambda"] = to_json(d.lambda);
                j["value"] = d.value;
                j["evaluations"] = d.evaluations;
            }
            emit(j, orc_out);
            return 0;
        }
        if (*np) {
            const TabularCmdp cmdp = load_cmdp(np_instance);
            const RewardTable r = pick_reward(cmdp, np_lambda, np_index);
            json hist = json::array();
            Matrix ref_logits;
            if (np_history)
                ref_logits = soft_value_iteration(cmdp, r, np_tau, 1e-12).policy.logits();
            const NpgResult res = run_npg(cmdp, r, np_tau, np_delta, [&](int t, const Policy& pi) {
                if (np_history)
                    hist.push_back({{"t", t},
                                    {"log_policy_error", (ref_logits - pi.logits()).cwiseAbs().maxCoeff()}});
            });
            const ValueReport rep = evaluate(cmdp, res.policy, r, np_tau);
            json j;
            j["policy"] = policy_json(res.policy);
            j["iterations"] = res.iterations_used;
            j["policy_gap_bound"] = res.policy_gap_bound;
            j["value_gap_bound"] = res.value_gap_bound;
            j["reward_scale"] = res.reward_scale;
            j["c1_bound"] = res.c1_bound;
            j["soft_value"] = rep.scalar_value;
            if (np_history)
                j["history"] = std::move(hist);
            emit(j, np_out);
            return 0;
        }
        if (*cp) {
            std::mt19937_64 rng(cp_seed);
            Vector x0(cp_dim);
            for (Eigen::Index i = 0; i < cp_dim; ++i)
                x0[i] = 1.6 * cpcmdp::detail::uniform01(rng) - 0.8;
            int calls = 0;
            auto oracle = [&](const Vector& x) {
                const double sign = calls++ % 2 ? -1.0 : 1.0;
                CutResponse c;
                c.vector = -(2.0 * (x - x0) +
                             sign * cp_noise * Vector::Ones(cp_dim) / std::sqrt(double(cp_dim)));
                c.value_estimate = (x - x0).squaredNorm() + sign * cp_noise;
                return c;
            };
            const VaidyaResult res = vaidya_run(oracle, verify::detail::unit_box(cp_dim), cp_params);
            std::cout << "t,action,k,sigma_min,error\n";
            for (const VaidyaStep& s : res.steps)
                std::cout << s.t << ',' << to_string(s.action) << ',' << s.k << ','
                          << cpcmdp::detail::fmt_double(s.sigma_min) << ',' << cpcmdp::detail::fmt_double((s.lambda - x0).squaredNorm())
                          << '\n';
            return 0;
        }
        if (*bn) {
            std::ifstream in(bn_config);
            if (!in)
                throw ModelError("cannot read " + bn_config);
            json j = json::parse(in);
            if (!bn_dir.empty())
                j["output_dir"] = bn_dir;
            if (bn_threads > 0)
                j["threads"] = bn_threads;
            const BenchConfig cfg = bench_config_from_json(j);
            const json summary = run_benchmark(cfg);
            std::size_t errors = 0;
            for (const auto& run : summary["runs"])
                errors += run["status"] != "ok";
            std::cerr << summary["runs"].size() << " runs, " << errors << " errors, written to "
                      << cfg.output_dir << '\n';
            return 0;
        }
        if (*ck) {
            int failed = 0;
            verify::run_all(ck_only, [&](const verify::CheckResult& r) {
                const bool counted = r.criterion > 0;
                failed += counted && !r.passed;
                std::printf("%-5s %2d  %-44s %s\n",
                            counted ? (r.passed ? "PASS" : "FAIL") : "info",
                            std::abs(r.criterion), r.name.c_str(), r.summary.c_str());
                if (ck_verbose)
                    for (const auto& d : r.details)
                        std::printf("            %s\n", d.c_str());
                std::fflush(stdout);
            });
            return failed == 0 ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
