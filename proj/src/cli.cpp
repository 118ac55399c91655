#include "pdenmpc/cli.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

namespace pdenmpc::cli {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

void require_object(const json& j, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
}

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    require_object(obj, where);
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!ok.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

std::string path_of(const std::string& where, const std::string& key) {
    return where.empty() ? key : where + "." + key;
}

void get_number(const json& obj, const std::string& where, const char* key, double& out) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    if (!v.is_number()) throw ConfigError(path_of(where, key) + " must be a number");
    out = v.get<double>();
}

void get_int(const json& obj, const std::string& where, const char* key, int& out) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    if (!v.is_number_integer()) throw ConfigError(path_of(where, key) + " must be an integer");
    const auto x = v.get<long long>();
    if (x < -1000000000LL || x > 1000000000LL)
        throw ConfigError(path_of(where, key) + " is out of range");
    out = static_cast<int>(x);
}

void get_bool(const json& obj, const std::string& where, const char* key, bool& out) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    if (!v.is_boolean()) throw ConfigError(path_of(where, key) + " must be true or false");
    out = v.get<bool>();
}

void get_string(const json& obj, const std::string& where, const char* key, std::string& out) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    if (!v.is_string()) throw ConfigError(path_of(where, key) + " must be a string");
    out = v.get<std::string>();
}

template <class T>
void get_array(const json& obj, const std::string& where, const char* key, std::vector<T>& out) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    if (!v.is_array()) throw ConfigError(path_of(where, key) + " must be an array");
    out.clear();
    for (const json& e : v) {
        if constexpr (std::is_integral_v<T>) {
            if (!e.is_number_integer())
                throw ConfigError(path_of(where, key) + " must contain integers");
        } else if (!e.is_number()) {
            throw ConfigError(path_of(where, key) + " must contain numbers");
        }
        out.push_back(e.get<T>());
    }
}

void parse_plant(const json& j, RunConfig& c) {
    const std::string w = "plant";
    check_keys(j, w, {"grid", "side", "actuators", "params"});
    get_int(j, w, "grid", c.bench.grid_points);
    get_number(j, w, "side", c.bench.side);
    if (c.bench.grid_points < 3) throw ConfigError("plant.grid must be at least 3");
    c.bench.actuator_axis_indices = default_actuator_indices(c.bench.grid_points);
    get_array(j, w, "actuators", c.bench.actuator_axis_indices);
    if (j.contains("params")) {
        const json& p = j.at("params");
        const std::string wp = "plant.params";
        check_keys(p, wp, {"rho", "cp", "tz", "k", "hc", "ta", "emissivity", "stefan_boltzmann",
                           "u_min", "u_max"});
        auto& q = c.params;
        get_number(p, wp, "rho", q.rho);
        get_number(p, wp, "cp", q.cp);
        get_number(p, wp, "tz", q.tz);
        get_number(p, wp, "k", q.k);
        get_number(p, wp, "hc", q.hc);
        get_number(p, wp, "ta", q.ta);
        get_number(p, wp, "emissivity", q.emissivity);
        get_number(p, wp, "stefan_boltzmann", q.stefan_boltzmann);
        get_number(p, wp, "u_min", q.u_min);
        get_number(p, wp, "u_max", q.u_max);
    }
}

void parse_nmpc(const json& j, RunConfig& c) {
    const std::string w = "nmpc";
    check_keys(j, w, {"T", "N", "tau", "gamma", "reg_mode", "tol", "max_iters", "method", "omega",
                      "lower", "controller", "threads", "timing_repeats", "q_weight", "r_weight"});
    get_number(j, w, "T", c.bench.horizon);
    get_int(j, w, "N", c.bench.n_stages);
    get_number(j, w, "tau", c.bench.tau);
    get_number(j, w, "gamma", c.bench.gamma);
    get_number(j, w, "q_weight", c.bench.q_weight);
    get_number(j, w, "r_weight", c.bench.r_weight);
    std::string reg = "current_iterate";
    get_string(j, w, "reg_mode", reg);
    if (reg == "current_iterate")
        c.bench.reg_mode = RegMode::CurrentIterate;
    else if (reg == "fixed")
        c.bench.reg_mode = RegMode::Fixed;
    else
        throw ConfigError("nmpc.reg_mode must be 'current_iterate' or 'fixed'");

    auto& ctl = c.controller;
    get_number(j, w, "tol", ctl.tol);
    get_int(j, w, "max_iters", ctl.max_iters);
    std::string method = to_string(ctl.method.kind);
    get_string(j, w, "method", method);
    try {
        ctl.method.kind = method_from_string(method);
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("nmpc.method: ") + e.what());
    }
    get_number(j, w, "omega", ctl.method.omega);
    std::string controller = "double_layer";
    get_string(j, w, "controller", controller);
    if (controller == "double_layer")
        ctl.kind = ControllerKind::DoubleLayer;
    else if (controller == "newton")
        ctl.kind = ControllerKind::Newton;
    else
        throw ConfigError("nmpc.controller must be 'double_layer' or 'newton'");
    get_int(j, w, "threads", ctl.threads);
    get_int(j, w, "timing_repeats", ctl.timing_repeats);

    if (j.contains("lower")) {
        const json& l = j.at("lower");
        const std::string wl = "nmpc.lower";
        check_keys(l, wl, {"schur_iters", "inner_jacobi_iters", "mode"});
        get_int(l, wl, "schur_iters", ctl.lower.schur_iters);
        get_int(l, wl, "inner_jacobi_iters", ctl.lower.inner_jacobi_iters);
        std::string mode = "iterative";
        get_string(l, wl, "mode", mode);
        if (mode == "iterative")
            ctl.lower.mode = StageSolveMode::Iterative;
        else if (mode == "exact")
            ctl.lower.mode = StageSolveMode::Exact;
        else
            throw ConfigError("nmpc.lower.mode must be 'iterative' or 'exact'");
    }
}

void parse_sim(const json& j, RunConfig& c) {
    const std::string w = "sim";
    check_keys(j, w, {"duration_s", "sampling_period_s", "plant_substep_s", "references"});
    get_number(j, w, "duration_s", c.bench.duration);
    get_number(j, w, "sampling_period_s", c.bench.sampling_period);
    get_number(j, w, "plant_substep_s", c.bench.plant_substep);
    if (j.contains("references")) {
        const json& r = j.at("references");
        const std::string wr = "sim.references";
        check_keys(r, wr, {"slope_low", "slope_high", "v_edge", "v_mid", "switch_time_s",
                           "fade_time_s"});
        auto& ref = c.bench.reference;
        get_number(r, wr, "slope_low", ref.slope_low);
        get_number(r, wr, "slope_high", ref.slope_high);
        get_number(r, wr, "v_edge", ref.v_edge);
        get_number(r, wr, "v_mid", ref.v_mid);
        get_number(r, wr, "switch_time_s", ref.switch_time);
        get_number(r, wr, "fade_time_s", ref.fade_time);
    }
}

void parse_analysis(const json& j, RunConfig& c) {
    const std::string w = "analysis";
    check_keys(j, w, {"convergence_factor", "lemma_checks", "horizon_sweep", "gammas",
                      "sample_every", "arnoldi_iters", "arnoldi_seeds", "solution_controller",
                      "lemma_instances"});
    auto& a = c.analysis;
    get_bool(j, w, "convergence_factor", a.convergence_factor);
    get_bool(j, w, "lemma_checks", a.lemma_checks);
    get_array(j, w, "horizon_sweep", a.horizon_sweep);
    get_array(j, w, "gammas", a.gammas);
    get_int(j, w, "sample_every", a.sample_every);
    get_int(j, w, "arnoldi_iters", a.arnoldi_iters);
    get_int(j, w, "arnoldi_seeds", a.arnoldi_seeds);
    get_string(j, w, "solution_controller", a.solution_controller);
    get_int(j, w, "lemma_instances", a.lemma_instances);
}

void parse_output(const json& j, RunConfig& c) {
    const std::string w = "output";
    check_keys(j, w, {"directory", "field_snapshots", "state_csv"});
    get_string(j, w, "directory", c.output.directory);
    get_bool(j, w, "field_snapshots", c.output.field_snapshots);
    get_bool(j, w, "state_csv", c.output.state_csv);
}

void parse_compare(const json& j, RunConfig& c) {
    const std::string w = "compare";
    check_keys(j, w, {"timing_repeats", "grid_sweep", "sweep_iters"});
    get_int(j, w, "timing_repeats", c.compare.timing_repeats);
    get_array(j, w, "grid_sweep", c.compare.grid_sweep);
    get_int(j, w, "sweep_iters", c.compare.sweep_iters);
}

void validate(const RunConfig& c) {
    try {
        c.params.validate();
        c.bench.validate();
        c.controller.method.validate();
        c.controller.lower.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
    const auto& ctl = c.controller;
    if (!(ctl.tol >= 0.0)) throw ConfigError("nmpc.tol must be nonnegative");
    if (ctl.max_iters < 1) throw ConfigError("nmpc.max_iters must be positive");
    if (ctl.threads < 0) throw ConfigError("nmpc.threads must be nonnegative");
    if (ctl.timing_repeats < 1) throw ConfigError("nmpc.timing_repeats must be positive");
    const auto& a = c.analysis;
    for (double t : a.horizon_sweep)
        if (!(t > 0.0)) throw ConfigError("analysis.horizon_sweep values must be positive");
    for (double g : a.gammas)
        if (!(g >= 0.0)) throw ConfigError("analysis.gammas must be nonnegative");
    if (a.sample_every < 1) throw ConfigError("analysis.sample_every must be positive");
    if (a.arnoldi_iters < 1 || a.arnoldi_seeds < 1)
        throw ConfigError("analysis Arnoldi settings must be positive");
    if (a.lemma_instances < 1) throw ConfigError("analysis.lemma_instances must be positive");
    if (a.solution_controller != "newton") {
        try {
            method_from_string(a.solution_controller);
        } catch (const InvalidArgument&) {
            throw ConfigError("analysis.solution_controller must be 'newton' or a method name");
        }
    }
    if (c.output.directory.empty()) throw ConfigError("output.directory must not be empty");
    if (c.compare.timing_repeats < 1) throw ConfigError("compare.timing_repeats must be positive");
    if (c.compare.sweep_iters < 1) throw ConfigError("compare.sweep_iters must be positive");
    for (int g : c.compare.grid_sweep)
        if (g < 5) throw ConfigError("compare.grid_sweep sizes must be at least 5");
}

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream f(p);
    if (!f) throw ConfigError("cannot write " + p.string());
    return f;
}

void prepare_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create " + dir.string() + ": " + ec.message());
}

HeatBench make_bench(const RunConfig& cfg) { return build_bench(cfg.params, cfg.bench); }

std::size_t count_unconverged(const ClosedLoopLog& log) {
    std::size_t n = 0;
    for (const auto& s : log.steps) n += s.converged ? 0 : 1;
    return n;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("malformed JSON: ") + e.what());
    }
    RunConfig c;
    c.controller.threads = threads_from_env();
    check_keys(j, "config", {"plant", "nmpc", "sim", "analysis", "output", "compare", "seed"});
    c.bench.actuator_axis_indices = default_actuator_indices(c.bench.grid_points);
    if (j.contains("plant")) parse_plant(j.at("plant"), c);
    if (j.contains("nmpc")) parse_nmpc(j.at("nmpc"), c);
    if (j.contains("sim")) parse_sim(j.at("sim"), c);
    if (j.contains("analysis")) parse_analysis(j.at("analysis"), c);
    if (j.contains("output")) parse_output(j.at("output"), c);
    if (j.contains("compare")) parse_compare(j.at("compare"), c);
    if (j.contains("seed")) {
        const json& s = j.at("seed");
        if (!s.is_number_integer() || s.get<long long>() < 0 || s.get<long long>() > 0xffffffffLL)
            throw ConfigError("seed must be a nonnegative 32-bit integer");
        c.seed = static_cast<unsigned>(s.get<long long>());
    }
    validate(c);
    return c;
}

RunConfig load_config(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read config " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

int cmd_run_bench(const RunConfig& cfg, std::ostream& log) {
    HeatBench bench = make_bench(cfg);
    const fs::path dir = cfg.output.directory;
    prepare_dir(dir);
    if (cfg.output.field_snapshots) prepare_dir(dir / "fields");

    const ClosedLoopLog cl = run_closed_loop(
        bench, cfg.controller, [&](std::size_t step, double, const OcpProblem& prob, const Trajectory& S) {
            if (!cfg.output.field_snapshots) return;
            char name[64];
            std::snprintf(name, sizeof name, "field_%04zu.csv", step);
            auto f = open_out(dir / "fields" / name);
            write_field_snapshot(bench, prob.initial_state(), S.u(0), f);
        });

    {
        auto f = open_out(dir / "closed_loop.csv");
        write_closed_loop_csv(cl, bench.sys->n_u(), f);
    }
    if (cfg.output.state_csv) {
        auto f = open_out(dir / "states.csv");
        write_state_csv(cl, bench.config.sampling_period, f);
    }

    const std::size_t n = cl.steps.size();
    double iters = 0.0, solve = 0.0, kmax = 0.0;
    for (const auto& s : cl.steps) {
        iters += s.iters;
        solve += s.solve_time_ms;
        kmax = std::max(kmax, s.kkt_inf_norm);
    }
    const std::size_t bad = count_unconverged(cl);
    json summary = {{"total_steps", n},
                    {"mean_iters", n ? iters / static_cast<double>(n) : 0.0},
                    {"mean_solve_ms", n ? solve / static_cast<double>(n) : 0.0},
                    {"max_kkt_residual", kmax},
                    {"diverged_steps", bad}};
    {
        auto f = open_out(dir / "summary.json");
        f << summary.dump(2) << '\n';
    }
    log << "run-bench: " << n << " steps, mean iterations " << num(n ? iters / n : 0.0)
        << ", max KKT residual " << num(kmax) << '\n';
    if (cl.aborted || bad > 0) {
        log << "run-bench: " << (cl.message.empty() ? "some steps did not converge" : cl.message)
            << '\n';
        return kDivergence;
    }
    return kOk;
}

int cmd_compare(const RunConfig& cfg, std::ostream& log) {
    ControllerSpec dl = cfg.controller;
    dl.kind = ControllerKind::DoubleLayer;
    dl.timing_repeats = cfg.compare.timing_repeats;
    ControllerSpec nw = dl;
    nw.kind = ControllerKind::Newton;

    const fs::path dir = cfg.output.directory;
    prepare_dir(dir);

    HeatBench b1 = make_bench(cfg);
    HeatBench b2 = make_bench(cfg);
    const ClosedLoopLog l1 = run_closed_loop(b1, dl);
    const ClosedLoopLog l2 = run_closed_loop(b2, nw);

    const std::size_t n = std::min(l1.steps.size(), l2.steps.size());
    double t1 = 0.0, t2 = 0.0, dev_x = 0.0, dev_u = 0.0;
    {
        auto f = open_out(dir / "compare.csv");
        f << "step,t_s,dl_iters,dl_solve_time_ms,dl_mean_iter_time_ms,newton_iters,"
             "newton_solve_time_ms,newton_mean_iter_time_ms,max_state_dev_K,max_input_dev_K,"
             "iter_time_ratio\n";
        for (std::size_t k = 0; k < n; ++k) {
            const auto& a = l1.steps[k];
            const auto& b = l2.steps[k];
            double dx = 0.0, du = 0.0;
            for (std::size_t j = 0; j < l1.states[k].size(); ++j)
                dx = std::max(dx, std::abs(l1.states[k][j] - l2.states[k][j]));
            for (std::size_t m = 0; m < a.u.size(); ++m) du = std::max(du, std::abs(a.u[m] - b.u[m]));
            dev_x = std::max(dev_x, dx);
            dev_u = std::max(dev_u, du);
            t1 += a.mean_iter_time_ms;
            t2 += b.mean_iter_time_ms;
            const double ratio = a.mean_iter_time_ms > 0.0 ? b.mean_iter_time_ms / a.mean_iter_time_ms : 0.0;
            f << a.step << ',' << num(a.t) << ',' << a.iters << ',' << num(a.solve_time_ms) << ','
              << num(a.mean_iter_time_ms) << ',' << b.iters << ',' << num(b.solve_time_ms) << ','
              << num(b.mean_iter_time_ms) << ',' << num(dx) << ',' << num(du) << ',' << num(ratio)
              << '\n';
        }
    }
    const double ratio = t1 > 0.0 ? t2 / t1 : 0.0;
    json summary = {{"steps", n},
                    {"double_layer_mean_iter_ms", n ? t1 / n : 0.0},
                    {"newton_mean_iter_ms", n ? t2 / n : 0.0},
                    {"iter_time_ratio", ratio},
                    {"max_state_dev_K", dev_x},
                    {"max_input_dev_K", dev_u},
                    {"double_layer_aborted", l1.aborted},
                    {"newton_aborted", l2.aborted}};

    if (!cfg.compare.grid_sweep.empty()) {
        auto f = open_out(dir / "scaling.csv");
        f << "grid_points,n_x,n_u,dl_mean_iter_time_ms,newton_mean_iter_time_ms\n";
        for (int g : cfg.compare.grid_sweep) {
            RunConfig c = cfg;
            c.bench.grid_points = g;
            c.bench.actuator_axis_indices = default_actuator_indices(g);
            HeatBench b = make_bench(c);
            const double td = measure_iteration_time(b, dl, cfg.compare.sweep_iters, cfg.compare.timing_repeats);
            const double tn = measure_iteration_time(b, nw, cfg.compare.sweep_iters, 1);
            f << g << ',' << b.sys->n_x() << ',' << b.sys->n_u() << ',' << num(1e3 * td) << ','
              << num(1e3 * tn) << '\n';
            log << "compare: grid " << g << " n_x " << b.sys->n_x() << " double-layer "
                << num(1e3 * td) << " ms/iter, newton " << num(1e3 * tn) << " ms/iter\n";
        }
    }
    {
        auto f = open_out(dir / "compare_summary.json");
        f << summary.dump(2) << '\n';
    }
    log << "compare: " << n << " steps, per-iteration time ratio newton/double-layer " << num(ratio)
        << ", max state deviation " << num(dev_x) << " K\n";
    if (l1.aborted || l2.aborted || count_unconverged(l1) || count_unconverged(l2)) {
        log << "compare: a controller failed: " << l1.message << ' ' << l2.message << '\n';
        return kDivergence;
    }
    return kOk;
}

int cmd_analyze(const RunConfig& cfg, std::ostream& log) {
    const auto& a = cfg.analysis;
    if (!a.any()) {
        log << "analyze: nothing requested\n";
        return kOk;
    }
    const fs::path dir = cfg.output.directory;
    prepare_dir(dir);
    int code = kOk;

    if (a.convergence_factor) {
        std::vector<FactorRow> rows;
        std::vector<double> horizons = a.horizon_sweep;
        if (horizons.empty()) horizons.push_back(cfg.bench.horizon);
        const std::string method = to_string(cfg.controller.method.kind);
        FactorOptions fo;
        fo.iters = a.arnoldi_iters;
        fo.seeds = a.arnoldi_seeds;
        fo.seed = cfg.seed;
        for (double T : horizons) {
            RunConfig c = cfg;
            c.bench.horizon = T;
            HeatBench bench = make_bench(c);
            ControllerSpec sol = cfg.controller;
            sol.timing_repeats = 1;
            if (a.solution_controller == "newton") {
                sol.kind = ControllerKind::Newton;
            } else {
                sol.kind = ControllerKind::DoubleLayer;
                sol.method = {method_from_string(a.solution_controller), 1.0};
            }
            const ClosedLoopLog cl = run_closed_loop(
                bench, sol, [&](std::size_t step, double t, const OcpProblem& prob, const Trajectory& S) {
                    if (step % static_cast<std::size_t>(a.sample_every) != 0) return;
                    for (double g : a.gammas) {
                        OcpProblem q = prob.with_gamma(g);
                        KktEvaluator kkt(q);
                        kkt.evaluate(S);
                        const FactorEstimate est =
                            convergence_factor(IterationMatrixOperator(kkt, cfg.controller.method), fo);
                        rows.push_back({t, method, g, T, est.rho, est.oracle_rho});
                    }
                });
            log << "analyze: T = " << num(T) << ", " << cl.steps.size() << " instants\n";
            if (cl.aborted) {
                log << "analyze: " << cl.message << '\n';
                code = kDivergence;
            }
        }
        auto f = open_out(dir / "factor.csv");
        write_factor_csv(rows, f);
    }

    if (a.lemma_checks) {
        auto f = open_out(dir / "lemma.csv");
        f << "instance,n_stages,unknowns,nilpotent_N_applications,nilpotent_2N_minus_1,rho_jacobi,"
             "rho_fgs,rho_bgs,fgs_gap,bgs_gap\n";
        std::mt19937_64 rng(cfg.seed);
        double worst = 0.0;
        for (int k = 0; k < a.lemma_instances; ++k) {
            const int n = 2 + k % 5;
            HeatBench b = small_heat_bench(cfg.params, 5, {1, 3}, n, 5.0 * n, 0.5);
            const Trajectory S = random_interior_point(b, rng);
            KktEvaluator kkt(*b.prob);
            kkt.evaluate(S);
            const unsigned s = static_cast<unsigned>(rng());
            const double amp_n = verify_lemma_nilpotent(kkt, n, 10, s);
            const double amp = verify_lemma_nilpotent(kkt, 0, 10, s);
            const GsSquaredResult gs = verify_gs_squared(kkt);
            worst = std::max(worst, amp);
            f << k << ',' << n << ',' << S.data().size() << ',' << num(amp_n) << ',' << num(amp)
              << ',' << num(gs.rho_jacobi) << ',' << num(gs.rho_fgs) << ',' << num(gs.rho_bgs) << ','
              << num(gs.fgs_gap()) << ',' << num(gs.bgs_gap()) << '\n';
        }
        log << "analyze: lemma checks, worst 2N-1 amplification " << num(worst) << '\n';
    }
    return code;
}

int cmd_check(const RunConfig& cfg, std::ostream& log) {
    std::vector<CheckLine> lines;
    std::mt19937_64 rng(cfg.seed);

    {
        HeatBench b = small_heat_bench(cfg.params, 5, {1, 3}, 3, 15.0, 0.5);
        Vec u(b.sys->n_u(), cfg.params.ta), x(b.sys->n_x(), cfg.params.ta), f(b.sys->n_x());
        b.sys->eval_f(u, x, f);
        lines.push_back({"equilibrium_f_at_ambient", inf_norm(f), 1e-12, inf_norm(f) <= 1e-12, ""});
    }
    {
        HeatBench b = make_bench(cfg);
        double worst = 0.0;
        for (int k = 0; k < 5; ++k) {
            const Trajectory S = random_interior_point(b, rng);
            const auto rep = finite_difference_check(*b.sys, S.u(0), S.x(0), S.lambda(0),
                                                     static_cast<unsigned>(rng()));
            worst = std::max(worst, rep.max());
        }
        lines.push_back({"derivatives_vs_central_differences", worst, 1e-5, worst <= 1e-5, ""});
    }
    {
        HeatBench b = small_heat_bench(cfg.params, 5, {1, 3}, 4, 20.0, 0.5);
        const Trajectory S = random_interior_point(b, rng);
        const double gap = sor_fgs_step_gap(*b.prob, S);
        lines.push_back({"sor_omega1_equals_fgs", gap, 0.0, gap == 0.0, "bitwise"});
    }
    {
        HeatBench b = small_heat_bench(cfg.params, 5, {1, 3}, 1, 5.0, 0.5);
        const Trajectory S = random_interior_point(b, rng);
        const double gap = single_stage_newton_gap(*b.prob, S);
        lines.push_back({"single_stage_methods_equal_newton", gap, 1e-12, gap <= 1e-12, ""});
    }
    {
        double nil = 0.0, gs = 0.0;
        for (int n = 2; n <= 4; ++n) {
            HeatBench b = small_heat_bench(cfg.params, 5, {1, 3}, n, 5.0 * n, 0.5);
            const Trajectory S = random_interior_point(b, rng);
            KktEvaluator kkt(*b.prob);
            kkt.evaluate(S);
            nil = std::max(nil, verify_lemma_nilpotent(kkt, 0, 5, static_cast<unsigned>(rng())));
            const GsSquaredResult r = verify_gs_squared(kkt);
            gs = std::max({gs, r.fgs_gap(), r.bgs_gap()});
        }
        lines.push_back({"bar_jacobi_nilpotent_2N_minus_1", nil, 1e-8, nil <= 1e-8, ""});
        lines.push_back({"gauss_seidel_squared_factor", gs, 1e-8, gs <= 1e-8, ""});
    }
    {
        HeatBench b = small_heat_bench(cfg.params, 5, {1, 3}, 4, 20.0, 0.5);
        double worst = 0.0;
        for (int k = 0; k < 5; ++k) {
            const Trajectory S = random_interior_point(b, rng);
            const NewtonStep st = newton_step(*b.prob, S);
            const double ref = box_alpha_closed_form(*b.box, S, st.dS);
            worst = std::max(worst, std::abs(st.alpha - ref) / ref);
        }
        lines.push_back({"fraction_to_boundary_closed_form", worst, 1e-12, worst <= 1e-12, ""});
    }

    bool ok = true;
    for (const auto& l : lines) {
        log << format_check(l) << '\n';
        ok = ok && l.pass;
    }
    return ok ? kOk : kCheckFailed;
}

int run_command(const std::string& command, const fs::path& config_path, std::ostream& log,
                std::ostream& err) {
    RunConfig cfg;
    try {
        cfg = load_config(config_path);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    }
    try {
        if (command == "run-bench") return cmd_run_bench(cfg, log);
        if (command == "compare") return cmd_compare(cfg, log);
        if (command == "analyze") return cmd_analyze(cfg, log);
        if (command == "check") return cmd_check(cfg, log);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kConfigError;
    }
    err << "unknown command " << command << '\n';
    return kConfigError;
}

}  // namespace pdenmpc::cli
