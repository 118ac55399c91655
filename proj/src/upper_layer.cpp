#include "pdenmpc/upper_layer.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

namespace pdenmpc {

void UpperMethod::validate() const {
    if (!(omega > 0.0)) throw InvalidArgument("SOR relaxation omega must be positive");
}

std::string to_string(MethodKind kind) {
    switch (kind) {
        case MethodKind::Jacobi: return "jacobi";
        case MethodKind::FGS: return "fgs";
        case MethodKind::BGS: return "bgs";
        case MethodKind::SOR: return "sor";
        case MethodKind::SGS: return "sgs";
    }
    return "?";
}

MethodKind method_from_string(const std::string& name) {
    for (MethodKind k : {MethodKind::Jacobi, MethodKind::FGS, MethodKind::BGS, MethodKind::SOR,
                         MethodKind::SGS})
        if (to_string(k) == name) return k;
    throw InvalidArgument("unknown method '" + name + "'");
}

std::string to_string(Termination t) {
    switch (t) {
        case Termination::Converged: return "converged";
        case Termination::MaxIters: return "max_iters";
        case Termination::DomainError: return "domain_error";
    }
    return "?";
}

double SolveReport::mean_iteration_time_s() const {
    if (iteration_times_s.empty()) return 0.0;
    double s = 0.0;
    for (double t : iteration_times_s) s += t;
    return s / static_cast<double>(iteration_times_s.size());
}

double SolveReport::min_step_size() const {
    if (step_sizes.empty()) return 1.0;
    return *std::min_element(step_sizes.begin(), step_sizes.end());
}

int threads_from_env() {
    const char* env = std::getenv("PDENMPC_THREADS");
    if (!env || !*env) return 0;
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 0) return 0;
    return static_cast<int>(std::min<long>(v, 256));
}

// ---------------------------------------------------------------------------
// Fraction to the boundary
// ---------------------------------------------------------------------------

namespace {

struct BoundaryState {
    std::size_t n, nx, nu, m, d;
    Vec g0, trial_x, trial_u, g;
};

bool boundary_ok(const OcpProblem& prob, const Trajectory& S, VecView dS, double alpha,
                 BoundaryState& st) {
    const Constraint& con = *prob.constraint();
    for (std::size_t i = 0; i < st.n; ++i) {
        const auto x = S.x(i);
        const auto u = S.u(i);
        const double* dx = dS.data() + i * st.d;
        const double* du = dx + st.nx;
        for (std::size_t k = 0; k < st.nx; ++k) st.trial_x[k] = x[k] - alpha * dx[k];
        for (std::size_t k = 0; k < st.nu; ++k) st.trial_u[k] = u[k] - alpha * du[k];
        con.evaluate(i, st.trial_u, st.trial_x, st.g);
        for (std::size_t j = 0; j < st.m; ++j)
            if (!(st.g[j] >= kBoundaryFraction * st.g0[i * st.m + j])) return false;
    }
    return true;
}

}  // namespace

double fraction_to_boundary(const OcpProblem& prob, const Trajectory& S, VecView dS) {
    const Constraint* con = prob.constraint();
    if (!con || con->size() == 0) return 1.0;
    BoundaryState st{S.n_stages(), S.n_x(), S.n_u(), con->size(), S.stage_dim(), {}, {}, {}, {}};
    st.g0.resize(st.n * st.m);
    st.trial_x.resize(st.nx);
    st.trial_u.resize(st.nu);
    st.g.resize(st.m);
    for (std::size_t i = 0; i < st.n; ++i)
        con->evaluate(i, S.u(i), S.x(i), VecSpan(st.g0).subspan(i * st.m, st.m));

    double alpha = 1.0;
    if (con->affine()) {
        // G(S - a dS) = G(S) - a dG, so the cap is 0.995 G / dG over dG > 0.
        Vec dg(st.m);
        for (std::size_t i = 0; i < st.n; ++i) {
            const auto ds = dS.subspan(i * st.d, st.d);
            con->jacobian_apply(i, S.u(i), S.x(i), ds.subspan(0, st.nx), ds.subspan(st.nx, st.nu),
                                dg);
            for (std::size_t j = 0; j < st.m; ++j) {
                if (dg[j] > 0.0)
                    alpha = std::min(alpha, (1.0 - kBoundaryFraction) * st.g0[i * st.m + j] / dg[j]);
            }
        }
        if (alpha < 1.0) alpha *= 1.0 - 1e-14;
        // Guard against rounding in the update itself.
        for (int k = 0; k < 60 && !boundary_ok(prob, S, dS, alpha, st); ++k) alpha *= 1.0 - 1e-13;
        if (boundary_ok(prob, S, dS, alpha, st)) return alpha;
    }
    for (int k = 0; k < 2000; ++k) {
        if (boundary_ok(prob, S, dS, alpha, st)) return alpha;
        alpha *= 0.9;
    }
    return alpha;
}

// ---------------------------------------------------------------------------
// Generic driver
// ---------------------------------------------------------------------------

SolveReport iterate_kkt(KktEvaluator& kkt, Trajectory& S, const DirectionFn& direction,
                        const IterationOptions& opts) {
    using clock = std::chrono::steady_clock;
    const OcpProblem& prob = kkt.problem();
    const std::size_t n = prob.n_stages();
    const std::size_t m = prob.n_constraints();
    const Constraint* con = prob.constraint();
    SolveReport rep;
    Vec dS(n * prob.stage_dim(), 0.0);
    Vec g_old(n * m), g_new(m);
    double r0 = -1.0;

    for (;;) {
        const auto t0 = clock::now();
        double r = 0.0;
        try {
            r = kkt.evaluate(S, opts.threads);
        } catch (const DomainError& e) {
            rep.termination = Termination::DomainError;
            rep.message = e.what();
            break;
        }
        rep.residual_history.push_back(r);
        rep.final_residual = r;
        if (r0 < 0.0) r0 = r;
        if (r < opts.tol) {
            rep.termination = Termination::Converged;
            break;
        }
        if (!std::isfinite(r) || r > opts.divergence_factor * std::max(r0, 1e-300)) {
            rep.termination = Termination::MaxIters;
            rep.diverged = true;
            rep.message = "residual grew beyond the divergence guard";
            break;
        }
        if (rep.iterations >= opts.max_iters) {
            rep.termination = Termination::MaxIters;
            break;
        }
        direction(kkt, dS);
        const double alpha = fraction_to_boundary(prob, S, dS);
        if (con)
            for (std::size_t i = 0; i < n; ++i) {
                const auto g = kkt.block(i).constraint_values();
                std::copy(g.begin(), g.end(), g_old.begin() + static_cast<std::ptrdiff_t>(i * m));
            }
        auto data = S.data();
        for (std::size_t k = 0; k < data.size(); ++k) data[k] -= alpha * dS[k];
        const auto t1 = clock::now();
        rep.iteration_times_s.push_back(std::chrono::duration<double>(t1 - t0).count());
        rep.step_sizes.push_back(alpha);
        ++rep.iterations;

        if (con) {
            for (std::size_t i = 0; i < n; ++i) {
                con->evaluate(i, S.u(i), S.x(i), g_new);
                for (std::size_t j = 0; j < m; ++j) {
                    const double ratio = g_new[j] / g_old[i * m + j];
                    rep.min_boundary_ratio = std::min(rep.min_boundary_ratio, ratio);
                    if (!(g_new[j] >= kBoundaryFraction * g_old[i * m + j])) ++rep.boundary_violations;
                }
            }
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Splitting methods
// ---------------------------------------------------------------------------

UpperLayerSolver::UpperLayerSolver(OcpProblem& prob, UpperMethod method, StageSolveConfig lower,
                                   int threads)
    : prob_(&prob), method_(method), lower_(lower), threads_(threads), kkt_(prob) {
    method_.validate();
    lower_.validate();
    solvers_.reserve(prob.n_stages());
    for (std::size_t i = 0; i < prob.n_stages(); ++i) solvers_.emplace_back(prob, lower_);
    const std::size_t total = prob.n_stages() * prob.stage_dim();
    rhs_.assign(total, 0.0);
    y_.assign(total, 0.0);
    dS_.assign(total, 0.0);
}

namespace {

template <typename Fn>
void for_stages(std::size_t n, int threads, Fn&& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t t = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    std::vector<std::exception_ptr> errors(t);
    std::vector<std::thread> pool;
    pool.reserve(t);
    for (std::size_t w = 0; w < t; ++w)
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += t) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace

void UpperLayerSolver::factor_all(const KktEvaluator& kkt) {
    for_stages(solvers_.size(), threads_, [&](std::size_t i) {
        try {
            solvers_[i].factor(kkt.block(i));
        } catch (const SingularError& e) {
            throw SingularError("stage " + std::to_string(i + 1) + ": " + e.what(), i);
        }
    });
}

void UpperLayerSolver::sweep_forward(const KktEvaluator& kkt, VecView coupled, double omega,
                                     VecSpan z) {
    const std::size_t n = solvers_.size();
    const std::size_t d = prob_->stage_dim(), nx = prob_->n_x(), nu = prob_->n_u();
    for (std::size_t i = 0; i < n; ++i) {
        auto r = VecSpan(rhs_).subspan(i * d, d);
        const auto k = kkt.stage_residual(i);
        std::copy(k.begin(), k.end(), r.begin());
        if (!coupled.empty() && i + 1 < n) {
            const double* lam = coupled.data() + (i + 1) * d + nx + nu;
            for (std::size_t q = 0; q < nx; ++q) r[nx + nu + q] -= lam[q];
        }
        if (i > 0) {
            const double* xp = z.data() + (i - 1) * d;
            for (std::size_t q = 0; q < nx; ++q) r[q] -= omega * xp[q];
        }
        solvers_[i].solve(r, z.subspan(i * d, d));
    }
}

void UpperLayerSolver::sweep_backward(const KktEvaluator& kkt, VecSpan z) {
    const std::size_t n = solvers_.size();
    const std::size_t d = prob_->stage_dim(), nx = prob_->n_x(), nu = prob_->n_u();
    for (std::size_t i = n; i-- > 0;) {
        auto r = VecSpan(rhs_).subspan(i * d, d);
        const auto k = kkt.stage_residual(i);
        std::copy(k.begin(), k.end(), r.begin());
        if (i + 1 < n) {
            const double* lam = z.data() + (i + 1) * d + nx + nu;
            for (std::size_t q = 0; q < nx; ++q) r[nx + nu + q] -= lam[q];
        }
        solvers_[i].solve(r, z.subspan(i * d, d));
    }
}

void UpperLayerSolver::direction(const KktEvaluator& kkt, VecSpan dS) {
    factor_all(kkt);
    const std::size_t n = solvers_.size();
    const std::size_t d = prob_->stage_dim();
    switch (method_.kind) {
        case MethodKind::Jacobi:
            for_stages(n, threads_, [&](std::size_t i) {
                solvers_[i].solve(kkt.stage_residual(i), dS.subspan(i * d, d));
            });
            break;
        case MethodKind::FGS:
            sweep_forward(kkt, {}, 1.0, dS);
            break;
        case MethodKind::BGS:
            sweep_backward(kkt, dS);
            break;
        case MethodKind::SOR:
            sweep_forward(kkt, {}, method_.omega, dS);
            for (double& v : dS) v *= method_.omega;
            break;
        case MethodKind::SGS:
            sweep_backward(kkt, y_);
            sweep_forward(kkt, y_, 1.0, dS);
            break;
    }
}

StepResult UpperLayerSolver::step(Trajectory& S) {
    StepResult res;
    res.residual = kkt_.evaluate(S, threads_);
    direction(kkt_, dS_);
    res.alpha = fraction_to_boundary(*prob_, S, dS_);
    auto data = S.data();
    for (std::size_t k = 0; k < data.size(); ++k) data[k] -= res.alpha * dS_[k];
    return res;
}

SolveReport UpperLayerSolver::solve(Trajectory& S, double tol, int max_iters) {
    IterationOptions opts;
    opts.tol = tol;
    opts.max_iters = max_iters;
    opts.threads = threads_;
    return iterate_kkt(
        kkt_, S, [this](const KktEvaluator& kkt, VecSpan dS) { direction(kkt, dS); }, opts);
}

}  // namespace pdenmpc
