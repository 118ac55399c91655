#pragma once

#include "pdenmpc/lower_layer.hpp"

#include <functional>
#include <string>

namespace pdenmpc {

enum class MethodKind { Jacobi, FGS, BGS, SOR, SGS };

struct UpperMethod {
    MethodKind kind = MethodKind::SGS;
    double omega = 1.0;

    void validate() const;
};

std::string to_string(MethodKind kind);
MethodKind method_from_string(const std::string& name);

enum class Termination { Converged, MaxIters, DomainError };

std::string to_string(Termination t);

struct SolveReport {
    int iterations = 0;
    Vec residual_history;   // inf-norm of the KKT residual at every evaluated iterate
    Vec step_sizes;         // alpha per accepted step
    Vec iteration_times_s;  // wall time per iteration
    Termination termination = Termination::MaxIters;
    bool diverged = false;
    double final_residual = 0.0;
    // Fraction-to-boundary instrumentation: min over all steps and components
    // of G(S^{k+1}) / G(S^k), and the number of components below 0.005.
    double min_boundary_ratio = 1.0;
    std::size_t boundary_violations = 0;
    std::string message;

    double mean_iteration_time_s() const;
    double min_step_size() const;
};

/// Largest alpha in (0, 1] such that G(S - alpha dS) >= 0.005 G(S) at every
/// stage. Exact ratio for affine G, backtracking by 0.9 otherwise.
double fraction_to_boundary(const OcpProblem& prob, const Trajectory& S, VecView dS);

inline constexpr double kBoundaryFraction = 0.005;

/// Computes the search direction dS (stacked stage layout) from the blocks and
/// residual held by `kkt`, which has been evaluated at the current iterate.
using DirectionFn = std::function<void(const KktEvaluator& kkt, VecSpan dS)>;

struct IterationOptions {
    double tol = 1.0;
    int max_iters = 100;
    int threads = 0;
    double divergence_factor = 1e4;
};

/// Generic iteration S <- S - alpha dS until the KKT inf-norm drops below tol.
/// `kkt` is re-evaluated at every iterate (this also refreshes the
/// current-iterate regularization reference).
SolveReport iterate_kkt(KktEvaluator& kkt, Trajectory& S, const DirectionFn& direction,
                        const IterationOptions& opts);

/// Result of one splitting step.
struct StepResult {
    double alpha = 1.0;
    double residual = 0.0;
};

class UpperLayerSolver {
public:
    UpperLayerSolver(OcpProblem& prob, UpperMethod method, StageSolveConfig lower = {},
                     int threads = 0);

    const UpperMethod& method() const { return method_; }

    /// One step from S (modified in place). Returns alpha and the residual at
    /// the input iterate.
    StepResult step(Trajectory& S);
    SolveReport solve(Trajectory& S, double tol, int max_iters);

    /// Direction for the current state of `kkt` (already evaluated).
    void direction(const KktEvaluator& kkt, VecSpan dS);

    const KktEvaluator& evaluator() const { return kkt_; }

private:
    void factor_all(const KktEvaluator& kkt);
    void sweep_forward(const KktEvaluator& kkt, VecView coupled, double omega, VecSpan z);
    void sweep_backward(const KktEvaluator& kkt, VecSpan z);

    OcpProblem* prob_;
    UpperMethod method_;
    StageSolveConfig lower_;
    int threads_;
    KktEvaluator kkt_;
    std::vector<StageSolver> solvers_;
    Vec rhs_, y_, dS_;
};

/// Number of worker threads requested through PDENMPC_THREADS (0 if unset).
int threads_from_env();

}  // namespace pdenmpc
