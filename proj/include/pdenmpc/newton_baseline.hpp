#pragma once

#include "pdenmpc/upper_layer.hpp"

#include <Eigen/LU>

namespace pdenmpc {

/// out = KKT * dS for the block-tridiagonal Newton matrix held by `kkt`
/// (diagonal D_i, sub-diagonal M_L, super-diagonal M_U).
void apply_kkt_matrix(const KktEvaluator& kkt, VecView dS, VecSpan out);

/// Exact Newton direction by backward block elimination
///   Dhat_N = D_N,  Dhat_i = D_i - M_U Dhat_{i+1}^-1 M_L
/// followed by forward substitution. Dense LU per stage.
class NewtonSolver {
public:
    explicit NewtonSolver(OcpProblem& prob, int threads = 0);

    void direction(const KktEvaluator& kkt, VecSpan dS);
    StepResult step(Trajectory& S);
    SolveReport solve(Trajectory& S, double tol, int max_iters);

    const KktEvaluator& evaluator() const { return kkt_; }

    /// Density of the eliminated blocks after the last direction():
    /// fraction of entries of Dhat_1 above 1e-14 relative magnitude, and the
    /// same for its (costate-row, state-column) block that elimination fills.
    double fill_in_fraction() const;
    double coupling_block_density() const;

private:
    OcpProblem* prob_;
    int threads_;
    KktEvaluator kkt_;
    std::vector<Eigen::MatrixXd> dhat_;
    std::vector<Eigen::PartialPivLU<Eigen::MatrixXd>> lu_;
    Eigen::MatrixXd coupling_;
    Eigen::VectorXd r_, tmp_;
    Vec rhat_;
};

/// One Newton direction at S (S itself is left unchanged) and its step size.
struct NewtonStep {
    Vec dS;
    double alpha = 1.0;
};
NewtonStep newton_step(OcpProblem& prob, const Trajectory& S);

SolveReport newton_solve(OcpProblem& prob, Trajectory& S, double tol, int max_iters);

}  // namespace pdenmpc
