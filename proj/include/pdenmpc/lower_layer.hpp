#pragma once

#include "pdenmpc/ocp_core.hpp"

#include <Eigen/LU>

#include <functional>

namespace pdenmpc {

enum class StageSolveMode { Iterative, Exact };

struct StageSolveConfig {
    int inner_jacobi_iters = 2;
    int schur_iters = 2;
    StageSolveMode mode = StageSolveMode::Iterative;

    void validate() const;
};

/// v = diag^-1 b, followed by `iters` Jacobi sweeps
/// v <- diag^-1 (b - offdiag(v)). `off_diag_apply(v, out)` writes (A - diag) v.
/// `scratch` needs b.size() entries.
void jacobi_linear_solve(VecView diag, const std::function<void(VecView, VecSpan)>& off_diag_apply,
                         VecView b, int iters, VecSpan v, VecSpan scratch);
Vec jacobi_linear_solve(VecView diag, const std::function<void(VecView, VecSpan)>& off_diag_apply,
                        VecView b, int iters);

/// Stage linear solver for one StageBlock. `factor` prepares diagonals (or a
/// dense LU in exact mode); `solve` then handles any number of right-hand
/// sides without allocating.
///
/// Reordered system, unknowns (v1, v2, v3) = (dlambda, dx, du):
///   [ 0     Fx    Fu  ] [v1]   [b1]   b1 = state-equation rhs
///   [ Fx^T  Axx   Axu ] [v2] = [b2]   b2 = costate-equation rhs
///   [ Fu^T  Aux   Auu ] [v3]   [b3]   b3 = input-stationarity rhs
class StageSolver {
public:
    StageSolver() = default;
    StageSolver(std::size_t nx, std::size_t nu, int time_order, StageSolveConfig cfg);
    explicit StageSolver(const OcpProblem& prob, StageSolveConfig cfg = {});

    const StageSolveConfig& config() const { return cfg_; }

    /// Throws SingularError naming the offending index if a diagonal vanishes
    /// (or the dense matrix is singular in exact mode).
    void factor(const StageBlock& block);

    /// rhs and out are in stage layout (x | u | lambda) / (K1 | K2 | K3).
    void solve(VecView rhs, VecSpan out);

    /// Saddle-point solve [0 Fx; Fx^T Axx] [v4; v5] = [b4; b5].
    void inner_solve(VecView b4, VecView b5, VecSpan v4, VecSpan v5);

    /// Individual solves with Fx and Fx^T.
    void solve_Fx(VecView b, VecSpan v);
    void solve_FxT(VecView b, VecSpan v);

private:
    void solve_Auu(VecView b, VecSpan v) const;
    void reduced_apply(VecView v, VecSpan out, bool transpose);
    void jacobi(VecView diag, VecView b, VecSpan v, bool transpose);

    StageSolveConfig cfg_;
    const StageBlock* block_ = nullptr;
    std::size_t nx_ = 0, nu_ = 0, nw_ = 0;
    int order_ = 1;

    Vec diag_;       // diagonal of Fx (order 1) or of the reduced field matrix (order 2)
    Vec auu_diag_;
    bool auu_diagonal_ = true;
    Eigen::PartialPivLU<Eigen::MatrixXd> auu_lu_;
    Eigen::PartialPivLU<Eigen::MatrixXd> dense_lu_;

    // Workspace.
    Vec b1_, b2_, b3_, v1_, v2_, v3_, w3_;
    Vec b4_, b5_, v4_, v5_, tx_, tx2_, tu_;
    Vec jac_r_, jac_t_, red_b_, red_v_, pad_in_, pad_out_;
    Eigen::VectorXd dense_rhs_, dense_sol_;
};

/// One-shot convenience: factor and solve.
Vec solve_stage(const StageBlock& block, VecView rhs, const StageSolveConfig& cfg = {});

}  // namespace pdenmpc
