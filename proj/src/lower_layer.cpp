#include "pdenmpc/lower_layer.hpp"

namespace pdenmpc {

void StageSolveConfig::validate() const {
    if (inner_jacobi_iters < 1) throw InvalidArgument("inner_jacobi_iters must be at least 1");
    if (schur_iters < 1) throw InvalidArgument("schur_iters must be at least 1");
}

namespace {

void check_diag(VecView diag, const char* what) {
    for (std::size_t j = 0; j < diag.size(); ++j)
        if (diag[j] == 0.0 || !std::isfinite(diag[j]))
            throw SingularError(std::string(what) + ": zero diagonal entry at index " +
                                    std::to_string(j),
                                j);
}

}  // namespace

void jacobi_linear_solve(VecView diag, const std::function<void(VecView, VecSpan)>& off_diag_apply,
                         VecView b, int iters, VecSpan v, VecSpan scratch) {
    check_diag(diag, "Jacobi solve");
    const std::size_t n = b.size();
    for (std::size_t j = 0; j < n; ++j) v[j] = b[j] / diag[j];
    for (int k = 0; k < iters; ++k) {
        off_diag_apply(v, scratch);
        for (std::size_t j = 0; j < n; ++j) v[j] = (b[j] - scratch[j]) / diag[j];
    }
}

Vec jacobi_linear_solve(VecView diag, const std::function<void(VecView, VecSpan)>& off_diag_apply,
                        VecView b, int iters) {
    Vec v(b.size()), scratch(b.size());
    jacobi_linear_solve(diag, off_diag_apply, b, iters, v, scratch);
    return v;
}

StageSolver::StageSolver(std::size_t nx, std::size_t nu, int time_order, StageSolveConfig cfg)
    : cfg_(cfg), nx_(nx), nu_(nu), nw_(time_order == 2 ? nx / 2 : nx), order_(time_order) {
    cfg_.validate();
    diag_.assign(nw_, 0.0);
    auu_diag_.assign(nu_, 0.0);
    for (Vec* v : {&b1_, &b2_, &v1_, &v2_, &b4_, &b5_, &v4_, &v5_, &tx_, &tx2_, &pad_in_, &pad_out_})
        v->assign(nx_, 0.0);
    for (Vec* v : {&b3_, &v3_, &w3_, &tu_}) v->assign(nu_, 0.0);
    for (Vec* v : {&jac_r_, &jac_t_, &red_b_, &red_v_}) v->assign(nw_, 0.0);
    dense_rhs_.resize(static_cast<Eigen::Index>(2 * nx_ + nu_));
    dense_sol_.resize(static_cast<Eigen::Index>(2 * nx_ + nu_));
}

StageSolver::StageSolver(const OcpProblem& prob, StageSolveConfig cfg)
    : StageSolver(prob.n_x(), prob.n_u(), prob.system().time_order(), cfg) {}

void StageSolver::factor(const StageBlock& block) {
    block_ = &block;
    if (cfg_.mode == StageSolveMode::Exact) {
        dense_lu_.compute(block.to_dense());
        const auto& lu = dense_lu_.matrixLU();
        Eigen::Index worst = 0;
        double pmax = 0.0;
        for (Eigen::Index k = 0; k < lu.rows(); ++k) {
            pmax = std::max(pmax, std::abs(lu(k, k)));
            if (std::abs(lu(k, k)) < std::abs(lu(worst, worst))) worst = k;
        }
        if (!(std::abs(lu(worst, worst)) > 1e-14 * pmax))
            throw SingularError("stage matrix is singular (pivot " + std::to_string(worst) + ")",
                                static_cast<std::size_t>(worst));
        return;
    }

    const Linearization& lin = block.dynamics();
    const auto& sys = lin.system();
    const double h = block.h();
    if (order_ == 1) {
        lin.diag_dfdx(diag_);
        for (double& d : diag_) d = h * d - 1.0;
    } else {
        for (std::size_t j = 0; j < nw_; ++j)
            diag_[j] = h * lin.psi_rate(j) - 1.0 +
                       h * h * (lin.psi_w(j) + lin.psi_stencil(j) * sys.stencil_self(j));
    }
    check_diag(diag_, "state-equation block");

    const auto& auu = block.Auu();
    auu_diagonal_ = block.Auu_is_diagonal();
    if (auu_diagonal_) {
        for (std::size_t m = 0; m < nu_; ++m)
            auu_diag_[m] = auu(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
        check_diag(auu_diag_, "input block");
    } else if (nu_ > 0) {
        auu_lu_.compute(auu);
        const auto& lu = auu_lu_.matrixLU();
        for (Eigen::Index k = 0; k < lu.rows(); ++k)
            if (lu(k, k) == 0.0)
                throw SingularError("input block is singular (pivot " + std::to_string(k) + ")",
                                    static_cast<std::size_t>(k));
    }
}

void StageSolver::solve_Auu(VecView b, VecSpan v) const {
    if (auu_diagonal_) {
        for (std::size_t m = 0; m < nu_; ++m) v[m] = b[m] / auu_diag_[m];
        return;
    }
    Eigen::Map<const Eigen::VectorXd> bm(b.data(), static_cast<Eigen::Index>(nu_));
    Eigen::Map<Eigen::VectorXd> vm(v.data(), static_cast<Eigen::Index>(nu_));
    vm = auu_lu_.solve(bm);
}

void StageSolver::reduced_apply(VecView v, VecSpan out, bool transpose) {
    // (h Psi_v - I + h^2 Psi_W) v, or with Psi_W^T.
    const Linearization& lin = block_->dynamics();
    const double h = block_->h();
    fill_zero(pad_in_);
    if (!transpose) {
        std::copy(v.begin(), v.end(), pad_in_.begin());
        lin.apply_dfdx(pad_in_, pad_out_);
        for (std::size_t j = 0; j < nw_; ++j)
            out[j] = (h * lin.psi_rate(j) - 1.0) * v[j] + h * h * pad_out_[nw_ + j];
    } else {
        std::copy(v.begin(), v.end(), pad_in_.begin() + static_cast<std::ptrdiff_t>(nw_));
        lin.apply_dfdx_T(pad_in_, pad_out_);
        for (std::size_t j = 0; j < nw_; ++j)
            out[j] = (h * lin.psi_rate(j) - 1.0) * v[j] + h * h * pad_out_[j];
    }
}

void StageSolver::jacobi(VecView diag, VecView b, VecSpan v, bool transpose) {
    const std::size_t n = b.size();
    for (std::size_t j = 0; j < n; ++j) v[j] = b[j] / diag[j];
    for (int k = 0; k < cfg_.inner_jacobi_iters; ++k) {
        if (order_ == 1) {
            if (transpose)
                block_->apply_FxT(v, jac_r_);
            else
                block_->apply_Fx(v, jac_r_);
        } else {
            reduced_apply(v, jac_r_, transpose);
        }
        for (std::size_t j = 0; j < n; ++j)
            jac_t_[j] = (b[j] - (jac_r_[j] - diag[j] * v[j])) / diag[j];
        std::copy(jac_t_.begin(), jac_t_.end(), v.begin());
    }
}

void StageSolver::solve_Fx(VecView b, VecSpan v) {
    if (!block_) throw InvalidArgument("stage solver used before factor()");
    if (order_ == 1) {
        jacobi(diag_, b, v, false);
        return;
    }
    const Linearization& lin = block_->dynamics();
    const double h = block_->h();
    const auto b6 = b.subspan(0, nw_);
    const auto b7 = b.subspan(nw_, nw_);
    fill_zero(pad_in_);
    std::copy(b6.begin(), b6.end(), pad_in_.begin());
    lin.apply_dfdx(pad_in_, pad_out_);
    for (std::size_t j = 0; j < nw_; ++j) red_b_[j] = b7[j] + h * pad_out_[nw_ + j];
    jacobi(diag_, red_b_, red_v_, false);
    for (std::size_t j = 0; j < nw_; ++j) {
        v[nw_ + j] = red_v_[j];
        v[j] = h * red_v_[j] - b6[j];
    }
}

void StageSolver::solve_FxT(VecView c, VecSpan y) {
    if (!block_) throw InvalidArgument("stage solver used before factor()");
    if (order_ == 1) {
        jacobi(diag_, c, y, true);
        return;
    }
    const Linearization& lin = block_->dynamics();
    const double h = block_->h();
    for (std::size_t j = 0; j < nw_; ++j) red_b_[j] = c[nw_ + j] + h * c[j];
    jacobi(diag_, red_b_, red_v_, true);
    fill_zero(pad_in_);
    std::copy(red_v_.begin(), red_v_.end(), pad_in_.begin() + static_cast<std::ptrdiff_t>(nw_));
    lin.apply_dfdx_T(pad_in_, pad_out_);
    for (std::size_t j = 0; j < nw_; ++j) {
        y[nw_ + j] = red_v_[j];
        y[j] = h * pad_out_[j] - c[j];
    }
}

void StageSolver::inner_solve(VecView b4, VecView b5, VecSpan v4, VecSpan v5) {
    if (!block_) throw InvalidArgument("stage solver used before factor()");
    solve_Fx(b4, v5);
    block_->apply_Axx(v5, tx_);
    for (std::size_t i = 0; i < nx_; ++i) tx2_[i] = b5[i] - tx_[i];
    solve_FxT(tx2_, v4);
}

void StageSolver::solve(VecView rhs, VecSpan out) {
    if (!block_) throw InvalidArgument("stage solver used before factor()");
    if (cfg_.mode == StageSolveMode::Exact) {
        for (std::size_t k = 0; k < rhs.size(); ++k) dense_rhs_[static_cast<Eigen::Index>(k)] = rhs[k];
        dense_sol_.noalias() = dense_lu_.solve(dense_rhs_);
        for (std::size_t k = 0; k < rhs.size(); ++k) out[k] = dense_sol_[static_cast<Eigen::Index>(k)];
        return;
    }

    std::copy_n(rhs.begin(), nx_, b1_.begin());
    std::copy_n(rhs.begin() + static_cast<std::ptrdiff_t>(nx_), nu_, b3_.begin());
    std::copy_n(rhs.begin() + static_cast<std::ptrdiff_t>(nx_ + nu_), nx_, b2_.begin());

    solve_Auu(b3_, v3_);
    for (int it = 0; it < cfg_.schur_iters; ++it) {
        block_->apply_Fu(v3_, b4_);
        block_->apply_Axu(v3_, b5_);
        for (std::size_t i = 0; i < nx_; ++i) {
            b4_[i] -= b1_[i];
            b5_[i] -= b2_[i];
        }
        inner_solve(b4_, b5_, v4_, v5_);
        block_->apply_FuT(v4_, tu_);
        for (std::size_t m = 0; m < nu_; ++m) w3_[m] = b3_[m] + tu_[m];
        block_->apply_Aux(v5_, tu_);
        for (std::size_t m = 0; m < nu_; ++m) w3_[m] += tu_[m];
        solve_Auu(w3_, v3_);
    }

    block_->apply_Fu(v3_, b4_);
    block_->apply_Axu(v3_, b5_);
    for (std::size_t i = 0; i < nx_; ++i) {
        b4_[i] = b1_[i] - b4_[i];
        b5_[i] = b2_[i] - b5_[i];
    }
    inner_solve(b4_, b5_, v1_, v2_);

    std::copy(v2_.begin(), v2_.end(), out.begin());
    std::copy(v3_.begin(), v3_.end(), out.begin() + static_cast<std::ptrdiff_t>(nx_));
    std::copy(v1_.begin(), v1_.end(), out.begin() + static_cast<std::ptrdiff_t>(nx_ + nu_));
}

Vec solve_stage(const StageBlock& block, VecView rhs, const StageSolveConfig& cfg) {
    StageSolver solver(block.n_x(), block.n_u(), block.dynamics().system().time_order(), cfg);
    solver.factor(block);
    Vec out(rhs.size());
    solver.solve(rhs, out);
    return out;
}

}  // namespace pdenmpc
