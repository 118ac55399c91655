#pragma once

#include "pdenmpc/pde_discretization.hpp"

#include <Eigen/Dense>

#include <memory>
#include <optional>

namespace pdenmpc {

/// Stage cost l_i(u, x) with first and second derivatives.
class StageCost {
public:
    virtual ~StageCost() = default;
    virtual double value(std::size_t stage, VecView u, VecView x) const = 0;
    /// gx += scale * dl/dx, gu += scale * dl/du
    virtual void add_gradient(std::size_t stage, VecView u, VecView x, double scale, VecSpan gx,
                              VecSpan gu) const = 0;
    /// out += scale * Hessian(l) * (dx, du)
    virtual void add_hessian(std::size_t stage, VecView u, VecView x, VecView dx, VecView du,
                             double scale, VecSpan out_x, VecSpan out_u) const = 0;
};

/// 1/2 (|x - x_ref|_Q^2 + |u - u_ref|_R^2) with diagonal weights. References
/// are per stage and may be updated between solves.
class QuadraticTrackingCost final : public StageCost {
public:
    QuadraticTrackingCost(std::size_t n_stages, Vec q_diag, Vec r_diag);

    void set_reference(std::size_t stage, VecView x_ref, VecView u_ref);
    void set_reference_all(VecView x_ref, VecView u_ref);
    VecView x_reference(std::size_t stage) const;
    VecView u_reference(std::size_t stage) const;

    double value(std::size_t stage, VecView u, VecView x) const override;
    void add_gradient(std::size_t stage, VecView u, VecView x, double scale, VecSpan gx,
                      VecSpan gu) const override;
    void add_hessian(std::size_t stage, VecView u, VecView x, VecView dx, VecView du, double scale,
                     VecSpan out_x, VecSpan out_u) const override;

private:
    std::size_t nx_, nu_;
    Vec q_, r_, x_ref_, u_ref_;
};

/// Inequality constraints G(u, x) >= 0 (vector valued).
class Constraint {
public:
    virtual ~Constraint() = default;
    virtual std::size_t size() const = 0;
    /// True if G is affine in (u, x); enables the exact step-length ratio.
    virtual bool affine() const { return false; }
    virtual void evaluate(std::size_t stage, VecView u, VecView x, VecSpan g) const = 0;
    /// out = dG * (dx, du)
    virtual void jacobian_apply(std::size_t stage, VecView u, VecView x, VecView dx, VecView du,
                                VecSpan out) const = 0;
    /// gx += scale * dG_x^T w, gu += scale * dG_u^T w
    virtual void add_jacobian_transpose(std::size_t stage, VecView u, VecView x, VecView w,
                                        double scale, VecSpan gx, VecSpan gu) const = 0;
    /// out += scale * sum_j weights_j Hessian(G_j) * (dx, du)
    virtual void add_weighted_hessian(std::size_t stage, VecView u, VecView x, VecView weights,
                                      VecView dx, VecView du, double scale, VecSpan out_x,
                                      VecSpan out_u) const = 0;
};

/// G(u) = [u - lower; upper - u].
class InputBoxConstraint final : public Constraint {
public:
    InputBoxConstraint(Vec lower, Vec upper);

    std::size_t size() const override { return 2 * lower_.size(); }
    bool affine() const override { return true; }
    VecView lower() const { return lower_; }
    VecView upper() const { return upper_; }

    void evaluate(std::size_t stage, VecView u, VecView x, VecSpan g) const override;
    void jacobian_apply(std::size_t stage, VecView u, VecView x, VecView dx, VecView du,
                        VecSpan out) const override;
    void add_jacobian_transpose(std::size_t stage, VecView u, VecView x, VecView w, double scale,
                                VecSpan gx, VecSpan gu) const override;
    void add_weighted_hessian(std::size_t, VecView, VecView, VecView, VecView, VecView, double,
                              VecSpan, VecSpan) const override {}

private:
    Vec lower_, upper_;
};

enum class RegMode { Fixed, CurrentIterate };

/// Relaxed, regularized NMPC problem over N backward-Euler stages.
class OcpProblem {
public:
    OcpProblem(std::shared_ptr<const DiscretizedSystem> sys, std::size_t n_stages, double horizon,
               std::shared_ptr<StageCost> cost, std::shared_ptr<const Constraint> constraint,
               double tau, double gamma, RegMode reg_mode, Vec x0);

    const DiscretizedSystem& system() const { return *sys_; }
    std::shared_ptr<const DiscretizedSystem> system_ptr() const { return sys_; }
    std::size_t n_stages() const noexcept { return n_; }
    double horizon() const noexcept { return horizon_; }
    double step() const noexcept { return h_; }
    double tau() const noexcept { return tau_; }
    double gamma() const noexcept { return gamma_; }
    RegMode reg_mode() const noexcept { return reg_mode_; }
    std::size_t n_x() const { return sys_->n_x(); }
    std::size_t n_u() const { return sys_->n_u(); }
    std::size_t stage_dim() const { return 2 * n_x() + n_u(); }

    StageCost& cost() const { return *cost_; }
    std::shared_ptr<StageCost> cost_ptr() const { return cost_; }
    /// Null when the problem has no inequality constraints.
    const Constraint* constraint() const { return constraint_.get(); }
    std::shared_ptr<const Constraint> constraint_ptr() const { return constraint_; }
    std::size_t n_constraints() const { return constraint_ ? constraint_->size() : 0; }

    VecView initial_state() const { return x0_; }
    void set_initial_state(VecView x0);

    VecView reg_reference(std::size_t stage) const {
        return VecView(u_reg_).subspan(stage * n_u(), n_u());
    }
    void set_reg_reference(std::size_t stage, VecView u);

    /// Copy with a different gamma / horizon (same N, dynamics, cost, constraints).
    OcpProblem with_gamma(double gamma) const;
    OcpProblem with_horizon(double horizon) const;

private:
    std::shared_ptr<const DiscretizedSystem> sys_;
    std::size_t n_;
    double horizon_, h_, tau_, gamma_;
    RegMode reg_mode_;
    std::shared_ptr<StageCost> cost_;
    std::shared_ptr<const Constraint> constraint_;
    Vec x0_;
    Vec u_reg_;
};

/// Primal-dual trajectory S = (s_1..s_N), s_i = (x_i, u_i, lambda_i), stored
/// contiguously in stage order.
class Trajectory {
public:
    Trajectory() = default;
    Trajectory(std::size_t n_stages, std::size_t nx, std::size_t nu);
    explicit Trajectory(const OcpProblem& prob)
        : Trajectory(prob.n_stages(), prob.n_x(), prob.n_u()) {}

    std::size_t n_stages() const noexcept { return n_; }
    std::size_t n_x() const noexcept { return nx_; }
    std::size_t n_u() const noexcept { return nu_; }
    std::size_t stage_dim() const noexcept { return 2 * nx_ + nu_; }

    VecSpan stage(std::size_t i) { return VecSpan(data_).subspan(i * stage_dim(), stage_dim()); }
    VecView stage(std::size_t i) const {
        return VecView(data_).subspan(i * stage_dim(), stage_dim());
    }
    VecSpan x(std::size_t i) { return stage(i).subspan(0, nx_); }
    VecSpan u(std::size_t i) { return stage(i).subspan(nx_, nu_); }
    VecSpan lambda(std::size_t i) { return stage(i).subspan(nx_ + nu_, nx_); }
    VecView x(std::size_t i) const { return stage(i).subspan(0, nx_); }
    VecView u(std::size_t i) const { return stage(i).subspan(nx_, nu_); }
    VecView lambda(std::size_t i) const { return stage(i).subspan(nx_ + nu_, nx_); }

    VecSpan data() { return data_; }
    VecView data() const { return data_; }

    /// States = x0 replicated, inputs = `u_init`, costates = 0.
    static Trajectory initial_guess(const OcpProblem& prob, VecView u_init);
    /// Receding-horizon warm start: s_i <- s_{i+1}, last stage duplicated.
    void shift();

private:
    std::size_t n_ = 0, nx_ = 0, nu_ = 0;
    Vec data_;
};

/// l + Phi + lambda^T f at stage `stage`, s = (x, u, lambda).
/// Throws DomainError if a barrier argument is not positive.
double hamiltonian(const OcpProblem& prob, std::size_t stage, VecView s);

/// Structured stage Jacobian D_i at s_i, plus everything needed to evaluate
/// the stage KKT residual. Block layout of residual and direction vectors is
/// (state equation | input stationarity | costate equation) and (x | u | lambda).
///
///   D_i = [ h fx - I     h fu          0          ]
///         [ h Hux        h Huu + g I   h fu^T     ]
///         [ h Hxx        h Hxu         h fx^T - I ]
///
/// D_bar drops the two h fu blocks; D_tilde holds them without the factor h.
class StageBlock {
public:
    StageBlock() = default;
    explicit StageBlock(const OcpProblem& prob);

    /// Linearize at s = (x, u, lambda) of stage `stage`. No allocation after
    /// construction.
    void assemble(const OcpProblem& prob, std::size_t stage, VecView s);

    std::size_t stage_index() const { return stage_; }
    std::size_t n_x() const { return nx_; }
    std::size_t n_u() const { return nu_; }
    std::size_t dim() const { return 2 * nx_ + nu_; }
    double h() const { return h_; }
    double gamma() const { return gamma_; }
    const Linearization& dynamics() const { return lin_; }
    VecView state() const { return x_; }
    VecView input() const { return u_; }
    VecView costate() const { return lambda_; }
    VecView constraint_values() const { return g_; }

    /// Stage residual given the neighbouring x_{i-1}, lambda_{i+1} and the
    /// regularization reference.
    void residual(VecView x_prev, VecView lambda_next, VecView u_reg, VecSpan out) const;

    /// out = D_i * ds (matrix-free).
    void apply(VecView ds, VecSpan out) const;
    void apply_bar(VecView ds, VecSpan out) const;
    void apply_tilde(VecView ds, VecSpan out) const;

    // Individual blocks used by the structured stage solver.
    void apply_Fx(VecView v, VecSpan out) const;     ///< (h fx - I) v
    void apply_FxT(VecView v, VecSpan out) const;    ///< (h fx - I)^T v
    void apply_Fu(VecView v, VecSpan out) const;     ///< h fu v
    void apply_FuT(VecView v, VecSpan out) const;    ///< h fu^T v
    void apply_Axx(VecView v, VecSpan out) const;    ///< h Hxx v
    void apply_Axu(VecView v, VecSpan out) const;    ///< h Hxu v
    void apply_Aux(VecView v, VecSpan out) const;    ///< h Hux v
    /// h Huu + gamma I, dense n_u x n_u.
    const Eigen::MatrixXd& Auu() const { return auu_; }
    bool Auu_is_diagonal() const { return auu_diagonal_; }

    /// Hessian of the Hamiltonian (including barrier) applied to (dx, du);
    /// overwrites out_x / out_u.
    void hessian_apply(VecView dx, VecView du, VecSpan out_x, VecSpan out_u) const;

    // Dense materializations (analysis and oracle use only).
    Eigen::MatrixXd to_dense() const;
    Eigen::MatrixXd to_dense_bar() const;
    Eigen::MatrixXd to_dense_tilde() const;

private:
    void cost_barrier_hessian(VecView dx, VecView du, VecSpan out_x, VecSpan out_u) const;

    const OcpProblem* prob_ = nullptr;
    std::size_t stage_ = 0, nx_ = 0, nu_ = 0, m_ = 0;
    double h_ = 0.0, gamma_ = 0.0, tau_ = 0.0;
    Linearization lin_;
    Vec x_, u_, lambda_;
    Vec f_, grad_x_, grad_u_;   // f(u,x), dH/dx, dH/du at the point
    Vec g_, inv_g_;
    Eigen::MatrixXd auu_;
    bool auu_diagonal_ = true;
    mutable Vec tx_, tx2_, tu_, tu2_, tg_, zx_, zu_;
};

/// Stage KKT residual K_i(x_{i-1}, s_i, lambda_{i+1}).
Vec kkt_stage_residual(const OcpProblem& prob, std::size_t stage, VecView x_prev, VecView s,
                       VecView lambda_next, VecView u_reg);

/// Structured stage Jacobian D_i = d K_i / d s_i.
StageBlock stage_jacobian(const OcpProblem& prob, std::size_t stage, VecView x_prev, VecView s,
                          VecView lambda_next);

/// Linearizes every stage of a trajectory and stacks the KKT residual.
class KktEvaluator {
public:
    explicit KktEvaluator(const OcpProblem& prob);

    /// Updates the regularization reference (current-iterate mode), assembles
    /// every stage block and the stacked residual. Returns its infinity norm.
    /// `threads` > 1 assembles stages concurrently.
    double evaluate(const Trajectory& S, int threads = 0);

    const OcpProblem& problem() const { return *prob_; }
    const StageBlock& block(std::size_t i) const { return blocks_[i]; }
    std::span<const StageBlock> blocks() const { return blocks_; }
    VecView residual() const { return residual_; }
    VecView stage_residual(std::size_t i) const {
        return VecView(residual_).subspan(i * prob_->stage_dim(), prob_->stage_dim());
    }

private:
    const OcpProblem* prob_;
    std::vector<StageBlock> blocks_;
    Vec residual_;
    Vec zero_lambda_;
};

}  // namespace pdenmpc
