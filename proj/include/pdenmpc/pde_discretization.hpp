#pragma once

#include "pdenmpc/common.hpp"

#include <array>
#include <functional>
#include <memory>

namespace pdenmpc {

/// Value and derivatives of a pointwise coefficient function phi(u, w).
///
/// The input-derivative spans are only meaningful for input-dependent
/// functions; they have sizes n_u, n_u and n_u*n_u (row-major).
struct PointDerivs {
    double value = 0.0;
    double d_w = 0.0;
    double d_ww = 0.0;
    VecSpan d_u;
    VecSpan d_uw;
    VecSpan d_uu;
};

/// A twice-differentiable scalar function of (u, w) used for the coefficients
/// a, b, c, d and the Neumann data e of the PDE class.
class PointFunction {
public:
    using StateFn = std::function<double(double)>;
    using GeneralFn = std::function<void(VecView u, double w, PointDerivs& out)>;

    PointFunction() = default;

    static PointFunction constant(double c);
    static PointFunction of_state(StateFn f, StateFn df, StateFn ddf);
    /// `fn` must fill every field of PointDerivs, including the input
    /// derivatives when `input_dependent` is set.
    static PointFunction general(GeneralFn fn, bool input_dependent);

    bool is_constant() const noexcept { return kind_ == Kind::Constant; }
    bool is_zero() const noexcept { return kind_ == Kind::Constant && constant_ == 0.0; }
    bool input_dependent() const noexcept { return input_dependent_; }

    /// Fills `out`; input-derivative spans are written only if input_dependent().
    void eval(VecView u, double w, PointDerivs& out) const;

private:
    enum class Kind { Constant, State, General };
    Kind kind_ = Kind::Constant;
    double constant_ = 0.0;
    StateFn f_, df_, ddf_;
    GeneralFn general_;
    bool input_dependent_ = false;
};

/// a(u,w) w_tt + b(u,w) w_t = c(u,w) Lap(w) + d(u,w), with Neumann data
/// dw/dn = e(u,w) on every face of an axis-aligned box.
struct PdeModel {
    int dim = 1;
    PointFunction coeff_a = PointFunction::constant(0.0);
    PointFunction coeff_b = PointFunction::constant(1.0);
    PointFunction coeff_c = PointFunction::constant(1.0);
    PointFunction coeff_d = PointFunction::constant(0.0);
    PointFunction boundary_e = PointFunction::constant(0.0);
    std::array<double, 2> side{1.0, 1.0};

    int time_order() const noexcept { return coeff_a.is_zero() ? 1 : 2; }
    bool input_dependent() const noexcept;
};

/// Uniform tensor grid with M+1 points per axis and a set of actuator points
/// whose values are control inputs instead of states.
class SpatialGrid {
public:
    /// `actuators` are linear grid indices (ix + iy * points[0]); their order
    /// defines the input ordering.
    SpatialGrid(int dim, std::array<int, 2> points_per_axis, std::array<double, 2> side,
                std::vector<std::size_t> actuators);

    int dim() const noexcept { return dim_; }
    int points(int axis) const { return points_[axis]; }
    double step(int axis) const { return step_[axis]; }
    std::size_t total_points() const noexcept { return total_; }
    const std::vector<std::size_t>& actuators() const noexcept { return actuators_; }
    std::size_t n_inputs() const noexcept { return actuators_.size(); }
    std::size_t n_field_states() const noexcept { return total_ - actuators_.size(); }

    /// -1 for actuator points, otherwise the state position.
    long state_index(std::size_t grid_index) const { return state_of_grid_[grid_index]; }
    /// -1 for state points, otherwise the input position.
    long input_index(std::size_t grid_index) const { return input_of_grid_[grid_index]; }
    std::size_t grid_index_of_state(std::size_t state) const { return grid_of_state_[state]; }

    std::size_t linear_index(int ix, int iy) const {
        return static_cast<std::size_t>(ix) + static_cast<std::size_t>(iy) * points_[0];
    }

private:
    int dim_;
    std::array<int, 2> points_{1, 1};
    std::array<double, 2> step_{1.0, 1.0};
    std::size_t total_ = 0;
    std::vector<std::size_t> actuators_;
    std::vector<long> state_of_grid_;
    std::vector<long> input_of_grid_;
    std::vector<std::size_t> grid_of_state_;
};

class DiscretizedSystem;

/// Pointwise second-order expansion of the discretized right-hand side at a
/// fixed (u, x). All derivative operators act through it without ever forming
/// a matrix. Reusable across evaluations; no allocation after the first use.
class Linearization {
public:
    Linearization() = default;
    explicit Linearization(const DiscretizedSystem& sys);

    const DiscretizedSystem& system() const { return *sys_; }

    /// f(u, x) at the expansion point; `x` must be the expansion state.
    void f(VecView x, VecSpan out) const;
    void apply_dfdx(VecView v, VecSpan out) const;
    void apply_dfdx_T(VecView w, VecSpan out) const;
    void apply_dfdu(VecView v, VecSpan out) const;
    void apply_dfdu_T(VecView w, VecSpan out) const;
    /// out_x += scale * [Hxx dx + Hxu du], out_u += scale * [Hux dx + Huu du],
    /// H = Hessian of lambda^T f.
    void add_hess_lambda(VecView lambda, VecView dx, VecView du, double scale, VecSpan out_x,
                         VecSpan out_u) const;
    /// out += scale * Huu (n_u x n_u, column-major).
    void add_hess_lambda_uu(VecView lambda, double scale, VecSpan out) const;
    void diag_dfdx(VecSpan out) const;

    /// Local partial derivatives of the acceleration / rate function at field
    /// point j with respect to (w_j, linear stencil sum, w_dot_j).
    double psi(std::size_t j) const { return psi_[j]; }
    double psi_w(std::size_t j) const { return grad_[j * k_ + 0]; }
    double psi_stencil(std::size_t j) const { return grad_[j * k_ + 1]; }
    double psi_rate(std::size_t j) const { return grad_[j * k_ + 2]; }
    /// True if any local derivative involves the input vector directly.
    bool has_input_terms() const noexcept { return k_ > 3; }

private:
    friend class DiscretizedSystem;
    const DiscretizedSystem* sys_ = nullptr;
    std::size_t k_ = 3;
    Vec psi_;
    Vec grad_;
    Vec hess_;
    mutable Vec scratch_;
};

/// Finite-dimensional dynamics x_dot = f(u, x) from the finite-difference
/// discretization. Immutable after construction.
class DiscretizedSystem {
public:
    DiscretizedSystem(PdeModel model, SpatialGrid grid);

    std::size_t n_x() const noexcept { return n_x_; }
    std::size_t n_u() const noexcept { return n_u_; }
    /// Number of non-actuator grid points (n_x for first order, n_x/2 for second).
    std::size_t n_field() const noexcept { return n_w_; }
    int time_order() const noexcept { return order_; }
    const PdeModel& model() const noexcept { return model_; }
    const SpatialGrid& grid() const noexcept { return grid_; }

    void eval_f(VecView u, VecView x, VecSpan out) const;
    void linearize(VecView u, VecView x, Linearization& lin) const;

    // Convenience forms that linearize internally.
    void apply_dfdx(VecView u, VecView x, VecView v, VecSpan out) const;
    void apply_dfdx_T(VecView u, VecView x, VecView w, VecSpan out) const;
    void apply_dfdu(VecView u, VecView x, VecView v, VecSpan out) const;
    void apply_dfdu_T(VecView u, VecView x, VecView w, VecSpan out) const;
    void apply_hess_lambda(VecView u, VecView x, VecView lambda, VecView dx, VecView du,
                           VecSpan out_x, VecSpan out_u) const;
    void diag_dfdx(VecView u, VecView x, VecSpan out) const;

    // Linear stencil: Lap_j = sum_k s_jk W_k + sum_m t_jm u_m + beta_j e(u, W_j).
    std::span<const std::size_t> stencil_states(std::size_t j) const {
        return {state_col_.data() + state_ptr_[j], state_ptr_[j + 1] - state_ptr_[j]};
    }
    std::span<const double> stencil_state_coeffs(std::size_t j) const {
        return {state_val_.data() + state_ptr_[j], state_ptr_[j + 1] - state_ptr_[j]};
    }
    std::span<const std::size_t> stencil_inputs(std::size_t j) const {
        return {input_col_.data() + input_ptr_[j], input_ptr_[j + 1] - input_ptr_[j]};
    }
    std::span<const double> stencil_input_coeffs(std::size_t j) const {
        return {input_val_.data() + input_ptr_[j], input_ptr_[j + 1] - input_ptr_[j]};
    }
    double stencil_self(std::size_t j) const { return self_[j]; }
    double boundary_weight(std::size_t j) const { return beta_[j]; }

    /// Index of W_j / W_dot_j inside the state vector.
    std::size_t w_index(std::size_t j) const { return j; }
    std::size_t rate_index(std::size_t j) const { return order_ == 2 ? n_w_ + j : j; }

private:
    friend class Linearization;
    template <int K>
    void linearize_impl(VecView u, VecView x, Linearization& lin) const;

    PdeModel model_;
    SpatialGrid grid_;
    int order_;
    std::size_t n_w_, n_x_, n_u_;
    std::vector<std::size_t> state_ptr_, state_col_, input_ptr_, input_col_;
    Vec state_val_, input_val_, self_, beta_;
};

/// Builds the discretized dynamics of `model` on `grid`.
std::shared_ptr<const DiscretizedSystem> discretize(const PdeModel& model, const SpatialGrid& grid);

/// Maximum relative discrepancies between each derivative operator and
/// central differences.
struct FdCheckReport {
    double dfdx = 0.0;
    double dfdx_T = 0.0;
    double dfdu = 0.0;
    double dfdu_T = 0.0;
    double hess_x = 0.0;
    double hess_u = 0.0;
    double max() const {
        return std::max({dfdx, dfdx_T, dfdu, dfdu_T, hess_x, hess_u});
    }
    bool ok(double threshold = 1e-5) const { return max() <= threshold; }
};

/// Compares every operator against central differences along `directions`
/// pseudo-random directions drawn from `seed`. The step is 1e-6 scaled by the
/// magnitude of the perturbed variable.
FdCheckReport finite_difference_check(const DiscretizedSystem& sys, VecView u, VecView x,
                                      VecView lambda, unsigned seed = 7, int directions = 3);

}  // namespace pdenmpc
