#include "pdenmpc/pde_discretization.hpp"

#include <Eigen/Dense>

#include <numeric>
#include <random>
#include <set>

namespace pdenmpc {

// ---------------------------------------------------------------------------
// PointFunction
// ---------------------------------------------------------------------------

PointFunction PointFunction::constant(double c) {
    PointFunction p;
    p.kind_ = Kind::Constant;
    p.constant_ = c;
    return p;
}

PointFunction PointFunction::of_state(StateFn f, StateFn df, StateFn ddf) {
    PointFunction p;
    p.kind_ = Kind::State;
    p.f_ = std::move(f);
    p.df_ = std::move(df);
    p.ddf_ = std::move(ddf);
    return p;
}

PointFunction PointFunction::general(GeneralFn fn, bool input_dependent) {
    PointFunction p;
    p.kind_ = Kind::General;
    p.general_ = std::move(fn);
    p.input_dependent_ = input_dependent;
    return p;
}

void PointFunction::eval(VecView u, double w, PointDerivs& out) const {
    switch (kind_) {
        case Kind::Constant:
            out.value = constant_;
            out.d_w = 0.0;
            out.d_ww = 0.0;
            break;
        case Kind::State:
            out.value = f_(w);
            out.d_w = df_(w);
            out.d_ww = ddf_(w);
            break;
        case Kind::General:
            general_(u, w, out);
            break;
    }
}

bool PdeModel::input_dependent() const noexcept {
    return coeff_a.input_dependent() || coeff_b.input_dependent() ||
           coeff_c.input_dependent() || coeff_d.input_dependent() ||
           boundary_e.input_dependent();
}

// ---------------------------------------------------------------------------
// SpatialGrid
// ---------------------------------------------------------------------------

SpatialGrid::SpatialGrid(int dim, std::array<int, 2> points_per_axis, std::array<double, 2> side,
                         std::vector<std::size_t> actuators)
    : dim_(dim), actuators_(std::move(actuators)) {
    if (dim != 1 && dim != 2) throw InvalidArgument("grid dimension must be 1 or 2");
    points_ = {points_per_axis[0], dim == 2 ? points_per_axis[1] : 1};
    for (int a = 0; a < dim; ++a) {
        if (points_[a] < 3) throw InvalidArgument("grid needs at least 3 points per axis");
        if (!(side[a] > 0.0)) throw InvalidArgument("grid side lengths must be positive");
        step_[a] = side[a] / (points_[a] - 1);
    }
    total_ = static_cast<std::size_t>(points_[0]) * points_[1];

    std::set<std::size_t> seen;
    for (std::size_t g : actuators_) {
        if (g >= total_) throw InvalidArgument("actuator index out of range");
        if (!seen.insert(g).second) throw InvalidArgument("duplicate actuator index");
    }
    if (actuators_.size() >= total_) throw InvalidArgument("grid has no state points");

    state_of_grid_.assign(total_, -1);
    input_of_grid_.assign(total_, -1);
    for (std::size_t m = 0; m < actuators_.size(); ++m)
        input_of_grid_[actuators_[m]] = static_cast<long>(m);
    for (std::size_t g = 0; g < total_; ++g) {
        if (input_of_grid_[g] >= 0) continue;
        state_of_grid_[g] = static_cast<long>(grid_of_state_.size());
        grid_of_state_.push_back(g);
    }
}

// ---------------------------------------------------------------------------
// Second-order jets over the local variables (w_j, stencil sum, w_dot_j, u...)
// ---------------------------------------------------------------------------

namespace {

template <int K>
struct Jet {
    using G = Eigen::Matrix<double, K, 1>;
    using H = Eigen::Matrix<double, K, K>;
    double v = 0.0;
    G g;
    H h;

    explicit Jet(Eigen::Index k) {
        if constexpr (K == Eigen::Dynamic) {
            g.setZero(k);
            h.setZero(k, k);
        } else {
            (void)k;
            g.setZero();
            h.setZero();
        }
    }

    void set_variable(double value, Eigen::Index idx) {
        v = value;
        g.setZero();
        h.setZero();
        g[idx] = 1.0;
    }

    void set_coefficient(const PointDerivs& pd, bool with_input, std::size_t nu) {
        v = pd.value;
        g.setZero();
        h.setZero();
        g[0] = pd.d_w;
        h(0, 0) = pd.d_ww;
        if (with_input) {
            for (std::size_t m = 0; m < nu; ++m) {
                g[3 + m] = pd.d_u[m];
                h(0, 3 + m) = h(3 + m, 0) = pd.d_uw[m];
                for (std::size_t n = 0; n < nu; ++n) h(3 + m, 3 + n) = pd.d_uu[m * nu + n];
            }
        }
    }
};

template <int K>
void jet_mul(const Jet<K>& a, const Jet<K>& b, Jet<K>& out) {
    out.h = a.h * b.v + b.h * a.v + a.g * b.g.transpose() + b.g * a.g.transpose();
    out.g = a.g * b.v + b.g * a.v;
    out.v = a.v * b.v;
}

template <int K>
void jet_div(const Jet<K>& a, const Jet<K>& b, Jet<K>& tmp, Jet<K>& out) {
    const double r = 1.0 / b.v;
    tmp.v = r;
    tmp.g = -r * r * b.g;
    tmp.h = -r * r * b.h + 2.0 * r * r * r * b.g * b.g.transpose();
    jet_mul(a, tmp, out);
}

}  // namespace

// ---------------------------------------------------------------------------
// DiscretizedSystem
// ---------------------------------------------------------------------------

DiscretizedSystem::DiscretizedSystem(PdeModel model, SpatialGrid grid)
    : model_(std::move(model)), grid_(std::move(grid)) {
    if (model_.dim != grid_.dim()) throw InvalidArgument("grid dimension does not match model");
    for (int a = 0; a < grid_.dim(); ++a) {
        const double side = grid_.step(a) * (grid_.points(a) - 1);
        if (std::abs(side - model_.side[a]) > 1e-12 * model_.side[a])
            throw InvalidArgument("grid side length does not match model");
    }
    order_ = model_.time_order();
    n_w_ = grid_.n_field_states();
    n_u_ = grid_.n_inputs();
    n_x_ = order_ == 2 ? 2 * n_w_ : n_w_;

    {
        // The leading time coefficient is divided out; sample it at a few values.
        const PointFunction& lead = order_ == 2 ? model_.coeff_a : model_.coeff_b;
        Vec u0(n_u_, 0.0);
        Vec du(n_u_), duw(n_u_), duu(n_u_ * n_u_);
        PointDerivs pd{0, 0, 0, du, duw, duu};
        for (double w : {-1.0, 0.0, 1.0}) {
            lead.eval(u0, w, pd);
            if (pd.value == 0.0)
                throw InvalidArgument(order_ == 2 ? "second-order model requires a nonvanishing coefficient a"
                                                  : "first-order model requires a nonvanishing coefficient b");
        }
    }

    state_ptr_.assign(1, 0);
    input_ptr_.assign(1, 0);
    self_.assign(n_w_, 0.0);
    beta_.assign(n_w_, 0.0);

    for (std::size_t j = 0; j < n_w_; ++j) {
        const std::size_t g = grid_.grid_index_of_state(j);
        const int idx[2] = {static_cast<int>(g % grid_.points(0)),
                            static_cast<int>(g / grid_.points(0))};
        std::vector<std::pair<std::size_t, double>> neighbors;  // grid index, coefficient
        double self = 0.0;
        double beta = 0.0;
        for (int a = 0; a < grid_.dim(); ++a) {
            const double dp = grid_.step(a);
            const double inv2 = 1.0 / (dp * dp);
            const int last = grid_.points(a) - 1;
            auto shifted = [&](int delta) {
                int c[2] = {idx[0], idx[1]};
                c[a] += delta;
                return grid_.linear_index(c[0], c[1]);
            };
            self -= 2.0 * inv2;
            if (idx[a] == 0) {
                // w_{-1} = w_1 - 2 dp e
                neighbors.emplace_back(shifted(+1), 2.0 * inv2);
                beta -= 2.0 / dp;
            } else if (idx[a] == last) {
                // w_{M+1} = w_{M-1} + 2 dp e
                neighbors.emplace_back(shifted(-1), 2.0 * inv2);
                beta += 2.0 / dp;
            } else {
                neighbors.emplace_back(shifted(-1), inv2);
                neighbors.emplace_back(shifted(+1), inv2);
            }
        }
        self_[j] = self;
        beta_[j] = beta;
        state_col_.push_back(j);
        state_val_.push_back(self);
        for (auto [gn, coeff] : neighbors) {
            if (long s = grid_.state_index(gn); s >= 0) {
                state_col_.push_back(static_cast<std::size_t>(s));
                state_val_.push_back(coeff);
            } else {
                input_col_.push_back(static_cast<std::size_t>(grid_.input_index(gn)));
                input_val_.push_back(coeff);
            }
        }
        state_ptr_.push_back(state_col_.size());
        input_ptr_.push_back(input_col_.size());
    }
}

void DiscretizedSystem::eval_f(VecView u, VecView x, VecSpan out) const {
    const bool inp = model_.input_dependent();
    Vec du(inp ? n_u_ : 0), duw(inp ? n_u_ : 0), duu(inp ? n_u_ * n_u_ : 0);
    PointDerivs a{0, 0, 0, du, duw, duu}, pd = a;
    for (std::size_t j = 0; j < n_w_; ++j) {
        const double w = x[j];
        double lap = 0.0;
        const auto cols = stencil_states(j);
        const auto vals = stencil_state_coeffs(j);
        for (std::size_t q = 0; q < cols.size(); ++q) lap += vals[q] * x[cols[q]];
        const auto icols = stencil_inputs(j);
        const auto ivals = stencil_input_coeffs(j);
        for (std::size_t q = 0; q < icols.size(); ++q) lap += ivals[q] * u[icols[q]];
        if (beta_[j] != 0.0 && !model_.boundary_e.is_zero()) {
            model_.boundary_e.eval(u, w, pd);
            lap += beta_[j] * pd.value;
        }
        model_.coeff_c.eval(u, w, pd);
        double num = pd.value * lap;
        model_.coeff_d.eval(u, w, pd);
        num += pd.value;
        model_.coeff_b.eval(u, w, pd);
        if (order_ == 1) {
            out[j] = num / pd.value;
        } else {
            const double rate = x[n_w_ + j];
            num -= pd.value * rate;
            model_.coeff_a.eval(u, w, pd);
            out[j] = rate;
            out[n_w_ + j] = num / pd.value;
        }
    }
}

template <int K>
void DiscretizedSystem::linearize_impl(VecView u, VecView x, Linearization& lin) const {
    using J = Jet<K>;
    const std::size_t k = lin.k_;
    const bool inp = k > 3;
    const Eigen::Index ke = static_cast<Eigen::Index>(k);

    VecSpan scratch(lin.scratch_);
    PointDerivs pd{0, 0, 0, scratch.subspan(0, inp ? n_u_ : 0),
                   scratch.subspan(n_u_, inp ? n_u_ : 0),
                   scratch.subspan(2 * n_u_, inp ? n_u_ * n_u_ : 0)};

    J var_w(ke), var_l(ke), var_r(ke), ca(ke), cb(ke), cc(ke), cd(ke), ce(ke);
    J lap(ke), num(ke), tmp(ke), tmp2(ke), psi(ke);

    for (std::size_t j = 0; j < n_w_; ++j) {
        const double w = x[j];
        double stencil = 0.0;
        const auto cols = stencil_states(j);
        const auto vals = stencil_state_coeffs(j);
        for (std::size_t q = 0; q < cols.size(); ++q) stencil += vals[q] * x[cols[q]];
        const auto icols = stencil_inputs(j);
        const auto ivals = stencil_input_coeffs(j);
        for (std::size_t q = 0; q < icols.size(); ++q) stencil += ivals[q] * u[icols[q]];

        var_w.set_variable(w, 0);
        var_l.set_variable(stencil, 1);

        lap = var_l;
        if (beta_[j] != 0.0 && !model_.boundary_e.is_zero()) {
            model_.boundary_e.eval(u, w, pd);
            ce.set_coefficient(pd, inp && model_.boundary_e.input_dependent(), n_u_);
            lap.v += beta_[j] * ce.v;
            lap.g += beta_[j] * ce.g;
            lap.h += beta_[j] * ce.h;
        }
        model_.coeff_c.eval(u, w, pd);
        cc.set_coefficient(pd, inp && model_.coeff_c.input_dependent(), n_u_);
        jet_mul(cc, lap, num);
        model_.coeff_d.eval(u, w, pd);
        cd.set_coefficient(pd, inp && model_.coeff_d.input_dependent(), n_u_);
        num.v += cd.v;
        num.g += cd.g;
        num.h += cd.h;
        model_.coeff_b.eval(u, w, pd);
        cb.set_coefficient(pd, inp && model_.coeff_b.input_dependent(), n_u_);
        if (order_ == 1) {
            jet_div(num, cb, tmp, psi);
        } else {
            var_r.set_variable(x[n_w_ + j], 2);
            jet_mul(cb, var_r, tmp2);
            num.v -= tmp2.v;
            num.g -= tmp2.g;
            num.h -= tmp2.h;
            model_.coeff_a.eval(u, w, pd);
            ca.set_coefficient(pd, inp && model_.coeff_a.input_dependent(), n_u_);
            jet_div(num, ca, tmp, psi);
        }
        lin.psi_[j] = psi.v;
        for (std::size_t p = 0; p < k; ++p) {
            lin.grad_[j * k + p] = psi.g[static_cast<Eigen::Index>(p)];
            for (std::size_t q = 0; q < k; ++q)
                lin.hess_[(j * k + p) * k + q] =
                    psi.h(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q));
        }
    }
}

void DiscretizedSystem::linearize(VecView u, VecView x, Linearization& lin) const {
    if (lin.sys_ != this) lin = Linearization(*this);
    if (lin.k_ == 3)
        linearize_impl<3>(u, x, lin);
    else
        linearize_impl<Eigen::Dynamic>(u, x, lin);
}

void DiscretizedSystem::apply_dfdx(VecView u, VecView x, VecView v, VecSpan out) const {
    Linearization lin(*this);
    linearize(u, x, lin);
    lin.apply_dfdx(v, out);
}
void DiscretizedSystem::apply_dfdx_T(VecView u, VecView x, VecView w, VecSpan out) const {
    Linearization lin(*this);
    linearize(u, x, lin);
    lin.apply_dfdx_T(w, out);
}
void DiscretizedSystem::apply_dfdu(VecView u, VecView x, VecView v, VecSpan out) const {
    Linearization lin(*this);
    linearize(u, x, lin);
    lin.apply_dfdu(v, out);
}
void DiscretizedSystem::apply_dfdu_T(VecView u, VecView x, VecView w, VecSpan out) const {
    Linearization lin(*this);
    linearize(u, x, lin);
    lin.apply_dfdu_T(w, out);
}
void DiscretizedSystem::apply_hess_lambda(VecView u, VecView x, VecView lambda, VecView dx,
                                          VecView du, VecSpan out_x, VecSpan out_u) const {
    Linearization lin(*this);
    linearize(u, x, lin);
    fill_zero(out_x);
    fill_zero(out_u);
    lin.add_hess_lambda(lambda, dx, du, 1.0, out_x, out_u);
}
void DiscretizedSystem::diag_dfdx(VecView u, VecView x, VecSpan out) const {
    Linearization lin(*this);
    linearize(u, x, lin);
    lin.diag_dfdx(out);
}

std::shared_ptr<const DiscretizedSystem> discretize(const PdeModel& model, const SpatialGrid& grid) {
    return std::make_shared<const DiscretizedSystem>(model, grid);
}

// ---------------------------------------------------------------------------
// Linearization operators
// ---------------------------------------------------------------------------

Linearization::Linearization(const DiscretizedSystem& sys)
    : sys_(&sys),
      k_(sys.model().input_dependent() ? 3 + sys.n_u() : 3),
      psi_(sys.n_field(), 0.0),
      grad_(sys.n_field() * k_, 0.0),
      hess_(sys.n_field() * k_ * k_, 0.0),
      scratch_(std::max<std::size_t>(2 * sys.n_u() + sys.n_u() * sys.n_u(), 3 * k_), 0.0) {}

void Linearization::f(VecView x, VecSpan out) const {
    const std::size_t nw = sys_->n_field();
    if (sys_->time_order() == 2)
        for (std::size_t j = 0; j < nw; ++j) out[j] = x[nw + j];
    for (std::size_t j = 0; j < nw; ++j) out[sys_->rate_index(j)] = psi_[j];
}

void Linearization::apply_dfdx(VecView v, VecSpan out) const {
    const auto& s = *sys_;
    const std::size_t nw = s.n_field();
    const bool second = s.time_order() == 2;
    for (std::size_t j = 0; j < nw; ++j) {
        const double* g = &grad_[j * k_];
        const auto cols = s.stencil_states(j);
        const auto vals = s.stencil_state_coeffs(j);
        double st = 0.0;
        for (std::size_t q = 0; q < cols.size(); ++q) st += vals[q] * v[cols[q]];
        double r = g[0] * v[j] + g[1] * st;
        if (second) {
            r += g[2] * v[nw + j];
            out[j] = v[nw + j];
            out[nw + j] = r;
        } else {
            out[j] = r;
        }
    }
}

void Linearization::apply_dfdx_T(VecView w, VecSpan out) const {
    const auto& s = *sys_;
    const std::size_t nw = s.n_field();
    const bool second = s.time_order() == 2;
    fill_zero(out);
    for (std::size_t j = 0; j < nw; ++j) {
        const double* g = &grad_[j * k_];
        const double rho = w[s.rate_index(j)];
        if (second) {
            out[nw + j] += w[j] + g[2] * rho;
        }
        out[j] += g[0] * rho;
        const auto cols = s.stencil_states(j);
        const auto vals = s.stencil_state_coeffs(j);
        const double gl = g[1] * rho;
        for (std::size_t q = 0; q < cols.size(); ++q) out[cols[q]] += vals[q] * gl;
    }
}

void Linearization::apply_dfdu(VecView v, VecSpan out) const {
    const auto& s = *sys_;
    const std::size_t nw = s.n_field();
    const std::size_t nu = s.n_u();
    if (s.time_order() == 2)
        for (std::size_t j = 0; j < nw; ++j) out[j] = 0.0;
    for (std::size_t j = 0; j < nw; ++j) {
        const double* g = &grad_[j * k_];
        const auto cols = s.stencil_inputs(j);
        const auto vals = s.stencil_input_coeffs(j);
        double st = 0.0;
        for (std::size_t q = 0; q < cols.size(); ++q) st += vals[q] * v[cols[q]];
        double r = g[1] * st;
        if (k_ > 3)
            for (std::size_t m = 0; m < nu; ++m) r += g[3 + m] * v[m];
        out[s.rate_index(j)] = r;
    }
}

void Linearization::apply_dfdu_T(VecView w, VecSpan out) const {
    const auto& s = *sys_;
    const std::size_t nw = s.n_field();
    const std::size_t nu = s.n_u();
    fill_zero(out);
    for (std::size_t j = 0; j < nw; ++j) {
        const double* g = &grad_[j * k_];
        const double rho = w[s.rate_index(j)];
        const auto cols = s.stencil_inputs(j);
        const auto vals = s.stencil_input_coeffs(j);
        for (std::size_t q = 0; q < cols.size(); ++q) out[cols[q]] += vals[q] * g[1] * rho;
        if (k_ > 3)
            for (std::size_t m = 0; m < nu; ++m) out[m] += g[3 + m] * rho;
    }
}

void Linearization::add_hess_lambda(VecView lambda, VecView dx, VecView du, double scale,
                                    VecSpan out_x, VecSpan out_u) const {
    const auto& s = *sys_;
    const std::size_t nw = s.n_field();
    const std::size_t nu = s.n_u();
    const bool second = s.time_order() == 2;
    double local_small[3];
    double result_small[3];
    double* dz = k_ == 3 ? local_small : scratch_.data();
    double* tz = k_ == 3 ? result_small : scratch_.data() + k_;
    for (std::size_t j = 0; j < nw; ++j) {
        const double mu = lambda[s.rate_index(j)] * scale;
        if (mu == 0.0) continue;
        const auto cols = s.stencil_states(j);
        const auto vals = s.stencil_state_coeffs(j);
        const auto icols = s.stencil_inputs(j);
        const auto ivals = s.stencil_input_coeffs(j);
        const double* h = &hess_[j * k_ * k_];
        // The stencil sum only matters if its Hessian row is nonzero.
        bool stencil = false;
        for (std::size_t q = 0; q < k_; ++q) stencil = stencil || h[k_ + q] != 0.0;
        double st = 0.0;
        if (stencil) {
            for (std::size_t q = 0; q < cols.size(); ++q) st += vals[q] * dx[cols[q]];
            for (std::size_t q = 0; q < icols.size(); ++q) st += ivals[q] * du[icols[q]];
        }
        dz[0] = dx[j];
        dz[1] = st;
        dz[2] = second ? dx[nw + j] : 0.0;
        for (std::size_t m = 3; m < k_; ++m) dz[m] = du[m - 3];
        bool any = false;
        for (std::size_t p = 0; p < k_; ++p) {
            double acc = 0.0;
            for (std::size_t q = 0; q < k_; ++q) acc += h[p * k_ + q] * dz[q];
            tz[p] = mu * acc;
            any = any || acc != 0.0;
        }
        if (!any) continue;
        out_x[j] += tz[0];
        if (tz[1] != 0.0) {
            for (std::size_t q = 0; q < cols.size(); ++q) out_x[cols[q]] += vals[q] * tz[1];
            for (std::size_t q = 0; q < icols.size(); ++q) out_u[icols[q]] += ivals[q] * tz[1];
        }
        if (second) out_x[nw + j] += tz[2];
        for (std::size_t m = 0; m + 3 < k_ && m < nu; ++m) out_u[m] += tz[3 + m];
    }
}

void Linearization::add_hess_lambda_uu(VecView lambda, double scale, VecSpan out) const {
    const auto& s = *sys_;
    const std::size_t nw = s.n_field();
    const std::size_t nu = s.n_u();
    for (std::size_t j = 0; j < nw; ++j) {
        const double mu = lambda[s.rate_index(j)] * scale;
        if (mu == 0.0) continue;
        const auto icols = s.stencil_inputs(j);
        if (icols.empty() && k_ == 3) continue;
        const auto ivals = s.stencil_input_coeffs(j);
        // Local coordinates touched by input e: the stencil sum (slot 1) for
        // the first |icols| entries, then the explicit input slots.
        const std::size_t ne = icols.size() + (k_ - 3);
        auto entry = [&](std::size_t e, std::size_t& slot, std::size_t& input, double& coeff) {
            if (e < icols.size()) {
                slot = 1;
                input = icols[e];
                coeff = ivals[e];
            } else {
                slot = 3 + (e - icols.size());
                input = e - icols.size();
                coeff = 1.0;
            }
        };
        const double* h = &hess_[j * k_ * k_];
        for (std::size_t a = 0; a < ne; ++a) {
            std::size_t sa, ia;
            double ca;
            entry(a, sa, ia, ca);
            for (std::size_t b = 0; b < ne; ++b) {
                std::size_t sb, ib;
                double cb;
                entry(b, sb, ib, cb);
                const double v = h[sa * k_ + sb];
                if (v != 0.0) out[ia + ib * nu] += mu * ca * cb * v;
            }
        }
    }
}

void Linearization::diag_dfdx(VecSpan out) const {
    const auto& s = *sys_;
    const std::size_t nw = s.n_field();
    for (std::size_t j = 0; j < nw; ++j) {
        const double* g = &grad_[j * k_];
        if (s.time_order() == 2) {
            out[j] = 0.0;
            out[nw + j] = g[2];
        } else {
            out[j] = g[0] + g[1] * s.stencil_self(j);
        }
    }
}

// ---------------------------------------------------------------------------
// Finite-difference diagnostics
// ---------------------------------------------------------------------------

namespace {

double relative_discrepancy(VecView analytic, VecView fd, double floor) {
    double diff = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i)
        diff = std::max(diff, std::abs(analytic[i] - fd[i]));
    const double denom = std::max({inf_norm(analytic), inf_norm(fd), floor});
    return denom > 0.0 ? diff / denom : diff;
}

}  // namespace

FdCheckReport finite_difference_check(const DiscretizedSystem& sys, VecView u, VecView x,
                                      VecView lambda, unsigned seed, int directions) {
    const std::size_t nx = sys.n_x(), nu = sys.n_u();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    auto random_vec = [&](std::size_t n) {
        Vec v(n);
        for (auto& e : v) e = dist(rng);
        return v;
    };

    const double hx = 1e-6 * std::max(1.0, inf_norm(x));
    const double hu = 1e-6 * std::max(1.0, inf_norm(u));

    Linearization lin(sys);
    sys.linearize(u, x, lin);

    FdCheckReport rep;
    Vec fp(nx), fm(nx), fd(nx), an(nx), anu(nu), xp(nx), xm(nx), up(nu), um(nu);
    Vec f0(nx);
    sys.eval_f(u, x, f0);

    // Discrepancies below this share of the differenced quantity per unit
    // perturbation are finite-difference noise, not operator errors.
    auto noise_floor = [](VecView base, double scale) {
        return 1e-3 * inf_norm(base) / std::max(1.0, scale);
    };

    for (int d = 0; d < directions; ++d) {
        const Vec vx = random_vec(nx), vu = random_vec(nu), wx = random_vec(nx);

        // d f / dx
        for (std::size_t i = 0; i < nx; ++i) {
            xp[i] = x[i] + hx * vx[i];
            xm[i] = x[i] - hx * vx[i];
        }
        sys.eval_f(u, xp, fp);
        sys.eval_f(u, xm, fm);
        for (std::size_t i = 0; i < nx; ++i) fd[i] = (fp[i] - fm[i]) / (2.0 * hx);
        lin.apply_dfdx(vx, an);
        rep.dfdx = std::max(rep.dfdx, relative_discrepancy(an, fd, noise_floor(f0, inf_norm(x))));
        {
            Vec jt(nx);
            lin.apply_dfdx_T(wx, jt);
            const double a = dot(jt, vx), b = dot(wx, fd);
            const double denom = std::max({std::abs(a), std::abs(b),
                                           norm2(wx) * norm2(fd) * 1e-8});
            rep.dfdx_T = std::max(rep.dfdx_T, denom > 0 ? std::abs(a - b) / denom : 0.0);
        }

        // d f / du
        if (nu > 0) {
            for (std::size_t m = 0; m < nu; ++m) {
                up[m] = u[m] + hu * vu[m];
                um[m] = u[m] - hu * vu[m];
            }
            sys.eval_f(up, x, fp);
            sys.eval_f(um, x, fm);
            for (std::size_t i = 0; i < nx; ++i) fd[i] = (fp[i] - fm[i]) / (2.0 * hu);
            lin.apply_dfdu(vu, an);
            rep.dfdu = std::max(rep.dfdu, relative_discrepancy(an, fd, noise_floor(f0, inf_norm(u))));
            lin.apply_dfdu_T(wx, anu);
            const double a = dot(anu, vu), b = dot(wx, fd);
            const double denom = std::max({std::abs(a), std::abs(b),
                                           norm2(wx) * norm2(fd) * 1e-8});
            rep.dfdu_T = std::max(rep.dfdu_T, denom > 0 ? std::abs(a - b) / denom : 0.0);
        }

        // Hessian of lambda^T f: difference the gradient (J^T lambda) along (vx, vu).
        {
            Linearization lp(sys), lm(sys);
            const double t = std::min(hx, hu);
            for (std::size_t i = 0; i < nx; ++i) {
                xp[i] = x[i] + t * vx[i];
                xm[i] = x[i] - t * vx[i];
            }
            for (std::size_t m = 0; m < nu; ++m) {
                up[m] = u[m] + t * vu[m];
                um[m] = u[m] - t * vu[m];
            }
            sys.linearize(up, xp, lp);
            sys.linearize(um, xm, lm);
            Vec gxp(nx), gxm(nx), gup(nu), gum(nu), g0x(nx), g0u(nu);
            lp.apply_dfdx_T(lambda, gxp);
            lm.apply_dfdx_T(lambda, gxm);
            lp.apply_dfdu_T(lambda, gup);
            lm.apply_dfdu_T(lambda, gum);
            lin.apply_dfdx_T(lambda, g0x);
            lin.apply_dfdu_T(lambda, g0u);
            Vec fdx(nx), fdu(nu), hx_out(nx, 0.0), hu_out(nu, 0.0);
            for (std::size_t i = 0; i < nx; ++i) fdx[i] = (gxp[i] - gxm[i]) / (2.0 * t);
            for (std::size_t m = 0; m < nu; ++m) fdu[m] = (gup[m] - gum[m]) / (2.0 * t);
            lin.add_hess_lambda(lambda, vx, vu, 1.0, hx_out, hu_out);
            const double scale = std::max(inf_norm(x), inf_norm(u));
            const double floor = 1e-3 * std::max(inf_norm(g0x), inf_norm(g0u)) / std::max(1.0, scale);
            rep.hess_x = std::max(rep.hess_x, relative_discrepancy(hx_out, fdx, floor));
            if (nu > 0) rep.hess_u = std::max(rep.hess_u, relative_discrepancy(hu_out, fdu, floor));
        }
    }
    return rep;
}

}  // namespace pdenmpc
