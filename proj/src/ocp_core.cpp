#include "pdenmpc/ocp_core.hpp"

#include <thread>

namespace pdenmpc {

// ---------------------------------------------------------------------------
// Built-in costs and constraints
// ---------------------------------------------------------------------------

QuadraticTrackingCost::QuadraticTrackingCost(std::size_t n_stages, Vec q_diag, Vec r_diag)
    : nx_(q_diag.size()), nu_(r_diag.size()), q_(std::move(q_diag)), r_(std::move(r_diag)),
      x_ref_(n_stages * nx_, 0.0), u_ref_(n_stages * nu_, 0.0) {}

void QuadraticTrackingCost::set_reference(std::size_t stage, VecView x_ref, VecView u_ref) {
    std::copy(x_ref.begin(), x_ref.end(), x_ref_.begin() + stage * nx_);
    std::copy(u_ref.begin(), u_ref.end(), u_ref_.begin() + stage * nu_);
}

void QuadraticTrackingCost::set_reference_all(VecView x_ref, VecView u_ref) {
    const std::size_t n = x_ref_.size() / std::max<std::size_t>(nx_, 1);
    for (std::size_t i = 0; i < n; ++i) set_reference(i, x_ref, u_ref);
}

VecView QuadraticTrackingCost::x_reference(std::size_t stage) const {
    return VecView(x_ref_).subspan(stage * nx_, nx_);
}
VecView QuadraticTrackingCost::u_reference(std::size_t stage) const {
    return VecView(u_ref_).subspan(stage * nu_, nu_);
}

double QuadraticTrackingCost::value(std::size_t stage, VecView u, VecView x) const {
    const auto xr = x_reference(stage);
    const auto ur = u_reference(stage);
    double acc = 0.0;
    for (std::size_t i = 0; i < nx_; ++i) acc += q_[i] * (x[i] - xr[i]) * (x[i] - xr[i]);
    for (std::size_t m = 0; m < nu_; ++m) acc += r_[m] * (u[m] - ur[m]) * (u[m] - ur[m]);
    return 0.5 * acc;
}

void QuadraticTrackingCost::add_gradient(std::size_t stage, VecView u, VecView x, double scale,
                                         VecSpan gx, VecSpan gu) const {
    const auto xr = x_reference(stage);
    const auto ur = u_reference(stage);
    for (std::size_t i = 0; i < nx_; ++i) gx[i] += scale * q_[i] * (x[i] - xr[i]);
    for (std::size_t m = 0; m < nu_; ++m) gu[m] += scale * r_[m] * (u[m] - ur[m]);
}

void QuadraticTrackingCost::add_hessian(std::size_t, VecView, VecView, VecView dx, VecView du,
                                        double scale, VecSpan out_x, VecSpan out_u) const {
    for (std::size_t i = 0; i < nx_; ++i) out_x[i] += scale * q_[i] * dx[i];
    for (std::size_t m = 0; m < nu_; ++m) out_u[m] += scale * r_[m] * du[m];
}

InputBoxConstraint::InputBoxConstraint(Vec lower, Vec upper)
    : lower_(std::move(lower)), upper_(std::move(upper)) {
    if (lower_.size() != upper_.size()) throw InvalidArgument("box bounds differ in size");
    for (std::size_t m = 0; m < lower_.size(); ++m)
        if (!(lower_[m] < upper_[m])) throw InvalidArgument("box bounds must satisfy lower < upper");
}

void InputBoxConstraint::evaluate(std::size_t, VecView u, VecView, VecSpan g) const {
    const std::size_t nu = lower_.size();
    for (std::size_t m = 0; m < nu; ++m) {
        g[m] = u[m] - lower_[m];
        g[nu + m] = upper_[m] - u[m];
    }
}

void InputBoxConstraint::jacobian_apply(std::size_t, VecView, VecView, VecView, VecView du,
                                        VecSpan out) const {
    const std::size_t nu = lower_.size();
    for (std::size_t m = 0; m < nu; ++m) {
        out[m] = du[m];
        out[nu + m] = -du[m];
    }
}

void InputBoxConstraint::add_jacobian_transpose(std::size_t, VecView, VecView, VecView w,
                                                double scale, VecSpan, VecSpan gu) const {
    const std::size_t nu = lower_.size();
    for (std::size_t m = 0; m < nu; ++m) gu[m] += scale * (w[m] - w[nu + m]);
}

// ---------------------------------------------------------------------------
// OcpProblem / Trajectory
// ---------------------------------------------------------------------------

OcpProblem::OcpProblem(std::shared_ptr<const DiscretizedSystem> sys, std::size_t n_stages,
                       double horizon, std::shared_ptr<StageCost> cost,
                       std::shared_ptr<const Constraint> constraint, double tau, double gamma,
                       RegMode reg_mode, Vec x0)
    : sys_(std::move(sys)), n_(n_stages), horizon_(horizon), tau_(tau), gamma_(gamma),
      reg_mode_(reg_mode), cost_(std::move(cost)), constraint_(std::move(constraint)),
      x0_(std::move(x0)) {
    if (!sys_) throw InvalidArgument("problem needs a dynamics model");
    if (!cost_) throw InvalidArgument("problem needs a stage cost");
    if (n_ == 0) throw InvalidArgument("stage count must be positive");
    if (!(horizon_ > 0.0)) throw InvalidArgument("horizon must be positive");
    if (!(tau_ > 0.0)) throw InvalidArgument("barrier parameter must be positive");
    if (!(gamma_ >= 0.0)) throw InvalidArgument("regularization must be nonnegative");
    if (x0_.size() != sys_->n_x()) throw InvalidArgument("initial state has wrong size");
    h_ = horizon_ / static_cast<double>(n_);
    u_reg_.assign(n_ * sys_->n_u(), 0.0);
}

void OcpProblem::set_initial_state(VecView x0) {
    if (x0.size() != x0_.size()) throw InvalidArgument("initial state has wrong size");
    std::copy(x0.begin(), x0.end(), x0_.begin());
}

void OcpProblem::set_reg_reference(std::size_t stage, VecView u) {
    std::copy(u.begin(), u.end(), u_reg_.begin() + stage * n_u());
}

OcpProblem OcpProblem::with_gamma(double gamma) const {
    OcpProblem p = *this;
    if (!(gamma >= 0.0)) throw InvalidArgument("regularization must be nonnegative");
    p.gamma_ = gamma;
    return p;
}

OcpProblem OcpProblem::with_horizon(double horizon) const {
    if (!(horizon > 0.0)) throw InvalidArgument("horizon must be positive");
    OcpProblem p = *this;
    p.horizon_ = horizon;
    p.h_ = horizon / static_cast<double>(n_);
    return p;
}

Trajectory::Trajectory(std::size_t n_stages, std::size_t nx, std::size_t nu)
    : n_(n_stages), nx_(nx), nu_(nu), data_(n_stages * (2 * nx + nu), 0.0) {}

Trajectory Trajectory::initial_guess(const OcpProblem& prob, VecView u_init) {
    Trajectory S(prob);
    const auto x0 = prob.initial_state();
    for (std::size_t i = 0; i < S.n_stages(); ++i) {
        std::copy(x0.begin(), x0.end(), S.x(i).begin());
        std::copy(u_init.begin(), u_init.end(), S.u(i).begin());
    }
    return S;
}

void Trajectory::shift() {
    if (n_ < 2) return;
    const std::size_t d = stage_dim();
    std::copy(data_.begin() + d, data_.end(), data_.begin());
    std::copy(data_.end() - 2 * d, data_.end() - d, data_.end() - d);
}

// ---------------------------------------------------------------------------
// Hamiltonian
// ---------------------------------------------------------------------------

namespace {

void check_barrier_domain(VecView g, std::size_t stage) {
    for (std::size_t j = 0; j < g.size(); ++j) {
        if (!(g[j] > 0.0))
            throw DomainError("barrier argument G[" + std::to_string(j) + "] = " +
                                  std::to_string(g[j]) + " is not positive at stage " +
                                  std::to_string(stage),
                              j);
    }
}

}  // namespace

double hamiltonian(const OcpProblem& prob, std::size_t stage, VecView s) {
    const std::size_t nx = prob.n_x(), nu = prob.n_u();
    const auto x = s.subspan(0, nx);
    const auto u = s.subspan(nx, nu);
    const auto lambda = s.subspan(nx + nu, nx);
    double value = prob.cost().value(stage, u, x);
    if (const Constraint* c = prob.constraint()) {
        Vec g(c->size());
        c->evaluate(stage, u, x, g);
        check_barrier_domain(g, stage);
        for (double gj : g) value -= prob.tau() * std::log(gj);
    }
    Vec f(nx);
    prob.system().eval_f(u, x, f);
    return value + dot(lambda, f);
}

// ---------------------------------------------------------------------------
// StageBlock
// ---------------------------------------------------------------------------

StageBlock::StageBlock(const OcpProblem& prob)
    : prob_(&prob),
      nx_(prob.n_x()),
      nu_(prob.n_u()),
      m_(prob.n_constraints()),
      lin_(prob.system()),
      x_(nx_), u_(nu_), lambda_(nx_),
      f_(nx_), grad_x_(nx_), grad_u_(nu_),
      g_(m_), inv_g_(m_),
      auu_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nu_), static_cast<Eigen::Index>(nu_))),
      tx_(nx_), tx2_(nx_), tu_(nu_), tu2_(nu_), tg_(m_), zx_(nx_, 0.0), zu_(nu_, 0.0) {}

void StageBlock::assemble(const OcpProblem& prob, std::size_t stage, VecView s) {
    if (prob_ != &prob || nx_ != prob.n_x() || nu_ != prob.n_u()) *this = StageBlock(prob);
    stage_ = stage;
    h_ = prob.step();
    gamma_ = prob.gamma();
    tau_ = prob.tau();
    std::copy_n(s.begin(), nx_, x_.begin());
    std::copy_n(s.begin() + nx_, nu_, u_.begin());
    std::copy_n(s.begin() + nx_ + nu_, nx_, lambda_.begin());

    const Constraint* con = prob.constraint();
    if (con) {
        con->evaluate(stage, u_, x_, g_);
        check_barrier_domain(g_, stage);
        for (std::size_t j = 0; j < m_; ++j) inv_g_[j] = 1.0 / g_[j];
    }

    const auto& sys = prob.system();
    sys.linearize(u_, x_, lin_);
    lin_.f(x_, f_);

    // Gradient of the Hamiltonian.
    lin_.apply_dfdx_T(lambda_, grad_x_);
    lin_.apply_dfdu_T(lambda_, grad_u_);
    prob.cost().add_gradient(stage, u_, x_, 1.0, grad_x_, grad_u_);
    if (con) con->add_jacobian_transpose(stage, u_, x_, inv_g_, -tau_, grad_x_, grad_u_);

    // Dense input block h Huu + gamma I.
    // The costate term only touches points next to an actuator (or every point
    // for input-dependent coefficients), so it is accumulated directly.
    auu_diagonal_ = true;
    auu_.setZero();
    lin_.add_hess_lambda_uu(lambda_, 1.0, VecSpan(auu_.data(), nu_ * nu_));
    for (std::size_t m = 0; m < nu_; ++m) {
        std::fill(zu_.begin(), zu_.end(), 0.0);
        zu_[m] = 1.0;
        cost_barrier_hessian(zx_, zu_, tx2_, tu2_);
        for (std::size_t n = 0; n < nu_; ++n) {
            auto& a = auu_(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
            a = h_ * (a + tu2_[n]) + (n == m ? gamma_ : 0.0);
            if (n != m && a != 0.0) auu_diagonal_ = false;
        }
    }
    std::fill(zu_.begin(), zu_.end(), 0.0);
}

void StageBlock::hessian_apply(VecView dx, VecView du, VecSpan out_x, VecSpan out_u) const {
    cost_barrier_hessian(dx, du, out_x, out_u);
    lin_.add_hess_lambda(lambda_, dx, du, 1.0, out_x, out_u);
}

void StageBlock::cost_barrier_hessian(VecView dx, VecView du, VecSpan out_x, VecSpan out_u) const {
    fill_zero(out_x);
    fill_zero(out_u);
    prob_->cost().add_hessian(stage_, u_, x_, dx, du, 1.0, out_x, out_u);
    if (const Constraint* con = prob_->constraint()) {
        con->jacobian_apply(stage_, u_, x_, dx, du, tg_);
        for (std::size_t j = 0; j < m_; ++j) tg_[j] *= tau_ * inv_g_[j] * inv_g_[j];
        con->add_jacobian_transpose(stage_, u_, x_, tg_, 1.0, out_x, out_u);
        if (!con->affine()) {
            con->add_weighted_hessian(stage_, u_, x_, inv_g_, dx, du, -tau_, out_x, out_u);
        }
    }
}

void StageBlock::residual(VecView x_prev, VecView lambda_next, VecView u_reg, VecSpan out) const {
    for (std::size_t i = 0; i < nx_; ++i) out[i] = x_prev[i] - x_[i] + h_ * f_[i];
    for (std::size_t m = 0; m < nu_; ++m)
        out[nx_ + m] = h_ * grad_u_[m] + gamma_ * (u_[m] - u_reg[m]);
    for (std::size_t i = 0; i < nx_; ++i)
        out[nx_ + nu_ + i] = lambda_next[i] - lambda_[i] + h_ * grad_x_[i];
}

void StageBlock::apply_Fx(VecView v, VecSpan out) const {
    lin_.apply_dfdx(v, out);
    for (std::size_t i = 0; i < nx_; ++i) out[i] = h_ * out[i] - v[i];
}

void StageBlock::apply_FxT(VecView v, VecSpan out) const {
    lin_.apply_dfdx_T(v, out);
    for (std::size_t i = 0; i < nx_; ++i) out[i] = h_ * out[i] - v[i];
}

void StageBlock::apply_Fu(VecView v, VecSpan out) const {
    lin_.apply_dfdu(v, out);
    for (std::size_t i = 0; i < nx_; ++i) out[i] *= h_;
}

void StageBlock::apply_FuT(VecView v, VecSpan out) const {
    lin_.apply_dfdu_T(v, out);
    for (std::size_t m = 0; m < nu_; ++m) out[m] *= h_;
}

void StageBlock::apply_Axx(VecView v, VecSpan out) const {
    hessian_apply(v, zu_, out, tu2_);
    for (std::size_t i = 0; i < nx_; ++i) out[i] *= h_;
}

void StageBlock::apply_Axu(VecView v, VecSpan out) const {
    hessian_apply(zx_, v, out, tu2_);
    for (std::size_t i = 0; i < nx_; ++i) out[i] *= h_;
}

void StageBlock::apply_Aux(VecView v, VecSpan out) const {
    hessian_apply(v, zu_, tx2_, out);
    for (std::size_t m = 0; m < nu_; ++m) out[m] *= h_;
}

namespace {

enum class Part { Full, Bar, Tilde };

}  // namespace

static void apply_part(const StageBlock& b, VecView ds, VecSpan out, Part part, VecSpan tx,
                       VecSpan tu, VecSpan hx, VecSpan hu) {
    const std::size_t nx = b.n_x(), nu = b.n_u();
    const double h = b.h();
    const auto dx = ds.subspan(0, nx);
    const auto du = ds.subspan(nx, nu);
    const auto dl = ds.subspan(nx + nu, nx);
    auto o1 = out.subspan(0, nx);
    auto o2 = out.subspan(nx, nu);
    auto o3 = out.subspan(nx + nu, nx);

    if (part == Part::Tilde) {
        b.dynamics().apply_dfdu(du, o1);
        b.dynamics().apply_dfdu_T(dl, o2);
        fill_zero(o3);
        return;
    }

    b.hessian_apply(dx, du, hx, hu);
    // Row 1: state equation.
    b.dynamics().apply_dfdx(dx, o1);
    for (std::size_t i = 0; i < nx; ++i) o1[i] = h * o1[i] - dx[i];
    if (part == Part::Full) {
        b.dynamics().apply_dfdu(du, tx);
        for (std::size_t i = 0; i < nx; ++i) o1[i] += h * tx[i];
    }
    // Row 2: input stationarity.
    for (std::size_t m = 0; m < nu; ++m) o2[m] = h * hu[m] + b.gamma() * du[m];
    if (part == Part::Full) {
        b.dynamics().apply_dfdu_T(dl, tu);
        for (std::size_t m = 0; m < nu; ++m) o2[m] += h * tu[m];
    }
    // Row 3: costate equation.
    b.dynamics().apply_dfdx_T(dl, o3);
    for (std::size_t i = 0; i < nx; ++i) o3[i] = h * hx[i] + h * o3[i] - dl[i];
}

void StageBlock::apply(VecView ds, VecSpan out) const {
    apply_part(*this, ds, out, Part::Full, tx_, tu_, tx2_, tu2_);
}

void StageBlock::apply_bar(VecView ds, VecSpan out) const {
    apply_part(*this, ds, out, Part::Bar, tx_, tu_, tx2_, tu2_);
}

void StageBlock::apply_tilde(VecView ds, VecSpan out) const {
    apply_part(*this, ds, out, Part::Tilde, tx_, tu_, tx2_, tu2_);
}

namespace {

template <typename Apply>
Eigen::MatrixXd materialize(std::size_t n, Apply&& apply) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    Vec e(n, 0.0), col(n);
    for (std::size_t k = 0; k < n; ++k) {
        e[k] = 1.0;
        apply(VecView(e), VecSpan(col));
        for (std::size_t r = 0; r < n; ++r)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = col[r];
        e[k] = 0.0;
    }
    return m;
}

}  // namespace

Eigen::MatrixXd StageBlock::to_dense() const {
    return materialize(dim(), [this](VecView v, VecSpan o) { apply(v, o); });
}

Eigen::MatrixXd StageBlock::to_dense_bar() const {
    return materialize(dim(), [this](VecView v, VecSpan o) { apply_bar(v, o); });
}

Eigen::MatrixXd StageBlock::to_dense_tilde() const {
    return materialize(dim(), [this](VecView v, VecSpan o) { apply_tilde(v, o); });
}

// ---------------------------------------------------------------------------
// Free-function forms
// ---------------------------------------------------------------------------

Vec kkt_stage_residual(const OcpProblem& prob, std::size_t stage, VecView x_prev, VecView s,
                       VecView lambda_next, VecView u_reg) {
    StageBlock b(prob);
    b.assemble(prob, stage, s);
    Vec out(prob.stage_dim());
    b.residual(x_prev, lambda_next, u_reg, out);
    return out;
}

StageBlock stage_jacobian(const OcpProblem& prob, std::size_t stage, VecView, VecView s, VecView) {
    StageBlock b(prob);
    b.assemble(prob, stage, s);
    return b;
}

// ---------------------------------------------------------------------------
// KktEvaluator
// ---------------------------------------------------------------------------

KktEvaluator::KktEvaluator(const OcpProblem& prob)
    : prob_(&prob),
      blocks_(prob.n_stages(), StageBlock(prob)),
      residual_(prob.n_stages() * prob.stage_dim(), 0.0),
      zero_lambda_(prob.n_x(), 0.0) {}

double KktEvaluator::evaluate(const Trajectory& S, int threads) {
    OcpProblem& prob = const_cast<OcpProblem&>(*prob_);
    const std::size_t n = prob.n_stages();
    if (prob.reg_mode() == RegMode::CurrentIterate)
        for (std::size_t i = 0; i < n; ++i) prob.set_reg_reference(i, S.u(i));

    auto work = [&](std::size_t i) {
        blocks_[i].assemble(prob, i, S.stage(i));
        const VecView x_prev = i == 0 ? prob.initial_state() : S.x(i - 1);
        const VecView lambda_next = i + 1 < n ? S.lambda(i + 1) : VecView(zero_lambda_);
        blocks_[i].residual(x_prev, lambda_next, prob.reg_reference(i),
                            VecSpan(residual_).subspan(i * prob.stage_dim(), prob.stage_dim()));
    };

    if (threads > 1 && n > 1) {
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                try {
                    for (std::size_t i = static_cast<std::size_t>(t); i < n;
                         i += static_cast<std::size_t>(threads))
                        work(i);
                } catch (...) {
                    errors[static_cast<std::size_t>(t)] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    } else {
        for (std::size_t i = 0; i < n; ++i) work(i);
    }
    return inf_norm(residual_);
}

}  // namespace pdenmpc
