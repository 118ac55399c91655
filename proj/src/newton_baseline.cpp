#include "pdenmpc/newton_baseline.hpp"

namespace pdenmpc {

void apply_kkt_matrix(const KktEvaluator& kkt, VecView dS, VecSpan out) {
    const OcpProblem& prob = kkt.problem();
    const std::size_t n = prob.n_stages(), d = prob.stage_dim(), nx = prob.n_x(), nu = prob.n_u();
    for (std::size_t i = 0; i < n; ++i) {
        auto o = out.subspan(i * d, d);
        kkt.block(i).apply(dS.subspan(i * d, d), o);
        if (i > 0)
            for (std::size_t q = 0; q < nx; ++q) o[q] += dS[(i - 1) * d + q];
        if (i + 1 < n)
            for (std::size_t q = 0; q < nx; ++q) o[nx + nu + q] += dS[(i + 1) * d + nx + nu + q];
    }
}

NewtonSolver::NewtonSolver(OcpProblem& prob, int threads)
    : prob_(&prob), threads_(threads), kkt_(prob) {
    const auto n = prob.n_stages();
    const auto d = static_cast<Eigen::Index>(prob.stage_dim());
    dhat_.assign(n, Eigen::MatrixXd::Zero(d, d));
    lu_.resize(n);
    r_.resize(d);
    tmp_.resize(d);
    rhat_.assign(n * prob.stage_dim(), 0.0);
}

namespace {

void check_lu(const Eigen::PartialPivLU<Eigen::MatrixXd>& lu, std::size_t stage) {
    const auto& m = lu.matrixLU();
    double pmax = 0.0, pmin = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < m.rows(); ++k) {
        pmax = std::max(pmax, std::abs(m(k, k)));
        pmin = std::min(pmin, std::abs(m(k, k)));
    }
    if (!(pmin > 1e-14 * pmax))
        throw SingularError("eliminated block at stage " + std::to_string(stage + 1) +
                                " is singular",
                            stage);
}

}  // namespace

void NewtonSolver::direction(const KktEvaluator& kkt, VecSpan dS) {
    const OcpProblem& prob = kkt.problem();
    const std::size_t n = prob.n_stages(), nx = prob.n_x(), nu = prob.n_u();
    const std::size_t d = prob.stage_dim();
    const auto ex = static_cast<Eigen::Index>(nx);
    const auto el = static_cast<Eigen::Index>(nx + nu);
    const auto ed = static_cast<Eigen::Index>(d);

    // Backward elimination.
    for (std::size_t i = n; i-- > 0;) {
        dhat_[i] = kkt.block(i).to_dense();
        const auto k = kkt.stage_residual(i);
        std::copy(k.begin(), k.end(), rhat_.begin() + static_cast<std::ptrdiff_t>(i * d));
        if (i + 1 < n) {
            // Dhat_{i+1}^-1 applied to the first nx unit columns (M_L).
            coupling_ = lu_[i + 1].solve(Eigen::MatrixXd::Identity(ed, ex));
            dhat_[i].block(el, 0, ex, ex) -= coupling_.bottomRows(ex);
            Eigen::Map<const Eigen::VectorXd> rn(rhat_.data() + (i + 1) * d, ed);
            tmp_.noalias() = lu_[i + 1].solve(rn);
            for (std::size_t q = 0; q < nx; ++q)
                rhat_[i * d + nx + nu + q] -= tmp_[el + static_cast<Eigen::Index>(q)];
        }
        lu_[i].compute(dhat_[i]);
        check_lu(lu_[i], i);
    }
    // Forward substitution.
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t q = 0; q < d; ++q) r_[static_cast<Eigen::Index>(q)] = rhat_[i * d + q];
        if (i > 0)
            for (std::size_t q = 0; q < nx; ++q) r_[static_cast<Eigen::Index>(q)] -= dS[(i - 1) * d + q];
        tmp_.noalias() = lu_[i].solve(r_);
        for (std::size_t q = 0; q < d; ++q) dS[i * d + q] = tmp_[static_cast<Eigen::Index>(q)];
    }
}

double NewtonSolver::fill_in_fraction() const {
    const auto& m = dhat_.front();
    const double scale = m.cwiseAbs().maxCoeff();
    if (scale == 0.0) return 0.0;
    const auto nnz = (m.array().abs() > 1e-14 * scale).count();
    return static_cast<double>(nnz) / static_cast<double>(m.size());
}

double NewtonSolver::coupling_block_density() const {
    const auto& m = dhat_.front();
    const auto ex = static_cast<Eigen::Index>(prob_->n_x());
    const auto el = static_cast<Eigen::Index>(prob_->n_x() + prob_->n_u());
    const auto blk = m.block(el, 0, ex, ex);
    const double scale = blk.cwiseAbs().maxCoeff();
    if (scale == 0.0) return 0.0;
    const auto nnz = (blk.array().abs() > 1e-14 * scale).count();
    return static_cast<double>(nnz) / static_cast<double>(blk.size());
}

StepResult NewtonSolver::step(Trajectory& S) {
    StepResult res;
    res.residual = kkt_.evaluate(S, threads_);
    Vec dS(S.data().size());
    direction(kkt_, dS);
    res.alpha = fraction_to_boundary(*prob_, S, dS);
    auto data = S.data();
    for (std::size_t k = 0; k < data.size(); ++k) data[k] -= res.alpha * dS[k];
    return res;
}

SolveReport NewtonSolver::solve(Trajectory& S, double tol, int max_iters) {
    IterationOptions opts;
    opts.tol = tol;
    opts.max_iters = max_iters;
    opts.threads = threads_;
    return iterate_kkt(
        kkt_, S, [this](const KktEvaluator& kkt, VecSpan dS) { direction(kkt, dS); }, opts);
}

NewtonStep newton_step(OcpProblem& prob, const Trajectory& S) {
    NewtonSolver solver(prob);
    KktEvaluator kkt(prob);
    kkt.evaluate(S);
    NewtonStep out;
    out.dS.assign(S.data().size(), 0.0);
    solver.direction(kkt, out.dS);
    out.alpha = fraction_to_boundary(prob, S, out.dS);
    return out;
}

SolveReport newton_solve(OcpProblem& prob, Trajectory& S, double tol, int max_iters) {
    NewtonSolver solver(prob);
    return solver.solve(S, tol, max_iters);
}

}  // namespace pdenmpc
