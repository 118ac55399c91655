#include "pdenmpc/spectral_analysis.hpp"

#include <Eigen/Eigenvalues>

#include <cstdio>
#include <ostream>
#include <random>

namespace pdenmpc {

IterationMatrixOperator::IterationMatrixOperator(const KktEvaluator& kkt, UpperMethod method,
                                                 DiagonalSplit split)
    : method_(method) {
    method_.validate();
    const OcpProblem& prob = kkt.problem();
    n_ = prob.n_stages();
    d_ = prob.stage_dim();
    nx_ = prob.n_x();
    nu_ = prob.n_u();
    dense_.reserve(n_);
    lu_.reserve(n_);
    for (std::size_t i = 0; i < n_; ++i) {
        dense_.push_back(split == DiagonalSplit::Full ? kkt.block(i).to_dense()
                                                      : kkt.block(i).to_dense_bar());
        lu_.emplace_back(dense_.back());
        const auto& m = lu_.back().matrixLU();
        double pmax = 0.0, pmin = std::numeric_limits<double>::infinity();
        for (Eigen::Index k = 0; k < m.rows(); ++k) {
            pmax = std::max(pmax, std::abs(m(k, k)));
            pmin = std::min(pmin, std::abs(m(k, k)));
        }
        if (!(pmin > 1e-14 * pmax))
            throw SingularError("stage " + std::to_string(i + 1) + " diagonal block is singular", i);
    }
    t1_.assign(size(), 0.0);
    t2_.assign(size(), 0.0);
    t3_.assign(size(), 0.0);
    eb_.resize(static_cast<Eigen::Index>(d_));
    ez_.resize(static_cast<Eigen::Index>(d_));
}

void IterationMatrixOperator::apply_L(VecView v, VecSpan out) const {
    fill_zero(out);
    for (std::size_t i = 1; i < n_; ++i)
        for (std::size_t q = 0; q < nx_; ++q) out[i * d_ + q] = v[(i - 1) * d_ + q];
}

void IterationMatrixOperator::apply_U(VecView v, VecSpan out) const {
    fill_zero(out);
    const std::size_t off = nx_ + nu_;
    for (std::size_t i = 0; i + 1 < n_; ++i)
        for (std::size_t q = 0; q < nx_; ++q) out[i * d_ + off + q] = v[(i + 1) * d_ + off + q];
}

void IterationMatrixOperator::apply_D(VecView v, VecSpan out) const {
    for (std::size_t i = 0; i < n_; ++i) {
        Eigen::Map<const Eigen::VectorXd> vi(v.data() + i * d_, static_cast<Eigen::Index>(d_));
        Eigen::Map<Eigen::VectorXd> oi(out.data() + i * d_, static_cast<Eigen::Index>(d_));
        oi.noalias() = dense_[i] * vi;
    }
}

void IterationMatrixOperator::solve_diag(VecView b, VecSpan z) const {
    for (std::size_t i = 0; i < n_; ++i) {
        Eigen::Map<const Eigen::VectorXd> bi(b.data() + i * d_, static_cast<Eigen::Index>(d_));
        Eigen::Map<Eigen::VectorXd> zi(z.data() + i * d_, static_cast<Eigen::Index>(d_));
        zi = lu_[i].solve(bi);
    }
}

void IterationMatrixOperator::solve_lower(VecView b, double omega, VecSpan z) const {
    for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t q = 0; q < d_; ++q) eb_[static_cast<Eigen::Index>(q)] = b[i * d_ + q];
        if (i > 0)
            for (std::size_t q = 0; q < nx_; ++q)
                eb_[static_cast<Eigen::Index>(q)] -= omega * z[(i - 1) * d_ + q];
        ez_ = lu_[i].solve(eb_);
        for (std::size_t q = 0; q < d_; ++q) z[i * d_ + q] = ez_[static_cast<Eigen::Index>(q)];
    }
}

void IterationMatrixOperator::solve_upper(VecView b, VecSpan z) const {
    const std::size_t off = nx_ + nu_;
    for (std::size_t i = n_; i-- > 0;) {
        for (std::size_t q = 0; q < d_; ++q) eb_[static_cast<Eigen::Index>(q)] = b[i * d_ + q];
        if (i + 1 < n_)
            for (std::size_t q = 0; q < nx_; ++q)
                eb_[static_cast<Eigen::Index>(off + q)] -= z[(i + 1) * d_ + off + q];
        ez_ = lu_[i].solve(eb_);
        for (std::size_t q = 0; q < d_; ++q) z[i * d_ + q] = ez_[static_cast<Eigen::Index>(q)];
    }
}

void IterationMatrixOperator::apply(VecView v, VecSpan out) const {
    switch (method_.kind) {
        case MethodKind::Jacobi:
            apply_L(v, t1_);
            apply_U(v, t2_);
            for (std::size_t k = 0; k < t1_.size(); ++k) t1_[k] += t2_[k];
            solve_diag(t1_, out);
            break;
        case MethodKind::FGS:
            apply_U(v, t1_);
            solve_lower(t1_, 1.0, out);
            break;
        case MethodKind::BGS:
            apply_L(v, t1_);
            solve_upper(t1_, out);
            break;
        case MethodKind::SOR: {
            const double w = method_.omega;
            apply_U(v, t1_);
            apply_D(v, t2_);
            for (std::size_t k = 0; k < t1_.size(); ++k) t1_[k] = w * t1_[k] + (w - 1.0) * t2_[k];
            solve_lower(t1_, w, out);
            break;
        }
        case MethodKind::SGS:
            apply_L(v, t1_);
            solve_upper(t1_, t2_);
            apply_U(t2_, t3_);
            solve_lower(t3_, 1.0, out);
            break;
    }
}

Eigen::MatrixXd IterationMatrixOperator::to_dense() const {
    const std::size_t n = size();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    Vec e(n, 0.0), col(n);
    for (std::size_t k = 0; k < n; ++k) {
        e[k] = 1.0;
        apply(e, col);
        for (std::size_t r = 0; r < n; ++r)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = col[r];
        e[k] = 0.0;
    }
    return m;
}

double dense_spectral_radius(const Eigen::MatrixXd& m) {
    if (m.size() == 0) return 0.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

double estimate_spectral_radius(const IterationMatrixOperator& op, int iters, int seeds,
                                unsigned seed) {
    const std::size_t n = op.size();
    if (n == 0) return 0.0;
    const int m = std::max(1, std::min<int>(iters, static_cast<int>(n)));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd V(static_cast<Eigen::Index>(n), m + 1);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m + 1, m);
    Vec w(n);
    double best = 0.0;
    for (int s = 0; s < std::max(1, seeds); ++s) {
        Eigen::VectorXd v0(static_cast<Eigen::Index>(n));
        for (auto& x : v0) x = normal(rng);
        v0 /= v0.norm();
        // Power steps first: non-normal transients otherwise leave Ritz values
        // outside the spectrum.
        for (int p = 0; p < m; ++p) {
            op.apply(VecView(v0.data(), n), w);
            const Eigen::Map<Eigen::VectorXd> wm(w.data(), static_cast<Eigen::Index>(n));
            const double nw = wm.norm();
            if (!(nw > 0.0)) break;
            v0 = wm / nw;
        }
        V.col(0) = v0;
        H.setZero();
        int k = 0;
        for (; k < m; ++k) {
            op.apply(VecView(V.col(k).data(), n), w);
            Eigen::Map<Eigen::VectorXd> wm(w.data(), static_cast<Eigen::Index>(n));
            const double wnorm = wm.norm();
            for (int pass = 0; pass < 2; ++pass)
                for (int j = 0; j <= k; ++j) {
                    const double c = V.col(j).dot(wm);
                    H(j, k) += c;
                    wm -= c * V.col(j);
                }
            const double hn = wm.norm();
            H(k + 1, k) = hn;
            if (hn <= 1e-12 * std::max(wnorm, 1e-300)) {
                ++k;
                break;
            }
            V.col(k + 1) = wm / hn;
        }
        const double r = dense_spectral_radius(H.topLeftCorner(k, k));
        best = std::max(best, r);
    }
    return best;
}

FactorEstimate convergence_factor(const IterationMatrixOperator& op, const FactorOptions& opts) {
    FactorEstimate est;
    est.rho = estimate_spectral_radius(op, opts.iters, opts.seeds, opts.seed);
    if (op.size() <= opts.oracle_limit) est.oracle_rho = dense_spectral_radius(op.to_dense());
    return est;
}

FactorEstimate convergence_factor(OcpProblem& prob, const Trajectory& S, UpperMethod method,
                                  const FactorOptions& opts) {
    KktEvaluator kkt(prob);
    kkt.evaluate(S);
    return convergence_factor(IterationMatrixOperator(kkt, method), opts);
}

double verify_lemma_nilpotent(const KktEvaluator& kkt, int applications, int vectors,
                              unsigned seed, DiagonalSplit split) {
    IterationMatrixOperator op(kkt, {MethodKind::Jacobi, 1.0}, split);
    const int n = static_cast<int>(kkt.problem().n_stages());
    const int k = applications > 0 ? applications : 2 * n - 1;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Vec v(op.size()), w(op.size());
    double worst = 0.0;
    for (int t = 0; t < vectors; ++t) {
        for (auto& x : v) x = normal(rng);
        const double nv = norm2(v);
        for (auto& x : v) x /= nv;
        for (int a = 0; a < k; ++a) {
            op.apply(v, w);
            v.swap(w);
        }
        worst = std::max(worst, norm2(v));
    }
    return worst;
}

GsSquaredResult verify_gs_squared(const KktEvaluator& kkt) {
    GsSquaredResult r;
    r.rho_jacobi = dense_spectral_radius(IterationMatrixOperator(kkt, {MethodKind::Jacobi, 1.0}).to_dense());
    r.rho_fgs = dense_spectral_radius(IterationMatrixOperator(kkt, {MethodKind::FGS, 1.0}).to_dense());
    r.rho_bgs = dense_spectral_radius(IterationMatrixOperator(kkt, {MethodKind::BGS, 1.0}).to_dense());
    return r;
}

void write_factor_csv(const std::vector<FactorRow>& rows, std::ostream& out) {
    out << "sim_time_s,method,gamma,horizon_T,rho_estimate,oracle_rho\n";
    char buf[64];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.12g", r.sim_time_s);
        out << buf << ',' << r.method << ',';
        std::snprintf(buf, sizeof buf, "%.12g", r.gamma);
        out << buf << ',';
        std::snprintf(buf, sizeof buf, "%.12g", r.horizon);
        out << buf << ',';
        std::snprintf(buf, sizeof buf, "%.12g", r.rho);
        out << buf << ',';
        if (r.oracle_rho) {
            std::snprintf(buf, sizeof buf, "%.12g", *r.oracle_rho);
            out << buf;
        }
        out << '\n';
    }
}

}  // namespace pdenmpc
