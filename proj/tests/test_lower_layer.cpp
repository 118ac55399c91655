#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace pdenmpc;
using namespace pdenmpc::testing;

namespace {

struct Assembled {
    HeatBench bench;
    Trajectory S;
    std::unique_ptr<KktEvaluator> kkt;
};

Assembled assembled(int grid, std::vector<int> act, int n, double T, unsigned seed) {
    Assembled a{tiny_heat(n, 0.5, grid, std::move(act), T), {}, nullptr};
    a.S = random_point(a.bench, seed);
    a.kkt = std::make_unique<KktEvaluator>(*a.bench.prob);
    a.kkt->evaluate(a.S);
    return a;
}

Eigen::MatrixXd dense_Fx(const StageBlock& blk) {
    const Eigen::Index nx = blk.n_x();
    return blk.to_dense().topLeftCorner(nx, nx);
}

double rel_err(VecView a, VecView b) { return max_abs_diff(a, b) / inf_norm(b); }

// Damped wave with state-dependent damping on a 4x4 grid.
OcpProblem wave_problem(double T) {
    PdeModel m;
    m.dim = 2;
    m.coeff_a = PointFunction::constant(1.0);
    m.coeff_b = PointFunction::of_state([](double w) { return 1.0 + 0.2 * w * w; },
                                        [](double w) { return 0.4 * w; }, [](double) { return 0.4; });
    m.coeff_c = PointFunction::constant(0.05);
    auto sys = discretize(m, SpatialGrid(2, {4, 4}, {1.0, 1.0}, {5, 10}));
    auto cost = std::make_shared<QuadraticTrackingCost>(2, Vec(sys->n_x(), 1.0), Vec(2, 0.1));
    return OcpProblem(sys, 2, T, cost, nullptr, 1.0, 0.5, RegMode::Fixed, Vec(sys->n_x(), 0.1));
}

}  // namespace

TEST(StageSolve, ZeroRightHandSideGivesZero) {
    auto a = assembled(5, {1, 3}, 2, 10.0, 1);
    Vec rhs(a.bench.prob->stage_dim(), 0.0);
    EXPECT_EQ(inf_norm(solve_stage(a.kkt->block(0), rhs)), 0.0);
    EXPECT_EQ(inf_norm(solve_stage(a.kkt->block(0), rhs, {2, 2, StageSolveMode::Exact})), 0.0);
}

TEST(StageSolve, ExactModeMatchesDenseFactorization) {
    auto a = assembled(5, {1, 3}, 2, 10.0, 2);
    const auto& blk = a.kkt->block(1);
    Vec rhs = random_vec(blk.dim(), 3);
    Vec z = solve_stage(blk, rhs, {2, 2, StageSolveMode::Exact});
    Eigen::VectorXd ref = blk.to_dense().fullPivLu().solve(as_eigen(rhs));
    EXPECT_LE((as_eigen(z) - ref).cwiseAbs().maxCoeff(), 1e-12 * ref.cwiseAbs().maxCoeff());
    Vec back(blk.dim());
    blk.apply(z, back);
    EXPECT_LE(max_abs_diff(back, rhs), 1e-10 * (1 + inf_norm(rhs)));
}

TEST(StageSolve, IterativeErrorShrinksWithSweeps) {
    auto a = assembled(13, {1, 4, 8, 11}, 20, 100.0, 3);
    for (std::size_t i : {0u, 9u, 19u}) {
        const auto& blk = a.kkt->block(i);
        Vec rhs(a.kkt->stage_residual(i).begin(), a.kkt->stage_residual(i).end());
        Vec ref = solve_stage(blk, rhs, {1, 1, StageSolveMode::Exact});
        double prev = std::numeric_limits<double>::infinity();
        for (int k : {1, 2, 3, 5, 8, 12}) {
            const double e = rel_err(solve_stage(blk, rhs, {k, k}), ref);
            EXPECT_LT(e, prev) << "stage " << i << " sweeps " << k;
            prev = e;
        }
        EXPECT_LE(prev, 1e-6);
        // Default 2/2: the error is bounded but well above the exact solve.
        EXPECT_LE(rel_err(solve_stage(blk, rhs), ref), 0.1);
    }
}

TEST(StageSolve, FxSweepsFollowJacobiResidualRecursion) {
    // After v0 = D^-1 b and k sweeps the residual is exactly (-O D^-1)^(k+1) b.
    auto a = assembled(13, {1, 4, 8, 11}, 20, 100.0, 4);
    const auto& blk = a.kkt->block(5);
    const Eigen::MatrixXd F = dense_Fx(blk);
    const Eigen::VectorXd d = F.diagonal();
    Eigen::MatrixXd O = F;
    O.diagonal().setZero();
    const Eigen::MatrixXd R = -O * d.cwiseInverse().asDiagonal();
    const Vec b = random_vec(blk.n_x(), 5);
    for (int k : {1, 2, 4}) {
        StageSolver s(*a.bench.prob, {k, 2});
        s.factor(blk);
        Vec v(blk.n_x()), Fv(blk.n_x());
        s.solve_Fx(b, v);
        blk.apply_Fx(v, Fv);
        Eigen::VectorXd expected = as_eigen(b);
        for (int j = 0; j <= k; ++j) expected = R * expected;
        const Eigen::VectorXd got = as_eigen(b) - as_eigen(Fv);
        EXPECT_LE((got - expected).cwiseAbs().maxCoeff(), 1e-12 * as_eigen(b).cwiseAbs().maxCoeff());
        // Row dominance bounds the per-sweep contraction.
        const double ratio = R.cwiseAbs().rowwise().sum().maxCoeff();
        EXPECT_LT(ratio, 1.0);
        EXPECT_LE(got.cwiseAbs().maxCoeff(), std::pow(ratio, k + 1) * inf_norm(b) * (1 + 1e-9));
    }
}

TEST(StageSolve, TransposedSolveMatchesDense) {
    auto a = assembled(7, {1, 5}, 3, 15.0, 6);
    const auto& blk = a.kkt->block(2);
    StageSolver s(*a.bench.prob, {60, 2});
    s.factor(blk);
    const Vec b = random_vec(blk.n_x(), 7);
    Vec v(blk.n_x());
    s.solve_FxT(b, v);
    Eigen::VectorXd ref = dense_Fx(blk).transpose().partialPivLu().solve(as_eigen(b));
    EXPECT_LE((as_eigen(v) - ref).cwiseAbs().maxCoeff(), 1e-10 * ref.cwiseAbs().maxCoeff());
}

TEST(StageSolve, DiagonalStateBlockSolvesInOneSweep) {
    // c = 0, d = 0: f = 0 and F_x = -I.
    PdeModel m;
    m.dim = 2;
    m.coeff_c = PointFunction::constant(0.0);
    auto sys = discretize(m, SpatialGrid(2, {4, 4}, {1.0, 1.0}, {5}));
    auto cost = std::make_shared<QuadraticTrackingCost>(1, Vec(sys->n_x(), 2.0), Vec(1, 1.0));
    OcpProblem prob(sys, 1, 3.0, cost, nullptr, 1.0, 0.0, RegMode::Fixed, Vec(sys->n_x(), 0.0));
    StageBlock blk = stage_jacobian(prob, 0, prob.initial_state(), Vec(prob.stage_dim(), 0.3),
                                    Vec(sys->n_x(), 0.0));
    StageSolver s(prob, {1, 1});
    s.factor(blk);
    const std::size_t n = sys->n_x();
    Vec b4 = random_vec(n, 1), b5 = random_vec(n, 2), v4(n), v5(n);
    s.inner_solve(b4, b5, v4, v5);
    for (std::size_t j = 0; j < n; ++j) {
        EXPECT_DOUBLE_EQ(v5[j], -b4[j]);
        // A_xx = h Q = 6 I
        EXPECT_NEAR(v4[j], -(b5[j] - 6.0 * v5[j]), 1e-14);
    }
}

TEST(StageSolve, InnerSolveIsLinear) {
    auto a = assembled(5, {1, 3}, 2, 10.0, 8);
    StageSolver s(*a.bench.prob);
    s.factor(a.kkt->block(0));
    const std::size_t n = a.bench.prob->n_x();
    Vec b4 = random_vec(n, 1), b5 = random_vec(n, 2), z(n, 0.0);
    Vec p4(n), p5(n), q4(n), q5(n), r4(n), r5(n);
    s.inner_solve(b4, z, p4, p5);
    s.inner_solve(z, b5, q4, q5);
    s.inner_solve(b4, b5, r4, r5);
    for (std::size_t j = 0; j < n; ++j) {
        EXPECT_NEAR(p4[j] + q4[j], r4[j], 1e-12 * (1 + std::abs(r4[j])));
        EXPECT_NEAR(p5[j] + q5[j], r5[j], 1e-12 * (1 + std::abs(r5[j])));
    }
}

TEST(StageSolve, SecondOrderSystemConvergesToExactSolve) {
    OcpProblem prob = wave_problem(0.2);
    Trajectory S(prob);
    Vec vals = random_vec(S.data().size(), 3, 0.3);
    std::copy(vals.begin(), vals.end(), S.data().begin());
    KktEvaluator kkt(prob);
    kkt.evaluate(S);
    const auto& blk = kkt.block(0);
    Vec rhs = random_vec(blk.dim(), 4);
    Vec ref = solve_stage(blk, rhs, {1, 1, StageSolveMode::Exact});
    EXPECT_LE(rel_err(solve_stage(blk, rhs, {40, 40}), ref), 1e-10);
    EXPECT_LT(rel_err(solve_stage(blk, rhs, {4, 4}), ref), rel_err(solve_stage(blk, rhs, {1, 1}), ref));
}

TEST(StageSolve, RejectsBadConfiguration) {
    EXPECT_THROW((StageSolveConfig{0, 2}.validate()), InvalidArgument);
    EXPECT_THROW((StageSolveConfig{2, 0}.validate()), InvalidArgument);
    StageSolver s;
    Vec b(3), v(3);
    EXPECT_THROW(s.solve_Fx(b, v), InvalidArgument);
}

TEST(JacobiSolve, DominantSystemConverges) {
    Eigen::Matrix3d A;
    A << 4, 1, -1, 2, 5, 1, 0.5, -1, 3;
    const Vec diag{4, 5, 3};
    auto off = [&](VecView v, VecSpan out) {
        Eigen::Matrix3d O = A;
        O.diagonal().setZero();
        Eigen::Map<Eigen::Vector3d>(out.data()) = O * Eigen::Map<const Eigen::Vector3d>(v.data());
    };
    const Vec b{1, -2, 3};
    Vec v = jacobi_linear_solve(diag, off, b, 30);
    Eigen::Vector3d ref = A.partialPivLu().solve(Eigen::Vector3d(1, -2, 3));
    EXPECT_LE((Eigen::Map<Eigen::Vector3d>(v.data()) - ref).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(JacobiSolve, NoCouplingIsExact) {
    const Vec diag{2, -4, 8}, b{1, 2, 3};
    Vec v = jacobi_linear_solve(diag, [](VecView, VecSpan o) { fill_zero(o); }, b, 1);
    EXPECT_EQ(v[0], 0.5);
    EXPECT_EQ(v[1], -0.5);
    EXPECT_EQ(v[2], 0.375);
}

TEST(JacobiSolve, ResidualContractsBySpectralRadius) {
    // Constant diagonal and symmetric coupling: the 2-norm of the residual
    // iteration equals the spectral radius.
    const int n = 6;
    Eigen::MatrixXd O = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i + 1 < n; ++i) O(i, i + 1) = O(i + 1, i) = -1.0;
    O(0, n - 1) = O(n - 1, 0) = 0.5;
    const Eigen::MatrixXd A = 4.0 * Eigen::MatrixXd::Identity(n, n) + O;
    const double rho = dense_spectral_radius(O / 4.0);
    const Vec diag(n, 4.0), b = random_vec(n, 9);
    auto off = [&](VecView v, VecSpan out) {
        Eigen::Map<Eigen::VectorXd>(out.data(), n) = O * as_eigen(v);
    };
    double prev = -1.0;
    for (int k = 1; k <= 8; ++k) {
        Vec v = jacobi_linear_solve(diag, off, b, k);
        const double r = (as_eigen(b) - A * as_eigen(v)).norm();
        if (prev > 0) {
            EXPECT_LE(r, rho * prev * (1 + 1e-9));
        }
        prev = r;
    }
}

TEST(JacobiSolve, ZeroDiagonalIsSingular) {
    const Vec diag{1, 0, 2}, b{1, 1, 1};
    try {
        jacobi_linear_solve(diag, [](VecView, VecSpan o) { fill_zero(o); }, b, 2);
        FAIL() << "expected SingularError";
    } catch (const SingularError& e) {
        EXPECT_EQ(e.index(), 1u);
    }
}
