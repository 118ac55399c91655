#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace pdenmpc;
using namespace pdenmpc::testing;

namespace {

// G(u) = 1 - u_0^2.
class UnitDisk final : public Constraint {
public:
    std::size_t size() const override { return 1; }
    void evaluate(std::size_t, VecView u, VecView, VecSpan g) const override { g[0] = 1.0 - u[0] * u[0]; }
    void jacobian_apply(std::size_t, VecView u, VecView, VecView, VecView du, VecSpan out) const override {
        out[0] = -2.0 * u[0] * du[0];
    }
    void add_jacobian_transpose(std::size_t, VecView u, VecView, VecView w, double scale, VecSpan,
                                VecSpan gu) const override {
        gu[0] += scale * -2.0 * u[0] * w[0];
    }
    void add_weighted_hessian(std::size_t, VecView, VecView, VecView wts, VecView, VecView du, double scale,
                              VecSpan, VecSpan out_u) const override {
        out_u[0] += scale * wts[0] * -2.0 * du[0];
    }
};

OcpProblem rod_with(std::shared_ptr<const Constraint> g) {
    auto cost = std::make_shared<QuadraticTrackingCost>(1, Vec{1.0}, Vec{1.0, 1.0});
    return OcpProblem(scalar_rod(), 1, 1.0, cost, std::move(g), 1.0, 0.0, RegMode::Fixed, Vec{0.0});
}

Trajectory rod_point(const OcpProblem& prob, double u0) {
    Trajectory S(prob);
    S.u(0)[0] = u0;
    S.u(0)[1] = 0.2;
    return S;
}

const MethodKind kAll[] = {MethodKind::Jacobi, MethodKind::FGS, MethodKind::BGS, MethodKind::SOR,
                           MethodKind::SGS};

}  // namespace

TEST(FractionToBoundary, AffineRatio) {
    OcpProblem prob = rod_with(std::make_shared<FirstInputPositive>());
    Trajectory S = rod_point(prob, 1.0);
    Vec dS(S.data().size(), 0.0);
    EXPECT_EQ(fraction_to_boundary(prob, S, dS), 1.0);
    dS[1] = 2.0;
    EXPECT_NEAR(fraction_to_boundary(prob, S, dS), 0.4975, 1e-12);
    dS[1] = 0.5;   // u -> 0.5 stays above 0.005
    EXPECT_EQ(fraction_to_boundary(prob, S, dS), 1.0);
    dS[1] = -3.0;  // moving away from the boundary
    EXPECT_EQ(fraction_to_boundary(prob, S, dS), 1.0);
}

TEST(FractionToBoundary, NonAffineBacktracking) {
    OcpProblem prob = rod_with(std::make_shared<UnitDisk>());
    Trajectory S = rod_point(prob, 0.0);
    Vec dS(S.data().size(), 0.0);
    dS[1] = -1.0;  // u0 -> alpha; 1 - alpha^2 >= 0.005 fails at 1, holds at 0.9
    EXPECT_DOUBLE_EQ(fraction_to_boundary(prob, S, dS), 0.9);
    dS[1] = -0.5;
    EXPECT_EQ(fraction_to_boundary(prob, S, dS), 1.0);
}

TEST(FractionToBoundary, BoxMatchesClosedForm) {
    auto b = tiny_heat(4);
    Trajectory S = random_point(b, 3);
    Vec dS = random_vec(S.data().size(), 4, 300.0);
    const double a = fraction_to_boundary(*b.prob, S, dS);
    EXPECT_LT(a, 1.0);
    EXPECT_NEAR(a, box_alpha_closed_form(*b.box, S, dS), 1e-12);
}

TEST(UpperLayer, SingleStageMethodsEqualNewton) {
    for (unsigned seed : {1u, 2u, 3u}) {
        auto b = tiny_heat(1);
        Trajectory S = random_point(b, seed);
        EXPECT_LE(single_stage_newton_gap(*b.prob, S), 1e-12);
    }
}

TEST(UpperLayer, SorWithUnitOmegaIsFgsBitForBit) {
    auto b = tiny_heat(4);
    Trajectory S = random_point(b, 9);
    EXPECT_EQ(sor_fgs_step_gap(*b.prob, S), 0.0);
    EXPECT_EQ(sor_fgs_step_gap(*b.prob, S, {1, 1, StageSolveMode::Exact}), 0.0);
}

TEST(UpperLayer, LinearQuadraticJacobiFixedPointIsNewtonSolution) {
    OcpProblem prob = scalar_lq(3, 3.0, 0.0);
    Trajectory ref = Trajectory::initial_guess(prob, Vec{0.0, 0.0});
    newton_solve(prob, ref, 1e-14, 5);
    for (MethodKind k : kAll) {
        Trajectory S = Trajectory::initial_guess(prob, Vec{0.0, 0.0});
        UpperLayerSolver solver(prob, {k, 1.0}, {1, 1, StageSolveMode::Exact});
        const SolveReport rep = solver.solve(S, 1e-13, 500);
        EXPECT_EQ(rep.termination, Termination::Converged) << to_string(k);
        EXPECT_LE(max_abs_diff(S.data(), ref.data()), 1e-10) << to_string(k);
    }
}

TEST(UpperLayer, LooseToleranceReturnsImmediately) {
    auto b = tiny_heat(3);
    Trajectory S = random_point(b, 2);
    const Trajectory before = S;
    UpperLayerSolver solver(*b.prob, {MethodKind::SGS, 1.0});
    const SolveReport rep = solver.solve(S, 1e300, 10);
    EXPECT_EQ(rep.iterations, 0);
    EXPECT_EQ(rep.termination, Termination::Converged);
    EXPECT_EQ(max_abs_diff(S.data(), before.data()), 0.0);
}

TEST(UpperLayer, SolutionIsAFixedPoint) {
    OcpProblem prob = scalar_lq(4, 4.0, 0.0);
    Trajectory S = Trajectory::initial_guess(prob, Vec{0.0, 0.0});
    newton_solve(prob, S, 1e-14, 5);
    for (MethodKind k : kAll) {
        Trajectory T = S;
        UpperLayerSolver solver(prob, {k, 1.0}, {1, 1, StageSolveMode::Exact});
        const StepResult r = solver.step(T);
        EXPECT_EQ(r.alpha, 1.0);
        EXPECT_LE(max_abs_diff(T.data(), S.data()), 1e-13) << to_string(k);
    }
}

TEST(UpperLayer, StepsKeepTheBoundaryFraction) {
    for (MethodKind k : kAll) {
        auto b = tiny_heat(5, 0.5, 7, {1, 5}, 25.0);
        Trajectory S = Trajectory::initial_guess(*b.prob, b.input_midpoint());
        UpperLayerSolver solver(*b.prob, {k, 1.0});
        const SolveReport rep = solver.solve(S, 1e-6, 60);
        EXPECT_GT(rep.iterations, 0);
        EXPECT_EQ(rep.boundary_violations, 0u);
        EXPECT_GE(rep.min_boundary_ratio, kBoundaryFraction);
        for (std::size_t i = 0; i < S.n_stages(); ++i)
            for (double u : S.u(i)) {
                EXPECT_GT(u, 300.0);
                EXPECT_LT(u, 700.0);
            }
    }
}

TEST(UpperLayer, ParallelJacobiIsBitIdentical) {
    auto b = tiny_heat(6);
    Trajectory A = random_point(b, 5), B = A;
    UpperLayerSolver seq(*b.prob, {MethodKind::Jacobi, 1.0}, {}, 0);
    UpperLayerSolver par(*b.prob, {MethodKind::Jacobi, 1.0}, {}, 4);
    for (int k = 0; k < 4; ++k) {
        seq.step(A);
        par.step(B);
    }
    EXPECT_EQ(max_abs_diff(A.data(), B.data()), 0.0);
}

TEST(UpperLayer, WarmStartNeedsFewerIterations) {
    auto b = tiny_heat(10, 0.5, 7, {1, 5}, 50.0);
    const double tol = 1e-4;
    Trajectory S = Trajectory::initial_guess(*b.prob, b.input_midpoint());
    UpperLayerSolver solver(*b.prob, {MethodKind::FGS, 1.0});
    ASSERT_EQ(solver.solve(S, tol, 200).termination, Termination::Converged);
    Vec x1 = plant_step(*b.sys, b.prob->initial_state(), S.u(0), 5.0, 1.0);
    b.prob->set_initial_state(x1);
    set_references(b, 5.0);
    Trajectory warm = S;
    warm.shift();
    Trajectory cold = Trajectory::initial_guess(*b.prob, b.input_midpoint());
    const int iw = solver.solve(warm, tol, 200).iterations;
    const int ic = solver.solve(cold, tol, 200).iterations;
    EXPECT_LT(iw, ic);
}

TEST(UpperLayer, DivergenceGuardStopsGrowingResidual) {
    OcpProblem prob = scalar_lq(3, 3.0, 0.0);
    Trajectory S = Trajectory::initial_guess(prob, Vec{0.0, 0.0});
    NewtonSolver newton(prob);
    KktEvaluator kkt(prob);
    auto bad = [&](const KktEvaluator& k, VecSpan dS) {
        newton.direction(k, dS);
        for (double& v : dS) v *= -9.0;
    };
    const SolveReport rep = iterate_kkt(kkt, S, bad, {1e-10, 100, 0, 1e4});
    EXPECT_TRUE(rep.diverged);
    EXPECT_EQ(rep.termination, Termination::MaxIters);
    EXPECT_LT(rep.iterations, 10);
}

TEST(UpperLayer, ObservedRateMatchesSpectralRadius) {
    // gamma = 0 so the splitting's diagonal is the exact Jacobian diagonal.
    auto b = tiny_heat(4, 0.0, 5, {1, 3}, 20.0);
    OcpProblem& prob = *b.prob;
    Trajectory star = Trajectory::initial_guess(prob, b.input_midpoint());
    ASSERT_EQ(newton_solve(prob, star, 1e-11, 50).termination, Termination::Converged);
    for (MethodKind k : {MethodKind::Jacobi, MethodKind::FGS}) {
        const double rho = convergence_factor(prob, star, {k, 1.0}).oracle_rho.value();
        ASSERT_LT(rho, 0.95);
        ASSERT_GT(rho, 1e-3);
        Trajectory S = star;
        Vec p = random_vec(S.data().size(), 17, 1e-2);
        for (std::size_t j = 0; j < p.size(); ++j) S.data()[j] += p[j];
        UpperLayerSolver solver(prob, {k, 1.0}, {1, 1, StageSolveMode::Exact});
        auto err = [&] { return max_abs_diff(S.data(), star.data()); };
        // Least-squares slope of log(error) after a short transient, above
        // the round-off floor.
        std::vector<double> its, logs;
        for (int it = 1; it <= 40; ++it) {
            solver.step(S);
            const double e = err();
            if (it > 4 && e > 1e-9) {
                its.push_back(it);
                logs.push_back(std::log(e));
            }
        }
        ASSERT_GE(its.size(), 6u);
        const double n = static_cast<double>(its.size());
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t j = 0; j < its.size(); ++j) {
            sx += its[j];
            sy += logs[j];
            sxx += its[j] * its[j];
            sxy += its[j] * logs[j];
        }
        const double rate = std::exp((n * sxy - sx * sy) / (n * sxx - sx * sx));
        EXPECT_NEAR(rate, rho, 0.1 * rho) << to_string(k);
    }
}

TEST(UpperLayer, MethodNamesRoundTrip) {
    for (MethodKind k : kAll) EXPECT_EQ(method_from_string(to_string(k)), k);
    EXPECT_THROW(method_from_string("gauss"), InvalidArgument);
    EXPECT_THROW((UpperMethod{MethodKind::SOR, 0.0}.validate()), InvalidArgument);
}
