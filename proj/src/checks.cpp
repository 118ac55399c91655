#include "pdenmpc/checks.hpp"

#include <cstdio>

namespace pdenmpc {

HeatBench small_heat_bench(const HeatPlateParams& params, int grid_points,
                           std::vector<int> actuator_axis_indices, int n_stages, double horizon,
                           double gamma) {
    BenchConfig c;
    c.grid_points = grid_points;
    c.actuator_axis_indices = std::move(actuator_axis_indices);
    c.n_stages = n_stages;
    c.horizon = horizon;
    c.gamma = gamma;
    return build_bench(params, c);
}

double sor_fgs_step_gap(OcpProblem& prob, const Trajectory& S, StageSolveConfig lower) {
    Trajectory a = S, b = S;
    UpperLayerSolver sor(prob, {MethodKind::SOR, 1.0}, lower);
    UpperLayerSolver fgs(prob, {MethodKind::FGS, 1.0}, lower);
    sor.step(a);
    fgs.step(b);
    double gap = 0.0;
    for (std::size_t k = 0; k < a.data().size(); ++k)
        gap = std::max(gap, std::abs(a.data()[k] - b.data()[k]));
    return gap;
}

double single_stage_newton_gap(OcpProblem& prob, const Trajectory& S, StageSolveConfig lower) {
    const NewtonStep ref = newton_step(prob, S);
    const double scale = std::max(inf_norm(ref.dS), 1e-300);
    double worst = 0.0;
    for (MethodKind kind : {MethodKind::Jacobi, MethodKind::FGS, MethodKind::BGS, MethodKind::SOR,
                            MethodKind::SGS}) {
        UpperLayerSolver solver(prob, {kind, 1.0}, lower);
        KktEvaluator kkt(prob);
        kkt.evaluate(S);
        Vec dS(S.data().size());
        solver.direction(kkt, dS);
        for (std::size_t k = 0; k < dS.size(); ++k)
            worst = std::max(worst, std::abs(dS[k] - ref.dS[k]) / scale);
    }
    return worst;
}

double box_alpha_closed_form(const InputBoxConstraint& box, const Trajectory& S, VecView dS) {
    const std::size_t d = S.stage_dim(), nx = S.n_x();
    double alpha = 1.0;
    for (std::size_t i = 0; i < S.n_stages(); ++i) {
        const auto u = S.u(i);
        for (std::size_t m = 0; m < u.size(); ++m) {
            const double du = dS[i * d + nx + m];
            if (du > 0.0) alpha = std::min(alpha, 0.995 * (u[m] - box.lower()[m]) / du);
            if (du < 0.0) alpha = std::min(alpha, 0.995 * (box.upper()[m] - u[m]) / -du);
        }
    }
    return alpha;
}

std::string format_check(const CheckLine& c) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s %s value=%.6g threshold=%.6g", c.pass ? "PASS" : "FAIL",
                  c.name.c_str(), c.value, c.threshold);
    std::string s = buf;
    if (!c.note.empty()) s += " (" + c.note + ")";
    return s;
}

}  // namespace pdenmpc
