#pragma once

#include "pdenmpc/heat_bench.hpp"
#include "pdenmpc/spectral_analysis.hpp"

#include <string>

namespace pdenmpc {

/// Heat-plate instance on a small grid with the given actuator axis indices.
HeatBench small_heat_bench(const HeatPlateParams& params, int grid_points,
                           std::vector<int> actuator_axis_indices, int n_stages, double horizon,
                           double gamma);

/// Max |difference| between one SOR(omega = 1) step and one FGS step from S
/// (0 means bit-identical).
double sor_fgs_step_gap(OcpProblem& prob, const Trajectory& S, StageSolveConfig lower = {});

/// Largest relative inf-norm gap between the direction of every splitting
/// method and the Newton direction at S. Meant for N = 1 problems.
double single_stage_newton_gap(OcpProblem& prob, const Trajectory& S,
                               StageSolveConfig lower = {1, 1, StageSolveMode::Exact});

/// Step length of the fraction-to-the-boundary rule from its closed form for
/// an input box, computed independently of the solver.
double box_alpha_closed_form(const InputBoxConstraint& box, const Trajectory& S, VecView dS);

struct CheckLine {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    bool pass = false;
    std::string note;
};

std::string format_check(const CheckLine& c);

}  // namespace pdenmpc
