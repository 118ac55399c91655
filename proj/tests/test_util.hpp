#pragma once

#include "pdenmpc/checks.hpp"

#include <Eigen/Dense>
#include <random>

namespace pdenmpc::testing {

// G(u) = u_0, a single affine constraint on the first input.
class FirstInputPositive final : public Constraint {
public:
    std::size_t size() const override { return 1; }
    bool affine() const override { return true; }
    void evaluate(std::size_t, VecView u, VecView, VecSpan g) const override { g[0] = u[0]; }
    void jacobian_apply(std::size_t, VecView, VecView, VecView, VecView du, VecSpan out) const override {
        out[0] = du[0];
    }
    void add_jacobian_transpose(std::size_t, VecView, VecView, VecView w, double scale, VecSpan,
                                VecSpan gu) const override {
        gu[0] += scale * w[0];
    }
    void add_weighted_hessian(std::size_t, VecView, VecView, VecView, VecView, VecView, double, VecSpan,
                              VecSpan) const override {}
};

// 1-D rod with 3 points, side 2 and actuators at both ends: the single state
// obeys x' = u0 + u2 - 2x.
inline std::shared_ptr<const DiscretizedSystem> scalar_rod() {
    PdeModel m;
    m.dim = 1;
    m.side = {2.0, 1.0};
    return discretize(m, SpatialGrid(1, {3, 1}, {2.0, 1.0}, {0, 2}));
}

inline OcpProblem scalar_lq(std::size_t n_stages, double horizon, double gamma,
                            RegMode mode = RegMode::Fixed, double q = 1.0, double r = 0.5) {
    auto cost = std::make_shared<QuadraticTrackingCost>(n_stages, Vec{q}, Vec{r, r});
    cost->set_reference_all(Vec{1.0}, Vec{0.5, 0.5});
    return OcpProblem(scalar_rod(), n_stages, horizon, cost, nullptr, 1.0, gamma, mode, Vec{0.0});
}

inline HeatBench tiny_heat(int n_stages = 3, double gamma = 0.5, int grid = 5,
                           std::vector<int> act = {1, 3}, double horizon = 15.0) {
    HeatBench b = small_heat_bench(HeatPlateParams{}, grid, std::move(act), n_stages, horizon, gamma);
    set_references(b, 0.0);
    return b;
}

inline Trajectory random_point(const HeatBench& b, unsigned seed, double lambda_scale = 1.0) {
    std::mt19937_64 rng(seed);
    return random_interior_point(b, rng, lambda_scale);
}

inline Vec random_vec(std::size_t n, unsigned seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, scale);
    Vec v(n);
    for (double& x : v) x = nd(rng);
    return v;
}

inline double max_abs_diff(VecView a, VecView b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
    return m;
}

inline Eigen::Map<const Eigen::VectorXd> as_eigen(VecView v) {
    return {v.data(), static_cast<Eigen::Index>(v.size())};
}

}  // namespace pdenmpc::testing
