#pragma once

#include "pdenmpc/upper_layer.hpp"

#include <Eigen/LU>

#include <iosfwd>
#include <optional>

namespace pdenmpc {

/// Which stage diagonal the splitting uses: the full D_i or D_bar_i.
enum class DiagonalSplit { Full, Bar };

/// Iteration matrix of a block splitting, frozen at an evaluated KKT system:
///   Jacobi  D^-1 (L + U)
///   FGS     (D + L)^-1 U
///   BGS     (D + U)^-1 L
///   SOR     (D + w L)^-1 (w U + (w - 1) D)
///   SGS     (D + L)^-1 U (D + U)^-1 L
/// Stage inverses are exact (dense LU).
class IterationMatrixOperator {
public:
    IterationMatrixOperator(const KktEvaluator& kkt, UpperMethod method,
                            DiagonalSplit split = DiagonalSplit::Full);

    std::size_t size() const { return n_ * d_; }
    void apply(VecView v, VecSpan out) const;
    Eigen::MatrixXd to_dense() const;

private:
    void apply_L(VecView v, VecSpan out) const;   // out_i = M_L v_{i-1}
    void apply_U(VecView v, VecSpan out) const;   // out_i = M_U v_{i+1}
    void apply_D(VecView v, VecSpan out) const;
    void solve_lower(VecView b, double omega, VecSpan z) const;   // (D + omega L) z = b
    void solve_upper(VecView b, VecSpan z) const;                 // (D + U) z = b
    void solve_diag(VecView b, VecSpan z) const;

    UpperMethod method_;
    std::size_t n_, d_, nx_, nu_;
    std::vector<Eigen::MatrixXd> dense_;
    std::vector<Eigen::PartialPivLU<Eigen::MatrixXd>> lu_;
    mutable Vec t1_, t2_, t3_;
    mutable Eigen::VectorXd eb_, ez_;
};

struct FactorOptions {
    int iters = 30;
    int seeds = 5;
    unsigned seed = 12345;
    /// Cross-check against dense eigenvalues when size() <= this.
    std::size_t oracle_limit = 400;
};

struct FactorEstimate {
    double rho = 0.0;
    std::optional<double> oracle_rho;
};

/// Largest Ritz-value magnitude of `iters`-step Arnoldi runs, each started
/// after `iters` normalized power steps from one of `seeds`
/// random vectors.
double estimate_spectral_radius(const IterationMatrixOperator& op, int iters, int seeds,
                                unsigned seed);
/// Spectral radius from dense eigenvalues.
double dense_spectral_radius(const Eigen::MatrixXd& m);

FactorEstimate convergence_factor(const IterationMatrixOperator& op, const FactorOptions& opts = {});

/// Convenience form: evaluates the KKT system of `prob` at S.
FactorEstimate convergence_factor(OcpProblem& prob, const Trajectory& S, UpperMethod method,
                                  const FactorOptions& opts = {});

/// Max norm of (D_bar^-1 (L + U))^k v over `vectors` random unit vectors.
/// k = `applications`, or 2N - 1 when applications <= 0.
double verify_lemma_nilpotent(const KktEvaluator& kkt, int applications = 0, int vectors = 10,
                              unsigned seed = 1, DiagonalSplit split = DiagonalSplit::Bar);

struct GsSquaredResult {
    double rho_jacobi = 0.0;
    double rho_fgs = 0.0;
    double rho_bgs = 0.0;
    double fgs_gap() const { return std::abs(rho_fgs - rho_jacobi * rho_jacobi); }
    double bgs_gap() const { return std::abs(rho_bgs - rho_jacobi * rho_jacobi); }
};

/// Dense eigenvalue radii of the Jacobi, FGS and BGS iteration matrices.
GsSquaredResult verify_gs_squared(const KktEvaluator& kkt);

struct FactorRow {
    double sim_time_s = 0.0;
    std::string method;
    double gamma = 0.0;
    double horizon = 0.0;
    double rho = 0.0;
    std::optional<double> oracle_rho;
};

void write_factor_csv(const std::vector<FactorRow>& rows, std::ostream& out);

}  // namespace pdenmpc
