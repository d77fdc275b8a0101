#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <vector>

namespace btpmbm {

/// Standard-form linear program: min c'x subject to Ax = b, x >= 0.
struct SparseLp {
    int rows = 0;
    int cols = 0;
    std::vector<Eigen::Triplet<double>> entries;
    Eigen::VectorXd b;
    Eigen::VectorXd c;
};

struct LpOptions {
    double tolerance = 1e-10;  // relative primal, dual and gap residuals
    int max_iterations = 200;
    /// Factor the normal equations in the given row order instead of a
    /// fill-reducing one; better for banded problems laid out along the band.
    bool natural_order = false;
};

struct LpSolution {
    Eigen::VectorXd x;
    Eigen::VectorXd y;  // equality multipliers
    Eigen::VectorXd s;  // reduced costs
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Mehrotra predictor-corrector interior point method on the normal
/// equations. Throws std::invalid_argument on inconsistent dimensions and
/// std::runtime_error when the iteration stalls (infeasible or unbounded).
[[nodiscard]] LpSolution solve_lp(const SparseLp& lp, const LpOptions& options = {});

}  // namespace btpmbm
