#include "btpmbm/lp.hpp"

#include <Eigen/SparseCholesky>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace btpmbm {

namespace {

using SpMat = Eigen::SparseMatrix<double>;

// Largest step in (0, 1] keeping v + a*dv >= 0, scaled by eta when limited.
double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv, double eta) {
    double a = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (dv[i] < 0.0) a = std::min(a, -v[i] / dv[i]);
    return std::min(1.0, eta * a);
}

template <typename Ldlt>
class NormalSolver {
public:
    NormalSolver(const SpMat& A) : A_(A), At_(A.transpose()) {}

    void factor(const Eigen::VectorXd& d) {
        SpMat M = A_ * d.asDiagonal() * At_;
        double top = 0.0;
        for (Eigen::Index i = 0; i < M.rows(); ++i) top = std::max(top, M.coeff(i, i));
        const double reg = 1e-14 * std::max(1.0, top);
        for (Eigen::Index i = 0; i < M.rows(); ++i) M.coeffRef(i, i) += reg;
        if (!analyzed_) {
            ldlt_.analyzePattern(M);
            analyzed_ = true;
        }
        ldlt_.factorize(M);
        if (ldlt_.info() != Eigen::Success) throw std::runtime_error("lp: normal equations not factorizable");
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const { return ldlt_.solve(rhs); }

private:
    const SpMat& A_;
    SpMat At_;
    Ldlt ldlt_;
    bool analyzed_ = false;
};

template <typename Ldlt>
LpSolution interior_point(const SparseLp& lp, const LpOptions& options) {
    const int m = lp.rows;
    const int n = lp.cols;
    if (m < 0 || n <= 0 || lp.b.size() != m || lp.c.size() != n)
        throw std::invalid_argument("lp: inconsistent dimensions");
    SpMat A(m, n);
    A.setFromTriplets(lp.entries.begin(), lp.entries.end());
    const Eigen::VectorXd& b = lp.b;
    const Eigen::VectorXd& c = lp.c;
    LpSolution sol;
    if (m == 0) {
        // Only bounds: x = 0 is optimal iff c >= 0.
        if ((c.array() < 0.0).any()) throw std::runtime_error("lp: unbounded");
        sol.x = Eigen::VectorXd::Zero(n);
        sol.s = c;
        sol.y = Eigen::VectorXd();
        sol.converged = true;
        return sol;
    }

    NormalSolver<Ldlt> normal(A);
    normal.factor(Eigen::VectorXd::Ones(n));
    Eigen::VectorXd y = normal.solve(A * c);
    Eigen::VectorXd x = A.transpose() * normal.solve(b);
    Eigen::VectorXd s = c - A.transpose() * y;
    x.array() += std::max(-1.5 * x.minCoeff(), 0.0);
    s.array() += std::max(-1.5 * s.minCoeff(), 0.0);
    {
        const double xs = x.dot(s);
        const double sx = x.sum();
        const double ss = s.sum();
        if (xs > 0.0 && sx > 0.0 && ss > 0.0) {
            x.array() += 0.5 * xs / ss;
            s.array() += 0.5 * xs / sx;
        } else {
            x.array() += 1.0;
            s.array() += 1.0;
        }
    }

    const double bnorm = 1.0 + b.norm();
    const double cnorm = 1.0 + c.norm();
    for (int it = 0; it <= options.max_iterations; ++it) {
        const Eigen::VectorXd rp = b - A * x;
        const Eigen::VectorXd rd = c - A.transpose() * y - s;
        const double mu = x.dot(s) / n;
        const double pobj = c.dot(x);
        const double dobj = b.dot(y);
        if (!std::isfinite(mu) || !std::isfinite(pobj)) throw std::runtime_error("lp: iteration diverged");
        if (rp.norm() / bnorm < options.tolerance && rd.norm() / cnorm < options.tolerance &&
            std::abs(pobj - dobj) / (1.0 + std::abs(pobj)) < options.tolerance) {
            sol.converged = true;
            sol.iterations = it;
            break;
        }
        if (it == options.max_iterations) throw std::runtime_error("lp: no convergence (infeasible or unbounded?)");

        const Eigen::VectorXd d = x.cwiseQuotient(s);
        normal.factor(d);
        auto direction = [&](const Eigen::VectorXd& rc, Eigen::VectorXd& dx, Eigen::VectorXd& dy,
                             Eigen::VectorXd& ds) {
            const Eigen::VectorXd rhs = rp + A * (d.cwiseProduct(rd) - rc.cwiseQuotient(s));
            dy = normal.solve(rhs);
            ds = rd - A.transpose() * dy;
            dx = rc.cwiseQuotient(s) - d.cwiseProduct(ds);
        };

        Eigen::VectorXd dxa, dya, dsa;
        const Eigen::VectorXd xs = x.cwiseProduct(s);
        direction(-xs, dxa, dya, dsa);
        const double ap = max_step(x, dxa, 1.0);
        const double ad = max_step(s, dsa, 1.0);
        const double mu_aff = (x + ap * dxa).dot(s + ad * dsa) / n;
        const double sigma = std::pow(mu_aff / mu, 3);

        Eigen::VectorXd dx, dy, ds;
        Eigen::VectorXd rc = -xs - dxa.cwiseProduct(dsa);
        rc.array() += sigma * mu;
        direction(rc, dx, dy, ds);
        const double eta = 0.995;
        const double sp = max_step(x, dx, eta);
        const double sd = max_step(s, ds, eta);
        x += sp * dx;
        y += sd * dy;
        s += sd * ds;
    }
    sol.x = x;
    sol.y = y;
    sol.s = s;
    sol.objective = c.dot(x);
    return sol;
}

}  // namespace

LpSolution solve_lp(const SparseLp& lp, const LpOptions& options) {
    if (options.natural_order)
        return interior_point<Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::NaturalOrdering<int>>>(lp, options);
    return interior_point<Eigen::SimplicialLDLT<SpMat>>(lp, options);
}

}  // namespace btpmbm
