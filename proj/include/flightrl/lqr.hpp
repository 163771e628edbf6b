// Continuous-time algebraic Riccati equation and LQR gain.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "flightrl/error.hpp"

namespace flightrl::lqr {

struct Solution {
    Eigen::MatrixXd P;  // stabilising Riccati solution
    Eigen::MatrixXd K;  // u = -K x
    Eigen::VectorXcd closed_loop_poles;
    double residual = 0.0;  // max-abs entry of the CARE residual
    int newton_iterations = 0;
};

inline Eigen::MatrixXd care_residual(const Eigen::MatrixXd &A, const Eigen::MatrixXd &B,
                                     const Eigen::MatrixXd &Q, const Eigen::MatrixXd &R,
                                     const Eigen::MatrixXd &P) {
    return A.transpose() * P + P * A - P * B * R.ldlt().solve(B.transpose()) * P + Q;
}

/// Solves A^T X + X A + Q = 0 by vectorisation. Intended for small n.
inline Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd &A, const Eigen::MatrixXd &Q) {
    const Eigen::Index n = A.rows();
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd kron = Eigen::MatrixXd::Zero(n * n, n * n);
    // vec(A^T X + X A) = (I (x) A^T + A^T (x) I) vec(X)
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            kron.block(i * n, j * n, n, n) += I(i, j) * A.transpose() + A(j, i) * I;
        }
    }
    const Eigen::VectorXd q = Eigen::Map<const Eigen::VectorXd>(Q.data(), n * n);
    const Eigen::VectorXd x = kron.fullPivLu().solve(-q);
    Eigen::MatrixXd X = Eigen::Map<const Eigen::MatrixXd>(x.data(), n, n);
    return 0.5 * (X + X.transpose());
}

/// Stabilising CARE solution: Hamiltonian stable-subspace initial guess followed by
/// Kleinman-Newton refinement. Throws DesignError when the iteration does not settle.
inline Solution solve_care(const Eigen::MatrixXd &A, const Eigen::MatrixXd &B,
                           const Eigen::MatrixXd &Q, const Eigen::MatrixXd &R,
                           int max_iterations = 50, double tolerance = 1e-10) {
    const Eigen::Index n = A.rows();
    const Eigen::MatrixXd G = B * R.ldlt().solve(B.transpose());

    Eigen::MatrixXd H(2 * n, 2 * n);
    H << A, -G, -Q, -A.transpose();
    Eigen::ComplexEigenSolver<Eigen::MatrixXd> es(H);
    if (es.info() != Eigen::Success) throw DesignError("care: Hamiltonian eigensolver failed");

    Eigen::MatrixXcd stable(2 * n, n);
    Eigen::Index found = 0;
    for (Eigen::Index i = 0; i < 2 * n; ++i) {
        if (es.eigenvalues()(i).real() < 0.0 && found < n) {
            stable.col(found++) = es.eigenvectors().col(i);
        }
    }
    if (found != n) throw DesignError("care: Hamiltonian has eigenvalues on the imaginary axis");

    const Eigen::MatrixXcd X1 = stable.topRows(n);
    const Eigen::MatrixXcd X2 = stable.bottomRows(n);
    Eigen::MatrixXd P = (X2 * X1.inverse()).real();
    P = 0.5 * (P + P.transpose());

    Solution sol;
    double change = 0.0;
    for (int it = 0; it < max_iterations; ++it) {
        const Eigen::MatrixXd K = R.ldlt().solve(B.transpose() * P);
        const Eigen::MatrixXd Acl = A - B * K;
        const Eigen::MatrixXd next = solve_lyapunov(Acl, Q + K.transpose() * R * K);
        change = (next - P).cwiseAbs().maxCoeff();
        P = next;
        sol.newton_iterations = it + 1;
        if (!P.allFinite()) break;
        if (change <= tolerance * std::max(1.0, P.cwiseAbs().maxCoeff())) {
            sol.P = P;
            sol.K = R.ldlt().solve(B.transpose() * P);
            sol.closed_loop_poles = (A - B * sol.K).eigenvalues();
            sol.residual = care_residual(A, B, Q, R, P).cwiseAbs().maxCoeff();
            return sol;
        }
    }
    throw DesignError("care: Riccati iteration did not converge (last change " +
                      std::to_string(change) + ")");
}

inline double spectral_abscissa(const Eigen::VectorXcd &poles) {
    double worst = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < poles.size(); ++i) worst = std::max(worst, poles(i).real());
    return worst;
}

} // namespace flightrl::lqr
