#pragma once

#include <cmath>

#include "pairwave/core.hpp"

namespace pairwave {

// Hermite-function spectral basis on the real line together with a
// Gauss-Hermite quadrature grid.  Mode n is the n-th eigenfunction of
// -d^2/dx^2 + x^2 (unit frequency), so all operators assembled here are
// exact for unit-frequency oscillator algebra and spectrally accurate
// otherwise.
//
// weights[q] already contains the exp(x_q^2) correction, i.e. they are
// the weights of the plain (unweighted) L^2 integral:
//   integral f(x) dx  ~=  sum_q weights[q] f(nodes[q]).
// eval(q, n) stores sqrt(weights[q]) * psi_n(nodes[q]) so that the Gram
// matrix eval^T eval is the identity and grid vectors scaled the same
// way pair up with plain dot products.  raw(q, n) keeps psi_n(nodes[q]).
struct SpectralBasis {
    int M = 0;
    int Q = 0;
    RVec nodes;
    RVec weights;
    RMat eval;
    RMat raw;

    // coefficients -> function values at the nodes
    RVec on_grid(const RVec& coeff) const { return raw * coeff; }
    Vec on_grid(const Vec& coeff) const { return raw.cast<complex_t>() * coeff; }

    // quadrature of a grid function
    double integrate(const RVec& grid_vals) const { return weights.dot(grid_vals); }
};

namespace detail {

// psi_0 .. psi_{count-1} at x, by the stable upward recurrence
//   psi_{n+1} = sqrt(2/(n+1)) x psi_n - sqrt(n/(n+1)) psi_{n-1}.
inline void hermite_column(double x, int count, double* out) {
    const double p0 = std::pow(pi, -0.25) * std::exp(-0.5 * x * x);
    if (count > 0) out[0] = p0;
    if (count > 1) out[1] = std::sqrt(2.0) * x * p0;
    for (int n = 1; n + 1 < count; ++n)
        out[n + 1] = std::sqrt(2.0 / (n + 1)) * x * out[n] - std::sqrt(double(n) / (n + 1)) * out[n - 1];
}

}  // namespace detail

// Gauss-Hermite nodes via the Golub-Welsch Jacobi matrix; the weights are
// recovered from the Christoffel identity 1/W_q = sum_{n<Q} psi_n(x_q)^2,
// which stays well scaled at large Q where w_q and exp(x_q^2) would
// individually over/underflow.
inline SpectralBasis build_basis(int M, int Q) {
    require(M >= 1 && M <= 64, "basis: M must lie in [1, 64]");
    require(Q >= 2 * M, "basis: Q must be at least 2M");

    RMat jacobi = RMat::Zero(Q, Q);
    for (int k = 1; k < Q; ++k) {
        const double b = std::sqrt(0.5 * k);
        jacobi(k, k - 1) = b;
        jacobi(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<RMat> es(jacobi);
    if (es.info() != Eigen::Success) throw degenerate_basis("basis: node eigensolve failed");

    SpectralBasis b;
    b.M = M;
    b.Q = Q;
    b.nodes = es.eigenvalues();

    b.weights.resize(Q);
    b.raw.resize(Q, M);
    std::vector<double> col(Q);
    for (int q = 0; q < Q; ++q) {
        detail::hermite_column(b.nodes[q], Q, col.data());
        double christoffel = 0.0;
        for (int n = 0; n < Q; ++n) christoffel += col[n] * col[n];
        b.weights[q] = 1.0 / christoffel;
        for (int n = 0; n < M; ++n) b.raw(q, n) = col[n];
    }

    b.eval.resize(Q, M);
    for (int q = 0; q < Q; ++q) b.eval.row(q) = std::sqrt(b.weights[q]) * b.raw.row(q);
    return b;
}

// Galerkin matrix of -d^2/dx^2 + omega^2 x^2 in the Hermite basis.  Both
// x^2 and the momentum-squared part are pentadiagonal with closed-form
// entries, so no quadrature enters.
inline RMat assemble_kinetic_trap(const SpectralBasis& basis, double omega) {
    require(omega > 0.0, "kinetic_trap: omega must be positive");
    const int M = basis.M;
    RMat op = RMat::Zero(M, M);
    for (int n = 0; n < M; ++n) {
        op(n, n) = 0.5 * (2 * n + 1) * (1.0 + omega * omega);
        if (n + 2 < M) {
            const double c = 0.5 * std::sqrt(double(n + 1) * (n + 2));
            op(n, n + 2) = c * (omega * omega - 1.0);
            op(n + 2, n) = op(n, n + 2);
        }
    }
    return op;
}

// Interaction values on the product grid, U(q, q') = v(x_q - x_q').
inline RMat interaction_on_grid(const SpectralBasis& basis, double g, double sigma) {
    require(sigma > 0.0, "interaction: sigma must be positive");
    require(g >= 0.0, "interaction: g must be nonnegative");
    const int Q = basis.Q;
    const double norm = g / (sigma * std::sqrt(2.0 * pi));
    RMat u(Q, Q);
    for (int q = 0; q < Q; ++q)
        for (int p = 0; p < Q; ++p) {
            const double d = basis.nodes[q] - basis.nodes[p];
            u(q, p) = norm * std::exp(-0.5 * d * d / (sigma * sigma));
        }
    return u;
}

// (v * rho)(x_q) for a density sampled on the grid.
inline RVec convolve_density(const SpectralBasis& basis, const RMat& interaction, const RVec& rho_grid) {
    require(interaction.rows() == basis.Q && rho_grid.size() == basis.Q,
            "convolve: grid size mismatch");
    return interaction * basis.weights.cwiseProduct(rho_grid).matrix();
}

// Galerkin matrix of multiplication by a real grid function.
inline RMat grid_to_operator(const SpectralBasis& basis, const RVec& grid_vals) {
    require(grid_vals.size() == basis.Q, "grid_to_operator: grid size mismatch");
    return basis.eval.transpose() * grid_vals.asDiagonal() * basis.eval;
}

}  // namespace pairwave
