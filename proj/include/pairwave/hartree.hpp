#pragma once

#include <cstdio>
#include <limits>
#include <utility>

#include "pairwave/basis.hpp"

namespace pairwave {

struct CondensateSolution {
    RVec phi;  // real coefficients, unit norm, positive mean sign
    double mu = 0.0;
    double energy = 0.0;
    double residual = 0.0;
    int iterations = 0;

    // accepted iterates: (energy, self-consistency residual)
    std::vector<std::pair<double, double>> trace;
};

namespace detail {

struct HartreeWork {
    RMat eps;
    RMat interaction;
    double N;

    RVec density(const SpectralBasis& b, const RVec& phi) const {
        return (b.raw * phi).array().square();
    }

    // quadratic interaction form <rho, v * rho>
    double pair_energy(const SpectralBasis& b, const RVec& rho) const {
        RVec conv = convolve_density(b, interaction, rho);
        return b.weights.dot(rho.cwiseProduct(conv));
    }

    RMat mean_field(const SpectralBasis& b, const RVec& rho) const {
        RVec pot = N * convolve_density(b, interaction, rho);
        return eps + grid_to_operator(b, pot);
    }

    double energy(const SpectralBasis& b, const RVec& phi) const {
        RVec rho = density(b, phi);
        return phi.dot(eps * phi) + 0.5 * N * pair_energy(b, rho);
    }

    // ground state of the linearized operator, sign-fixed
    RVec ground(const SpectralBasis& b, const RMat& op, double* eigenvalue = nullptr) const {
        Eigen::SelfAdjointEigenSolver<RMat> es(op);
        if (es.info() != Eigen::Success) throw degenerate_basis("hartree: eigensolve failed");
        RVec phi = es.eigenvectors().col(0);
        if (b.weights.dot(b.raw * phi) < 0.0) phi = -phi;
        if (eigenvalue) *eigenvalue = es.eigenvalues()[0];
        return phi;
    }

    // eigen-residual of phi under the operator built from its own density
    double self_residual(const SpectralBasis& b, const RVec& phi, double* mu_out = nullptr) const {
        RMat op = mean_field(b, density(b, phi));
        const double mu = phi.dot(op * phi);
        if (mu_out) *mu_out = mu;
        return (op * phi - mu * phi).norm();
    }

    // Derivative of the mean-field term through the density: the variation of
    // mean_field(density(phi)) * phi with respect to phi, beyond the frozen
    // operator itself.  With u = raw * phi and V the interaction kernel this
    // is 2N raw^T diag(w u) V diag(w u) raw, a symmetric M x M matrix.
    RMat density_jacobian(const SpectralBasis& b, const RVec& phi) const {
        RVec wu = b.weights.cwiseProduct(b.raw * phi);
        return 2.0 * N * b.raw.transpose() * wu.asDiagonal() * interaction * wu.asDiagonal() *
               b.raw;
    }
};

inline HartreeWork hartree_work(const TrapModel& model, const SpectralBasis& basis) {
    return {assemble_kinetic_trap(basis, model.omega),
            interaction_on_grid(basis, model.g, model.sigma), model.N};
}

}  // namespace detail

inline double hartree_energy(const RVec& phi, const TrapModel& model, const SpectralBasis& basis) {
    require(std::abs(phi.norm() - 1.0) < 1e-10, "hartree_energy: phi must be normalized");
    return detail::hartree_work(model, basis).energy(basis, phi);
}

inline double chemical_potential(const RVec& phi, const TrapModel& model, const SpectralBasis& basis) {
    require(std::abs(phi.norm() - 1.0) < 1e-10, "chemical_potential: phi must be normalized");
    auto w = detail::hartree_work(model, basis);
    RVec rho = w.density(basis, phi);
    return phi.dot(w.eps * phi) + model.N * w.pair_energy(basis, rho);
}

// Damped self-consistent field iteration followed by Newton refinement.
//
// Phase one mixes densities, re-diagonalizes the mean-field operator, and
// keeps steps only while the energy does not increase (halving the mixing
// factor otherwise).  The energy gate cannot certify progress once energy
// differences fall below machine noise -- that happens at an eigen-residual
// of roughly sqrt(machine epsilon), far above tol -- so it only has to carry
// the iterate into the basin of the stationarity system.  Phase two runs
// Newton on mean_field(rho_phi) phi = mu phi with the unit-norm constraint
// appended (a bordered linear system), with a residual-driven line search.
inline CondensateSolution solve_hartree(const TrapModel& model, const SpectralBasis& basis,
                                        double tol = 1e-10, int max_iter = 500) {
    require(tol > 0.0, "solve_hartree: tol must be positive");
    require(max_iter >= 1, "solve_hartree: max_iter must be positive");

    auto w = detail::hartree_work(model, basis);
    const int M = basis.M;

    CondensateSolution out;
    out.phi = w.ground(basis, w.eps);
    RVec rho = w.density(basis, out.phi);
    double energy = w.energy(basis, out.phi);
    double residual = w.self_residual(basis, out.phi, &out.mu);
    out.trace.emplace_back(energy, residual);

    const double basin = std::max(tol, 1e-4);
    double alpha = 0.5;
    for (int it = 1; it <= max_iter; ++it) {
        if (residual < basin) break;
        out.iterations = it;

        RVec rho_new = w.density(basis, w.ground(basis, w.mean_field(basis, rho)));
        RVec rho_trial = (1.0 - alpha) * rho + alpha * rho_new;
        RVec phi_trial = w.ground(basis, w.mean_field(basis, rho_trial));
        const double e_trial = w.energy(basis, phi_trial);

        if (e_trial <= energy + 1e-14 * std::max(1.0, std::abs(energy))) {
            rho = rho_trial;
            out.phi = phi_trial;
            energy = e_trial;
            residual = w.self_residual(basis, out.phi, &out.mu);
            out.trace.emplace_back(energy, residual);
            alpha = std::min(0.5, 1.5 * alpha);
        } else {
            alpha *= 0.5;
        }
    }

    for (int nit = 0; nit < 60 && residual >= tol && out.iterations < max_iter; ++nit) {
        ++out.iterations;
        RMat op = w.mean_field(basis, w.density(basis, out.phi));
        RVec grad = op * out.phi - out.mu * out.phi;

        RMat bordered = RMat::Zero(M + 1, M + 1);
        bordered.topLeftCorner(M, M) =
            op + w.density_jacobian(basis, out.phi) - out.mu * RMat::Identity(M, M);
        bordered.block(0, M, M, 1) = -out.phi;
        bordered.block(M, 0, 1, M) = out.phi.transpose();
        RVec rhs = RVec::Zero(M + 1);
        rhs.head(M) = -grad;
        RVec delta = bordered.fullPivLu().solve(rhs);

        bool moved = false;
        for (double step = 1.0; step > 1e-8; step *= 0.5) {
            RVec phi_trial = out.phi + step * delta.head(M);
            phi_trial.normalize();
            if (basis.weights.dot(basis.raw * phi_trial) < 0.0) phi_trial = -phi_trial;
            double mu_trial;
            const double r_trial = w.self_residual(basis, phi_trial, &mu_trial);
            if (r_trial < residual) {
                out.phi = phi_trial;
                out.mu = mu_trial;
                residual = r_trial;
                energy = w.energy(basis, out.phi);
                out.trace.emplace_back(energy, residual);
                moved = true;
                break;
            }
        }
        if (!moved) break;  // at the attainable floor for this discretization
    }

    if (residual >= tol) {
        char msg[128];
        std::snprintf(msg, sizeof msg, "hartree: no convergence after %d iterations, residual %.3e",
                      out.iterations, residual);
        throw convergence_failure(msg);
    }
    out.energy = energy;
    out.residual = residual;
    return out;
}

}  // namespace pairwave
