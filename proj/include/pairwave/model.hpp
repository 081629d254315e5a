#pragma once

#include <random>

#include "pairwave/csym.hpp"
#include "pairwave/hartree.hpp"

namespace pairwave {

// Galerkin matrix of a two-point kernel sampled on the product grid,
// A_mn = sum_{q p} W_q W_p psi_m(x_q) A(x_q, x_p) psi_n(x_p).
inline RMat kernel_to_operator(const SpectralBasis& basis, const RMat& grid_kernel) {
    require(grid_kernel.rows() == basis.Q && grid_kernel.cols() == basis.Q,
            "kernel_to_operator: grid size mismatch");
    RVec sw = basis.weights.cwiseSqrt();
    return basis.eval.transpose() * sw.asDiagonal() * grid_kernel * sw.asDiagonal() * basis.eval;
}

// Orthonormal basis of the orthogonal complement of phi (M x (M-1)),
// taken from the trailing columns of a Householder QR of phi.
inline RMat perp_basis(const RVec& phi) {
    require(std::abs(phi.norm() - 1.0) < 1e-10, "perp_basis: phi must be normalized");
    const int M = int(phi.size());
    require(M >= 2, "perp_basis: need at least two modes");
    Eigen::HouseholderQR<RMat> qr{RMat(phi)};
    RMat Q = qr.householderQ();
    RMat Z = Q.rightCols(M - 1);
    require((Z.transpose() * phi).norm() < 1e-12, "perp_basis: complement not orthogonal");
    return Z;
}

// One-particle kernels of the quadratic reduction around the condensate:
//   h = eps + N (v * rho) + gamma - mu,   gamma(x,y) = N phi(x) v(x-y) conj(phi)(y),
//   f(x,y) = N phi(x) v(x-y) phi(y),
// together with the projector onto phi-perp and the projected kernels.
struct QuadraticModel {
    Kernel h;       // hermitian
    Kernel f;       // complex-symmetric
    Kernel gamma;   // hermitian
    Kernel proj;    // delta-hat = I - phi phi^dagger
    Kernel h_perp;  // proj h proj
    Kernel f_perp;  // proj f proj^T
    Vec phi;
    double E_H = 0.0;
    double mu = 0.0;
    double N = 1.0;

    int dim() const { return int(phi.size()); }
};

// Projection onto phi-perp respecting the symmetry class: hermitian kernels
// get P A P, complex-symmetric ones P A P^T so that the result still
// annihilates conj(phi) on the right.
inline Kernel project_perp(const Kernel& A, const Vec& phi) {
    require(std::abs(phi.norm() - 1.0) < 1e-10, "project_perp: phi must be normalized");
    Mat P = Mat::Identity(phi.size(), phi.size()) - phi * phi.adjoint();
    if (A.sym == Symmetry::hermitian) return Kernel::hermitian(P * A.m * P, 1e-10);
    return Kernel::symmetric(P * A.m * P.transpose(), 1e-10);
}

inline QuadraticModel build_model(const CondensateSolution& sol, const TrapModel& model,
                                  const SpectralBasis& basis) {
    const int M = basis.M;
    require(int(sol.phi.size()) == M, "build_model: phi size mismatch");

    RMat eps = assemble_kinetic_trap(basis, model.omega);
    RMat u = interaction_on_grid(basis, model.g, model.sigma);
    RVec phi_g = basis.raw * sol.phi;
    RVec rho = phi_g.array().square();
    RVec conv = convolve_density(basis, u, rho);

    RMat pair_grid = model.N * phi_g.asDiagonal() * u * phi_g.asDiagonal();
    RMat gamma = kernel_to_operator(basis, pair_grid);
    RMat h = eps + grid_to_operator(basis, RVec(model.N * conv)) + gamma
             - sol.mu * RMat::Identity(M, M);

    QuadraticModel qm;
    qm.phi = sol.phi.cast<complex_t>();
    qm.E_H = sol.energy;
    qm.mu = sol.mu;
    qm.N = model.N;
    qm.h = Kernel::hermitian(h.cast<complex_t>(), 1e-12);
    qm.f = Kernel::symmetric(gamma.cast<complex_t>(), 1e-12);
    qm.gamma = Kernel::hermitian(gamma.cast<complex_t>(), 1e-12);
    qm.proj = Kernel::hermitian(Mat::Identity(M, M) - qm.phi * qm.phi.adjoint(), 1e-12);
    qm.h_perp = project_perp(qm.h, qm.phi);
    qm.f_perp = project_perp(qm.f, qm.phi);
    return qm;
}

struct GapCheck {
    double c_estimate = 0.0;   // min over trials of h(e-bar,e) - |f(e-bar,e-bar)|
    double certificate = 0.0;  // lambda_min(h_perp) - sigma_max(f_perp), a lower bound
    Vec witness;               // unit vector in phi-perp attaining c_estimate
};

namespace detail {

inline double gap_objective(const Mat& hz, const Mat& fz, const Vec& c) {
    const complex_t t = (c.conjugate().transpose() * fz * c.conjugate()).value();
    return (c.adjoint() * hz * c).value().real() - std::abs(t);
}

}  // namespace detail

// Estimate the spectral-gap constant min_{e in phi-perp, |e|=1} of
// h(e-bar,e) - |f(e-bar,e-bar)| by projected gradient descent with seeded
// restarts, and report the eigenvalue certificate alongside.  Throws when
// the estimate is nonpositive.
inline GapCheck check_gap_condition(const QuadraticModel& qm, int restarts = 16, int iters = 200,
                                    unsigned long long seed = 0x706169727761ULL) {
    require(restarts >= 1 && iters >= 1, "check_gap_condition: counts must be positive");
    RMat Z = perp_basis(qm.phi.real());
    Mat hz = Z.transpose().cast<complex_t>() * qm.h.m * Z.cast<complex_t>();
    Mat fz = Z.transpose().cast<complex_t>() * qm.f.m * Z.cast<complex_t>();
    const int n = int(hz.rows());

    Eigen::SelfAdjointEigenSolver<Mat> eh(hz);
    const double lam_min = eh.eigenvalues()[0];
    const double sig_max = op_norm(fz);

    GapCheck out;
    out.certificate = lam_min - sig_max;

    std::vector<Vec> starts;
    starts.push_back(eh.eigenvectors().col(0));
    if (sig_max > 0.0) {
        Eigen::JacobiSVD<Mat> svd(fz, Eigen::ComputeThinU);
        starts.push_back(svd.matrixU().col(0));
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    for (int r = int(starts.size()); r < restarts; ++r) {
        Vec c(n);
        for (int i = 0; i < n; ++i) c[i] = complex_t(gauss(rng), gauss(rng));
        starts.push_back(c.normalized());
    }

    double best = std::numeric_limits<double>::infinity();
    Vec best_c;
    for (Vec c : starts) {
        double step = 0.5 / std::max(1.0, op_norm(hz) + sig_max);
        double val = detail::gap_objective(hz, fz, c);
        for (int it = 0; it < iters; ++it) {
            const complex_t t = (c.conjugate().transpose() * fz * c.conjugate()).value();
            Vec grad = hz * c;
            if (std::abs(t) > 1e-300) grad -= (std::conj(t) / std::abs(t)) * (fz * c.conjugate());
            // project out the radial component, then retract to the sphere
            grad -= (c.adjoint() * grad).value().real() * c;
            if (grad.norm() < 1e-14) break;
            Vec c_next = (c - step * grad).normalized();
            const double v_next = detail::gap_objective(hz, fz, c_next);
            if (v_next <= val) {
                c = c_next;
                val = v_next;
                step *= 1.2;
            } else {
                step *= 0.5;
            }
        }
        if (val < best) {
            best = val;
            best_c = c;
        }
    }

    out.c_estimate = best;
    out.witness = Z.cast<complex_t>() * best_c;
    if (out.c_estimate <= 0.0)
        throw gap_violation("gap condition violated: nonpositive pairing gap estimate",
                            out.c_estimate, out.witness);
    return out;
}

struct DepletionBound {
    double n_particles = 0.0;
    double f_hs_over_N = 0.0;       // Hilbert-Schmidt size of f per particle
    double sigma_f_perp_over_c = 0.0;  // pairing strength against the gap certificate
};

inline DepletionBound depletion_bound_report(const QuadraticModel& qm) {
    DepletionBound out;
    out.n_particles = qm.N;
    out.f_hs_over_N = hs_norm(qm.f.m) / qm.N;
    const double sig = op_norm(qm.f_perp.m);
    if (sig == 0.0) {
        out.sigma_f_perp_over_c = 0.0;
        return out;
    }
    RMat Z = perp_basis(qm.phi.real());
    Mat hz = Z.transpose().cast<complex_t>() * qm.h.m * Z.cast<complex_t>();
    Eigen::SelfAdjointEigenSolver<Mat> eh(hz);
    const double cert = eh.eigenvalues()[0] - sig;
    out.sigma_f_perp_over_c =
        cert > 0.0 ? sig / cert : std::numeric_limits<double>::infinity();
    return out;
}

}  // namespace pairwave
