#pragma once

#include "pairwave/excitations.hpp"

namespace pairwave {

namespace detail {

// perp coordinates of a family of columns that must live on phi-perp
inline Mat family_perp(const Mat& family, const RMat& Z, const char* who) {
    Mat Zc = Z.cast<complex_t>();
    Mat fz = Zc.adjoint() * family;
    if ((Zc * fz - family).norm() > 1e-8 * std::max(1.0, family.norm()))
        throw invalid_input(std::string(who) + ": family is not supported on phi-perp");
    return fz;
}

// The kernel whose graph subspace is the column span of the stacked family
// [P; Q]: conj(k) = -Q P^{-1}.  Invariant under right-multiplication of the
// stack by any invertible recombination, so any basis of the subspace works.
// Symmetry of the result is a consequence of the span being J-Lagrangian-like
// (a consistency theorem), so it is asserted rather than imposed.
inline Mat graph_kernel(const Mat& P, const Mat& Q, const char* who) {
    Eigen::FullPivLU<Mat> lu(P);
    if (!lu.isInvertible())
        throw degenerate_basis(std::string(who) +
                               ": u-family is singular; the graph has no kernel representation");
    Mat k = Mat((-(Q * lu.inverse())).conjugate());
    const double asym = (k - k.transpose()).norm();
    if (asym > 1e-8 * std::max(1.0, k.norm()))
        throw degenerate_basis(std::string(who) + ": reconstructed kernel is not symmetric");
    return 0.5 * (k + k.transpose());
}

}  // namespace detail

// Reconstruct the pair kernel from a complete positive-energy family via
// conj(k) = -V U^{-1}, where U, V stack the u_j, v_j columnwise over phi-perp.
inline PairKernel solve_riccati_bdg(const QuadraticModel& qm, const ExcitationSet& xs) {
    auto zs = detail::reduce_perp(qm);
    require(int(xs.u.rows()) == qm.dim() && int(xs.u.cols()) == zs.n &&
                xs.v.rows() == xs.u.rows() && xs.v.cols() == xs.u.cols(),
            "solve_riccati_bdg: family shape mismatch");
    require(int(xs.E.size()) == zs.n && xs.E.minCoeff() > 0.0,
            "solve_riccati_bdg: need a complete family with positive energies");
    Mat P = detail::family_perp(xs.u, zs.Z, "solve_riccati_bdg");
    Mat Q = detail::family_perp(xs.v, zs.Z, "solve_riccati_bdg");
    Mat kz = detail::graph_kernel(P, Q, "solve_riccati_bdg");
    Mat Zc = zs.Z.cast<complex_t>();
    return detail::finalize_pair_kernel(Zc * kz * Zc.transpose(), qm, SolverTag::bdg);
}

// Independent route to the principal kernel: eigensolve the kernel-free
// symplectic matrix, keep the positive-sign families, and read the kernel off
// their graph.  Shares no iterate with the variational or greedy solvers.
inline PairKernel solve_riccati_bdg(const QuadraticModel& qm) {
    FetterSolution fs = solve_fetter(build_symplectic(qm));
    return solve_riccati_bdg(qm, fs.families());
}

// Move to the saddle branch that flips the selected excitation pairs.  Every
// Riccati solution is the graph of one choice of invariant-pair columns of
// the symplectic matrix; flipping pair j swaps the +E_j column for its -E_j
// partner, which negates E_j in the phonon spectrum and pushes the kernel
// norm above one.  (Rewriting single Takagi amplitudes z_j -> z_j^- in a
// frozen frame does not commute with the off-diagonal stationarity conditions
// and leaves an O(1) residual, so the branch is rebuilt from the subspace.)
// Indices are zero-based over the ascending excitation spectrum and must name
// modes the kernel actually pairs (the Takagi rank bounds how many flips can
// produce a new solution: unpaired modes have no finite partner amplitude).
inline PairKernel flip_branch(const PairKernel& pk, const std::vector<int>& indices,
                              const QuadraticModel& qm) {
    if (indices.empty()) return pk;

    FetterSolution fs = solve_fetter(build_symplectic(qm));
    const int n = int(fs.E.size());
    const int n_valid = std::min(n, pk.takagi.rank);
    std::vector<bool> flip(n, false);
    for (int idx : indices) {
        if (idx < 0 || idx >= n_valid) {
            char msg[128];
            std::snprintf(msg, sizeof msg, "flip_branch: index %d outside the paired range [0, %d)",
                          idx, n_valid);
            throw invalid_input(msg);
        }
        if (flip[idx]) throw invalid_input("flip_branch: duplicate index");
        flip[idx] = true;
    }

    // read the branch the kernel is currently on off its own phonon spectrum
    RVec now = hph_spectrum(qm, pk.k);
    require(int(now.size()) == n, "flip_branch: kernel dimension mismatch");
    std::vector<int> sign(n, +1);
    {
        const double scale = std::max(1.0, fs.E.cwiseAbs().maxCoeff());
        std::vector<bool> used(n, false);
        for (int i = 0; i < n; ++i) {
            int best = -1, best_sign = +1;
            double best_d = std::numeric_limits<double>::infinity();
            for (int j = 0; j < n; ++j) {
                if (used[j]) continue;
                const double dp = std::abs(now[i] - fs.E[j]);
                const double dm = std::abs(now[i] + fs.E[j]);
                if (dp < best_d) { best_d = dp; best = j; best_sign = +1; }
                if (dm < best_d) { best_d = dm; best = j; best_sign = -1; }
            }
            if (best < 0 || best_d > 1e-6 * scale)
                throw degenerate_basis(
                    "flip_branch: kernel spectrum does not match the symplectic pair spectrum");
            used[best] = true;
            sign[best] = best_sign;
        }
    }
    for (int j = 0; j < n; ++j)
        if (flip[j]) sign[j] = -sign[j];

    auto zs = detail::reduce_perp(qm);
    Mat P(zs.n, n), Q(zs.n, n);
    Mat Zadj = zs.Z.cast<complex_t>().adjoint();
    for (int j = 0; j < n; ++j) {
        if (sign[j] > 0) {
            P.col(j) = Zadj * fs.u.col(j);
            Q.col(j) = Zadj * fs.v.col(j);
        } else {
            P.col(j) = Zadj * fs.u_minus.col(j);
            Q.col(j) = Zadj * fs.v_minus.col(j);
        }
    }
    Mat kz = detail::graph_kernel(P, Q, "flip_branch");
    Mat Zfull = zs.Z.cast<complex_t>();
    const bool principal = std::all_of(sign.begin(), sign.end(), [](int s) { return s > 0; });
    return detail::finalize_pair_kernel(Zfull * kz * Zfull.transpose(), qm,
                                        principal ? SolverTag::bdg : SolverTag::saddle);
}

}  // namespace pairwave
