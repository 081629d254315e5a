#pragma once

#include "pairwave/riccati.hpp"

namespace pairwave {

// h_ph = h + k (conj f), the diagonal block of the transformed quadratic form.
// Non-Hermitian, but similar to a Hermitian operator on phi-perp whenever k
// solves the Riccati equation with norm below one.
inline Kernel build_hph(const QuadraticModel& qm, const Kernel& k) {
    require(k.sym == Symmetry::symmetric, "build_hph: k must be complex-symmetric");
    require(k.dim() == qm.h.dim(), "build_hph: dimension mismatch");
    return Kernel::general(qm.h.m + k.m * qm.f.m.conjugate());
}

struct ExcitationResiduals {
    double kappa_hermiticity = 0.0;  // similarity-transformed h_ph against its adjoint
    double omega_eigen = 0.0;        // max_j |h_ph omega_j - E_j omega_j| on phi-perp
    double u_eigen = 0.0;            // max_j |h_ph^dag u_j - E_j u_j| on phi-perp
    double completeness = 0.0;       // |sum_j conj(omega_j) u_j^T - delta-hat|
    double biorthogonality = 0.0;    // |U^dag Omega - I|
    double pair_row = 0.0;           // max_j |conj(f) u_j - h v_j - E_j v_j| on phi-perp

    double max() const {
        return std::max({kappa_hermiticity, omega_eigen, u_eigen, completeness,
                         biorthogonality, pair_row});
    }
};

// One-particle excitation data: energies E_j ascending, right eigenvectors
// omega_j of h_ph, left family u_j (adjoint problem), pair functions
// v_j = -conj(k) u_j, and the orthonormal intermediate basis eta_j.  The
// per-mode scale is fixed by |eta_j| = 1; omega_j = S eta_j and
// u_j = S^{-1} eta_j with S = (delta-hat - k conj(k))^{1/2} inherit theirs
// from that choice, which pins the biorthogonal products <u_i, omega_j> to
// the identity.
struct ExcitationSet {
    RVec E;
    Mat omega, u, v, eta;  // columns are modes, coefficients in the full basis
    ExcitationResiduals residuals;
};

namespace detail {

inline void fix_column_phases(Mat& a) {
    for (int j = 0; j < a.cols(); ++j) {
        int idx = 0;
        a.col(j).cwiseAbs().maxCoeff(&idx);
        const complex_t lead = a(idx, j);
        if (std::abs(lead) > 0.0) a.col(j) *= std::conj(lead) / std::abs(lead);
    }
}

inline Mat perp_coordinates(const Kernel& k, const RMat& Z, const char* who) {
    require(k.sym == Symmetry::symmetric, std::string(who) + ": kernel must be complex-symmetric");
    Mat Zc = Z.cast<complex_t>();
    Mat kz = Zc.adjoint() * k.m * Zc;
    // the kernel must already live on phi-perp; the reduction only changes coordinates
    if ((Zc * kz * Zc.transpose() - k.m).norm() > 1e-8 * std::max(1.0, k.m.norm()))
        throw invalid_input(std::string(who) + ": kernel is not supported on phi-perp");
    return kz;
}

}  // namespace detail

inline ExcitationSet excitation_spectrum(const QuadraticModel& qm, const Kernel& k) {
    if (op_norm(k.m) >= 1.0)
        throw out_of_domain(
            "excitation_spectrum: kernel norm is not below one (saddle branches have no "
            "Riesz eigenfamily; use the flip-branch diagnostics instead)");
    auto zs = detail::reduce_perp(qm);
    Mat Zc = zs.Z.cast<complex_t>();
    Mat kz = detail::perp_coordinates(k, zs.Z, "excitation_spectrum");
    const int n = zs.n;

    Mat hph = zs.h + kz * zs.f.conjugate();
    Mat A = Mat::Identity(n, n) - kz * kz.conjugate();
    Eigen::SelfAdjointEigenSolver<Mat> ea(0.5 * (A + A.adjoint()).eval());
    if (ea.info() != Eigen::Success)
        throw degenerate_basis("excitation_spectrum: eigensolve of delta-hat - k conj(k) failed");
    RVec lam = ea.eigenvalues();
    // spectrum sits in (1 - |k|_op^2, 1]; strictly positive inside the unit ball
    Mat S = ea.eigenvectors() * lam.cwiseSqrt().asDiagonal() * ea.eigenvectors().adjoint();
    Mat Sinv =
        ea.eigenvectors() * lam.cwiseSqrt().cwiseInverse().asDiagonal() * ea.eigenvectors().adjoint();

    Mat kappa = Sinv * hph * S;
    ExcitationSet xs;
    xs.residuals.kappa_hermiticity = (kappa - kappa.adjoint()).norm();

    Eigen::SelfAdjointEigenSolver<Mat> ek(0.5 * (kappa + kappa.adjoint()).eval());
    if (ek.info() != Eigen::Success)
        throw degenerate_basis("excitation_spectrum: eigensolve of the similarity image failed");
    xs.E = ek.eigenvalues();
    Mat eta = ek.eigenvectors();
    detail::fix_column_phases(eta);

    Mat omega_z = S * eta;
    Mat u_z = Sinv * eta;
    Mat v_z = -(kz.conjugate() * u_z);

    xs.eta = Zc * eta;
    xs.omega = Zc * omega_z;
    xs.u = Zc * u_z;
    xs.v = Zc * v_z;

    Mat De = xs.E.cast<complex_t>().asDiagonal();
    xs.residuals.omega_eigen = (hph * omega_z - omega_z * De).colwise().norm().maxCoeff();
    xs.residuals.u_eigen = (hph.adjoint() * u_z - u_z * De).colwise().norm().maxCoeff();
    xs.residuals.pair_row =
        (zs.f.conjugate() * u_z - zs.h * v_z - v_z * De).colwise().norm().maxCoeff();
    xs.residuals.completeness = (xs.omega.conjugate() * xs.u.transpose() - qm.proj.m).norm();
    xs.residuals.biorthogonality = (xs.u.adjoint() * xs.omega - Mat::Identity(n, n)).norm();
    return xs;
}

// Spectrum of h + k (conj f) on phi-perp for any branch, principal or saddle:
// a general eigensolve whose imaginary parts are checked against imag_tol and
// whose real parts come back ascending.
inline RVec hph_spectrum(const QuadraticModel& qm, const Kernel& k, double imag_tol = 1e-8) {
    auto zs = detail::reduce_perp(qm);
    Mat kz = detail::perp_coordinates(k, zs.Z, "hph_spectrum");
    Mat hph = zs.h + kz * zs.f.conjugate();
    Eigen::ComplexEigenSolver<Mat> ces(hph, false);
    if (ces.info() != Eigen::Success) throw degenerate_basis("hph_spectrum: eigensolve failed");
    Vec ev = ces.eigenvalues();
    const double scale = std::max(1.0, op_norm(hph));
    if (ev.imag().cwiseAbs().maxCoeff() > imag_tol * scale)
        throw degenerate_basis("hph_spectrum: spectrum acquired imaginary parts");
    RVec out = ev.real();
    std::sort(out.begin(), out.end());
    return out;
}

// Residual of the untruncated block matrix [[h^T, -f], [conj f, -h]] applied
// to (phi, conj phi); vanishes because h phi = f conj(phi) = gamma phi.
inline double condensate_null_residual(const QuadraticModel& qm) {
    Vec top = qm.h.m.transpose() * qm.phi - qm.f.m * qm.phi.conjugate();
    Vec bot = qm.f.m.conjugate() * qm.phi - qm.h.m * qm.phi.conjugate();
    return std::sqrt(top.squaredNorm() + bot.squaredNorm());
}

// The symplectic eigenproblem data on phi-perp, all in orthonormal complement
// coordinates (blocks are (M-1) x (M-1)):
//   M_mat = [[h^T, -f], [conj f, -h]]      model-only, independent of k
//   W_mat = [[I, k], [conj k, I]]          the graph transform of k
//   D_mat = diag(h^T + k conj f, -(h + conj(k) f))
// When k solves the Riccati equation, D W = W M, so M is similar to the
// block-diagonal D and its spectrum is the symmetric multiset +/- E_j.
struct SymplecticSystem {
    Mat M_mat, W_mat, W_inv, D_mat;
    RMat Z;  // the complement isometry the coordinates refer to
    int n = 0;
    bool invertible = true;  // false when |k|_op >= 1: W_inv left empty
};

inline SymplecticSystem build_symplectic(const QuadraticModel& qm, const Kernel& k) {
    auto zs = detail::reduce_perp(qm);
    Mat kz = detail::perp_coordinates(k, zs.Z, "build_symplectic");
    const int n = zs.n;
    const Mat id = Mat::Identity(n, n);

    SymplecticSystem sys;
    sys.Z = zs.Z;
    sys.n = n;
    sys.M_mat.resize(2 * n, 2 * n);
    sys.M_mat << zs.h.transpose(), -zs.f, zs.f.conjugate(), -zs.h;
    sys.W_mat.resize(2 * n, 2 * n);
    sys.W_mat << id, kz, kz.conjugate(), id;
    sys.D_mat = Mat::Zero(2 * n, 2 * n);
    sys.D_mat.topLeftCorner(n, n) = zs.h.transpose() + kz * zs.f.conjugate();
    sys.D_mat.bottomRightCorner(n, n) = -(zs.h + kz.conjugate() * zs.f);

    if (op_norm(kz) < 1.0) {
        Mat auu = (id - kz * kz.conjugate()).partialPivLu().solve(id);
        Mat avv = (id - kz.conjugate() * kz).partialPivLu().solve(id);
        sys.W_inv.resize(2 * n, 2 * n);
        sys.W_inv << auu, -kz * avv, -kz.conjugate() * auu, avv;
    } else {
        sys.invertible = false;
    }
    return sys;
}

inline SymplecticSystem build_symplectic(const QuadraticModel& qm) {
    const int M = qm.dim();
    return build_symplectic(qm, Kernel::symmetric(Mat::Zero(M, M)));
}

// Eigenpairs of the symplectic matrix split by sign.  Columns of u/v hold the
// +type families normalized to |u_j|^2 - |v_j|^2 = 1; u_minus/v_minus hold the
// partner eigenvectors at -E_j (any column scaling, only their span matters).
struct FetterSolution {
    RVec E;                 // +type eigenvalues, ascending
    Mat u, v;               // +type families, full-basis coefficients
    Mat u_minus, v_minus;   // partners at -E_j, aligned with E
    RVec spectrum;          // all 2(M-1) eigenvalue real parts, ascending
    double max_imag = 0.0;  // largest |Im| over the raw eigenvalues
    double pair_residual = 0.0;

    ExcitationSet families() const {
        ExcitationSet xs;
        xs.E = E;
        xs.u = u;
        xs.v = v;
        return xs;
    }
};

inline FetterSolution solve_fetter(const SymplecticSystem& sys) {
    const int n = sys.n;
    require(n >= 1 && sys.M_mat.rows() == 2 * n, "solve_fetter: malformed system");
    Eigen::ComplexEigenSolver<Mat> ces(sys.M_mat);
    if (ces.info() != Eigen::Success) throw degenerate_basis("solve_fetter: eigensolve failed");

    Vec ev = ces.eigenvalues();
    const double scale = std::max(1.0, op_norm(sys.M_mat));

    FetterSolution fs;
    fs.max_imag = ev.imag().cwiseAbs().maxCoeff();
    fs.spectrum = ev.real();
    std::sort(fs.spectrum.begin(), fs.spectrum.end());

    std::vector<int> plus, minus;
    for (int i = 0; i < 2 * n; ++i) (ev[i].real() > 0.0 ? plus : minus).push_back(i);
    if (int(plus.size()) != n)
        throw degenerate_basis("solve_fetter: spectrum does not split evenly by sign");
    std::sort(plus.begin(), plus.end(),
              [&](int a, int b) { return ev[a].real() < ev[b].real(); });

    // pair each +E with the nearest remaining eigenvalue to -E
    std::vector<int> partner(n, -1);
    std::vector<bool> used(minus.size(), false);
    for (int j = 0; j < n; ++j) {
        const double target = -ev[plus[j]].real();
        int best = -1;
        double best_d = std::numeric_limits<double>::infinity();
        for (size_t m = 0; m < minus.size(); ++m) {
            if (used[m]) continue;
            const double d = std::abs(ev[minus[m]].real() - target);
            if (d < best_d) {
                best_d = d;
                best = int(m);
            }
        }
        if (best < 0 || best_d > 1e-6 * scale)
            throw degenerate_basis("solve_fetter: spectrum is not symmetric under negation");
        used[best] = true;
        partner[j] = minus[best];
    }

    fs.E.resize(n);
    Mat pz(n, n), qz(n, n), pm(n, n), qm_(n, n);
    for (int j = 0; j < n; ++j) {
        fs.E[j] = ev[plus[j]].real();
        Vec x = ces.eigenvectors().col(plus[j]);
        pz.col(j) = x.head(n);
        qz.col(j) = x.tail(n);
        Vec y = ces.eigenvectors().col(partner[j]);
        pm.col(j) = y.head(n);
        qm_.col(j) = y.tail(n);
    }

    // re-biorthogonalize degenerate clusters: within a cluster the solver's
    // vectors need not be symplectically orthogonal, so whiten the indefinite
    // Gram block before the per-mode normalization
    int c0 = 0;
    while (c0 < n) {
        int c1 = c0 + 1;
        while (c1 < n && fs.E[c1] - fs.E[c1 - 1] < 1e-9 * scale) ++c1;
        if (c1 - c0 > 1) {
            const int w = c1 - c0;
            Mat G = pz.middleCols(c0, w).adjoint() * pz.middleCols(c0, w) -
                    qz.middleCols(c0, w).adjoint() * qz.middleCols(c0, w);
            Eigen::SelfAdjointEigenSolver<Mat> eg(0.5 * (G + G.adjoint()).eval());
            if (eg.eigenvalues().minCoeff() <= 0.0)
                throw degenerate_basis("solve_fetter: degenerate cluster is not J-positive");
            Mat gi = eg.eigenvectors() *
                     eg.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                     eg.eigenvectors().adjoint();
            pz.middleCols(c0, w) = (pz.middleCols(c0, w) * gi).eval();
            qz.middleCols(c0, w) = (qz.middleCols(c0, w) * gi).eval();
        }
        c0 = c1;
    }

    double worst = 0.0;
    for (int j = 0; j < n; ++j) {
        Vec x(2 * n);
        x << pz.col(j), qz.col(j);
        worst = std::max(worst,
                         (sys.M_mat * x - complex_t(fs.E[j]) * x).norm() / x.norm());
        const double s2 = pz.col(j).squaredNorm() - qz.col(j).squaredNorm();
        if (s2 <= 0.0)
            throw degenerate_basis("solve_fetter: +type eigenvector with nonpositive J-norm");
        pz.col(j) /= std::sqrt(s2);
        qz.col(j) /= std::sqrt(s2);
        const double m2 = qm_.col(j).squaredNorm() - pm.col(j).squaredNorm();
        if (m2 > 0.0) {
            pm.col(j) /= std::sqrt(m2);
            qm_.col(j) /= std::sqrt(m2);
        }
    }
    fs.pair_residual = worst;
    // remaining freedom after J-normalization is a joint phase on (u, v)
    for (int j = 0; j < n; ++j) {
        int idx = 0;
        pz.col(j).cwiseAbs().maxCoeff(&idx);
        const complex_t lead = pz(idx, j);
        if (std::abs(lead) > 0.0) {
            const complex_t ph = std::conj(lead) / std::abs(lead);
            pz.col(j) *= ph;
            qz.col(j) *= ph;
        }
    }

    Mat Zc = sys.Z.cast<complex_t>();
    fs.u = Zc * pz;
    fs.v = Zc * qz;
    fs.u_minus = Zc * pm;
    fs.v_minus = Zc * qm_;
    return fs;
}

// Residuals of the canonical relations the families must satisfy.  All the
// delta-hats below mean the projector onto the span of the u-family (equal to
// phi-perp when the family is complete).
struct UVReport {
    double symplectic = 0.0;       // |U^T V - V^T U|
    double orthonormal = 0.0;      // |U^dag U - V^dag V - I|
    double completeness_uu = 0.0;  // |U U^dag - conj(V) V^T - delta-hat|
    double completeness_uv = 0.0;  // |U V^dag - conj(V) U^T|
    double closed_sum_u = 0.0;     // |U U^dag - (delta-hat - k conj k)^(-1)|
    double closed_sum_v = 0.0;     // |conj(V) V^T - k conj(k) (delta-hat - k conj k)^(-1)|

    double max() const {
        return std::max({symplectic, orthonormal, completeness_uu, completeness_uv,
                         closed_sum_u, closed_sum_v});
    }
};

inline UVReport verify_uv_relations(const Mat& u, const Mat& v, const Kernel& k) {
    require(k.sym == Symmetry::symmetric, "verify_uv_relations: k must be complex-symmetric");
    require(u.rows() == k.m.rows() && v.rows() == u.rows() && v.cols() == u.cols(),
            "verify_uv_relations: family shape mismatch");
    const int n = int(u.cols());

    UVReport rep;
    rep.symplectic = (u.transpose() * v - v.transpose() * u).norm();
    rep.orthonormal = (u.adjoint() * u - v.adjoint() * v - Mat::Identity(n, n)).norm();

    // projector onto the family span, recovered from u itself
    Eigen::HouseholderQR<Mat> qr(u);
    Mat Q = qr.householderQ() * Mat::Identity(u.rows(), n);
    Mat proj = Q * Q.adjoint();

    Mat uu = u * u.adjoint();
    Mat vv = v.conjugate() * v.transpose();
    rep.completeness_uu = (uu - vv - proj).norm();
    rep.completeness_uv = (u * v.adjoint() - v.conjugate() * u.transpose()).norm();

    Mat A = proj - k.m * k.m.conjugate();
    Mat Ainv = detail::psd_power(Kernel::hermitian(0.5 * (A + A.adjoint()), 1e-8), -1.0, 1e-8,
                                 "verify_uv_relations");
    rep.closed_sum_u = (uu - Ainv).norm();
    rep.closed_sum_v = (vv - k.m * k.m.conjugate() * Ainv).norm();
    return rep;
}

}  // namespace pairwave
