#pragma once

#include <algorithm>
#include <numeric>

#include "pairwave/core.hpp"

namespace pairwave {

inline double op_norm(const Mat& a) {
    if (a.size() == 0) return 0.0;
    return Eigen::JacobiSVD<Mat>(a).singularValues()[0];
}
inline double op_norm(const RMat& a) { return op_norm(Mat(a.cast<complex_t>())); }

inline double hs_norm(const Mat& a) { return a.norm(); }
inline double hs_norm(const RMat& a) { return a.norm(); }

// Factorization of a complex-symmetric K as sum_j z_j e_j e_j^T with
// orthonormal e_j, i.e. K conj(e_j) = z_j e_j.  |z_j| are the singular
// values; modes are ordered by |z_j| descending and zero modes dropped.
struct TakagiDecomposition {
    Mat vectors;  // M x rank, column j = e_j
    Vec z;        // rank
    int rank = 0;

    Mat reconstruct() const {
        Mat k = Mat::Zero(vectors.rows(), vectors.rows());
        for (int j = 0; j < rank; ++j)
            k += z[j] * vectors.col(j) * vectors.col(j).transpose();
        return k;
    }
};

namespace detail {

// Jointly diagonalize commuting real symmetric R, S: diagonalize R, then S
// restricted to each degenerate R-eigenspace.
inline RMat joint_diagonalize(const RMat& R, const RMat& S, double cluster_tol) {
    Eigen::SelfAdjointEigenSolver<RMat> er(R);
    RMat g = er.eigenvectors();
    const RVec lam = er.eigenvalues();
    const int n = int(R.rows());
    int lo = 0;
    while (lo < n) {
        int hi = lo + 1;
        while (hi < n && lam[hi] - lam[hi - 1] < cluster_tol) ++hi;
        if (hi - lo > 1) {
            RMat block = g.middleCols(lo, hi - lo);
            Eigen::SelfAdjointEigenSolver<RMat> es(RMat(block.transpose() * S * block));
            g.middleCols(lo, hi - lo) = block * es.eigenvectors();
        }
        lo = hi;
    }
    return g;
}

}  // namespace detail

inline TakagiDecomposition takagi(const Kernel& K, double tol = 1e-10) {
    require(K.sym == Symmetry::symmetric, "takagi: kernel must be complex-symmetric");
    const Mat& k = K.m;
    const int M = int(k.rows());

    Eigen::SelfAdjointEigenSolver<Mat> es(k.conjugate() * k);
    if (es.info() != Eigen::Success) throw degenerate_basis("takagi: eigensolve failed");
    RVec sing = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const double scale = std::max(1.0, sing.maxCoeff());
    const double drop = 0.01 * tol;
    const double cluster_gap = 1e-8 * scale;

    std::vector<Vec> evecs;
    std::vector<complex_t> zs;
    // eigenvalues come ascending; walk clusters of equal singular value
    int lo = 0;
    while (lo < M) {
        int hi = lo + 1;
        while (hi < M && sing[hi] - sing[hi - 1] < cluster_gap) ++hi;
        if (sing[hi - 1] > drop) {
            const int r = hi - lo;
            Mat V = es.eigenvectors().middleCols(lo, r);
            Mat kc = V.transpose() * k * V;
            RMat g = detail::joint_diagonalize(kc.real(), kc.imag(), cluster_gap);
            for (int a = 0; a < r; ++a) {
                Vec ga = g.col(a).cast<complex_t>();
                Vec e = (V * ga).conjugate();
                complex_t z = (ga.transpose() * kc * ga).value();
                // the blockwise amplitude resolves far below the squared-route
                // singular values, so re-test smallness on z itself; this
                // weeds out exact-null directions whose sqrt(eig(KK)) floor
                // sits well above the true zero
                if (std::abs(z) <= drop) continue;
                // fix the free phase so the largest component is real positive
                int idx = 0;
                e.cwiseAbs().maxCoeff(&idx);
                complex_t u = std::conj(e[idx]) / std::abs(e[idx]);
                evecs.push_back(u * e);
                zs.push_back(z * std::conj(u) * std::conj(u));
            }
        }
        lo = hi;
    }

    std::vector<int> order(zs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return std::abs(zs[a]) > std::abs(zs[b]); });

    TakagiDecomposition out;
    out.rank = int(zs.size());
    out.vectors.resize(M, out.rank);
    out.z.resize(out.rank);
    for (int j = 0; j < out.rank; ++j) {
        out.vectors.col(j) = evecs[order[j]];
        out.z[j] = zs[order[j]];
    }
    return out;
}

namespace detail {

inline Mat psd_power(const Kernel& A, double power, double floor, const char* who) {
    require(A.sym == Symmetry::hermitian, std::string(who) + ": kernel must be hermitian");
    Eigen::SelfAdjointEigenSolver<Mat> es(A.m);
    if (es.info() != Eigen::Success) throw degenerate_basis(std::string(who) + ": eigensolve failed");
    RVec lam = es.eigenvalues();
    const double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
    if (lam.minCoeff() < -1e-12 * scale)
        throw domain_error(std::string(who) + ": matrix is not positive semidefinite");
    RVec out(lam.size());
    for (int i = 0; i < lam.size(); ++i) {
        const double l = std::max(lam[i], 0.0);
        if (power < 0.0) {
            if (floor > 0.0 && l <= floor) {
                out[i] = 0.0;  // pseudo-inverse branch: annihilate the null space
                continue;
            }
            if (l <= 1e-10) throw domain_error(std::string(who) + ": matrix is numerically singular");
        }
        out[i] = std::pow(l, power);
    }
    return es.eigenvectors() * out.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace detail

inline Kernel sqrt_psd(const Kernel& A) {
    return Kernel::hermitian(detail::psd_power(A, 0.5, 0.0, "sqrt_psd"), 1e-9);
}

inline Kernel inv_sqrt_psd(const Kernel& A) {
    return Kernel::hermitian(detail::psd_power(A, -0.5, 0.0, "inv_sqrt_psd"), 1e-9);
}

// inverse square root on the range, zero on eigenvalues below cutoff
inline Kernel pinv_sqrt_psd(const Kernel& A, double cutoff = 1e-10) {
    return Kernel::hermitian(detail::psd_power(A, -0.5, cutoff, "pinv_sqrt_psd"), 1e-9);
}

}  // namespace pairwave
