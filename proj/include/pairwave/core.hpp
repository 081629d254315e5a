#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pairwave {

using complex_t = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

inline constexpr double pi = 3.14159265358979323846;

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct invalid_input : error {
    using error::error;
};
struct invalid_configuration : error {
    using error::error;
};
struct out_of_domain : error {
    using error::error;
};
struct domain_error : error {
    using error::error;
};
struct convergence_failure : error {
    using error::error;
};
struct degenerate_basis : error {
    using error::error;
};
struct resonance_error : error {
    using error::error;
};
struct size_cap_exceeded : error {
    using error::error;
};
struct dependency_error : error {
    using error::error;
};

struct gap_violation : error {
    double value;
    Eigen::VectorXcd witness;
    gap_violation(const std::string& msg, double v, Eigen::VectorXcd e)
        : error(msg), value(v), witness(std::move(e)) {}
};

struct per_mode_gap_violation : error {
    using error::error;
};

// Harmonic trap plus Gaussian pair interaction
//   v(x) = g (sigma sqrt(2 pi))^{-1} exp(-x^2 / (2 sigma^2)),
// so g is the total mass of v.  N is the particle number.
struct TrapModel {
    double omega = 1.0;
    double g = 0.0;
    double sigma = 0.5;
    double N = 1.0;
};

enum class Symmetry { hermitian, symmetric, general };

// Dense two-point kernel with a declared symmetry class.  Construction
// verifies the symmetry residual and then symmetrizes exactly so that
// downstream algebra can rely on it bitwise.  The general class carries
// no structure (e.g. h + k f-bar, which is neither).
struct Kernel {
    Mat m;
    Symmetry sym = Symmetry::hermitian;

    Kernel() = default;

    static double residual(const Mat& a, Symmetry s) {
        if (s == Symmetry::general) return 0.0;
        if (s == Symmetry::hermitian) return (a - a.adjoint()).norm();
        return (a - a.transpose()).norm();
    }

    static Kernel make(Mat a, Symmetry s, double tol = 1e-12) {
        const double scale = std::max(1.0, a.norm());
        if (residual(a, s) > tol * scale)
            throw invalid_input("kernel symmetry residual exceeds tolerance");
        Kernel k;
        if (s == Symmetry::hermitian)
            k.m = 0.5 * (a + a.adjoint()).eval();
        else if (s == Symmetry::symmetric)
            k.m = 0.5 * (a + a.transpose()).eval();
        else
            k.m = std::move(a);
        k.sym = s;
        return k;
    }

    static Kernel hermitian(Mat a, double tol = 1e-12) { return make(std::move(a), Symmetry::hermitian, tol); }
    static Kernel symmetric(Mat a, double tol = 1e-12) { return make(std::move(a), Symmetry::symmetric, tol); }
    static Kernel general(Mat a) { return make(std::move(a), Symmetry::general); }

    Eigen::Index dim() const { return m.rows(); }
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw invalid_input(msg);
}

}  // namespace pairwave
