#include <catch2/catch_amalgamated.hpp>

#include "pairwave/bdg.hpp"

using namespace pairwave;

namespace {

struct Setup {
    SpectralBasis basis;
    TrapModel trap;
    QuadraticModel qm;
};

Setup make_setup(int M, double g, double N) {
    Setup s;
    s.basis = build_basis(M, 2 * M > 64 ? 2 * M : 64);
    s.trap.g = g;
    s.trap.N = N;
    s.qm = build_model(solve_hartree(s.trap, s.basis), s.trap, s.basis);
    return s;
}

const Setup& interacting24() {
    static Setup s = make_setup(24, 0.5, 2.0);  // N g = 1
    return s;
}

const Setup& free16() {
    static Setup s = make_setup(16, 0.0, 1.0);
    return s;
}

const PairKernel& variational24() {
    static PairKernel pk = solve_riccati_variational(interacting24().qm);
    return pk;
}

// an eigensolve-exact principal kernel; sharper residual than the iterative one
const PairKernel& bdg24() {
    static PairKernel pk = solve_riccati_bdg(interacting24().qm);
    return pk;
}

Kernel zero_kernel(const QuadraticModel& qm) {
    return Kernel::symmetric(Mat::Zero(qm.dim(), qm.dim()));
}

// unit vector orthogonal to phi: a projector column is already in phi-perp
Vec perp_unit(const QuadraticModel& qm, int seed_col) {
    Vec e = qm.proj.m.col(seed_col);
    return e / e.norm();
}

}  // namespace

TEST_CASE("build_hph forms the non-Hermitian phonon block") {
    const auto& s = interacting24();
    Kernel h0 = build_hph(s.qm, zero_kernel(s.qm));
    CHECK(h0.sym == Symmetry::general);
    CHECK((h0.m - s.qm.h.m).norm() == 0.0);

    const auto& pk = variational24();
    Kernel hph = build_hph(s.qm, pk.k);
    CHECK((hph.m - (s.qm.h.m + pk.k.m * s.qm.f.m.conjugate())).norm() == 0.0);
    // genuinely non-Hermitian once pairing is on
    CHECK((hph.m - hph.m.adjoint()).norm() > 1e-6);

    CHECK_THROWS_AS(build_hph(s.qm, Kernel::hermitian(Mat::Identity(24, 24))), invalid_input);
    CHECK_THROWS_AS(build_hph(s.qm, Kernel::symmetric(Mat::Zero(7, 7))), invalid_input);
}

TEST_CASE("oscillator limit: phonon spectrum is 2j and the families are the modes") {
    const auto& s = free16();
    const int M = s.qm.dim();
    Kernel k0 = zero_kernel(s.qm);

    RVec spec = hph_spectrum(s.qm, k0);
    REQUIRE(spec.size() == M - 1);
    for (int j = 0; j < M - 1; ++j) CHECK(std::abs(spec[j] - 2.0 * (j + 1)) < 1e-8);

    ExcitationSet xs = excitation_spectrum(s.qm, k0);
    REQUIRE(xs.E.size() == M - 1);
    for (int j = 0; j < M - 1; ++j) CHECK(std::abs(xs.E[j] - 2.0 * (j + 1)) < 1e-8);
    // omega = u = eta = Hermite mode j+1 (coefficient basis vectors), v = 0
    CHECK((xs.omega - xs.u).norm() < 1e-10);
    CHECK((xs.omega - xs.eta).norm() < 1e-12);
    CHECK(xs.v.norm() < 1e-12);
    for (int j = 0; j < M - 1; ++j) {
        Vec ej = Vec::Zero(M);
        ej[j + 1] = 1.0;
        CHECK((xs.omega.col(j) - ej).norm() < 1e-8);
    }
    CHECK(xs.residuals.max() < 1e-10);
}

TEST_CASE("excitation spectrum at Ng=1: real, positive, fully certified") {
    const auto& s = interacting24();
    const auto& pk = variational24();
    ExcitationSet xs = excitation_spectrum(s.qm, pk.k);

    const int n = s.qm.dim() - 1;
    REQUIRE(xs.E.size() == n);
    CHECK(xs.E.minCoeff() > 0.0);
    for (int j = 1; j < n; ++j) CHECK(xs.E[j] >= xs.E[j - 1]);

    // reality certified against a direct general eigensolve of the projected block
    Mat hph_proj = s.qm.proj.m * build_hph(s.qm, pk.k).m * s.qm.proj.m;
    Eigen::ComplexEigenSolver<Mat> ces(hph_proj, false);
    REQUIRE(ces.info() == Eigen::Success);
    Vec raw = ces.eigenvalues();
    CHECK(raw.imag().cwiseAbs().maxCoeff() < 1e-10);
    std::vector<double> re(raw.size());
    for (int i = 0; i < raw.size(); ++i) re[i] = raw[i].real();
    std::sort(re.begin(), re.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
    CHECK(std::abs(re.front()) < 1e-8);  // the deflated condensate direction
    re.erase(re.begin());
    std::sort(re.begin(), re.end());
    for (int j = 0; j < n; ++j) CHECK(std::abs(re[j] - xs.E[j]) < 1e-8);

    CHECK(xs.residuals.kappa_hermiticity < 1e-9);
    CHECK(xs.residuals.omega_eigen < 1e-9);
    CHECK(xs.residuals.u_eigen < 1e-9);
    CHECK(xs.residuals.completeness < 1e-9);
    CHECK(xs.residuals.biorthogonality < 1e-9);

    // structural identities of the construction
    CHECK((xs.v + pk.k.m.conjugate() * xs.u).norm() < 1e-12);
    CHECK((xs.eta.adjoint() * xs.eta - Mat::Identity(n, n)).norm() < 1e-12);
    // omega = S eta and u = S^{-1} eta compose to omega = (delta-hat - k conj k) u
    CHECK((xs.omega - (s.qm.proj.m - pk.k.m * pk.k.m.conjugate()) * xs.u).norm() < 1e-10);

    // the pair row inherits the kernel's Riccati defect, so certify it on the
    // eigensolve-exact kernel
    ExcitationSet sharp = excitation_spectrum(s.qm, bdg24().k);
    CHECK(sharp.residuals.pair_row < 1e-9);
    CHECK(sharp.residuals.max() < 1e-9);

    Kernel too_big = Kernel::symmetric(pk.k.m * (1.5 / pk.op_norm));
    CHECK_THROWS_AS(excitation_spectrum(s.qm, too_big), out_of_domain);
}

TEST_CASE("symplectic system blocks and the graph similarity") {
    const auto& s = interacting24();
    const auto& pk = bdg24();
    const int n = s.qm.dim() - 1;

    SymplecticSystem free_sys = build_symplectic(s.qm);
    CHECK(free_sys.n == n);
    CHECK((free_sys.W_mat - Mat::Identity(2 * n, 2 * n)).norm() == 0.0);
    CHECK((free_sys.D_mat.topLeftCorner(n, n) - free_sys.M_mat.topLeftCorner(n, n)).norm() ==
          0.0);
    CHECK((free_sys.D_mat.bottomRightCorner(n, n) - free_sys.M_mat.bottomRightCorner(n, n))
              .norm() == 0.0);
    CHECK(free_sys.D_mat.topRightCorner(n, n).norm() == 0.0);
    CHECK(free_sys.D_mat.bottomLeftCorner(n, n).norm() == 0.0);

    SymplecticSystem sys = build_symplectic(s.qm, pk.k);
    CHECK(sys.invertible);
    // M is kernel-independent
    CHECK((sys.M_mat - free_sys.M_mat).norm() == 0.0);
    CHECK((sys.W_mat * sys.W_inv - Mat::Identity(2 * n, 2 * n)).norm() < 1e-10);
    CHECK((sys.W_inv * sys.W_mat - Mat::Identity(2 * n, 2 * n)).norm() < 1e-10);
    CHECK(op_norm(Mat(sys.D_mat * sys.W_mat - sys.W_mat * sys.M_mat)) < 1e-10);

    // the conjugation residual with an iterative kernel equals its Riccati
    // defect; it must not silently exceed it
    const auto& pv = variational24();
    SymplecticSystem sysv = build_symplectic(s.qm, pv.k);
    CHECK(op_norm(Mat(sysv.D_mat * sysv.W_mat - sysv.W_mat * sysv.M_mat)) <
          2.0 * pv.riccati_residual + 1e-12);

    CHECK(condensate_null_residual(s.qm) < 1e-8);
    CHECK(condensate_null_residual(free16().qm) < 1e-10);
}

TEST_CASE("saddle kernels flag the graph transform as non-invertible") {
    const auto& s = interacting24();
    PairKernel saddle = flip_branch(bdg24(), {0}, s.qm);
    REQUIRE(saddle.op_norm > 1.0);
    SymplecticSystem sys = build_symplectic(s.qm, saddle.k);
    CHECK_FALSE(sys.invertible);
    CHECK(sys.W_inv.size() == 0);
    // D W = W M still holds: the graph relation does not need W invertible
    CHECK(op_norm(Mat(sys.D_mat * sys.W_mat - sys.W_mat * sys.M_mat)) < 1e-10);
}

TEST_CASE("fetter eigenproblem: signed pairs, normalization, cross-module spectrum") {
    const auto& s = interacting24();
    FetterSolution fs = solve_fetter(build_symplectic(s.qm));
    const int n = s.qm.dim() - 1;

    REQUIRE(fs.E.size() == n);
    CHECK(fs.E.minCoeff() > 0.0);
    CHECK(fs.max_imag < 1e-10);
    CHECK(fs.pair_residual < 1e-10);

    // spectrum is symmetric under negation as a multiset
    REQUIRE(fs.spectrum.size() == 2 * n);
    for (int i = 0; i < n; ++i)
        CHECK(std::abs(fs.spectrum[i] + fs.spectrum[2 * n - 1 - i]) < 1e-8);

    // +type normalization |u|^2 - |v|^2 = 1
    for (int j = 0; j < n; ++j)
        CHECK(std::abs(fs.u.col(j).squaredNorm() - fs.v.col(j).squaredNorm() - 1.0) < 1e-12);

    // agreement with the Hermitian-similarity route
    ExcitationSet xs = excitation_spectrum(s.qm, variational24().k);
    CHECK((fs.E - xs.E).cwiseAbs().maxCoeff() < 1e-8);

    // sigma(M) = sigma(h_ph) union sigma(-h_ph), principal branch
    RVec hspec = hph_spectrum(s.qm, bdg24().k);
    RVec both(2 * n);
    both << (-hspec).reverse(), hspec;
    std::sort(both.begin(), both.end());
    CHECK((both - fs.spectrum).cwiseAbs().maxCoeff() < 1e-8);

    // same assertion across a branch flip: M never moves, h_ph rearranges signs
    PairKernel saddle = flip_branch(bdg24(), {0}, s.qm);
    RVec sspec = hph_spectrum(s.qm, saddle.k);
    RVec sboth(2 * n);
    sboth << (-sspec).reverse(), sspec;
    std::sort(sboth.begin(), sboth.end());
    CHECK((sboth - fs.spectrum).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("fetter eigenproblem in the oscillator limit") {
    const auto& s = free16();
    FetterSolution fs = solve_fetter(build_symplectic(s.qm));
    const int n = s.qm.dim() - 1;
    for (int j = 0; j < n; ++j) {
        CHECK(std::abs(fs.E[j] - 2.0 * (j + 1)) < 1e-8);
        CHECK(std::abs(fs.spectrum[j] + 2.0 * (n - j)) < 1e-8);
    }
    CHECK(fs.v.norm() < 1e-10);
}

TEST_CASE("uv relation report: free, rank-1 oracle, interacting") {
    const auto& sf = free16();
    Kernel k0 = zero_kernel(sf.qm);
    ExcitationSet xf = excitation_spectrum(sf.qm, k0);
    UVReport rf = verify_uv_relations(xf.u, xf.v, k0);
    CHECK(rf.max() < 1e-12);

    // rank-1 kernel: the closed sum on span(e) is the geometric series value
    const auto& s = interacting24();
    Vec e = perp_unit(s.qm, 3);
    const double z = 0.62;
    Kernel k1 = Kernel::symmetric(z * e * e.transpose());
    ExcitationSet x1 = excitation_spectrum(s.qm, k1);
    UVReport r1 = verify_uv_relations(x1.u, x1.v, k1);
    CHECK(r1.closed_sum_u < 1e-8);
    CHECK(r1.closed_sum_v < 1e-8);
    const double series = (e.adjoint() * (x1.u * x1.u.adjoint()) * e).value().real();
    CHECK(std::abs(series - 1.0 / (1.0 - z * z)) < 1e-10);

    const auto& pk = variational24();
    ExcitationSet xs = excitation_spectrum(s.qm, pk.k);
    UVReport rs = verify_uv_relations(xs.u, xs.v, pk.k);
    CHECK(rs.max() < 1e-8);

    CHECK_THROWS_AS(verify_uv_relations(xs.u.leftCols(3), xs.v, pk.k), invalid_input);
}
