#pragma once

#include <functional>
#include <map>

#include "pairwave/excitations.hpp"

namespace pairwave {

namespace detail {

inline long long binomial(int n, int r) {
    if (r < 0 || r > n) return 0;
    r = std::min(r, n - r);
    long long out = 1;
    for (int i = 1; i <= r; ++i) {
        out = out * (n - r + i) / i;
        // partial products grow monotonically; callers only compare against
        // small caps, so bail out long before overflow
        if (out > 1000000) return out;
    }
    return out;
}

// All occupation vectors with `modes` slots summing to `total`, in
// lexicographic order.
inline std::vector<std::vector<int>> compositions(int modes, int total) {
    std::vector<std::vector<int>> out;
    std::vector<int> occ(modes, 0);
    std::function<void(int, int)> rec = [&](int slot, int left) {
        if (slot == modes - 1) {
            occ[slot] = left;
            out.push_back(occ);
            return;
        }
        for (int n = 0; n <= left; ++n) {
            occ[slot] = n;
            rec(slot + 1, left - n);
        }
    };
    rec(0, total);
    return out;
}

}  // namespace detail

// Occupation-number space over a fixed mode count, holding every total from 0
// through `cap`: states ordered by total then lexicographically, plus one
// dense annihilation matrix per mode.  Lowering never leaves the space, so
// annihilators are exact; creators are their adjoints and lose amplitude only
// when pushed off the cap block.
struct FockSpace {
    int modes = 0, cap = 0, dim = 0;
    std::vector<std::vector<int>> states;
    std::vector<int> total_of;
    std::vector<int> block_start;  // block_start[t] .. block_start[t+1]-1 holds total t
    std::vector<Mat> lower;
    std::map<std::vector<int>, int> index;

    int block_dim(int t) const { return block_start[t + 1] - block_start[t]; }
    Mat block(const Mat& op, int t_row, int t_col) const {
        return op.block(block_start[t_row], block_start[t_col], block_dim(t_row),
                        block_dim(t_col));
    }
};

inline FockSpace build_fock_space(int modes, int cap) {
    require(modes >= 1, "build_fock_space: need at least one mode");
    require(cap >= 0, "build_fock_space: cap must be nonnegative");
    if (detail::binomial(cap + modes, modes) > 20000)
        throw size_cap_exceeded("build_fock_space: dimension exceeds 2e4");

    FockSpace sp;
    sp.modes = modes;
    sp.cap = cap;
    sp.block_start.assign(cap + 2, 0);
    for (int t = 0; t <= cap; ++t) {
        sp.block_start[t] = int(sp.states.size());
        for (auto& occ : detail::compositions(modes, t)) {
            sp.index[occ] = int(sp.states.size());
            sp.states.push_back(occ);
            sp.total_of.push_back(t);
        }
    }
    sp.dim = int(sp.states.size());
    sp.block_start[cap + 1] = sp.dim;

    sp.lower.assign(modes, Mat::Zero(sp.dim, sp.dim));
    for (int s = 0; s < sp.dim; ++s) {
        for (int i = 0; i < modes; ++i) {
            if (sp.states[s][i] == 0) continue;
            std::vector<int> target = sp.states[s];
            target[i] -= 1;
            sp.lower[i](sp.index.at(target), s) = std::sqrt(double(sp.states[s][i]));
        }
    }
    return sp;
}

// Fixed-particle-number sector of an m-mode space (mode 0 is the condensate,
// modes 1..m-1 the excited directions).  The underlying space is capped one
// particle above N so that single-ladder commutators evaluated on the sector
// are exact.
struct FockSector {
    FockSpace space;
    int m = 0, N = 0, dim = 0, offset = 0;

    Mat sector_block(const Mat& op) const { return space.block(op, N, N); }
    int perp_count(int state_in_sector) const {
        return N - space.states[offset + state_in_sector][0];
    }
};

inline FockSector enumerate_sector(int m, int N) {
    require(m >= 2, "enumerate_sector: need the condensate mode plus at least one excited mode");
    require(N >= 1, "enumerate_sector: particle number must be positive");
    if (detail::binomial(N + m - 1, m - 1) > 20000)
        throw size_cap_exceeded("enumerate_sector: sector dimension exceeds 2e4");

    FockSector sec;
    sec.space = build_fock_space(m, N + 1);
    sec.m = m;
    sec.N = N;
    sec.offset = sec.space.block_start[N];
    sec.dim = sec.space.block_dim(N);
    return sec;
}

// Largest deviation of [a_i, a_j*] from delta_ij on the fixed-N block.  The
// space extends one particle above N, so no truncation enters and the result
// is at machine precision.
inline double ccr_residual(const FockSector& sec) {
    const FockSpace& sp = sec.space;
    double worst = 0.0;
    for (int i = 0; i < sp.modes; ++i) {
        for (int j = 0; j < sp.modes; ++j) {
            Mat comm = sp.lower[i] * sp.lower[j].adjoint() - sp.lower[j].adjoint() * sp.lower[i];
            if (i == j) comm -= Mat::Identity(sp.dim, sp.dim);
            worst = std::max(worst, sp.block(comm, sec.N, sec.N).cwiseAbs().maxCoeff());
        }
    }
    return worst;
}

struct ManyBodyOperator {
    Mat matrix;  // acting on the fixed-N sector block
    bool conserves_N = true;
};

namespace detail {

// One-body operator sum_{s,t} block(s,t) a_s* a_t over the listed modes,
// assembled on the full capped space.
inline Mat dgamma_union(const FockSpace& sp, const Mat& block, int first_mode) {
    Mat out = Mat::Zero(sp.dim, sp.dim);
    for (int s = 0; s < block.rows(); ++s)
        for (int t = 0; t < block.cols(); ++t)
            if (std::abs(block(s, t)) > 0.0)
                out += block(s, t) * (sp.lower[first_mode + s].adjoint() * sp.lower[first_mode + t]);
    return out;
}

// Pair contraction sum_{s,t} block(s,t) a_s a_t over the listed modes.
inline Mat pair_lower_union(const FockSpace& sp, const Mat& block, int first_mode) {
    Mat out = Mat::Zero(sp.dim, sp.dim);
    for (int s = 0; s < block.rows(); ++s)
        for (int t = 0; t < block.cols(); ++t)
            if (std::abs(block(s, t)) > 0.0)
                out += block(s, t) * (sp.lower[first_mode + s] * sp.lower[first_mode + t]);
    return out;
}

// Phonon Hamiltonian on the capped union space: one-body part over the
// excited modes plus the condensate-pumped pair contraction with weight 1/N.
inline Mat hph_union(const FockSpace& sp, const Mat& hph, const Mat& fbar, int N) {
    Mat up0 = sp.lower[0].adjoint();
    return dgamma_union(sp, hph, 1) +
           (1.0 / double(N)) * (up0 * up0 * pair_lower_union(sp, fbar, 1));
}

// Largest cross-block norm between different particle totals; zero for any
// number-conserving assembly.
inline double offdiagonal_block_residual(const FockSpace& sp, const Mat& op) {
    double worst = 0.0;
    for (int tr = 0; tr <= sp.cap; ++tr)
        for (int tc = 0; tc <= sp.cap; ++tc)
            if (tr != tc && sp.block_dim(tr) > 0 && sp.block_dim(tc) > 0)
                worst = std::max(worst, sp.block(op, tr, tc).cwiseAbs().maxCoeff());
    return worst;
}

}  // namespace detail

// Phonon Hamiltonian restricted to the fixed-N sector from its one-body block
// over the excited modes and the conjugated pair kernel block.
inline ManyBodyOperator build_Hph_fock(const FockSector& sec, const Mat& hph, const Mat& fbar,
                                       int N) {
    require(hph.rows() == sec.m - 1 && hph.cols() == sec.m - 1,
            "build_Hph_fock: one-body block must match the excited mode count");
    require(fbar.rows() == sec.m - 1 && fbar.cols() == sec.m - 1,
            "build_Hph_fock: pair block must match the excited mode count");
    require(N >= 1, "build_Hph_fock: particle number must be positive");
    ManyBodyOperator op;
    op.conserves_N = true;
    op.matrix = sec.sector_block(detail::hph_union(sec.space, hph, fbar, N));
    return op;
}

// Mode frame for sector computations: an orthonormal basis W of the span of
// the first m-1 right eigenvectors omega_j, plus every one-particle block
// compressed to that frame.  The span is invariant under the phonon
// Hamiltonian, so the compressed one-body block has eigenvalues E_1..E_{m-1}.
struct FockBlocks {
    Mat w;        // M x (m-1), orthonormal columns
    Mat hph;      // w* (h + k fbar) w
    Mat h;        // w* h w
    Mat f;        // f(conj w_s, conj w_t)
    Mat fbar;     // conjugate of f
    Mat k;        // k(conj w_s, conj w_t)
    Mat omega_w;  // (m-1) x (m-1), columns are W-coordinates of omega_j
    RVec E;       // first m-1 excitation energies
};

inline FockBlocks fock_blocks(const QuadraticModel& qm, const Kernel& k, const ExcitationSet& xs,
                              int m) {
    require(m >= 2, "fock_blocks: need at least one excited mode");
    require(xs.E.size() >= m - 1, "fock_blocks: not enough computed excitations");
    require(qm.h.dim() == xs.omega.rows(), "fock_blocks: excitation family does not match model");

    FockBlocks b;
    Mat span = xs.omega.leftCols(m - 1);
    Eigen::HouseholderQR<Mat> qr(span);
    b.w = Mat(qr.householderQ()).leftCols(m - 1);
    Mat hph_full = build_hph(qm, k).m;
    b.hph = b.w.adjoint() * hph_full * b.w;
    b.h = b.w.adjoint() * qm.h.m * b.w;
    b.f = b.w.adjoint() * qm.f.m * b.w.conjugate();
    b.fbar = b.f.conjugate();
    b.k = b.w.adjoint() * k.m * b.w.conjugate();
    b.omega_w = b.w.adjoint() * span;
    b.E = xs.E.head(m - 1);
    return b;
}

// Spectral oracle for the phonon Hamiltonian on a fixed-N sector: its dense
// spectrum must match every multiset sum of up to N single-excitation
// energies.
struct Theorem2Report {
    RVec dense;     // sorted real parts of the sector spectrum
    RVec expected;  // sorted multiset sums of E_j
    double max_abs_dev = 0.0;
    double max_imag = 0.0;
};

inline Theorem2Report theorem2_check(const FockSector& sec, const QuadraticModel& qm,
                                     const Kernel& k, const ExcitationSet& xs) {
    FockBlocks b = fock_blocks(qm, k, xs, sec.m);
    ManyBodyOperator op = build_Hph_fock(sec, b.hph, b.fbar, sec.N);

    Eigen::ComplexEigenSolver<Mat> es(op.matrix, false);
    require(es.info() == Eigen::Success, "theorem2_check: dense eigensolve failed");

    Theorem2Report rep;
    rep.dense = es.eigenvalues().real();
    rep.max_imag = es.eigenvalues().imag().cwiseAbs().maxCoeff();
    std::sort(rep.dense.data(), rep.dense.data() + rep.dense.size());

    std::vector<double> sums;
    std::function<void(int, int, double)> rec = [&](int mode, int left, double acc) {
        if (mode == sec.m) {
            sums.push_back(acc);
            return;
        }
        for (int c = 0; c <= left; ++c) rec(mode + 1, left - c, acc + c * b.E[mode - 1]);
    };
    rec(1, sec.N, 0.0);
    std::sort(sums.begin(), sums.end());
    rep.expected = Eigen::Map<RVec>(sums.data(), long(sums.size()));

    require(rep.expected.size() == rep.dense.size(),
            "theorem2_check: multiset count does not match sector dimension");
    rep.max_abs_dev = (rep.dense - rep.expected).cwiseAbs().maxCoeff();
    return rep;
}

// Exact eigenvector of the phonon Hamiltonian on the sector for a chosen
// multiset of excited modes (one-based labels, empty = pure condensate).
// The vector is assembled as a pair-contraction descent from the top product
// state; each coefficient divides by the energy left above the current level.
struct ConstructedVector {
    Vec psi;             // normalized, on the sector block
    double E = 0.0;      // sum of the selected excitation energies
    double residual = 0.0;
};

inline ConstructedVector construct_eigenvector(const FockSector& sec, const QuadraticModel& qm,
                                               const Kernel& k, const ExcitationSet& xs,
                                               std::vector<int> selection) {
    FockBlocks b = fock_blocks(qm, k, xs, sec.m);
    const int n_top = int(selection.size());
    require(n_top <= sec.N, "construct_eigenvector: more excitations than particles");
    for (int j : selection)
        require(j >= 1 && j <= sec.m - 1, "construct_eigenvector: mode label outside 1..m-1");
    std::sort(selection.begin(), selection.end());

    const double E_total = [&] {
        double e = 0.0;
        for (int j : selection) e += b.E[j - 1];
        return e;
    }();

    auto pair_coupling = [&](int alpha, int beta) {
        // f-bar bilinear of two eigenvector columns, in the W frame
        return (b.omega_w.col(alpha - 1).transpose() * b.fbar * b.omega_w.col(beta - 1))(0, 0);
    };

    // Coefficients over sub-multisets of the selection, keyed by sorted label
    // vector.  Level l holds sub-multisets of size l; descending two at a time.
    std::map<std::vector<int>, complex_t> coeff;
    coeff[selection] = complex_t(1.0, 0.0);

    std::map<std::vector<int>, complex_t> upper = coeff;
    for (int l = n_top - 2; l >= 0; l -= 2) {
        std::map<std::vector<int>, complex_t> current;
        for (const auto& [T_up, c_up] : upper) {
            // remove one unordered pair of slots from T_up in every way
            std::map<int, int> counts;
            for (int j : T_up) counts[j] += 1;
            for (auto [alpha, ca] : counts) {
                for (auto [beta, cb] : counts) {
                    if (beta < alpha) continue;
                    double mult = (alpha == beta) ? 0.5 * ca * (ca - 1) : double(ca) * cb;
                    if (mult == 0.0) continue;
                    std::vector<int> T;
                    {
                        std::map<int, int> rem = counts;
                        rem[alpha] -= 1;
                        rem[beta] -= 1;
                        for (auto [mode, cnt] : rem)
                            for (int q = 0; q < cnt; ++q) T.push_back(mode);
                    }
                    current[T] += c_up * mult * 2.0 * pair_coupling(alpha, beta) / double(sec.N);
                }
            }
        }
        for (auto& [T, num] : current) {
            double E_T = 0.0;
            for (int j : T) E_T += b.E[j - 1];
            if (std::abs(E_total - E_T) < 1e-10)
                throw resonance_error(
                    "construct_eigenvector: vanishing energy denominator in the descent");
            num /= (E_total - E_T);
            coeff[T] = num;
        }
        upper = current;
        if (current.empty()) break;
    }

    // Assemble the Fock vector: for each sub-multiset, create the condensate
    // power from the vacuum and then one quasiparticle profile per label.
    const FockSpace& sp = sec.space;
    Vec psi_union = Vec::Zero(sp.dim);
    for (const auto& [T, c] : coeff) {
        if (std::abs(c) == 0.0) continue;
        Vec v = Vec::Zero(sp.dim);
        v[sp.index.at(std::vector<int>(sec.m, 0))] = 1.0;
        Mat up0 = sp.lower[0].adjoint();
        for (int q = 0; q < sec.N - int(T.size()); ++q) v = up0 * v;
        for (int j : T) {
            Vec next = Vec::Zero(sp.dim);
            for (int s = 0; s < sec.m - 1; ++s)
                next += b.omega_w(s, j - 1) * (sp.lower[1 + s].adjoint() * v);
            v = next;
        }
        psi_union += c * v;
    }

    ConstructedVector out;
    out.E = E_total;
    Vec psi = psi_union.segment(sec.offset, sec.dim);
    const double norm = psi.norm();
    require(norm > 0.0, "construct_eigenvector: assembled vector vanished");
    out.psi = psi / norm;

    ManyBodyOperator op = build_Hph_fock(sec, b.hph, b.fbar, sec.N);
    out.residual = (op.matrix * out.psi - E_total * out.psi).norm();
    return out;
}

// Condensate-ladder projector identities on the capped space: the resolution
// of the fixed-N block by number-eigenspace projectors, the isometry products
// of the strip/rebuild maps, and the number operator on each eigenspace.
struct ProjectorReport {
    double resolution = 0.0;        // ladder resolution vs the sector projector
    double polynomial_form = 0.0;   // interpolation-polynomial form of the same sum
    double strip_products = 0.0;    // U_m U_n* vs delta_mn P_nn
    double number_eigenspace = 0.0; // N_phi on each eigenspace vs its constant
    double max() const {
        return std::max(std::max(resolution, polynomial_form),
                        std::max(strip_products, number_eigenspace));
    }
};

inline ProjectorReport verify_projector_lemmas(int m, int N) {
    require(m >= 2, "verify_projector_lemmas: need at least two modes");
    require(N >= 1, "verify_projector_lemmas: particle number must be positive");
    FockSpace sp = build_fock_space(m, N);
    const int d = sp.dim;

    Mat a0 = sp.lower[0];
    Mat nphi = a0.adjoint() * a0;

    auto falling_poly = [&](int n) {
        // P_n evaluated on the diagonal number operator:
        // ((-1)^n / n!) prod_{j=1}^n (N_phi - j)
        Mat out = Mat::Identity(d, d);
        for (int j = 1; j <= n; ++j) out = out * (nphi - double(j) * Mat::Identity(d, d));
        double fact = 1.0;
        for (int j = 2; j <= n; ++j) fact *= j;
        return Mat(((n % 2 == 0) ? 1.0 : -1.0) / fact * out);
    };

    auto factorial = [](int p) {
        double out = 1.0;
        for (int j = 2; j <= p; ++j) out *= j;
        return out;
    };

    // Strip maps U_n: project onto n excited particles, then remove the
    // condensate amplitude; their adjoints rebuild it.
    std::vector<Mat> strip(N + 1), rebuild(N + 1);
    for (int n = 0; n <= N; ++n) {
        Mat down = Mat::Identity(d, d);
        for (int q = 0; q < N - n; ++q) down = a0 * down;
        strip[n] = falling_poly(n) * down / std::sqrt(factorial(N - n));
        rebuild[n] = strip[n].adjoint();
    }

    Mat sector_proj = Mat::Zero(d, d);
    for (int s = sp.block_start[N]; s < sp.block_start[N + 1]; ++s) sector_proj(s, s) = 1.0;

    ProjectorReport rep;

    Mat resolution = Mat::Zero(d, d);
    for (int n = 0; n <= N; ++n) resolution += rebuild[n] * strip[n];
    rep.resolution = ((resolution - sector_proj) * sector_proj).cwiseAbs().maxCoeff();

    // Same sum written as an interpolation polynomial in the number operator
    // alone, valid on the fixed-N block.
    Mat poly_sum = Mat::Zero(d, d);
    for (int n = 0; n <= N; ++n) {
        Mat term = Mat::Identity(d, d);
        for (int p = 0; p <= N; ++p) {
            if (p == N - n) continue;
            term = term * (nphi - double(p) * Mat::Identity(d, d));
        }
        double sign = ((N - n) % 2 == 0) ? 1.0 : -1.0;
        poly_sum += sign / (factorial(N - n) * factorial(n)) * term;
    }
    double flip = (N % 2 == 0) ? 1.0 : -1.0;
    rep.polynomial_form = ((flip * poly_sum - sector_proj) * sector_proj).cwiseAbs().maxCoeff();

    for (int mm = 0; mm <= N; ++mm) {
        for (int n = 0; n <= N; ++n) {
            Mat prod = strip[mm] * rebuild[n];
            Mat target = (mm == n) ? Mat(falling_poly(n)) : Mat(Mat::Zero(d, d));
            Mat diff = prod - target;
            // restrict to columns (and rows) with n excited particles total
            rep.strip_products =
                std::max(rep.strip_products, sp.block(diff, mm, n).cwiseAbs().maxCoeff());
        }
    }

    for (int n = 0; n <= N; ++n) {
        Mat proj_Nn = rebuild[n] * strip[n];
        Mat diff = nphi * proj_Nn - double(N - n) * proj_Nn;
        rep.number_eigenspace = std::max(rep.number_eigenspace, diff.cwiseAbs().maxCoeff());
    }
    return rep;
}

// Exact conjugation of the number-conserving Hamiltonian by the nilpotent
// pair-excitation generator, compared against its quadratic model on growing
// particle numbers.  All one-particle data is compressed to the W frame first;
// the deviation comes only from the dropped condensate-number replacements,
// so it shrinks like 1/N.
struct ConjugationScalingReport {
    std::vector<int> N_list;
    std::vector<double> deviation;   // lowest-eigenvalue mismatch per N
    std::vector<double> ratio;       // deviation[i] / deviation[i+1]
};

namespace detail {

// W = -(1/2N) sum k_st a_s* a_t* a_0 a_0 on the union space; nilpotent on
// every fixed-N block.
inline Mat pair_generator_union(const FockSpace& sp, const Mat& kblock, int N) {
    Mat create_pair = Mat::Zero(sp.dim, sp.dim);
    for (int s = 0; s < kblock.rows(); ++s)
        for (int t = 0; t < kblock.cols(); ++t)
            if (std::abs(kblock(s, t)) > 0.0)
                create_pair +=
                    kblock(s, t) * (sp.lower[1 + s].adjoint() * sp.lower[1 + t].adjoint());
    return -(0.5 / double(N)) * create_pair * (sp.lower[0] * sp.lower[0]);
}

inline Mat nilpotent_exp(const Mat& w, int max_power) {
    Mat out = Mat::Identity(w.rows(), w.cols());
    Mat term = Mat::Identity(w.rows(), w.cols());
    for (int p = 1; p <= max_power; ++p) {
        term = term * w / double(p);
        out += term;
    }
    return out;
}

}  // namespace detail

inline ConjugationScalingReport conjugation_scaling_check(const QuadraticModel& qm,
                                                          const Kernel& k,
                                                          const ExcitationSet& xs, int m,
                                                          const std::vector<int>& N_list) {
    require(!N_list.empty(), "conjugation_scaling_check: need at least one particle number");
    FockBlocks b = fock_blocks(qm, k, xs, m);

    ConjugationScalingReport rep;
    rep.N_list = N_list;
    for (int N : N_list) {
        require(N >= 1, "conjugation_scaling_check: particle numbers must be positive");
        FockSpace sp = build_fock_space(m, N);
        Mat up0 = sp.lower[0].adjoint();

        // Number-conserving Hamiltonian with explicit condensate ladders.
        Mat H_app = double(N) * qm.E_H * Mat::Identity(sp.dim, sp.dim) +
                    detail::dgamma_union(sp, b.h, 1);
        {
            Mat create_pair = Mat::Zero(sp.dim, sp.dim);
            for (int s = 0; s < m - 1; ++s)
                for (int t = 0; t < m - 1; ++t)
                    if (std::abs(b.f(s, t)) > 0.0)
                        create_pair +=
                            b.f(s, t) * (sp.lower[1 + s].adjoint() * sp.lower[1 + t].adjoint());
            H_app += (0.5 / double(N)) * create_pair * (sp.lower[0] * sp.lower[0]);
            H_app += (0.5 / double(N)) * up0 * up0 * detail::pair_lower_union(sp, b.fbar, 1);
        }

        Mat W = detail::pair_generator_union(sp, b.k, N);
        const int max_power = N / 2 + 1;
        Mat conjugated = detail::nilpotent_exp(W, max_power) * H_app *
                         detail::nilpotent_exp(-W, max_power);

        // Quadratic model with matching conventions: phonon one-body block,
        // the normal-ordering constant, the residual-operator pair term, and
        // the same condensate-pumped contraction.
        Mat hph_W = b.h + b.k * b.fbar;
        Mat ric_W = b.h * b.k + b.k * b.h.transpose() + b.f + b.k * b.fbar * b.k;
        complex_t trace_const = 0.5 * (b.fbar * b.k).trace();
        Mat create_ric = Mat::Zero(sp.dim, sp.dim);
        for (int s = 0; s < m - 1; ++s)
            for (int t = 0; t < m - 1; ++t)
                if (std::abs(ric_W(s, t)) > 0.0)
                    create_ric +=
                        ric_W(s, t) * (sp.lower[1 + s].adjoint() * sp.lower[1 + t].adjoint());
        Mat H_quad = (double(N) * qm.E_H + trace_const.real()) * Mat::Identity(sp.dim, sp.dim) +
                     detail::dgamma_union(sp, hph_W, 1) +
                     (0.5 / double(N)) * create_ric * (sp.lower[0] * sp.lower[0]) +
                     (0.5 / double(N)) * up0 * up0 * detail::pair_lower_union(sp, b.fbar, 1);

        Mat exact_block = sp.block(conjugated, N, N);
        Mat quad_block = sp.block(H_quad, N, N);

        Eigen::ComplexEigenSolver<Mat> es_exact(exact_block, false);
        Eigen::ComplexEigenSolver<Mat> es_quad(quad_block, false);
        require(es_exact.info() == Eigen::Success && es_quad.info() == Eigen::Success,
                "conjugation_scaling_check: dense eigensolve failed");
        RVec le = es_exact.eigenvalues().real();
        RVec lq = es_quad.eigenvalues().real();
        std::sort(le.data(), le.data() + le.size());
        std::sort(lq.data(), lq.data() + lq.size());
        const int count = std::min<long>(10, le.size());
        double dev = 0.0;
        for (int i = 0; i < count; ++i)
            dev = std::max(dev, std::abs(le[i] - lq[i]) / std::max(1.0, std::abs(le[i])));
        rep.deviation.push_back(dev);
    }
    for (size_t i = 0; i + 1 < rep.deviation.size(); ++i) {
        double lo = rep.deviation[i + 1];
        rep.ratio.push_back(lo > 0.0 ? rep.deviation[i] / lo
                                     : std::numeric_limits<double>::quiet_NaN());
    }
    return rep;
}

// Direct diagonalization of the non-conserving quadratic Hamiltonian on a
// capped excited-mode space: its low-lying gaps must reproduce the excitation
// energies, certified by the quasiparticle commutators on the cap interior.
struct BogoliubovGapReport {
    RVec gaps;              // lowest distinct-state gaps above the ground level
    RVec reduced_E;         // frame-reduced excitation energies
    double lowest_gap = 0.0;
    double ccr = 0.0;       // worst quasiparticle CCR defect on the interior
    int dim = 0;
};

inline BogoliubovGapReport bogoliubov_gap_check(const QuadraticModel& qm, const Kernel& k,
                                                const ExcitationSet& xs, int m, int N_cap) {
    require(N_cap >= 4, "bogoliubov_gap_check: cap too small to hold pair excitations");
    FockBlocks b = fock_blocks(qm, k, xs, m);
    const int nm = m - 1;
    FockSpace sp = build_fock_space(nm, N_cap);

    Mat H = detail::dgamma_union(sp, b.h, 0);
    {
        Mat create_pair = Mat::Zero(sp.dim, sp.dim);
        for (int s = 0; s < nm; ++s)
            for (int t = 0; t < nm; ++t)
                if (std::abs(b.f(s, t)) > 0.0)
                    create_pair += b.f(s, t) * (sp.lower[s].adjoint() * sp.lower[t].adjoint());
        H += 0.5 * create_pair;
        H += 0.5 * detail::pair_lower_union(sp, b.fbar, 0);
    }

    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (H + H.adjoint()));
    require(es.info() == Eigen::Success, "bogoliubov_gap_check: dense eigensolve failed");
    RVec lam = es.eigenvalues();

    BogoliubovGapReport rep;
    rep.dim = sp.dim;
    const int n_gap = int(std::min<long>(10, lam.size() - 1));
    rep.gaps = lam.segment(1, n_gap).array() - lam[0];
    rep.lowest_gap = rep.gaps.size() > 0 ? rep.gaps[0] : 0.0;

    // Frame-reduced symplectic eigenproblem: the compressed blocks define a
    // closed quadratic problem whose quasiparticle frame is exact on this
    // space.
    Mat M_red(2 * nm, 2 * nm);
    M_red.topLeftCorner(nm, nm) = b.h.transpose();
    M_red.topRightCorner(nm, nm) = -b.f;
    M_red.bottomLeftCorner(nm, nm) = b.fbar;
    M_red.bottomRightCorner(nm, nm) = -b.h;
    Eigen::ComplexEigenSolver<Mat> ces(M_red, true);
    require(ces.info() == Eigen::Success, "bogoliubov_gap_check: reduced eigensolve failed");

    std::vector<std::pair<double, int>> plus;
    for (int i = 0; i < 2 * nm; ++i) {
        double re = ces.eigenvalues()[i].real();
        if (re > 0.0) plus.push_back({re, i});
    }
    if (int(plus.size()) != nm)
        throw degenerate_basis("bogoliubov_gap_check: reduced spectrum is not sign-split");
    std::sort(plus.begin(), plus.end());

    Mat u_red(nm, nm), v_red(nm, nm);
    rep.reduced_E = RVec(nm);
    for (int j = 0; j < nm; ++j) {
        rep.reduced_E[j] = plus[j].first;
        Vec col = ces.eigenvectors().col(plus[j].second);
        Vec p = col.head(nm), q = col.tail(nm);
        double j_norm = p.squaredNorm() - q.squaredNorm();
        if (j_norm <= 0.0)
            throw degenerate_basis("bogoliubov_gap_check: non-positive symplectic norm");
        u_red.col(j) = p / std::sqrt(j_norm);
        v_red.col(j) = -q.conjugate() / std::sqrt(j_norm);
    }

    // gamma_j = <conj u_j, a> + <conj v_j, a*>; commutators on states at
    // least two quanta below the cap never touch the truncation.
    std::vector<Mat> gamma(nm);
    for (int j = 0; j < nm; ++j) {
        Mat g = Mat::Zero(sp.dim, sp.dim);
        for (int s = 0; s < nm; ++s)
            g += std::conj(u_red(s, j)) * sp.lower[s] + std::conj(v_red(s, j)) * sp.lower[s].adjoint();
        gamma[j] = g;
    }
    const int interior_end = sp.block_start[N_cap - 1];  // totals <= N_cap - 2
    for (int i = 0; i < nm; ++i) {
        for (int j = 0; j < nm; ++j) {
            Mat comm = gamma[i] * gamma[j].adjoint() - gamma[j].adjoint() * gamma[i];
            if (i == j) comm -= Mat::Identity(sp.dim, sp.dim);
            rep.ccr = std::max(rep.ccr, comm.leftCols(interior_end).cwiseAbs().maxCoeff());
        }
    }
    return rep;
}

// Moments of the excited-particle number in a sector state, scaled by the
// matching power of N.
inline double depletion_diagnostic(const FockSector& sec, const Vec& psi, int l) {
    require(l >= 1 && l <= 4, "depletion_diagnostic: moment order must be in 1..4");
    require(psi.size() == sec.dim, "depletion_diagnostic: state does not match sector");
    require(std::abs(psi.norm() - 1.0) < 1e-10, "depletion_diagnostic: state must be normalized");
    double acc = 0.0;
    for (int s = 0; s < sec.dim; ++s)
        acc += std::norm(psi[s]) * std::pow(double(sec.perp_count(s)), l);
    return acc / std::pow(double(sec.N), l);
}

}  // namespace pairwave
