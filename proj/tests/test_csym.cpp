#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "pairwave/csym.hpp"

using namespace pairwave;

namespace {

Mat random_symmetric(int M, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    Mat a(M, M);
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < M; ++j) a(i, j) = complex_t(gauss(rng), gauss(rng));
    return 0.5 * (a + a.transpose()).eval();
}

}  // namespace

TEST_CASE("takagi of a real diagonal keeps signed coefficients") {
    Mat k = Mat::Zero(2, 2);
    k(0, 0) = 0.5;
    k(1, 1) = -0.3;
    auto dec = takagi(Kernel::symmetric(k));
    REQUIRE(dec.rank == 2);
    CHECK(std::abs(dec.z[0] - 0.5) < 1e-14);
    CHECK(std::abs(dec.z[1] - complex_t(-0.3)) < 1e-14);
    CHECK(std::abs(std::abs(dec.vectors(0, 0)) - 1.0) < 1e-14);
    CHECK(std::abs(std::abs(dec.vectors(1, 1)) - 1.0) < 1e-14);
}

TEST_CASE("takagi of zero has rank zero") {
    auto dec = takagi(Kernel::symmetric(Mat::Zero(5, 5)));
    CHECK(dec.rank == 0);
}

TEST_CASE("takagi reconstructs a random symmetric kernel") {
    Mat k = random_symmetric(16, 7);
    auto dec = takagi(Kernel::symmetric(k));
    REQUIRE(dec.rank == 16);
    CHECK((dec.reconstruct() - k).norm() < 1e-10 * k.norm());

    // orthonormal frame
    Mat gram = dec.vectors.adjoint() * dec.vectors;
    CHECK((gram - Mat::Identity(16, 16)).norm() < 1e-10);

    // conjugate-eigenvector property and the singular-value match
    for (int j = 0; j < dec.rank; ++j)
        CHECK((k * dec.vectors.col(j).conjugate() - dec.z[j] * dec.vectors.col(j)).norm() < 1e-10);

    Eigen::JacobiSVD<Mat> svd(k);
    RVec sv = svd.singularValues();
    for (int j = 0; j < 16; ++j) CHECK(std::abs(std::abs(dec.z[j]) - sv[j]) < 1e-10);
}

TEST_CASE("takagi splits degenerate singular values with distinct phases") {
    Mat k = Mat::Zero(2, 2);
    k(0, 0) = 0.5;
    k(1, 1) = complex_t(0.0, 0.5);
    auto dec = takagi(Kernel::symmetric(k));
    REQUIRE(dec.rank == 2);
    CHECK((dec.reconstruct() - k).norm() < 1e-12);
    CHECK(std::abs(std::abs(dec.z[0]) - 0.5) < 1e-12);
    CHECK(std::abs(std::abs(dec.z[1]) - 0.5) < 1e-12);
}

TEST_CASE("takagi handles a fully degenerate kernel") {
    Mat k = complex_t(0.3, 0.4) * Mat::Identity(4, 4);
    auto dec = takagi(Kernel::symmetric(k));
    REQUIRE(dec.rank == 4);
    CHECK((dec.reconstruct() - k).norm() < 1e-12);
}

TEST_CASE("takagi rejects non-symmetric input") {
    Mat k = Mat::Zero(2, 2);
    k(0, 1) = 1.0;
    CHECK_THROWS_AS(Kernel::symmetric(k), invalid_input);
}

TEST_CASE("psd square roots") {
    Mat a = Mat::Zero(2, 2);
    a(0, 0) = 4.0;
    a(1, 1) = 9.0;
    auto r = sqrt_psd(Kernel::hermitian(a));
    CHECK(std::abs(r.m(0, 0).real() - 2.0) < 1e-12);
    CHECK(std::abs(r.m(1, 1).real() - 3.0) < 1e-12);
    CHECK((r.m * r.m - a).norm() < 1e-10);

    auto id = sqrt_psd(Kernel::hermitian(Mat::Identity(6, 6)));
    CHECK((id.m - Mat::Identity(6, 6)).norm() < 1e-12);

    auto inv = inv_sqrt_psd(Kernel::hermitian(a));
    CHECK((inv.m * a * inv.m - Mat::Identity(2, 2)).norm() < 1e-9);
}

TEST_CASE("psd roots reject indefinite or singular input") {
    Mat neg = Mat::Identity(3, 3);
    neg(2, 2) = -0.5;
    CHECK_THROWS_AS(sqrt_psd(Kernel::hermitian(neg)), domain_error);

    Mat sing = Mat::Identity(3, 3);
    sing(2, 2) = 0.0;
    CHECK_THROWS_AS(inv_sqrt_psd(Kernel::hermitian(sing)), domain_error);
}

TEST_CASE("pseudo inverse root annihilates the null space and inverts the range") {
    Vec phi = Vec::Zero(4);
    phi[0] = 1.0;
    Mat proj = Mat::Identity(4, 4) - phi * phi.adjoint();
    auto pinv = pinv_sqrt_psd(Kernel::hermitian(proj));
    CHECK((pinv.m * pinv.m - proj).norm() < 1e-10);
    CHECK((pinv.m * phi).norm() < 1e-12);
}

TEST_CASE("operator and Hilbert-Schmidt norms") {
    CHECK(op_norm(Mat(Mat::Identity(4, 4))) == Catch::Approx(1.0));
    CHECK(hs_norm(Mat(Mat::Identity(4, 4))) == Catch::Approx(2.0));

    std::mt19937_64 rng(11);
    std::normal_distribution<double> gauss;
    Vec e(5);
    for (int i = 0; i < 5; ++i) e[i] = complex_t(gauss(rng), gauss(rng));
    e.normalize();
    const complex_t z(0.3, -0.2);
    Mat k = z * e * e.transpose();
    CHECK(op_norm(k) == Catch::Approx(std::abs(z)).epsilon(1e-12));
    CHECK(hs_norm(k) == Catch::Approx(std::abs(z)).epsilon(1e-12));

    for (unsigned seed = 0; seed < 100; ++seed) {
        Mat a = random_symmetric(8, 1000 + seed);
        CHECK(op_norm(a) <= hs_norm(a) + 1e-12);
    }
}
