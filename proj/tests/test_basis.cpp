#include <catch2/catch_amalgamated.hpp>

#include "pairwave/basis.hpp"

using namespace pairwave;

namespace {

RMat closed_form_x2(int M) {
    RMat x2 = RMat::Zero(M, M);
    for (int n = 0; n < M; ++n) {
        x2(n, n) = 0.5 * (2 * n + 1);
        if (n + 2 < M) {
            x2(n, n + 2) = 0.5 * std::sqrt(double(n + 1) * (n + 2));
            x2(n + 2, n) = x2(n, n + 2);
        }
    }
    return x2;
}

}  // namespace

TEST_CASE("build_basis rejects bad sizes") {
    CHECK_THROWS_AS(build_basis(0, 10), invalid_input);
    CHECK_THROWS_AS(build_basis(65, 200), invalid_input);
    CHECK_THROWS_AS(build_basis(8, 15), invalid_input);
}

TEST_CASE("mode zero at the origin") {
    // psi_0(0) = pi^{-1/4}
    double col[1];
    detail::hermite_column(0.0, 1, col);
    CHECK(col[0] == Catch::Approx(0.7511255444649425).epsilon(1e-14));
}

TEST_CASE("quadrature integrates a plain Gaussian") {
    auto b = build_basis(10, 40);
    RVec vals(b.Q);
    for (int q = 0; q < b.Q; ++q) vals[q] = std::exp(-b.nodes[q] * b.nodes[q]);
    CHECK(b.integrate(vals) == Catch::Approx(std::sqrt(pi)).epsilon(1e-13));
}

TEST_CASE("quadrature stays finite at large Q") {
    auto b = build_basis(48, 160);
    CHECK(b.weights.allFinite());
    CHECK(b.weights.minCoeff() > 0.0);
    RVec ones = RVec::Ones(b.Q);
    RVec gauss(b.Q);
    for (int q = 0; q < b.Q; ++q) gauss[q] = std::exp(-b.nodes[q] * b.nodes[q]);
    CHECK(b.integrate(gauss) == Catch::Approx(std::sqrt(pi)).epsilon(1e-12));
    (void)ones;
}

TEST_CASE("modes are orthonormal under the grid inner product") {
    auto b = build_basis(16, 48);
    RMat gram = b.eval.transpose() * b.eval;
    CHECK((gram - RMat::Identity(16, 16)).norm() < 1e-12);
}

TEST_CASE("kinetic_trap at unit frequency is the number operator ladder") {
    auto b = build_basis(12, 24);
    RMat op = assemble_kinetic_trap(b, 1.0);
    RMat expect = RMat::Zero(12, 12);
    for (int n = 0; n < 12; ++n) expect(n, n) = 2 * n + 1;
    CHECK((op - expect).norm() < 1e-13);
}

TEST_CASE("kinetic_trap closed form matches the quadrature route") {
    const double omega = 2.0;
    auto b = build_basis(10, 30);
    RMat closed = assemble_kinetic_trap(b, omega);

    // quadrature route: eps(omega) = eps(1) + (omega^2 - 1) x^2
    RVec x2_grid = b.nodes.array().square();
    RMat quad = assemble_kinetic_trap(b, 1.0) + (omega * omega - 1.0) * grid_to_operator(b, x2_grid);
    CHECK((closed - quad).norm() < 1e-10);
}

TEST_CASE("grid_to_operator reproduces the closed-form x^2 matrix") {
    auto b = build_basis(14, 40);
    RVec x2_grid = b.nodes.array().square();
    CHECK((grid_to_operator(b, x2_grid) - closed_form_x2(14)).norm() < 1e-11);
}

TEST_CASE("interaction rows integrate to the coupling mass") {
    const double g = 0.4, sigma = 0.5;
    auto b = build_basis(16, 64);
    RMat u = interaction_on_grid(b, g, sigma);
    CHECK(u == u.transpose());

    // near the grid centre the Gaussian is fully resolved
    const int mid = b.Q / 2;
    double mass = 0.0;
    for (int p = 0; p < b.Q; ++p) mass += b.weights[p] * u(mid, p);
    CHECK(mass == Catch::Approx(g).epsilon(1e-6));
}

TEST_CASE("convolution approaches a contact interaction as sigma shrinks") {
    const double g = 0.3;
    auto b = build_basis(16, 64);
    RVec phi0 = b.raw.col(0);
    RVec rho = phi0.array().square();

    double prev = 1e300;
    for (double sigma : {0.8, 0.4, 0.2}) {
        RMat u = interaction_on_grid(b, g, sigma);
        RVec conv = convolve_density(b, u, rho);
        double err = (conv - g * rho).cwiseAbs().maxCoeff();
        CHECK(err < prev);
        prev = err;
    }
    // leading error is (sigma^2/2) g max|rho''| = g sigma^2 / sqrt(pi)
    CHECK(prev < 1.2 * g * 0.2 * 0.2 / std::sqrt(pi));
}

TEST_CASE("convolution of the ground density has the exact Gaussian form") {
    // rho = psi_0^2 is a normalized Gaussian of variance 1/2, so v * rho is a
    // centred Gaussian of variance sigma^2 + 1/2 with mass g.
    const double g = 0.7, sigma = 0.6;
    auto b = build_basis(12, 48);
    RVec rho = b.raw.col(0).array().square();
    RVec conv = convolve_density(b, interaction_on_grid(b, g, sigma), rho);
    const double var = sigma * sigma + 0.5;
    for (int q = 0; q < b.Q; q += 5) {
        const double x = b.nodes[q];
        const double expect = g / std::sqrt(2.0 * pi * var) * std::exp(-0.5 * x * x / var);
        CHECK(std::abs(conv[q] - expect) < 1e-8);
    }
}
