#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "ringroad/geometry.hpp"

using namespace ringroad;

TEST_CASE("interval construction") {
    const Geometry g = build_interval(4, 1.0);
    CHECK(g.n_cells == 4);
    CHECK(g.cell_volume == doctest::Approx(0.25));
    CHECK(g.n_bcells == 2);
    CHECK(g.n_bfaces == 0);
    CHECK(g.bmap[0].face == 0);
    CHECK(g.bmap[0].outward_sign == -1.0);
    CHECK(g.bmap[1].face == 4);
    CHECK(g.bmap[1].outward_sign == 1.0);

    CHECK(build_interval(2, 2.0).cell_volume == doctest::Approx(1.0));
    CHECK_THROWS_AS(build_interval(1, 1.0), invalid_input);
    CHECK_THROWS_AS(build_interval(4, 0.0), invalid_input);
    CHECK_THROWS_AS(build_interval(4, -1.0), invalid_input);
}

TEST_CASE("strip construction") {
    const Geometry g = build_strip(8, 4, 1.0, 1.0);
    CHECK(g.n_cells == 32);
    CHECK(g.n_bcells == 8);
    CHECK(g.bcell_len == doctest::Approx(0.125));

    const Geometry g2 = build_strip(3, 2, 1.0, 0.5);
    CHECK(g2.cell_volume == doctest::Approx((1.0 / 3.0) * 0.25));

    CHECK_THROWS_AS(build_strip(2, 4, 1.0, 1.0), invalid_input);
    CHECK_THROWS_AS(build_strip(4, 1, 1.0, 1.0), invalid_input);
}

TEST_CASE("interval cell volumes sum to lx, strip boundary lengths to lx") {
    const Geometry gi = build_interval(7, 2.5);
    CHECK(gi.n_cells * gi.cell_volume == doctest::Approx(2.5));
    const Geometry gs = build_strip(5, 3, 2.0, 0.75);
    CHECK(gs.n_cells * gs.cell_volume == doctest::Approx(2.0 * 0.75));
    CHECK(gs.n_bcells * gs.bcell_len == doctest::Approx(2.0));
}

TEST_CASE("divergence interior basics") {
    const Geometry g = build_interval(2, 1.0);
    std::vector<double> F(g.n_faces, 0.0);
    auto div = divergence_interior(g, F);
    for (double v : div) CHECK(v == 0.0);

    F[1] = 1.0; // middle face
    div = divergence_interior(g, F);
    CHECK(div[0] == doctest::Approx(1.0 / g.cell_volume));
    CHECK(div[1] == doctest::Approx(-1.0 / g.cell_volume));

    std::vector<double> bad(g.n_faces + 1, 0.0);
    CHECK_THROWS_AS(divergence_interior(g, bad), invalid_input);
}

TEST_CASE("discrete divergence theorem (interval and strip)") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);

    const Geometry gi = build_interval(9, 1.3);
    std::vector<double> F(gi.n_faces);
    for (double& v : F) v = u(rng);
    auto div = divergence_interior(gi, F);
    double sum = 0.0;
    for (double v : div) sum += v * gi.cell_volume;
    const double boundary_flux = F[gi.n_faces - 1] * 1.0 - F[0] * 1.0;
    CHECK(sum == doctest::Approx(boundary_flux).epsilon(1e-12));

    const Geometry gs = build_strip(6, 4, 1.1, 0.9);
    std::vector<double> Fs(gs.n_faces);
    for (double& v : Fs) v = u(rng);
    for (int f : gs.wall_faces) Fs[f] = 0.0;
    auto divs = divergence_interior(gs, Fs);
    double sums = 0.0;
    for (double v : divs) sums += v * gs.cell_volume;
    double bflux = 0.0;
    for (int b = 0; b < gs.n_bcells; ++b) {
        const auto& bc = gs.bmap[b];
        bflux += bc.outward_sign * Fs[bc.face] * gs.face_area(bc.face);
    }
    CHECK(sums == doctest::Approx(bflux).epsilon(1e-12));
}

TEST_CASE("boundary divergence sums to zero (periodic telescoping)") {
    const Geometry gs = build_strip(8, 3, 2.0, 1.0);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> G(gs.n_bfaces);
    for (double& v : G) v = u(rng);
    auto div = divergence_boundary(gs, G);
    double sum = 0.0, norm = 0.0;
    for (double v : div) sum += v * gs.bcell_len;
    for (double v : G) norm += std::abs(v);
    CHECK(std::abs(sum) <= 1e-13 * std::max(1.0, norm));

    // single unit flux hits exactly two adjacent boundary cells
    std::fill(G.begin(), G.end(), 0.0);
    G[3] = 1.0;
    div = divergence_boundary(gs, G);
    CHECK(div[2] == doctest::Approx(1.0 / gs.bcell_len));
    CHECK(div[3] == doctest::Approx(-1.0 / gs.bcell_len));

    const Geometry gi = build_interval(4, 1.0);
    CHECK_THROWS_AS(divergence_boundary(gi, G), invalid_input);
    auto zero = divergence_boundary(gi, std::span<const double>{});
    CHECK(zero.size() == 2);
}

// adjoint identity: <div F, phi>_vol = -<F, grad phi> + boundary terms
TEST_CASE("divergence adjoint of gradient") {
    const Geometry g = build_interval(12, 1.0);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> F(g.n_faces), phi(g.n_cells);
    for (double& v : F) v = u(rng);
    for (double& v : phi) v = u(rng);
    auto div = divergence_interior(g, F);
    double lhs = 0.0;
    for (int c = 0; c < g.n_cells; ++c) lhs += div[c] * phi[c] * g.cell_volume;
    double rhs = 0.0;
    for (int f = 1; f < g.nx; ++f) rhs -= F[f] * (phi[f] - phi[f - 1]) / g.hx * g.cell_volume;
    rhs += F[g.nx] * phi[g.nx - 1] - F[0] * phi[0];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}
