#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "ringroad/constraint.hpp"

using namespace ringroad;

namespace {

MeasurePair bump_pair(const Geometry& g, double x, double interior_mass) {
    MeasurePair rho = zero_pair(g);
    add_uniform(rho, interior_mass, Side::Interior);
    (void)x;
    if (interior_mass < 1.0) add_uniform(rho, 1.0 - interior_mass, Side::Boundary);
    return rho;
}

SpaceTimePath random_path(const Geometry& g, int nt, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> up(0.0, 1.0);
    SpaceTimePath p = zero_path(g, nt);
    for (double& v : p.omega) v = up(rng);
    for (double& v : p.gamma) v = up(rng);
    for (double& v : p.F) v = u(rng);
    for (double& v : p.G) v = u(rng);
    for (double& v : p.f) v = u(rng);
    return p;
}

double total_mass_at(const SpaceTimePath& p, int k) {
    const Geometry& g = p.geom;
    double m = 0.0;
    for (int c = 0; c < g.n_cells; ++c)
        m += p.omega[static_cast<size_t>(k) * g.n_cells + c] * g.cell_volume;
    for (int b = 0; b < g.n_bcells; ++b)
        m += p.gamma[static_cast<size_t>(k) * g.n_bcells + b] * g.bcell_len;
    return m;
}

double dot_path(const SpaceTimePath& a, const SpaceTimePath& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.omega.size(); ++i) s += a.omega[i] * b.omega[i];
    for (size_t i = 0; i < a.F.size(); ++i) s += a.F[i] * b.F[i];
    for (size_t i = 0; i < a.gamma.size(); ++i) s += a.gamma[i] * b.gamma[i];
    for (size_t i = 0; i < a.G.size(); ++i) s += a.G[i] * b.G[i];
    for (size_t i = 0; i < a.f.size(); ++i) s += a.f[i] * b.f[i];
    return s;
}

} // namespace

TEST_CASE("constant path with matching endpoints has zero residual") {
    const Geometry g = build_strip(5, 3, 1.0, 0.5);
    const MeasurePair rho = bump_pair(g, 0.5, 0.7);
    const int nt = 4;
    SpaceTimePath p = zero_path(g, nt);
    for (int k = 0; k <= nt; ++k)
        for (int c = 0; c < g.n_cells; ++c)
            p.omega[static_cast<size_t>(k) * g.n_cells + c] = rho.omega[c];
    for (int k = 0; k <= nt; ++k)
        for (int b = 0; b < g.n_bcells; ++b)
            p.gamma[static_cast<size_t>(k) * g.n_bcells + b] = rho.gamma[b];
    const CeResidual r = ce_residual(p, rho, rho);
    CHECK(r.max_abs() == doctest::Approx(0.0));
}

TEST_CASE("single face perturbation hits exactly two interior residual entries") {
    const Geometry g = build_interval(6, 1.0);
    const MeasurePair rho = bump_pair(g, 0.5, 1.0);
    const int nt = 3;
    SpaceTimePath p = zero_path(g, nt);
    for (int k = 0; k <= nt; ++k)
        for (int c = 0; c < g.n_cells; ++c)
            p.omega[static_cast<size_t>(k) * g.n_cells + c] = rho.omega[c];
    const CeResidual base = ce_residual(p, rho, rho);
    const double eps = 0.25;
    p.F[1 * p.n_free() + 2] += eps; // time interval 1, interior face 3
    const CeResidual r = ce_residual(p, rho, rho);
    int changed = 0;
    for (size_t i = 0; i < r.interior.size(); ++i)
        if (std::abs(r.interior[i] - base.interior[i]) > 1e-14) ++changed;
    CHECK(changed == 2);
    CHECK(r.interior[1 * g.n_cells + 2] == doctest::Approx(+eps / g.hx));
    CHECK(r.interior[1 * g.n_cells + 3] == doctest::Approx(-eps / g.hx));
}

TEST_CASE("residuals telescope to the endpoint mass difference (discrete conservation)") {
    for (const Geometry& g : {build_interval(7, 1.0), build_strip(5, 4, 1.0, 0.6)}) {
        const int nt = 5;
        const SpaceTimePath p = random_path(g, nt, 99);
        const MeasurePair dummy0 = bump_pair(g, 0.5, 0.6), dummy1 = bump_pair(g, 0.5, 0.6);
        const CeResidual r = ce_residual(p, dummy0, dummy1);
        for (int k = 0; k < nt; ++k) {
            double s = 0.0;
            for (int c = 0; c < g.n_cells; ++c)
                s += r.interior[static_cast<size_t>(k) * g.n_cells + c] * g.cell_volume;
            for (int b = 0; b < g.n_bcells; ++b)
                s += r.boundary[static_cast<size_t>(k) * g.n_bcells + b] * g.bcell_len;
            const double dm = (total_mass_at(p, k + 1) - total_mass_at(p, k)) / p.dt();
            CHECK(s == doctest::Approx(dm).epsilon(1e-10));
        }
    }
}

TEST_CASE("co-location: constants are fixed points, spike spreads with weight 1/2") {
    const Geometry g = build_interval(4, 1.0);
    const int nt = 4;
    SpaceTimePath p = zero_path(g, nt);
    for (double& v : p.omega) v = 3.0;
    for (double& v : p.gamma) v = 2.0;
    Colocated co = interpolate_colocate(p);
    for (double v : co.omega) CHECK(v == doctest::Approx(3.0));
    for (double v : co.gamma) CHECK(v == doctest::Approx(2.0));

    SpaceTimePath spike = zero_path(g, nt);
    spike.omega[2 * g.n_cells + 1] = 1.0; // node k=2
    co = interpolate_colocate(spike);
    CHECK(co.omega[1 * g.n_cells + 1] == doctest::Approx(0.5)); // interval 1
    CHECK(co.omega[2 * g.n_cells + 1] == doctest::Approx(0.5)); // interval 2
    CHECK(co.omega[0 * g.n_cells + 1] == 0.0);
}

TEST_CASE("co-location adjoint identity on random fields") {
    for (const Geometry& g : {build_interval(6, 1.0), build_strip(4, 3, 1.0, 0.5)}) {
        const int nt = 3;
        std::mt19937_64 rng(21);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        const SpaceTimePath x = random_path(g, nt, 4);
        Colocated y;
        const int nc = g.n_cells, nb = g.n_bcells, d = g.dim();
        y.omega.resize(static_cast<size_t>(nt) * nc);
        y.Fc.resize(static_cast<size_t>(nt) * nc * d);
        y.gamma.resize(static_cast<size_t>(nt) * nb);
        y.Gc.resize(g.is_strip() ? static_cast<size_t>(nt) * nb : 0);
        y.f.resize(static_cast<size_t>(nt) * nb);
        for (auto* v : {&y.omega, &y.Fc, &y.gamma, &y.Gc, &y.f})
            for (double& w : *v) w = u(rng);

        const Colocated Ix = interpolate_colocate(x);
        const SpaceTimePath Ity = colocate_adjoint(g, nt, y);
        double lhs = 0.0;
        for (size_t i = 0; i < Ix.omega.size(); ++i) lhs += Ix.omega[i] * y.omega[i];
        for (size_t i = 0; i < Ix.Fc.size(); ++i) lhs += Ix.Fc[i] * y.Fc[i];
        for (size_t i = 0; i < Ix.gamma.size(); ++i) lhs += Ix.gamma[i] * y.gamma[i];
        for (size_t i = 0; i < Ix.Gc.size(); ++i) lhs += Ix.Gc[i] * y.Gc[i];
        for (size_t i = 0; i < Ix.f.size(); ++i) lhs += Ix.f[i] * y.f[i];
        const double rhs = dot_path(x, Ity);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
}

TEST_CASE("project_ce: feasible path is a fixed point") {
    const Geometry g = build_interval(8, 1.0);
    const MeasurePair rho = bump_pair(g, 0.5, 0.8);
    const int nt = 4;
    SpaceTimePath p = zero_path(g, nt);
    for (int k = 0; k <= nt; ++k) {
        for (int c = 0; c < g.n_cells; ++c)
            p.omega[static_cast<size_t>(k) * g.n_cells + c] = rho.omega[c];
        for (int b = 0; b < g.n_bcells; ++b)
            p.gamma[static_cast<size_t>(k) * g.n_bcells + b] = rho.gamma[b];
    }
    const SpaceTimePath q = project_ce(p, rho, rho, 1e-11);
    double diff = 0.0;
    for (size_t i = 0; i < p.omega.size(); ++i) diff = std::max(diff, std::abs(p.omega[i] - q.omega[i]));
    for (size_t i = 0; i < p.F.size(); ++i) diff = std::max(diff, std::abs(p.F[i] - q.F[i]));
    for (size_t i = 0; i < p.f.size(); ++i) diff = std::max(diff, std::abs(p.f[i] - q.f[i]));
    CHECK(diff <= 1e-12);
}

TEST_CASE("project_ce: zero path becomes feasible, minimum-norm, mass-conserving") {
    for (const Geometry& g : {build_interval(8, 1.0), build_strip(5, 3, 1.0, 0.5)}) {
        MeasurePair rho0 = zero_pair(g), rho1 = zero_pair(g);
        add_uniform(rho0, 0.7, Side::Interior);
        add_uniform(rho0, 0.3, Side::Boundary);
        add_uniform(rho1, 0.4, Side::Interior);
        add_uniform(rho1, 0.6, Side::Boundary);
        // make them nonuniform
        rho0.omega[0] *= 1.5;
        rho0.omega[1] *= 0.5;
        normalize(rho0);
        rho1.gamma[0] *= 2.0;
        normalize(rho1);

        const int nt = 5;
        const SpaceTimePath zero = zero_path(g, nt);
        const SpaceTimePath proj = project_ce(zero, rho0, rho1, 1e-10);
        const CeResidual r = ce_residual(proj, rho0, rho1);
        CHECK(r.max_abs() <= 1e-8);

        for (int k = 0; k <= nt; ++k) CHECK(total_mass_at(proj, k) == doctest::Approx(1.0).epsilon(1e-10));

        // idempotency
        const SpaceTimePath proj2 = project_ce(proj, rho0, rho1, 1e-10);
        double diff = 0.0;
        for (size_t i = 0; i < proj.F.size(); ++i) diff = std::max(diff, std::abs(proj.F[i] - proj2.F[i]));
        CHECK(diff <= 1e-8);

        // minimum-norm (KKT): the correction lies in range(A^T); verify via the
        // projector's multipliers by reconstructing the correction.
        ProjectorOptions opt;
        opt.cg_tol = 1e-12;
        ConstraintProjector pr(g, nt, rho0.omega, rho1.omega, rho0.gamma, rho1.gamma, opt);
        PathArrays a;
        a.on = zero.omega;
        a.F = zero.F;
        a.gn = zero.gamma;
        a.G = zero.G;
        a.q = zero.f;
        pr.project(a, nullptr);
        // A A^T lam should reproduce the residual moved; check the projected
        // bundle satisfies x = y + A^T lam by applying A^T to the multipliers.
        // (The correction must be orthogonal to null(A).)
        SpaceTimePath recon = zero_path(g, nt);
        {
            // rebuild A^T lam through finite differencing of the residual form:
            // use the identity <x - y, v> = <lam, A v> for random test vectors v.
            std::mt19937_64 rng(17);
            std::uniform_real_distribution<double> u(-1.0, 1.0);
            for (int rep = 0; rep < 5; ++rep) {
                SpaceTimePath v = random_path(g, nt, 100 + rep);
                // zero endpoint slices: the variable space excludes them
                for (int c = 0; c < g.n_cells; ++c) {
                    v.omega[c] = 0.0;
                    v.omega[static_cast<size_t>(nt) * g.n_cells + c] = 0.0;
                }
                for (int b = 0; b < g.n_bcells; ++b) {
                    v.gamma[b] = 0.0;
                    v.gamma[static_cast<size_t>(nt) * g.n_bcells + b] = 0.0;
                }
                // <x-y, v>
                SpaceTimePath xmy = proj;
                for (size_t i = 0; i < xmy.omega.size(); ++i) xmy.omega[i] -= zero.omega[i];
                for (size_t i = 0; i < xmy.F.size(); ++i) xmy.F[i] -= zero.F[i];
                for (size_t i = 0; i < xmy.gamma.size(); ++i) xmy.gamma[i] -= zero.gamma[i];
                for (size_t i = 0; i < xmy.G.size(); ++i) xmy.G[i] -= zero.G[i];
                for (size_t i = 0; i < xmy.f.size(); ++i) xmy.f[i] -= zero.f[i];
                // endpoints of x-y are rho0, rho1 (pinned), not part of the metric:
                for (int c = 0; c < g.n_cells; ++c) {
                    xmy.omega[c] = 0.0;
                    xmy.omega[static_cast<size_t>(nt) * g.n_cells + c] = 0.0;
                }
                for (int b = 0; b < g.n_bcells; ++b) {
                    xmy.gamma[b] = 0.0;
                    xmy.gamma[static_cast<size_t>(nt) * g.n_bcells + b] = 0.0;
                }
                const double lhs = dot_path(xmy, v);
                // <lam, A v>: apply the constraint operator to v (zero endpoints)
                MeasurePair z0 = zero_pair(g), z1 = zero_pair(g);
                const CeResidual Av = ce_residual(v, z0, z1);
                double rhs = 0.0;
                const auto& li = pr.lambda_interior();
                const auto& lb = pr.lambda_boundary();
                for (size_t i = 0; i < li.size(); ++i) rhs += li[i] * Av.interior[i];
                for (size_t i = 0; i < lb.size(); ++i) rhs += lb[i] * Av.boundary[i];
                CHECK(lhs == doctest::Approx(rhs).epsilon(1e-7));
            }
            (void)rng;
            (void)u;
        }
        (void)recon;
    }
}
