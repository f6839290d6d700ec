#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "ringroad/action.hpp"

using namespace ringroad;

namespace {

// Brute-force oracle for the prox: dense grid search over (rho, p) refined
// around the best point. Independent of the Newton implementation.
struct ProxOracle {
    double rho = 0.0;
    double p[2] = {0.0, 0.0};
};

ProxOracle prox_grid_search(double rho_in, const std::vector<double>& p_in, double sigma) {
    const int dim = static_cast<int>(p_in.size());
    auto objective = [&](double r, const double* p) {
        double pd2 = 0.0, kin;
        for (int a = 0; a < dim; ++a) pd2 += p[a] * p[a];
        if (r > 0.0) kin = 0.5 * pd2 / r;
        else if (pd2 == 0.0) kin = 0.0;
        else return std::numeric_limits<double>::infinity();
        double prox = (r - rho_in) * (r - rho_in);
        for (int a = 0; a < dim; ++a) prox += (p[a] - p_in[a]) * (p[a] - p_in[a]);
        return kin + prox / (2.0 * sigma);
    };
    double lo_r = 0.0, hi_r = std::abs(rho_in) + sigma + 3.0;
    std::vector<double> lo_p(dim), hi_p(dim);
    for (int a = 0; a < dim; ++a) {
        lo_p[a] = -std::abs(p_in[a]) - 1.0;
        hi_p[a] = std::abs(p_in[a]) + 1.0;
    }
    ProxOracle best;
    for (int round = 0; round < 6; ++round) {
        const int N = 24;
        double best_val = std::numeric_limits<double>::infinity();
        double br = 0.0, bp[2] = {0.0, 0.0};
        for (int ir = 0; ir <= N; ++ir) {
            const double r = lo_r + (hi_r - lo_r) * ir / N;
            double pt[2] = {0.0, 0.0};
            if (dim == 1) {
                for (int i0 = 0; i0 <= N; ++i0) {
                    pt[0] = lo_p[0] + (hi_p[0] - lo_p[0]) * i0 / N;
                    const double v = objective(r, pt);
                    if (v < best_val) {
                        best_val = v;
                        br = r;
                        bp[0] = pt[0];
                    }
                }
            } else {
                for (int i0 = 0; i0 <= N; ++i0)
                    for (int i1 = 0; i1 <= N; ++i1) {
                        pt[0] = lo_p[0] + (hi_p[0] - lo_p[0]) * i0 / N;
                        pt[1] = lo_p[1] + (hi_p[1] - lo_p[1]) * i1 / N;
                        const double v = objective(r, pt);
                        if (v < best_val) {
                            best_val = v;
                            br = r;
                            bp[0] = pt[0];
                            bp[1] = pt[1];
                        }
                    }
            }
        }
        const double wr = (hi_r - lo_r) / N;
        lo_r = std::max(0.0, br - 2.0 * wr);
        hi_r = br + 2.0 * wr;
        for (int a = 0; a < dim; ++a) {
            const double wp = (hi_p[a] - lo_p[a]) / N;
            lo_p[a] = bp[a] - 2.0 * wp;
            hi_p[a] = bp[a] + 2.0 * wp;
        }
        best.rho = br;
        best.p[0] = bp[0];
        best.p[1] = bp[1];
    }
    return best;
}

// Scalar bisection oracle for the prox cubic (rho - rho_in)(rho+s)^2 = s|p|^2/2.
double cubic_bisect(double rho_in, double p2, double sigma) {
    auto g = [&](double r) {
        return (r - rho_in) * (r + sigma) * (r + sigma) - 0.5 * sigma * p2;
    };
    double lo = 0.0, hi = std::abs(rho_in) + sigma + std::cbrt(0.5 * sigma * p2) + 2.0;
    while (g(hi) < 0.0) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (g(mid) >= 0.0 ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace

TEST_CASE("kinetic value conventions") {
    const double p1[] = {1.0};
    CHECK(kinetic_value(2.0, p1).value == doctest::Approx(0.25));
    CHECK(kinetic_value(0.0, std::span<const double>{}).finite);
    const double pz[] = {0.0};
    CHECK(kinetic_value(0.0, pz).value == 0.0);
    CHECK_FALSE(kinetic_value(0.0, p1).finite);
    CHECK_FALSE(kinetic_value(-1.0, pz).finite);
}

TEST_CASE("prox at a minimizer returns the point") {
    ProxParams prm;
    const double p0[] = {0.0};
    const KineticPoint out = prox_kinetic(1.0, p0, prm);
    CHECK(out.rho == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(out.p[0] == doctest::Approx(0.0));
}

TEST_CASE("prox clamps to (0,0) for strongly negative density input") {
    ProxParams prm;
    const double p0[] = {0.0};
    const KineticPoint out = prox_kinetic(-1.0, p0, prm);
    CHECK(out.rho == 0.0);
    CHECK(out.p[0] == 0.0);
    // grid-search oracle agrees
    const ProxOracle oracle = prox_grid_search(-1.0, {0.0}, 1.0);
    CHECK(oracle.rho == doctest::Approx(0.0).epsilon(1e-3));
}

TEST_CASE("prox against the scalar cubic oracle and grid search") {
    ProxParams prm;
    const double pin[] = {2.0, 0.0};
    const KineticPoint out = prox_kinetic(0.0, pin, prm);
    const double root = cubic_bisect(0.0, 4.0, 1.0); // rho (rho+1)^2 = 2
    CHECK(root == doctest::Approx(0.69562076955986).epsilon(1e-10));
    CHECK(out.rho == doctest::Approx(root).epsilon(1e-10));
    CHECK(out.p[0] == doctest::Approx(2.0 * root / (root + 1.0)).epsilon(1e-10));

    const ProxOracle oracle = prox_grid_search(0.0, {2.0, 0.0}, 1.0);
    CHECK(out.rho == doctest::Approx(oracle.rho).epsilon(2e-4));
    CHECK(out.p[0] == doctest::Approx(oracle.p[0]).epsilon(2e-4));
}

TEST_CASE("prox satisfies first-order optimality on random inputs") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::uniform_real_distribution<double> us(0.1, 3.0);
    ProxParams prm;
    for (int trial = 0; trial < 200; ++trial) {
        const double rho_in = u(rng);
        const double p_in[2] = {u(rng), u(rng)};
        prm.sigma = us(rng);
        const KineticPoint out = prox_kinetic(rho_in, std::span<const double>(p_in, 2), prm);
        // objective at output <= objective at (max(rho,0), p~) and at (0,0)
        auto objective = [&](double r, const double* p) {
            double pd2 = 0.0;
            for (int a = 0; a < 2; ++a) pd2 += p[a] * p[a];
            double kin;
            if (r > 0.0) kin = 0.5 * pd2 / r;
            else if (pd2 == 0.0) kin = 0.0;
            else return std::numeric_limits<double>::infinity();
            double prox = (r - rho_in) * (r - rho_in);
            for (int a = 0; a < 2; ++a) prox += (p[a] - p_in[a]) * (p[a] - p_in[a]);
            return kin + prox / (2.0 * prm.sigma);
        };
        const double at_out = objective(out.rho, out.p.data());
        const double zero2[2] = {0.0, 0.0};
        CHECK(at_out <= objective(std::max(rho_in, 0.0), p_in) + 1e-9);
        CHECK(at_out <= objective(0.0, zero2) + 1e-9);
        if (out.rho > 0.0) {
            // cubic residual
            double p2 = p_in[0] * p_in[0] + p_in[1] * p_in[1];
            const double res = (out.rho - rho_in) * (out.rho + prm.sigma) * (out.rho + prm.sigma) -
                               0.5 * prm.sigma * p2;
            CHECK(std::abs(res) <= 1e-8 * (1.0 + std::abs(rho_in)) *
                                       (out.rho + prm.sigma) * (out.rho + prm.sigma));
        }
    }
}

TEST_CASE("boundary prox reduces to packed kinetic prox") {
    ProxParams prm;
    // kappa = 1: identical to prox_kinetic on (gamma, (G, f))
    const BoundaryPoint bp = prox_boundary(0.8, 0.5, -0.3, 1.0, prm);
    const double packed[] = {0.5, -0.3};
    const KineticPoint kp = prox_kinetic(0.8, packed, prm);
    CHECK(bp.gamma == doctest::Approx(kp.rho));
    CHECK(bp.G == doctest::Approx(kp.p[0]));
    CHECK(bp.f == doctest::Approx(kp.p[1]));

    // no-G variant (Interval): pure reaction prox
    const BoundaryPoint br = prox_boundary(0.8, 0.0, -0.3, 2.0, prm, /*has_G=*/false);
    const double packed1[] = {-0.6};
    const KineticPoint k1 = prox_kinetic(0.8, packed1, prm);
    CHECK(br.gamma == doctest::Approx(k1.rho));
    CHECK(br.f == doctest::Approx(k1.p[0] / 2.0));
}

TEST_CASE("boundary prox matches 3-variable grid search (kappa=2)") {
    ProxParams prm;
    const BoundaryPoint bp = prox_boundary(1.0, 0.0, 1.0, 2.0, prm);
    // oracle in packed coordinates (G, kappa f)
    const ProxOracle oracle = prox_grid_search(1.0, {0.0, 2.0}, 1.0);
    CHECK(bp.gamma == doctest::Approx(oracle.rho).epsilon(1e-4));
    CHECK(bp.G == doctest::Approx(oracle.p[0]).epsilon(1e-3));
    CHECK(bp.f == doctest::Approx(oracle.p[1] / 2.0).epsilon(1e-4));
}

TEST_CASE("action on co-located fields: unit transport") {
    const Geometry g = build_interval(4, 1.0);
    const int nt = 5;
    Colocated co;
    co.omega.assign(nt * g.n_cells, 1.0);
    co.Fc.assign(nt * g.n_cells, 1.0);
    co.gamma.assign(nt * g.n_bcells, 0.0);
    co.f.assign(nt * g.n_bcells, 0.0);
    const ActionValue v = eval_action_colocated(g, nt, co, 1.0);
    REQUIRE(v.finite);
    CHECK(v.value == doctest::Approx(0.5)); // |F|^2/(2 omega) over unit volume

    // vanishing density with momentum is infinite
    co.omega[3] = 0.0;
    CHECK_FALSE(eval_action_colocated(g, nt, co, 1.0).finite);
}

TEST_CASE("action 1-homogeneity and convexity on random paths") {
    const Geometry g = build_strip(6, 3, 1.0, 0.5);
    const int nt = 4;
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    std::uniform_real_distribution<double> um(-0.5, 0.5);
    auto random_path = [&]() {
        SpaceTimePath p = zero_path(g, nt);
        for (double& v : p.omega) v = u(rng);
        for (double& v : p.gamma) v = u(rng);
        for (double& v : p.F) v = um(rng);
        for (double& v : p.G) v = um(rng);
        for (double& v : p.f) v = um(rng);
        return p;
    };
    const SpaceTimePath p1 = random_path(), p2 = random_path();
    const double kappa = 0.7;
    const ActionValue a1 = eval_action(p1, kappa);
    REQUIRE(a1.finite);
    CHECK(a1.value >= 0.0);

    SpaceTimePath scaled = p1;
    const double lam = 2.3;
    for (auto* f : {&scaled.omega, &scaled.F, &scaled.gamma, &scaled.G, &scaled.f})
        for (double& v : *f) v *= lam;
    CHECK(eval_action(scaled, kappa).value == doctest::Approx(lam * a1.value).epsilon(1e-12));

    SpaceTimePath mid = p1;
    const ActionValue a2 = eval_action(p2, kappa);
    for (size_t i = 0; i < mid.omega.size(); ++i) mid.omega[i] = 0.5 * (p1.omega[i] + p2.omega[i]);
    for (size_t i = 0; i < mid.F.size(); ++i) mid.F[i] = 0.5 * (p1.F[i] + p2.F[i]);
    for (size_t i = 0; i < mid.gamma.size(); ++i) mid.gamma[i] = 0.5 * (p1.gamma[i] + p2.gamma[i]);
    for (size_t i = 0; i < mid.G.size(); ++i) mid.G[i] = 0.5 * (p1.G[i] + p2.G[i]);
    for (size_t i = 0; i < mid.f.size(); ++i) mid.f[i] = 0.5 * (p1.f[i] + p2.f[i]);
    CHECK(eval_action(mid, kappa).value <= 0.5 * (a1.value + a2.value) + 1e-12);
}
