#include "ringroad/oracles.hpp"

#include <algorithm>
#include <cmath>

namespace ringroad {

DiracGeodesic dirac_geodesic(double R, double kappa) {
    if (!(kappa > 0.0)) throw invalid_input("dirac_geodesic: kappa must be positive");
    if (R < 0.0) throw invalid_input("dirac_geodesic: R must be nonnegative");
    DiracGeodesic d;
    d.R = R;
    d.kappa = kappa;
    d.alpha = 1.0 + std::sqrt(1.0 + R * R / (kappa * kappa));
    d.cost = 0.5 * (R * R + kappa * kappa * d.alpha) * d.alpha / (d.alpha - 1.0);
    return d;
}

double dirac_cost(double R, double kappa) { return dirac_geodesic(R, kappa).cost; }

DiracFrame dirac_frame(double R, double kappa, double t, const std::vector<double>& radii) {
    if (t < 0.0 || t > 1.0) throw invalid_input("dirac_frame: t must lie in [0,1]");
    const DiracGeodesic d = dirac_geodesic(R, kappa);
    DiracFrame fr;
    fr.density.assign(radii.size(), 0.0);
    fr.velocity.assign(radii.size(), 0.0);
    if (t == 0.0) {
        fr.atom_at_origin = true;
        return fr;
    }
    const double a = d.alpha;
    fr.boundary_mass = std::pow(t, a);
    fr.flux = a * std::pow(t, a - 1.0);
    for (size_t i = 0; i < radii.size(); ++i) {
        const double r = radii[i];
        fr.velocity[i] = r / t;
        if (r >= R * t && r <= R && r > 0.0)
            fr.density[i] = a * std::pow(R * t / r, a) / r;
    }
    return fr;
}

double fisher_rao_cost(double m0, double m1, double kappa) {
    if (m0 < 0.0 || m1 < 0.0) throw invalid_input("fisher_rao_cost: masses must be nonnegative");
    const double d = std::sqrt(m1) - std::sqrt(m0);
    return 2.0 * kappa * kappa * d * d;
}

// ---------------------------------------------------------------------------
// Quantile machinery.

double Measure1D::total_mass() const {
    double m = 0.0;
    for (double v : cell_mass) m += v;
    for (const auto& a : atoms) m += a.second;
    return m;
}

namespace {

struct QSeg {
    double s0, s1; // mass range
    double x0, x1; // position range (x0 == x1 for atoms)
    double q(double s) const {
        if (s1 <= s0) return x0;
        const double w = (s - s0) / (s1 - s0);
        return x0 + w * (x1 - x0);
    }
};

std::vector<QSeg> quantile_segments(const Measure1D& mu) {
    struct Piece {
        double xa, xb, m;
    };
    std::vector<Piece> pieces;
    pieces.reserve(mu.cell_mass.size() + mu.atoms.size());
    for (size_t i = 0; i < mu.cell_mass.size(); ++i)
        if (mu.cell_mass[i] > 0.0)
            pieces.push_back({mu.x0 + i * mu.h, mu.x0 + (i + 1) * mu.h, mu.cell_mass[i]});
    for (const auto& a : mu.atoms)
        if (a.second > 0.0) pieces.push_back({a.first, a.first, a.second});
    std::sort(pieces.begin(), pieces.end(), [](const Piece& a, const Piece& b) {
        if (a.xa != b.xa) return a.xa < b.xa;
        return a.xb < b.xb;
    });
    std::vector<QSeg> segs;
    segs.reserve(pieces.size());
    double s = 0.0;
    for (const auto& p : pieces) {
        segs.push_back({s, s + p.m, p.xa, p.xb});
        s += p.m;
    }
    return segs;
}

// Interior 3-point rule, exact for quadratics and immune to branch jumps at
// sub-interval endpoints: int f = (sb-sa)/3 [2 f(1/4) - f(1/2) + 2 f(3/4)].
template <class F>
double quad3(double sa, double sb, F&& f) {
    const double w = sb - sa;
    const double f1 = f(sa + 0.25 * w), f2 = f(sa + 0.5 * w), f3 = f(sa + 0.75 * w);
    return w / 3.0 * (2.0 * f1 - f2 + 2.0 * f3);
}

// Exact integral over [0, total] of (Q0 - Q1)^2 where both quantiles are
// affine on every merged sub-interval.
double quantile_cost(const std::vector<QSeg>& A, const std::vector<QSeg>& B, double total) {
    size_t ia = 0, ib = 0;
    double s = 0.0, acc = 0.0;
    while (s < total && ia < A.size() && ib < B.size()) {
        while (ia + 1 < A.size() && A[ia].s1 <= s) ++ia;
        while (ib + 1 < B.size() && B[ib].s1 <= s) ++ib;
        double snext = std::min({A[ia].s1, B[ib].s1, total});
        if (snext <= s) {
            if (A[ia].s1 <= s && ia + 1 < A.size()) ++ia;
            else if (B[ib].s1 <= s && ib + 1 < B.size()) ++ib;
            else break;
            continue;
        }
        const size_t ja = ia, jb = ib;
        acc += quad3(s, snext, [&](double sv) {
            const double d = A[ja].q(sv) - B[jb].q(sv);
            return d * d;
        });
        s = snext;
    }
    return acc;
}

} // namespace

std::optional<double> wasserstein_1d(const Measure1D& mu0, const Measure1D& mu1) {
    const double m0 = mu0.total_mass(), m1 = mu1.total_mass();
    if (std::abs(m0 - m1) > 1e-9 * std::max(1.0, std::max(m0, m1))) return std::nullopt;
    if (m0 <= 0.0) return 0.0;
    const auto A = quantile_segments(mu0);
    const auto B = quantile_segments(mu1);
    const double total = std::min(m0, m1);
    return 0.5 * quantile_cost(A, B, total);
}

namespace {

// Quantile of the periodically extended measure: Q(s + k m) = Q(s) + k L.
struct PeriodicQuantile {
    const std::vector<QSeg>* segs;
    double total, period;
    double operator()(double s) const {
        double shift = 0.0;
        while (s < 0.0) {
            s += total;
            shift -= period;
        }
        while (s >= total) {
            s -= total;
            shift += period;
        }
        // binary search for the segment containing s
        const auto& S = *segs;
        size_t lo = 0, hi = S.size();
        while (lo + 1 < hi) {
            const size_t mid = (lo + hi) / 2;
            if (S[mid].s0 <= s) lo = mid;
            else hi = mid;
        }
        return S[lo].q(std::min(s, S[lo].s1)) + shift;
    }
};

} // namespace

std::optional<double> wasserstein_1d_periodic(const Measure1D& mu0, const Measure1D& mu1,
                                              double period) {
    if (!(period > 0.0)) throw invalid_input("wasserstein_1d_periodic: period must be positive");
    const double m0 = mu0.total_mass(), m1 = mu1.total_mass();
    if (std::abs(m0 - m1) > 1e-9 * std::max(1.0, std::max(m0, m1))) return std::nullopt;
    if (m0 <= 0.0) return 0.0;
    const auto A = quantile_segments(mu0);
    const auto B = quantile_segments(mu1);
    const double total = m0;
    PeriodicQuantile Q1{&B, total, period};

    // g(theta) = (1/2) int (Q0(s) - Q1(s+theta))^2 ds, convex in theta.
    // Integrate on the merged breakpoints of Q0 and the shifted Q1.
    auto g = [&](double theta) {
        std::vector<double> bps;
        bps.reserve(A.size() + 3 * B.size() + 2);
        for (const auto& sgm : A) bps.push_back(sgm.s0);
        for (int wrap = -1; wrap <= 1; ++wrap)
            for (const auto& sgm : B) {
                const double s = sgm.s0 - theta + wrap * total;
                if (s > 0.0 && s < total) bps.push_back(s);
            }
        bps.push_back(0.0);
        bps.push_back(total);
        std::sort(bps.begin(), bps.end());
        double acc = 0.0;
        size_t ia = 0;
        for (size_t i = 0; i + 1 < bps.size(); ++i) {
            const double sa = bps[i], sb = bps[i + 1];
            if (sb - sa <= 0.0) continue;
            while (ia + 1 < A.size() && A[ia].s1 <= sa + 0.25 * (sb - sa)) ++ia;
            const size_t ja = ia;
            acc += quad3(sa, sb, [&](double sv) {
                const double d = A[ja].q(sv) - Q1(sv + theta);
                return d * d;
            });
        }
        return 0.5 * acc;
    };

    double lo = -total, hi = total;
    for (int it = 0; it < 200; ++it) {
        const double t1 = lo + (hi - lo) / 3.0;
        const double t2 = hi - (hi - lo) / 3.0;
        if (g(t1) <= g(t2)) hi = t2;
        else lo = t1;
    }
    return g(0.5 * (lo + hi));
}

// ---------------------------------------------------------------------------
// Bounded-Lipschitz distance via a first-order primal-dual scheme on the LP.

double bounded_lipschitz(const std::vector<double>& mass0, const std::vector<double>& mass1,
                         const std::vector<double>& pos, bool periodic, double period,
                         double tol) {
    const int n = static_cast<int>(pos.size());
    if (static_cast<int>(mass0.size()) != n || static_cast<int>(mass1.size()) != n)
        throw invalid_input("bounded_lipschitz: size mismatch");
    if (n == 0) return 0.0;
    std::vector<double> delta(n);
    double dscale = 0.0;
    for (int i = 0; i < n; ++i) {
        delta[i] = mass1[i] - mass0[i];
        dscale += std::abs(delta[i]);
    }
    if (dscale == 0.0) return 0.0;

    struct Edge {
        int i, j;
        double d;
    };
    std::vector<Edge> edges;
    for (int i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1, std::abs(pos[i + 1] - pos[i])});
    if (periodic && n > 2) {
        double gap = period - std::abs(pos[n - 1] - pos[0]);
        if (gap < 0.0) gap = 0.0;
        edges.push_back({n - 1, 0, gap});
    }
    const int ne = static_cast<int>(edges.size());
    const int rows = 2 * n + 2 * ne;

    // x = (Phi_0..Phi_{n-1}, L); rows: Phi_i + L <= 1, -Phi_i + L <= 1,
    // Phi_i - Phi_j - d L <= 0, Phi_j - Phi_i - d L <= 0.
    std::vector<double> x(n + 1, 0.0), y(rows, 0.0), xbar(n + 1, 0.0), xold(n + 1, 0.0);
    std::vector<double> Ax(rows, 0.0);

    double dmax = 0.0;
    for (const auto& e : edges) dmax = std::max(dmax, e.d);
    const double norm_bound = std::sqrt((2.0 + dmax) * (4.0 + 2.0 * dmax + n * dmax));
    const double tau = 0.9 / norm_bound, sg = 0.9 / norm_bound;

    auto apply_A = [&](const std::vector<double>& v, std::vector<double>& out) {
        for (int i = 0; i < n; ++i) {
            out[2 * i] = v[i] + v[n];
            out[2 * i + 1] = -v[i] + v[n];
        }
        for (int e = 0; e < ne; ++e) {
            const auto& ed = edges[e];
            out[2 * n + 2 * e] = v[ed.i] - v[ed.j] - ed.d * v[n];
            out[2 * n + 2 * e + 1] = v[ed.j] - v[ed.i] - ed.d * v[n];
        }
    };
    auto rhs = [&](int r) { return r < 2 * n ? 1.0 : 0.0; };

    auto feasible_value = [&](const std::vector<double>& v) {
        double sup = 0.0;
        for (int i = 0; i < n; ++i) sup = std::max(sup, std::abs(v[i]));
        double lip = 0.0;
        for (const auto& e : edges)
            if (e.d > 1e-300) lip = std::max(lip, std::abs(v[e.i] - v[e.j]) / e.d);
        const double a = sup + lip;
        double val = 0.0;
        for (int i = 0; i < n; ++i) val += delta[i] * v[i];
        return a > 1.0 ? val / a : val;
    };

    double best = 0.0, last_checkpoint = -1.0;
    const int max_it = 400000;
    for (int it = 0; it < max_it; ++it) {
        xold = x;
        // x step: x -= tau (c + A^T y), c = -delta on Phi block
        std::vector<double> Aty(n + 1, 0.0);
        for (int i = 0; i < n; ++i) Aty[i] = y[2 * i] - y[2 * i + 1];
        for (int i = 0; i < n; ++i) Aty[n] += y[2 * i] + y[2 * i + 1];
        for (int e = 0; e < ne; ++e) {
            const auto& ed = edges[e];
            const double ya = y[2 * n + 2 * e], yb = y[2 * n + 2 * e + 1];
            Aty[ed.i] += ya - yb;
            Aty[ed.j] += yb - ya;
            Aty[n] -= ed.d * (ya + yb);
        }
        for (int i = 0; i < n; ++i) x[i] -= tau * (-delta[i] + Aty[i]);
        x[n] = std::max(0.0, x[n] - tau * Aty[n]);
        for (int i = 0; i <= n; ++i) xbar[i] = 2.0 * x[i] - xold[i];
        apply_A(xbar, Ax);
        for (int r = 0; r < rows; ++r) y[r] = std::max(0.0, y[r] + sg * (Ax[r] - rhs(r)));

        if (it % 500 == 499) {
            const double val = feasible_value(x);
            best = std::max(best, val);
            if (last_checkpoint >= 0.0 && std::abs(val - last_checkpoint) <= tol * 0.01) break;
            last_checkpoint = val;
        }
    }
    return std::max(best, feasible_value(x));
}

} // namespace ringroad
