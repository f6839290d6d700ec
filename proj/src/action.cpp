#include "ringroad/action.hpp"

#include <cmath>
#include <limits>

namespace ringroad {

ActionValue kinetic_value(double rho, std::span<const double> p) {
    double p2 = 0.0;
    for (double v : p) p2 += v * v;
    if (rho > 0.0) return {0.5 * p2 / rho, true};
    if (rho == 0.0 && p2 == 0.0) return {0.0, true};
    return {0.0, false};
}

namespace {

// Sum of one co-located point into an accumulator with the vacuum rule.
bool accumulate_point(double rho, double p2, double weight, double vacuum_tol, double& acc) {
    if (rho <= 0.0) {
        if (rho < -vacuum_tol) return false;
        if (p2 > vacuum_tol * vacuum_tol) return false;
        return true; // (0,0) contributes nothing
    }
    acc += 0.5 * p2 / rho * weight;
    return true;
}

} // namespace

KineticPoint prox_kinetic(double rho_in, std::span<const double> p_in, const ProxParams& params) {
    if (!(params.sigma > 0.0)) throw invalid_input("prox_kinetic: sigma must be positive");
    const double sigma = params.sigma;
    KineticPoint out;
    out.dim = static_cast<int>(p_in.size());
    double p2 = 0.0;
    for (double v : p_in) p2 += v * v;
    const double rhs = 0.5 * sigma * p2;

    // Root of g(rho) = (rho - rho_in)(rho + sigma)^2 - rhs on [0, inf).
    // g is increasing there; g(0) = -rho_in sigma^2 - rhs >= 0 iff clamp.
    if (-rho_in * sigma * sigma >= rhs) {
        out.rho = 0.0;
        return out;
    }
    if (rhs == 0.0) { // zero momentum: the density is already the minimizer
        out.rho = std::max(rho_in, 0.0);
        return out;
    }
    double lo = std::max(rho_in, 0.0);
    double hi = std::max(rho_in, 0.0) + sigma + std::cbrt(rhs);
    auto g = [&](double r) { return (r - rho_in) * (r + sigma) * (r + sigma) - rhs; };
    while (g(hi) < 0.0) hi = 2.0 * hi + sigma;
    double x = std::max(rho_in, 0.0) + sigma;
    const double tol = params.newton_tol * (1.0 + std::abs(rho_in));
    bool converged = false;
    for (int it = 0; it < params.max_newton; ++it) {
        const double gx = g(x);
        if (std::abs(gx) <= tol * std::max(1.0, (x + sigma) * (x + sigma))) {
            converged = true;
            break;
        }
        if (gx > 0.0) hi = x;
        else lo = x;
        const double dg = (x + sigma) * (x + sigma) + 2.0 * (x - rho_in) * (x + sigma);
        double xn = x - gx / dg;
        if (!(xn > lo) || !(xn < hi)) xn = 0.5 * (lo + hi); // bisection fallback
        if (std::abs(xn - x) <= tol * (1.0 + std::abs(x))) {
            x = xn;
            converged = true;
            break;
        }
        x = xn;
    }
    if (!converged)
        throw numerical_error("prox_kinetic: Newton did not converge; residual " +
                              std::to_string(g(x)));
    if (x <= 0.0) {
        out.rho = 0.0;
        return out;
    }
    out.rho = x;
    const double shrink = x / (x + sigma);
    for (size_t i = 0; i < p_in.size(); ++i) out.p[i] = p_in[i] * shrink;
    return out;
}

BoundaryPoint prox_boundary(double gamma_in, double G_in, double f_in, double kappa,
                            const ProxParams& params, bool has_G) {
    if (!(kappa > 0.0)) throw invalid_input("prox_boundary: kappa must be positive");
    double packed[2];
    int dim = 0;
    if (has_G) packed[dim++] = G_in;
    packed[dim++] = kappa * f_in;
    const KineticPoint kp = prox_kinetic(gamma_in, std::span<const double>(packed, dim), params);
    BoundaryPoint out;
    out.gamma = kp.rho;
    int slot = 0;
    if (has_G) out.G = kp.p[slot++];
    out.f = kp.p[slot] / kappa;
    return out;
}

ActionValue eval_action_colocated(const Geometry& g, int nt, const Colocated& co, double kappa,
                                  double vacuum_tol) {
    if (!(kappa > 0.0)) throw invalid_input("eval_action: kappa must be positive");
    const int nc = g.n_cells, nb = g.n_bcells, d = g.dim();
    const double dt = 1.0 / nt;
    const double wi = g.cell_volume * dt;
    const double wb = g.bcell_len * dt;
    double acc = 0.0;
    for (int k = 0; k < nt; ++k) {
        for (int c = 0; c < nc; ++c) {
            double p2 = 0.0;
            for (int a = 0; a < d; ++a) {
                const double v = co.Fc[(static_cast<size_t>(k) * nc + c) * d + a];
                p2 += v * v;
            }
            if (!accumulate_point(co.omega[static_cast<size_t>(k) * nc + c], p2, wi, vacuum_tol,
                                  acc))
                return {0.0, false};
        }
        for (int b = 0; b < nb; ++b) {
            const double Gv = g.is_strip() ? co.Gc[static_cast<size_t>(k) * nb + b] : 0.0;
            const double fv = co.f[static_cast<size_t>(k) * nb + b];
            const double p2 = Gv * Gv + kappa * kappa * fv * fv;
            if (!accumulate_point(co.gamma[static_cast<size_t>(k) * nb + b], p2, wb, vacuum_tol,
                                  acc))
                return {0.0, false};
        }
    }
    return {acc, true};
}

ActionValue eval_action(const SpaceTimePath& path, double kappa, double vacuum_tol) {
    const Colocated co = interpolate_colocate(path);
    return eval_action_colocated(path.geom, path.nt, co, kappa, vacuum_tol);
}

std::vector<double> action_slices(const SpaceTimePath& path, double kappa, double vacuum_tol) {
    const Geometry& g = path.geom;
    const int nt = path.nt, nc = g.n_cells, nb = g.n_bcells, d = g.dim();
    const Colocated co = interpolate_colocate(path);
    const double wi = g.cell_volume; // per unit time
    const double wb = g.bcell_len;
    std::vector<double> slices(nt, 0.0);
    for (int k = 0; k < nt; ++k) {
        double acc = 0.0;
        bool ok = true;
        for (int c = 0; c < nc && ok; ++c) {
            double p2 = 0.0;
            for (int a = 0; a < d; ++a) {
                const double v = co.Fc[(static_cast<size_t>(k) * nc + c) * d + a];
                p2 += v * v;
            }
            ok = accumulate_point(co.omega[static_cast<size_t>(k) * nc + c], p2, wi, vacuum_tol,
                                  acc);
        }
        for (int b = 0; b < nb && ok; ++b) {
            const double Gv = g.is_strip() ? co.Gc[static_cast<size_t>(k) * nb + b] : 0.0;
            const double fv = co.f[static_cast<size_t>(k) * nb + b];
            const double p2 = Gv * Gv + kappa * kappa * fv * fv;
            ok = accumulate_point(co.gamma[static_cast<size_t>(k) * nb + b], p2, wb, vacuum_tol,
                                  acc);
        }
        slices[k] = ok ? acc : std::numeric_limits<double>::infinity();
    }
    return slices;
}

} // namespace ringroad
