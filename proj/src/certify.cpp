#include "ringroad/certify.hpp"

#include <algorithm>
#include <cmath>

namespace ringroad {

namespace {

// Spatial gradient squared of an interval-sampled field at cell centers:
// centered differences, one-sided at walls, periodic in x on the strip.
void grad_sq_interior(const Geometry& g, const double* phi, double* out) {
    if (!g.is_strip()) {
        const int n = g.nx;
        for (int c = 0; c < n; ++c) {
            double d;
            if (c == 0) d = (phi[1] - phi[0]) / g.hx;
            else if (c == n - 1) d = (phi[n - 1] - phi[n - 2]) / g.hx;
            else d = (phi[c + 1] - phi[c - 1]) / (2.0 * g.hx);
            out[c] = d * d;
        }
        return;
    }
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const int c = g.cell(i, j);
            const int ip = (i + 1) % g.nx, im = (i - 1 + g.nx) % g.nx;
            const double dx = (phi[g.cell(ip, j)] - phi[g.cell(im, j)]) / (2.0 * g.hx);
            double dy;
            if (j == 0) dy = (phi[g.cell(i, 1)] - phi[g.cell(i, 0)]) / g.hy;
            else if (j == g.ny - 1) dy = (phi[g.cell(i, j)] - phi[g.cell(i, j - 1)]) / g.hy;
            else dy = (phi[g.cell(i, j + 1)] - phi[g.cell(i, j - 1)]) / (2.0 * g.hy);
            out[c] = dx * dx + dy * dy;
        }
}

void grad_sq_boundary(const Geometry& g, const double* psi, double* out) {
    if (!g.is_strip()) {
        for (int b = 0; b < g.n_bcells; ++b) out[b] = 0.0;
        return;
    }
    for (int b = 0; b < g.n_bcells; ++b) {
        const int bp = (b + 1) % g.nx, bm = (b - 1 + g.nx) % g.nx;
        const double d = (psi[bp] - psi[bm]) / (2.0 * g.hx);
        out[b] = d * d;
    }
}

double dual_objective_arrays(const PotentialPair& pot, const double* o0, const double* o1,
                             const double* g0, const double* g1) {
    const Geometry& g = pot.geom;
    const int nt = pot.nt, nc = g.n_cells, nb = g.n_bcells;
    const double* phi0 = pot.phi.data();
    const double* phi1 = pot.phi.data() + static_cast<size_t>(nt - 1) * nc;
    const double* psi0 = pot.psi.data();
    const double* psi1 = pot.psi.data() + static_cast<size_t>(nt - 1) * nb;
    double acc = 0.0;
    for (int c = 0; c < nc; ++c) acc += (phi1[c] * o1[c] - phi0[c] * o0[c]) * g.cell_volume;
    for (int b = 0; b < nb; ++b) acc += (psi1[b] * g1[b] - psi0[b] * g0[b]) * g.bcell_len;
    return acc;
}

// HJ residual fields of a potential pair (no support weighting).
void residual_fields(const PotentialPair& pot, double kappa, std::vector<double>& rphi,
                     std::vector<double>& rpsi) {
    const Geometry& g = pot.geom;
    const int nt = pot.nt, nc = g.n_cells, nb = g.n_bcells;
    const double dt = 1.0 / nt;
    rphi.assign(static_cast<size_t>(nt) * nc, 0.0);
    rpsi.assign(static_cast<size_t>(nt) * nb, 0.0);
    std::vector<double> gsq(nc), gsqb(nb);
    for (int k = 0; k < nt; ++k) {
        // forward difference in time; the last interval copies the previous one
        const int kd = std::max(0, std::min(k, nt - 2));
        const bool has_dt = nt >= 2;
        const double* phik = pot.phi.data() + static_cast<size_t>(k) * nc;
        const double* phid0 = pot.phi.data() + static_cast<size_t>(kd) * nc;
        const double* phid1 = pot.phi.data() + static_cast<size_t>(has_dt ? kd + 1 : kd) * nc;
        grad_sq_interior(g, phik, gsq.data());
        for (int c = 0; c < nc; ++c)
            rphi[static_cast<size_t>(k) * nc + c] =
                (has_dt ? (phid1[c] - phid0[c]) / dt : 0.0) + 0.5 * gsq[c];
        const double* psik = pot.psi.data() + static_cast<size_t>(k) * nb;
        const double* psid0 = pot.psi.data() + static_cast<size_t>(kd) * nb;
        const double* psid1 = pot.psi.data() + static_cast<size_t>(has_dt ? kd + 1 : kd) * nb;
        grad_sq_boundary(g, psik, gsqb.data());
        for (int b = 0; b < nb; ++b) {
            const double cpl = psik[b] - phik[g.coupled_cell(b)];
            rpsi[static_cast<size_t>(k) * nb + b] =
                (has_dt ? (psid1[b] - psid0[b]) / dt : 0.0) + 0.5 * gsqb[b] +
                cpl * cpl / (2.0 * kappa * kappa);
        }
    }
}

} // namespace

HJReport hj_residuals(const PotentialPair& potentials, const SpaceTimePath& path, double kappa,
                      double support_threshold) {
    const Geometry& g = potentials.geom;
    const int nt = potentials.nt, nc = g.n_cells, nb = g.n_bcells;
    if (path.nt != nt) throw invalid_input("hj_residuals: path and potentials disagree on nt");
    HJReport rep;
    residual_fields(potentials, kappa, rep.phi_residual, rep.psi_residual);

    const Colocated co = interpolate_colocate(path);
    double max_dens = 0.0;
    for (double v : co.omega) max_dens = std::max(max_dens, v);
    for (double v : co.gamma) max_dens = std::max(max_dens, v);
    const double thresh = support_threshold * max_dens;
    const double dt = 1.0 / nt;
    for (int k = 0; k < nt; ++k) {
        for (int c = 0; c < nc; ++c) {
            const double r = rep.phi_residual[static_cast<size_t>(k) * nc + c];
            const double wgt = g.cell_volume * dt;
            if (r > 0.0) rep.phi_positive_l1 += r * wgt;
            if (co.omega[static_cast<size_t>(k) * nc + c] > thresh)
                rep.phi_support_l1 += std::abs(r) * wgt;
        }
        for (int b = 0; b < nb; ++b) {
            const double r = rep.psi_residual[static_cast<size_t>(k) * nb + b];
            const double wgt = g.bcell_len * dt;
            if (r > 0.0) rep.psi_positive_l1 += r * wgt;
            if (co.gamma[static_cast<size_t>(k) * nb + b] > thresh)
                rep.psi_support_l1 += std::abs(r) * wgt;
        }
    }
    rep.dual_value = dual_objective_arrays(potentials, path.omega.data(),
                                           path.omega.data() + static_cast<size_t>(nt) * nc,
                                           path.gamma.data(),
                                           path.gamma.data() + static_cast<size_t>(nt) * nb);
    return rep;
}

FeasibilizeResult feasibilize(const PotentialPair& potentials, double kappa) {
    const Geometry& g = potentials.geom;
    const int nt = potentials.nt, nc = g.n_cells, nb = g.n_bcells;
    const double dt = 1.0 / nt;
    FeasibilizeResult out;
    out.potentials = potentials;
    PotentialPair& pot = out.potentials;

    double scale = 1.0;
    for (double v : pot.phi) scale = std::max(scale, std::abs(v));
    for (double v : pot.psi) scale = std::max(scale, std::abs(v));

    std::vector<double> rphi, rpsi, delta(nt, 0.0);

    // Pass A: repair phi; subtract the same time ramp from psi so that the
    // coupling term psi - phi is unchanged.
    residual_fields(pot, kappa, rphi, rpsi);
    delta[0] = 0.0;
    for (int k = 1; k < nt; ++k) {
        double m = 0.0;
        for (int c = 0; c < nc; ++c)
            m = std::max(m, rphi[static_cast<size_t>(k - 1) * nc + c]);
        delta[k] = delta[k - 1] + dt * m * (1.0 + 1e-12);
    }
    for (int k = 0; k < nt; ++k) {
        for (int c = 0; c < nc; ++c) pot.phi[static_cast<size_t>(k) * nc + c] -= delta[k];
        for (int b = 0; b < nb; ++b) pot.psi[static_cast<size_t>(k) * nb + b] -= delta[k];
    }

    // Passes B: repair psi against the corrected phi, twice.
    for (int pass = 0; pass < 2; ++pass) {
        residual_fields(pot, kappa, rphi, rpsi);
        delta.assign(nt, 0.0);
        for (int k = 1; k < nt; ++k) {
            double m = 0.0;
            for (int b = 0; b < nb; ++b)
                m = std::max(m, rpsi[static_cast<size_t>(k - 1) * nb + b]);
            delta[k] = delta[k - 1] + dt * m * (1.0 + 1e-12);
        }
        for (int k = 0; k < nt; ++k)
            for (int b = 0; b < nb; ++b) pot.psi[static_cast<size_t>(k) * nb + b] -= delta[k];
    }

    residual_fields(pot, kappa, rphi, rpsi);
    double worst = 0.0;
    for (double v : rphi) worst = std::max(worst, v);
    for (double v : rpsi) worst = std::max(worst, v);
    out.achieved = worst;
    out.feasible = worst <= 1e-9 * scale;
    return out;
}

double dual_objective(const PotentialPair& potentials, const MeasurePair& rho0,
                      const MeasurePair& rho1) {
    return dual_objective_arrays(potentials, rho0.omega.data(), rho1.omega.data(),
                                 rho0.gamma.data(), rho1.gamma.data());
}

} // namespace ringroad
