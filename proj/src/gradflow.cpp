#include "ringroad/gradflow.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ringroad {

namespace {

constexpr double kDensityFloor = 1e-300;

double pot_at(const std::vector<double>& V, int i) { return V.empty() ? 0.0 : V[i]; }

// log-mean face weight; zero as soon as one side is empty, a at a == b.
double log_mean(double a, double b) {
    if (a <= kDensityFloor || b <= kDensityFloor) return 0.0;
    if (a == b) return a;
    return (a - b) / (std::log(a) - std::log(b));
}

double eprime_interior(const EnergySpec& spec, double rho, int cell) {
    const double V = pot_at(spec.V_interior, cell);
    if (spec.kind == EnergyKind::Boltzmann) return std::log(rho) + V + 1.0;
    const double m = spec.m_interior;
    return m / (m - 1.0) * std::pow(rho, m - 1.0) + V;
}

double eprime_boundary(const EnergySpec& spec, double rho, int bcell) {
    const double V = pot_at(spec.V_boundary, bcell);
    if (spec.kind == EnergyKind::Boltzmann) return std::log(rho) + V + 1.0;
    const double m = spec.m_boundary;
    return m / (m - 1.0) * std::pow(rho, m - 1.0) + V;
}

// Signed face flux for one face with left/right densities and potentials.
// Boltzmann: -(grad rho + logmean * grad V): the log-mean weight makes this
// exactly theta * grad E' wherever both sides are positive, keeps the Gibbs
// state an exact fixed point, and stays finite next to vacuum.
// Renyi: upwind density times grad E'.
double face_flux(const EnergySpec& spec, double rho_l, double rho_r, double V_l, double V_r,
                 double h, double m_exp) {
    if (spec.kind == EnergyKind::Boltzmann) {
        const double theta = log_mean(rho_l, rho_r);
        return -((rho_r - rho_l) / h + theta * (V_r - V_l) / h);
    }
    const double mm = m_exp;
    const double ep_l = mm / (mm - 1.0) * std::pow(std::max(rho_l, 0.0), mm - 1.0) + V_l;
    const double ep_r = mm / (mm - 1.0) * std::pow(std::max(rho_r, 0.0), mm - 1.0) + V_r;
    const double de = (ep_r - ep_l) / h;
    const double theta = de < 0.0 ? rho_l : rho_r; // donor side of the flow -theta*de
    return -theta * de;
}

// Face density weight consistent with face_flux (for the dissipation norm).
double face_theta(const EnergySpec& spec, double rho_l, double rho_r, double V_l, double V_r,
                  double h, double m_exp) {
    if (spec.kind == EnergyKind::Boltzmann) return log_mean(rho_l, rho_r);
    const double mm = m_exp;
    const double ep_l = mm / (mm - 1.0) * std::pow(std::max(rho_l, 0.0), mm - 1.0) + V_l;
    const double ep_r = mm / (mm - 1.0) * std::pow(std::max(rho_r, 0.0), mm - 1.0) + V_r;
    return ((ep_r - ep_l) / h) < 0.0 ? rho_l : rho_r;
}

} // namespace

MeasurePair gibbs_measure(const Geometry& g, const std::vector<double>& V_interior,
                          const std::vector<double>& V_boundary) {
    MeasurePair pi = zero_pair(g);
    double Z = 0.0;
    for (int c = 0; c < g.n_cells; ++c) {
        pi.omega[c] = std::exp(-pot_at(V_interior, c));
        Z += pi.omega[c] * g.cell_volume;
    }
    for (int b = 0; b < g.n_bcells; ++b) {
        pi.gamma[b] = std::exp(-pot_at(V_boundary, b));
        Z += pi.gamma[b] * g.bcell_len;
    }
    for (double& v : pi.omega) v /= Z;
    for (double& v : pi.gamma) v /= Z;
    return pi;
}

double energy_value(const MeasurePair& rho, const EnergySpec& spec) {
    const Geometry& g = rho.geom;
    double acc = 0.0;
    if (spec.kind == EnergyKind::Boltzmann) {
        for (int c = 0; c < g.n_cells; ++c) {
            const double w = rho.omega[c];
            acc += ((w > 0.0 ? w * std::log(w) : 0.0) + w * pot_at(spec.V_interior, c)) *
                   g.cell_volume;
        }
        for (int b = 0; b < g.n_bcells; ++b) {
            const double v = rho.gamma[b];
            acc += ((v > 0.0 ? v * std::log(v) : 0.0) + v * pot_at(spec.V_boundary, b)) *
                   g.bcell_len;
        }
        return acc;
    }
    const double mi = spec.m_interior, mb = spec.m_boundary;
    if (!(mi > 1.0) || !(mb > 1.0)) throw invalid_input("gradflow: Renyi exponents must be > 1");
    for (int c = 0; c < g.n_cells; ++c)
        acc += (std::pow(rho.omega[c], mi) / (mi - 1.0) +
                rho.omega[c] * pot_at(spec.V_interior, c)) * g.cell_volume;
    for (int b = 0; b < g.n_bcells; ++b)
        acc += (std::pow(rho.gamma[b], mb) / (mb - 1.0) +
                rho.gamma[b] * pot_at(spec.V_boundary, b)) * g.bcell_len;
    return acc;
}

GradientField gradient_field(const MeasurePair& rho, const EnergySpec& spec, double kappa) {
    const Geometry& g = rho.geom;
    if (!(kappa > 0.0)) throw invalid_input("gradient_field: kappa must be positive");
    GradientField out;
    out.interior_flux.assign(g.n_faces, 0.0);
    out.boundary_flux.assign(g.n_bfaces, 0.0);
    out.transfer.assign(g.n_bcells, 0.0);

    if (!g.is_strip()) {
        for (int f = 1; f <= g.nx - 1; ++f)
            out.interior_flux[f] =
                face_flux(spec, rho.omega[f - 1], rho.omega[f], pot_at(spec.V_interior, f - 1),
                          pot_at(spec.V_interior, f), g.hx, spec.m_interior);
    } else {
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                const int im = (i - 1 + g.nx) % g.nx;
                out.interior_flux[g.xface(i, j)] =
                    face_flux(spec, rho.omega[g.cell(im, j)], rho.omega[g.cell(i, j)],
                              pot_at(spec.V_interior, g.cell(im, j)),
                              pot_at(spec.V_interior, g.cell(i, j)), g.hx, spec.m_interior);
            }
        for (int j = 1; j <= g.ny - 1; ++j)
            for (int i = 0; i < g.nx; ++i)
                out.interior_flux[g.yface(i, j)] =
                    face_flux(spec, rho.omega[g.cell(i, j - 1)], rho.omega[g.cell(i, j)],
                              pot_at(spec.V_interior, g.cell(i, j - 1)),
                              pot_at(spec.V_interior, g.cell(i, j)), g.hy, spec.m_interior);
        for (int i = 0; i < g.nx; ++i) {
            const int im = (i - 1 + g.nx) % g.nx;
            out.boundary_flux[i] =
                face_flux(spec, rho.gamma[im], rho.gamma[i], pot_at(spec.V_boundary, im),
                          pot_at(spec.V_boundary, i), g.hx, spec.m_boundary);
        }
    }

    // Transfer: f = gamma (E'_interior - E'_boundary)/kappa^2, nonzero only
    // where both coupled densities are positive (the Boltzmann logs require
    // it; the gamma prefactor keeps this consistent).
    for (int b = 0; b < g.n_bcells; ++b) {
        const int c = g.coupled_cell(b);
        const double gam = rho.gamma[b], om = rho.omega[c];
        double f = 0.0;
        if (spec.kind == EnergyKind::Boltzmann) {
            if (gam > kDensityFloor && om > kDensityFloor)
                f = gam * (eprime_interior(spec, om, c) - eprime_boundary(spec, gam, b)) /
                    (kappa * kappa);
        } else {
            if (gam > kDensityFloor)
                f = gam *
                    (eprime_interior(spec, std::max(om, 0.0), c) -
                     eprime_boundary(spec, gam, b)) /
                    (kappa * kappa);
        }
        out.transfer[b] = f;
        // the same value is the boundary-face flux of the interior field
        const auto& bc = g.bmap[b];
        out.interior_flux[bc.face] = bc.outward_sign * f * g.bcell_len / g.face_area(bc.face);
    }
    return out;
}

double gradient_norm_sq(const MeasurePair& rho, const EnergySpec& spec, double kappa) {
    const Geometry& g = rho.geom;
    const GradientField gf = gradient_field(rho, spec, kappa);
    double acc = 0.0;
    // |F|^2/theta per interior face (face volume = h * area)
    if (!g.is_strip()) {
        for (int f = 1; f <= g.nx - 1; ++f) {
            const double th = face_theta(spec, rho.omega[f - 1], rho.omega[f],
                                         pot_at(spec.V_interior, f - 1),
                                         pot_at(spec.V_interior, f), g.hx, spec.m_interior);
            if (th > kDensityFloor)
                acc += gf.interior_flux[f] * gf.interior_flux[f] / th * g.cell_volume;
        }
    } else {
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                const int im = (i - 1 + g.nx) % g.nx;
                const double th = face_theta(spec, rho.omega[g.cell(im, j)],
                                             rho.omega[g.cell(i, j)],
                                             pot_at(spec.V_interior, g.cell(im, j)),
                                             pot_at(spec.V_interior, g.cell(i, j)), g.hx,
                                             spec.m_interior);
                const double F = gf.interior_flux[g.xface(i, j)];
                if (th > kDensityFloor) acc += F * F / th * g.cell_volume;
            }
        for (int j = 1; j <= g.ny - 1; ++j)
            for (int i = 0; i < g.nx; ++i) {
                const double th = face_theta(spec, rho.omega[g.cell(i, j - 1)],
                                             rho.omega[g.cell(i, j)],
                                             pot_at(spec.V_interior, g.cell(i, j - 1)),
                                             pot_at(spec.V_interior, g.cell(i, j)), g.hy,
                                             spec.m_interior);
                const double F = gf.interior_flux[g.yface(i, j)];
                if (th > kDensityFloor) acc += F * F / th * g.cell_volume;
            }
        for (int i = 0; i < g.nx; ++i) {
            const int im = (i - 1 + g.nx) % g.nx;
            const double th = face_theta(spec, rho.gamma[im], rho.gamma[i],
                                         pot_at(spec.V_boundary, im), pot_at(spec.V_boundary, i),
                                         g.hx, spec.m_boundary);
            const double Gf = gf.boundary_flux[i];
            if (th > kDensityFloor) acc += Gf * Gf / th * g.bcell_len;
        }
    }
    for (int b = 0; b < g.n_bcells; ++b) {
        const double gam = rho.gamma[b];
        if (gam > kDensityFloor)
            acc += kappa * kappa * gf.transfer[b] * gf.transfer[b] / gam * g.bcell_len;
    }
    return acc;
}

double cfl_bound(const MeasurePair& rho, const EnergySpec& spec, double kappa) {
    const Geometry& g = rho.geom;
    const double hmin = g.is_strip() ? std::min(g.hx, g.hy) : g.hx;
    const int d = g.dim();

    double diffusivity = 1.0; // Boltzmann diffusion coefficient
    if (spec.kind == EnergyKind::Renyi) {
        double rmax = 0.0;
        for (double v : rho.omega) rmax = std::max(rmax, v);
        for (double v : rho.gamma) rmax = std::max(rmax, v);
        const double m = std::max(spec.m_interior, spec.m_boundary);
        diffusivity = std::max(1e-12, m * std::pow(rmax, m - 1.0));
    }
    double vmax = 0.0; // potential advection speed
    auto scan_potential = [&](const std::vector<double>& V, double h) {
        for (size_t i = 0; i + 1 < V.size(); ++i)
            vmax = std::max(vmax, std::abs(V[i + 1] - V[i]) / h);
    };
    scan_potential(spec.V_interior, g.hx);
    scan_potential(spec.V_boundary, g.bcell_len);

    double rate = 2.0 * d * diffusivity / (hmin * hmin) + vmax / hmin;
    for (int b = 0; b < g.n_bcells; ++b) {
        const int c = g.coupled_cell(b);
        const double gam = rho.gamma[b], om = rho.omega[c];
        if (gam <= kDensityFloor || (spec.kind == EnergyKind::Boltzmann && om <= kDensityFloor))
            continue;
        const double de = std::abs(eprime_interior(spec, std::max(om, kDensityFloor), c) -
                                   eprime_boundary(spec, gam, b));
        const double amplification =
            std::max(1.0, gam * g.bcell_len / (g.cell_volume * std::max(om, gam)));
        rate = std::max(rate, de / (kappa * kappa) * amplification);
    }
    return 0.5 / std::max(rate, 1e-12);
}

FlowState step(const FlowState& state, const EnergySpec& spec, double kappa, double tau) {
    const Geometry& g = state.rho.geom;
    const double bound = cfl_bound(state.rho, spec, kappa);
    if (tau > bound)
        throw invalid_input("gradflow step: tau " + std::to_string(tau) +
                            " exceeds the CFL bound " + std::to_string(bound));
    const GradientField gf = gradient_field(state.rho, spec, kappa);

    FlowState next = state;
    next.time = state.time + tau;
    MeasurePair& rho = next.rho;

    // Conservative update: every face moves tau * flux * area between its two
    // cells with one shared value, so pairing is exactly antisymmetric.
    if (!g.is_strip()) {
        for (int f = 1; f <= g.nx - 1; ++f) {
            const double m = tau * gf.interior_flux[f] * 1.0;
            rho.omega[f - 1] -= m / g.cell_volume;
            rho.omega[f] += m / g.cell_volume;
        }
    } else {
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                const int im = (i - 1 + g.nx) % g.nx;
                const double m = tau * gf.interior_flux[g.xface(i, j)] * g.hy;
                rho.omega[g.cell(im, j)] -= m / g.cell_volume;
                rho.omega[g.cell(i, j)] += m / g.cell_volume;
            }
        for (int j = 1; j <= g.ny - 1; ++j)
            for (int i = 0; i < g.nx; ++i) {
                const double m = tau * gf.interior_flux[g.yface(i, j)] * g.hx;
                rho.omega[g.cell(i, j - 1)] -= m / g.cell_volume;
                rho.omega[g.cell(i, j)] += m / g.cell_volume;
            }
        for (int i = 0; i < g.nx; ++i) {
            const int im = (i - 1 + g.nx) % g.nx;
            const double m = tau * gf.boundary_flux[i] * 1.0;
            rho.gamma[im] -= m / g.bcell_len;
            rho.gamma[i] += m / g.bcell_len;
        }
    }
    for (int b = 0; b < g.n_bcells; ++b) {
        const double m = tau * gf.transfer[b] * g.bcell_len;
        rho.omega[g.coupled_cell(b)] -= m / g.cell_volume;
        rho.gamma[b] += m / g.bcell_len;
    }

    for (double v : rho.omega)
        if (v < 0.0) throw numerical_error("gradflow step: negative interior density");
    for (double v : rho.gamma)
        if (v < 0.0) throw numerical_error("gradflow step: negative boundary density");

    next.energy = energy_value(rho, spec);
    const MassBudget mb = total_mass(rho);
    next.mass_drift = std::abs(mb.interior_mass + mb.boundary_mass - 1.0);
    return next;
}

std::vector<FlowState> run(const MeasurePair& rho_init, const EnergySpec& spec, double kappa,
                           double T, double tau, int record_every) {
    validate(rho_init, 1e-9);
    std::vector<FlowState> traj;
    FlowState cur;
    cur.rho = rho_init;
    cur.time = 0.0;
    cur.energy = energy_value(rho_init, spec);
    cur.mass_drift = 0.0;
    traj.push_back(cur);
    double tau_cur = tau;
    int accepted = 0;
    while (cur.time < T - 1e-15) {
        const double bound = cfl_bound(cur.rho, spec, kappa);
        const double try_tau = std::min({tau_cur, bound, T - cur.time});
        if (try_tau < 1e-12)
            throw numerical_error("gradflow run: time step underflow at t = " +
                                  std::to_string(cur.time));
        FlowState next;
        try {
            next = step(cur, spec, kappa, try_tau);
        } catch (const numerical_error&) {
            tau_cur = 0.5 * try_tau;
            continue;
        }
        cur = std::move(next);
        ++accepted;
        if (accepted % record_every == 0 || cur.time >= T - 1e-15) traj.push_back(cur);
    }
    return traj;
}

} // namespace ringroad
