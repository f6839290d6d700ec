#include "ringroad/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "ringroad/certify.hpp"

namespace ringroad {

namespace {

struct Weights {
    double wi, wb; // interior / boundary quadrature weights (vol*dt, len*dt)
};

double colo_action(const Geometry& g, int nt, const ColoArrays& v, const Weights& w) {
    const int nc = g.n_cells, nb = g.n_bcells, d = g.dim();
    double acc = 0.0;
    for (int k = 0; k < nt; ++k) {
        for (int c = 0; c < nc; ++c) {
            const double rho = v.oc[static_cast<size_t>(k) * nc + c];
            double p2 = 0.0;
            for (int a = 0; a < d; ++a) {
                const double t = v.Fc[(static_cast<size_t>(k) * nc + c) * d + a];
                p2 += t * t;
            }
            if (rho > 0.0) acc += 0.5 * p2 / rho * w.wi;
        }
        for (int b = 0; b < nb; ++b) {
            const double rho = v.gc[static_cast<size_t>(k) * nb + b];
            const double Gv = g.is_strip() ? v.Gc[static_cast<size_t>(k) * nb + b] : 0.0;
            const double qv = v.qc[static_cast<size_t>(k) * nb + b];
            const double p2 = Gv * Gv + qv * qv;
            if (rho > 0.0) acc += 0.5 * p2 / rho * w.wb;
        }
    }
    return acc;
}

// Pointwise prox of the packed kinetic integrand over all co-located points.
void prox_all(const Geometry& g, int nt, const ColoArrays& in, ColoArrays& out, double sigma,
              const ProxParams& prm) {
    const int nc = g.n_cells, nb = g.n_bcells, d = g.dim();
    ProxParams p = prm;
    p.sigma = sigma;
    for (int k = 0; k < nt; ++k) {
        for (int c = 0; c < nc; ++c) {
            const size_t idx = static_cast<size_t>(k) * nc + c;
            double mom[2] = {in.Fc[idx * d], d == 2 ? in.Fc[idx * d + 1] : 0.0};
            const KineticPoint kp = prox_kinetic(in.oc[idx], std::span<const double>(mom, d), p);
            out.oc[idx] = kp.rho;
            out.Fc[idx * d] = kp.p[0];
            if (d == 2) out.Fc[idx * d + 1] = kp.p[1];
        }
        for (int b = 0; b < nb; ++b) {
            const size_t idx = static_cast<size_t>(k) * nb + b;
            double mom[2];
            int dim = 0;
            if (g.is_strip()) mom[dim++] = in.Gc[idx];
            mom[dim++] = in.qc[idx];
            const KineticPoint kp = prox_kinetic(in.gc[idx], std::span<const double>(mom, dim), p);
            out.gc[idx] = kp.rho;
            int slot = 0;
            if (g.is_strip()) out.Gc[idx] = kp.p[slot++];
            out.qc[idx] = kp.p[slot];
        }
    }
}

double metric_dot(const PathArrays& a, const PathArrays& b, const ColoArrays& av,
                  const ColoArrays& bv, const Weights& w, int nt, int nc, int nb) {
    double s = 0.0;
    for (int k = 1; k <= nt - 1; ++k)
        for (int c = 0; c < nc; ++c)
            s += a.on[static_cast<size_t>(k) * nc + c] * b.on[static_cast<size_t>(k) * nc + c] * w.wi;
    for (size_t i = 0; i < a.F.size(); ++i) s += a.F[i] * b.F[i] * w.wi;
    for (int k = 1; k <= nt - 1; ++k)
        for (int b2 = 0; b2 < nb; ++b2)
            s += a.gn[static_cast<size_t>(k) * nb + b2] * b.gn[static_cast<size_t>(k) * nb + b2] * w.wb;
    for (size_t i = 0; i < a.G.size(); ++i) s += a.G[i] * b.G[i] * w.wb;
    for (size_t i = 0; i < a.q.size(); ++i) s += a.q[i] * b.q[i] * w.wb;
    for (size_t i = 0; i < av.oc.size(); ++i) s += av.oc[i] * bv.oc[i] * w.wi;
    for (size_t i = 0; i < av.Fc.size(); ++i) s += av.Fc[i] * bv.Fc[i] * w.wi;
    for (size_t i = 0; i < av.gc.size(); ++i) s += av.gc[i] * bv.gc[i] * w.wb;
    for (size_t i = 0; i < av.Gc.size(); ++i) s += av.Gc[i] * bv.Gc[i] * w.wb;
    for (size_t i = 0; i < av.qc.size(); ++i) s += av.qc[i] * bv.qc[i] * w.wb;
    return s;
}

struct ScaledProblem {
    MeasurePair rho0, rho1;
    double scale = 1.0;
};

ScaledProblem rescale(const MeasurePair& rho0, const MeasurePair& rho1) {
    double s = 0.0;
    for (double v : rho0.omega) s = std::max(s, v);
    for (double v : rho1.omega) s = std::max(s, v);
    for (double v : rho0.gamma) s = std::max(s, v);
    for (double v : rho1.gamma) s = std::max(s, v);
    if (!(s > 0.0)) s = 1.0;
    ScaledProblem out{rho0, rho1, s};
    for (double& v : out.rho0.omega) v /= s;
    for (double& v : out.rho0.gamma) v /= s;
    for (double& v : out.rho1.omega) v /= s;
    for (double& v : out.rho1.gamma) v /= s;
    return out;
}

} // namespace

GeodesicResult solve_geodesic(const MeasurePair& rho0, const MeasurePair& rho1,
                              const SolverConfig& config) {
    const Geometry& g = rho0.geom;
    if (g.kind != rho1.geom.kind || g.nx != rho1.geom.nx || g.ny != rho1.geom.ny)
        throw invalid_input("solve_geodesic: endpoints live on different geometries");
    if (!(config.kappa > 0.0)) throw invalid_input("solve_geodesic: kappa must be positive");
    validate(rho0, 1e-9);
    validate(rho1, 1e-9);

    const int nt = config.nt, nc = g.n_cells, nb = g.n_bcells;
    const double kappa = config.kappa;
    const double dt = 1.0 / nt;
    const Weights w{g.cell_volume * dt, g.bcell_len * dt};

    const ScaledProblem sp = rescale(rho0, rho1);

    ProjectorOptions popt;
    popt.colocate = true;
    popt.quadrature_metric = true;
    popt.f_scale = kappa;
    popt.cg_tol = config.cg_tol;
    popt.cg_max = config.cg_max;
    ConstraintProjector projector(g, nt, sp.rho0.omega, sp.rho1.omega, sp.rho0.gamma,
                                  sp.rho1.gamma, popt);

    // Initialization: linear density interpolation, zero momenta, flux from
    // the boundary imbalance spread uniformly in time.
    PathArrays wU = projector.make_arrays();
    for (int k = 0; k <= nt; ++k) {
        const double t = static_cast<double>(k) / nt;
        for (int c = 0; c < nc; ++c)
            wU.on[static_cast<size_t>(k) * nc + c] =
                (1.0 - t) * sp.rho0.omega[c] + t * sp.rho1.omega[c];
        for (int b = 0; b < nb; ++b)
            wU.gn[static_cast<size_t>(k) * nb + b] =
                (1.0 - t) * sp.rho0.gamma[b] + t * sp.rho1.gamma[b];
    }
    for (int k = 0; k < nt; ++k)
        for (int b = 0; b < nb; ++b)
            wU.q[static_cast<size_t>(k) * nb + b] =
                kappa * (sp.rho1.gamma[b] - sp.rho0.gamma[b]);

    ColoArrays wV;
    {
        // start from the co-location of the initial staggered guess
        PathArrays tmp = wU;
        ColoArrays tmpV = projector.make_colo();
        projector.project(tmp, &tmpV); // feasibilize the start
        wU = tmp;
        wV = tmpV;
    }

    ColoArrays zV = wV, yV = wV, xV = wV;
    PathArrays xU = wU;
    ProxParams prm;
    prm.newton_tol = 1e-13;

    GeodesicResult res;
    res.kappa = kappa;
    res.history.reserve(std::min(config.max_outer, 4096));

    const double sigma = config.sigma;
    double primal_prev = -1.0;
    int stable = 0;
    int it = 0;
    bool converged = false;
    std::vector<double> primal_window;

    for (it = 0; it < config.max_outer; ++it) {
        // z = prox_sigma(w): U part unchanged, V part pointwise prox
        prox_all(g, nt, wV, zV, sigma, prm);
        const double primal_scaled = colo_action(g, nt, zV, w);

        // y = 2z - w (U part: y_U = w_U)
        for (size_t i = 0; i < wV.oc.size(); ++i) yV.oc[i] = 2.0 * zV.oc[i] - wV.oc[i];
        for (size_t i = 0; i < wV.Fc.size(); ++i) yV.Fc[i] = 2.0 * zV.Fc[i] - wV.Fc[i];
        for (size_t i = 0; i < wV.gc.size(); ++i) yV.gc[i] = 2.0 * zV.gc[i] - wV.gc[i];
        for (size_t i = 0; i < wV.Gc.size(); ++i) yV.Gc[i] = 2.0 * zV.Gc[i] - wV.Gc[i];
        for (size_t i = 0; i < wV.qc.size(); ++i) yV.qc[i] = 2.0 * zV.qc[i] - wV.qc[i];
        xU = wU;
        xV = yV;
        projector.project(xU, &xV);

        // splitting gap |x - z|_W / (1 + |x|_W)
        PathArrays dU = xU;
        for (size_t i = 0; i < dU.on.size(); ++i) dU.on[i] -= wU.on[i];
        for (size_t i = 0; i < dU.F.size(); ++i) dU.F[i] -= wU.F[i];
        for (size_t i = 0; i < dU.gn.size(); ++i) dU.gn[i] -= wU.gn[i];
        for (size_t i = 0; i < dU.G.size(); ++i) dU.G[i] -= wU.G[i];
        for (size_t i = 0; i < dU.q.size(); ++i) dU.q[i] -= wU.q[i];
        ColoArrays dV = xV;
        for (size_t i = 0; i < dV.oc.size(); ++i) dV.oc[i] -= zV.oc[i];
        for (size_t i = 0; i < dV.Fc.size(); ++i) dV.Fc[i] -= zV.Fc[i];
        for (size_t i = 0; i < dV.gc.size(); ++i) dV.gc[i] -= zV.gc[i];
        for (size_t i = 0; i < dV.Gc.size(); ++i) dV.Gc[i] -= zV.Gc[i];
        for (size_t i = 0; i < dV.qc.size(); ++i) dV.qc[i] -= zV.qc[i];
        const double gap2 = metric_dot(dU, dU, dV, dV, w, nt, nc, nb);
        const double xnorm2 = metric_dot(xU, xU, xV, xV, w, nt, nc, nb);
        const double gap = std::sqrt(gap2) / (1.0 + std::sqrt(xnorm2));

        res.history.push_back({primal_scaled * sp.scale, gap});

        // w <- w + (x - z)
        for (size_t i = 0; i < wU.on.size(); ++i) wU.on[i] = xU.on[i];
        for (size_t i = 0; i < wU.F.size(); ++i) wU.F[i] = xU.F[i];
        for (size_t i = 0; i < wU.gn.size(); ++i) wU.gn[i] = xU.gn[i];
        for (size_t i = 0; i < wU.G.size(); ++i) wU.G[i] = xU.G[i];
        for (size_t i = 0; i < wU.q.size(); ++i) wU.q[i] = xU.q[i];
        for (size_t i = 0; i < wV.oc.size(); ++i) wV.oc[i] += xV.oc[i] - zV.oc[i];
        for (size_t i = 0; i < wV.Fc.size(); ++i) wV.Fc[i] += xV.Fc[i] - zV.Fc[i];
        for (size_t i = 0; i < wV.gc.size(); ++i) wV.gc[i] += xV.gc[i] - zV.gc[i];
        for (size_t i = 0; i < wV.Gc.size(); ++i) wV.Gc[i] += xV.Gc[i] - zV.Gc[i];
        for (size_t i = 0; i < wV.qc.size(); ++i) wV.qc[i] += xV.qc[i] - zV.qc[i];

        // stopping: relative primal change over a 20-iteration window AND gap
        primal_window.push_back(primal_scaled);
        if (static_cast<int>(primal_window.size()) > 21) primal_window.erase(primal_window.begin());
        bool primal_stable = false;
        if (primal_window.size() >= 21) {
            const double p_old = primal_window.front();
            primal_stable = std::abs(primal_scaled - p_old) <=
                            config.stop_tol * std::max(1e-30, std::abs(primal_scaled));
        }
        (void)primal_prev;
        (void)stable;
        if (it + 1 >= config.min_outer && primal_stable && gap < config.stop_tol) {
            converged = true;
            ++it;
            break;
        }
        if (config.verbose && it % 100 == 0)
            std::printf("  it %6d  primal %.8e  gap %.3e  cg %d\n", it,
                        primal_scaled * sp.scale, gap, projector.last_cg_iters());
    }

    res.converged = converged;
    res.iterations = it;

    // Final path: last projection output, unscaled.
    SpaceTimePath path = zero_path(g, nt);
    path.omega = xU.on;
    path.F = xU.F;
    path.gamma = xU.gn;
    path.G = xU.G;
    path.f = xU.q;
    for (double& v : path.f) v /= kappa;
    for (auto* fld : {&path.omega, &path.F, &path.gamma, &path.G, &path.f})
        for (double& v : *fld) v *= sp.scale;
    res.path = std::move(path);

    const double vacuum_tol = 10.0 * config.stop_tol * sp.scale;
    const ActionValue av = eval_action(res.path, kappa, vacuum_tol);
    res.primal_value = av.finite ? av.value : res.history.back().primal;
    res.action_slices = action_slices(res.path, kappa, vacuum_tol);

    double ftv = 0.0;
    for (double v : res.path.f) ftv += std::abs(v) * g.bcell_len * dt;
    res.flux_tv = ftv;

    // Dual potentials from the projection multipliers of the final iterate.
    res.potentials.geom = g;
    res.potentials.nt = nt;
    res.potentials.phi.assign(static_cast<size_t>(nt) * nc, 0.0);
    res.potentials.psi.assign(static_cast<size_t>(nt) * nb, 0.0);
    const auto& li = projector.lambda_interior();
    const auto& lb = projector.lambda_boundary();
    for (size_t i = 0; i < li.size(); ++i) res.potentials.phi[i] = -li[i] / (sigma * w.wi);
    for (size_t i = 0; i < lb.size(); ++i) res.potentials.psi[i] = -lb[i] / (sigma * w.wb);

    const FeasibilizeResult feas = feasibilize(res.potentials, kappa);
    res.dual_certified = feas.feasible;
    res.dual_value = dual_objective(feas.potentials, rho0, rho1);
    return res;
}

std::vector<GeodesicResult> sweep_kappa(const MeasurePair& rho0, const MeasurePair& rho1,
                                        const std::vector<double>& kappas,
                                        const SolverConfig& config) {
    if (!std::is_sorted(kappas.begin(), kappas.end()))
        throw invalid_input("sweep_kappa: kappas must be sorted ascending");
    std::vector<GeodesicResult> out;
    out.reserve(kappas.size());
    for (double k : kappas) {
        SolverConfig cfg = config;
        cfg.kappa = k;
        // Warm start comes from the deterministic initialization; each solve is
        // independent so results are reproducible run-to-run.
        out.push_back(solve_geodesic(rho0, rho1, cfg));
    }
    return out;
}

std::vector<Frame> geodesic_frames(const GeodesicResult& result, const std::vector<double>& times) {
    const Geometry& g = result.path.geom;
    const int nt = result.path.nt, nc = g.n_cells, nb = g.n_bcells;
    std::vector<Frame> frames;
    frames.reserve(times.size());
    for (double t : times) {
        if (t < 0.0 || t > 1.0) throw invalid_input("geodesic_frames: time outside [0,1]");
        const int k = static_cast<int>(std::lround(t * nt));
        Frame fr;
        fr.time = static_cast<double>(k) / nt;
        fr.rho = zero_pair(g);
        double ref = 0.0;
        for (int c = 0; c < nc; ++c)
            ref = std::max(ref, std::abs(result.path.omega[static_cast<size_t>(k) * nc + c]));
        double worst_neg = 0.0;
        for (int c = 0; c < nc; ++c) {
            double v = result.path.omega[static_cast<size_t>(k) * nc + c];
            worst_neg = std::min(worst_neg, v);
            fr.rho.omega[c] = std::max(v, 0.0);
        }
        for (int b = 0; b < nb; ++b) {
            double v = result.path.gamma[static_cast<size_t>(k) * nb + b];
            worst_neg = std::min(worst_neg, v);
            fr.rho.gamma[b] = std::max(v, 0.0);
        }
        const MassBudget m = total_mass(fr.rho);
        const double total = m.interior_mass + m.boundary_mass;
        if (std::abs(total - 1.0) > 1e-6 || worst_neg < -1e-6 * std::max(1.0, ref))
            fr.flagged = true;
        if (total > 0.0)
            for (auto* fld : {&fr.rho.omega, &fr.rho.gamma})
                for (double& v : *fld) v /= total;
        frames.push_back(std::move(fr));
    }
    return frames;
}

} // namespace ringroad
