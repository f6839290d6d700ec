#include "ringroad/constraint.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace ringroad {

SpaceTimePath zero_path(const Geometry& g, int nt) {
    if (nt < 1) throw invalid_input("path: nt must be >= 1");
    SpaceTimePath p;
    p.geom = g;
    p.nt = nt;
    p.omega.assign(static_cast<size_t>(nt + 1) * g.n_cells, 0.0);
    p.F.assign(static_cast<size_t>(nt) * g.free_faces.size(), 0.0);
    p.gamma.assign(static_cast<size_t>(nt + 1) * g.n_bcells, 0.0);
    p.G.assign(static_cast<size_t>(nt) * g.n_bfaces, 0.0);
    p.f.assign(static_cast<size_t>(nt) * g.n_bcells, 0.0);
    return p;
}

std::vector<double> full_faces(const SpaceTimePath& path, int k) {
    const Geometry& g = path.geom;
    std::vector<double> F(g.n_faces, 0.0);
    const int nfree = path.n_free();
    for (int m = 0; m < nfree; ++m) F[g.free_faces[m]] = path.F[static_cast<size_t>(k) * nfree + m];
    // Boundary slots: outward flux = f * len, so F[face] = sign * f * len / area.
    for (int b = 0; b < g.n_bcells; ++b) {
        const auto& bc = g.bmap[b];
        const double fb = path.f[static_cast<size_t>(k) * g.n_bcells + b];
        F[bc.face] = bc.outward_sign * fb * g.bcell_len / g.face_area(bc.face);
    }
    return F;
}

double CeResidual::max_abs() const {
    double m = 0.0;
    for (double v : interior) m = std::max(m, std::abs(v));
    for (double v : boundary) m = std::max(m, std::abs(v));
    for (double v : endpoint_omega) m = std::max(m, std::abs(v));
    for (double v : endpoint_gamma) m = std::max(m, std::abs(v));
    return m;
}

CeResidual ce_residual(const SpaceTimePath& path, const MeasurePair& rho0,
                       const MeasurePair& rho1) {
    const Geometry& g = path.geom;
    const int nt = path.nt, nc = g.n_cells, nb = g.n_bcells;
    if (static_cast<int>(rho0.omega.size()) != nc || static_cast<int>(rho1.omega.size()) != nc)
        throw invalid_input("ce_residual: endpoint shapes do not match geometry");
    const double dt = path.dt();
    CeResidual r;
    r.interior.assign(static_cast<size_t>(nt) * nc, 0.0);
    r.boundary.assign(static_cast<size_t>(nt) * nb, 0.0);
    r.endpoint_omega.assign(2 * static_cast<size_t>(nc), 0.0);
    r.endpoint_gamma.assign(2 * static_cast<size_t>(nb), 0.0);

    for (int k = 0; k < nt; ++k) {
        const std::vector<double> F = full_faces(path, k);
        const std::vector<double> div = divergence_interior(g, F);
        for (int c = 0; c < nc; ++c) {
            const double dodt =
                (path.omega[(static_cast<size_t>(k) + 1) * nc + c] -
                 path.omega[static_cast<size_t>(k) * nc + c]) / dt;
            r.interior[static_cast<size_t>(k) * nc + c] = dodt + div[c];
        }
        std::span<const double> Gk(path.G.data() + static_cast<size_t>(k) * g.n_bfaces,
                                   static_cast<size_t>(g.n_bfaces));
        const std::vector<double> divG = divergence_boundary(g, Gk);
        for (int b = 0; b < nb; ++b) {
            const double dgdt =
                (path.gamma[(static_cast<size_t>(k) + 1) * nb + b] -
                 path.gamma[static_cast<size_t>(k) * nb + b]) / dt;
            r.boundary[static_cast<size_t>(k) * nb + b] =
                dgdt + divG[b] - path.f[static_cast<size_t>(k) * nb + b];
        }
    }
    for (int c = 0; c < nc; ++c) {
        r.endpoint_omega[c] = path.omega[c] - rho0.omega[c];
        r.endpoint_omega[nc + c] = path.omega[static_cast<size_t>(nt) * nc + c] - rho1.omega[c];
    }
    for (int b = 0; b < nb; ++b) {
        r.endpoint_gamma[b] = path.gamma[b] - rho0.gamma[b];
        r.endpoint_gamma[nb + b] = path.gamma[static_cast<size_t>(nt) * nb + b] - rho1.gamma[b];
    }
    return r;
}

Colocated interpolate_colocate(const SpaceTimePath& path) {
    const Geometry& g = path.geom;
    const int nt = path.nt, nc = g.n_cells, nb = g.n_bcells, d = g.dim();
    Colocated co;
    co.omega.assign(static_cast<size_t>(nt) * nc, 0.0);
    co.Fc.assign(static_cast<size_t>(nt) * nc * d, 0.0);
    co.gamma.assign(static_cast<size_t>(nt) * nb, 0.0);
    co.Gc.assign(g.is_strip() ? static_cast<size_t>(nt) * nb : 0, 0.0);
    co.f = path.f;

    for (int k = 0; k < nt; ++k) {
        for (int c = 0; c < nc; ++c)
            co.omega[static_cast<size_t>(k) * nc + c] =
                0.5 * (path.omega[static_cast<size_t>(k) * nc + c] +
                       path.omega[(static_cast<size_t>(k) + 1) * nc + c]);
        for (int b = 0; b < nb; ++b)
            co.gamma[static_cast<size_t>(k) * nb + b] =
                0.5 * (path.gamma[static_cast<size_t>(k) * nb + b] +
                       path.gamma[(static_cast<size_t>(k) + 1) * nb + b]);
        const std::vector<double> F = full_faces(path, k);
        if (!g.is_strip()) {
            for (int c = 0; c < nc; ++c)
                co.Fc[static_cast<size_t>(k) * nc + c] = 0.5 * (F[c] + F[c + 1]);
        } else {
            for (int j = 0; j < g.ny; ++j)
                for (int i = 0; i < g.nx; ++i) {
                    const int c = g.cell(i, j), ip = (i + 1) % g.nx;
                    co.Fc[(static_cast<size_t>(k) * nc + c) * 2 + 0] =
                        0.5 * (F[g.xface(i, j)] + F[g.xface(ip, j)]);
                    co.Fc[(static_cast<size_t>(k) * nc + c) * 2 + 1] =
                        0.5 * (F[g.yface(i, j)] + F[g.yface(i, j + 1)]);
                }
            for (int b = 0; b < nb; ++b) {
                const int bp = (b + 1) % g.nx;
                co.Gc[static_cast<size_t>(k) * nb + b] =
                    0.5 * (path.G[static_cast<size_t>(k) * nb + b] +
                           path.G[static_cast<size_t>(k) * nb + bp]);
            }
        }
    }
    return co;
}

SpaceTimePath colocate_adjoint(const Geometry& g, int nt, const Colocated& co) {
    SpaceTimePath out = zero_path(g, nt);
    const int nc = g.n_cells, nb = g.n_bcells, d = g.dim();
    const int nfree = out.n_free();
    for (int k = 0; k < nt; ++k) {
        for (int c = 0; c < nc; ++c) {
            const double v = co.omega[static_cast<size_t>(k) * nc + c];
            out.omega[static_cast<size_t>(k) * nc + c] += 0.5 * v;
            out.omega[(static_cast<size_t>(k) + 1) * nc + c] += 0.5 * v;
        }
        for (int b = 0; b < nb; ++b) {
            const double v = co.gamma[static_cast<size_t>(k) * nb + b];
            out.gamma[static_cast<size_t>(k) * nb + b] += 0.5 * v;
            out.gamma[(static_cast<size_t>(k) + 1) * nb + b] += 0.5 * v;
        }
        // Scatter Fc onto faces; boundary slots land on f with the slot factor.
        std::vector<double> face_acc(g.n_faces, 0.0);
        if (!g.is_strip()) {
            for (int c = 0; c < nc; ++c) {
                const double v = co.Fc[static_cast<size_t>(k) * nc + c];
                face_acc[c] += 0.5 * v;
                face_acc[c + 1] += 0.5 * v;
            }
        } else {
            for (int j = 0; j < g.ny; ++j)
                for (int i = 0; i < g.nx; ++i) {
                    const int c = g.cell(i, j), ip = (i + 1) % g.nx;
                    const double vx = co.Fc[(static_cast<size_t>(k) * nc + c) * 2 + 0];
                    const double vy = co.Fc[(static_cast<size_t>(k) * nc + c) * 2 + 1];
                    face_acc[g.xface(i, j)] += 0.5 * vx;
                    face_acc[g.xface(ip, j)] += 0.5 * vx;
                    face_acc[g.yface(i, j)] += 0.5 * vy;
                    face_acc[g.yface(i, j + 1)] += 0.5 * vy;
                }
            for (int b = 0; b < nb; ++b) {
                const double v = co.Gc[static_cast<size_t>(k) * nb + b];
                const int bp = (b + 1) % g.nx;
                out.G[static_cast<size_t>(k) * nb + b] += 0.5 * v;
                out.G[static_cast<size_t>(k) * nb + bp] += 0.5 * v;
            }
        }
        for (int m = 0; m < nfree; ++m)
            out.F[static_cast<size_t>(k) * nfree + m] = face_acc[g.free_faces[m]];
        for (int b = 0; b < nb; ++b) {
            const auto& bc = g.bmap[b];
            out.f[static_cast<size_t>(k) * nb + b] =
                co.f[static_cast<size_t>(k) * nb + b] +
                face_acc[bc.face] * bc.outward_sign * g.bcell_len / g.face_area(bc.face);
        }
    }
    (void)d;
    return out;
}

// ---------------------------------------------------------------------------
// Tridiagonal machinery.

namespace {

struct Chain {
    std::vector<double> a, b, c; // sub-, main-, super-diagonal (a[0], c[n-1] unused)
    std::vector<double> cp;      // c'[i]
    std::vector<double> inv_den; // 1 / (b[i] - a[i] c'[i-1])

    void factor() {
        const size_t n = b.size();
        cp.assign(n, 0.0);
        inv_den.assign(n, 0.0);
        inv_den[0] = 1.0 / b[0];
        if (n > 1) cp[0] = c[0] * inv_den[0];
        for (size_t i = 1; i < n; ++i) {
            inv_den[i] = 1.0 / (b[i] - a[i] * cp[i - 1]);
            if (i + 1 < n) cp[i] = c[i] * inv_den[i];
        }
    }
    void solve(double* x) const {
        const size_t n = b.size();
        x[0] *= inv_den[0];
        for (size_t i = 1; i < n; ++i) x[i] = (x[i] - a[i] * x[i - 1]) * inv_den[i];
        for (size_t i = n - 1; i-- > 0;) x[i] -= cp[i] * x[i + 1];
    }
};

// Symmetric cyclic tridiagonal (constant corner = off), via Sherman-Morrison.
struct CyclicChain {
    Chain base;
    std::vector<double> w; // T^{-1} u
    double denom = 1.0;
    std::vector<double> v; // sparse: v0 = 1, v_last = off/gamma_
    double gamma_ = 1.0, off_ = 0.0;

    void build(size_t n, double diag, double off) {
        off_ = off;
        gamma_ = -diag;
        base.a.assign(n, off);
        base.b.assign(n, diag);
        base.c.assign(n, off);
        base.b[0] = diag - gamma_;
        base.b[n - 1] = diag - off * off / gamma_;
        base.factor();
        std::vector<double> u(n, 0.0);
        u[0] = gamma_;
        u[n - 1] = off;
        w = u;
        base.solve(w.data());
        denom = 1.0 + w[0] + (off / gamma_) * w[n - 1];
    }
    void solve(double* x) const {
        const size_t n = base.b.size();
        base.solve(x);
        const double vz = x[0] + (off_ / gamma_) * x[n - 1];
        const double factor = vz / denom;
        for (size_t i = 0; i < n; ++i) x[i] -= factor * w[i];
    }
};

} // namespace

// ---------------------------------------------------------------------------
// ConstraintProjector implementation.

struct ConstraintProjector::Impl {
    Geometry g;
    int nt, nc, nb, nbf, nfree, d;
    double dt, hx, hy;
    ProjectorOptions opt;
    std::vector<double> o0, o1, g0, g1; // pinned endpoint slices

    // metric weights per class (U and V use the same class weights)
    double w_on = 1.0, w_F = 1.0, w_gn = 1.0, w_G = 1.0, w_q = 1.0;

    // chains (colocate mode)
    Chain chain_on, chain_gn, chain_Fq_interval, chain_Fyq_strip;
    CyclicChain chain_Fx_strip, chain_G_strip;

    // Jacobi diag of the normal operator
    std::vector<double> jac_i, jac_b;

    // scratch
    PathArrays tmp_bundle, tmp_bundle2;
    std::vector<double> ri, rb, cg_r, cg_p, cg_z, cg_Ap_i, cg_Ap_b, buf;

    int free_x_index(int k, int i, int j) const { return k * nfree + j * g.nx + i; }
    int free_y_index(int k, int i, int j) const {
        return k * nfree + g.nx * g.ny + (j - 1) * g.nx + i;
    }
    int free_interval_index(int k, int face) const { return k * nfree + (face - 1); }

    Impl(const Geometry& geom, int nt_, std::vector<double> omega0, std::vector<double> omega1,
         std::vector<double> gamma0, std::vector<double> gamma1, const ProjectorOptions& o)
        : g(geom), nt(nt_), nc(geom.n_cells), nb(geom.n_bcells), nbf(geom.n_bfaces),
          nfree(static_cast<int>(geom.free_faces.size())), d(geom.dim()), dt(1.0 / nt_),
          hx(geom.hx), hy(geom.hy), opt(o), o0(std::move(omega0)), o1(std::move(omega1)),
          g0(std::move(gamma0)), g1(std::move(gamma1)) {
        if (opt.quadrature_metric) {
            w_on = w_F = g.cell_volume * dt;
            w_gn = w_G = w_q = g.bcell_len * dt;
        }
        if (opt.colocate) build_chains();
        build_jacobi();
        tmp_bundle = make_arrays_impl();
        tmp_bundle2 = make_arrays_impl();
        ri.assign(static_cast<size_t>(nt) * nc, 0.0);
        rb.assign(static_cast<size_t>(nt) * nb, 0.0);
    }

    PathArrays make_arrays_impl() const {
        PathArrays a;
        a.on.assign(static_cast<size_t>(nt + 1) * nc, 0.0);
        a.F.assign(static_cast<size_t>(nt) * nfree, 0.0);
        a.gn.assign(static_cast<size_t>(nt + 1) * nb, 0.0);
        a.G.assign(static_cast<size_t>(nt) * nbf, 0.0);
        a.q.assign(static_cast<size_t>(nt) * nb, 0.0);
        for (int c = 0; c < nc; ++c) {
            a.on[c] = o0[c];
            a.on[static_cast<size_t>(nt) * nc + c] = o1[c];
        }
        for (int b = 0; b < nb; ++b) {
            a.gn[b] = g0[b];
            a.gn[static_cast<size_t>(nt) * nb + b] = g1[b];
        }
        return a;
    }

    void build_chains() {
        const double s = opt.f_scale;
        if (nt >= 2) {
            chain_on.a.assign(nt - 1, w_on / 4.0);
            chain_on.b.assign(nt - 1, 1.5 * w_on);
            chain_on.c.assign(nt - 1, w_on / 4.0);
            chain_on.factor();
            chain_gn.a.assign(nt - 1, w_gn / 4.0);
            chain_gn.b.assign(nt - 1, 1.5 * w_gn);
            chain_gn.c.assign(nt - 1, w_gn / 4.0);
            chain_gn.factor();
        }
        if (!g.is_strip()) {
            const int n = g.nx + 1; // (qL, F_1..F_{nx-1}, qR)
            chain_Fq_interval.a.assign(n, 0.0);
            chain_Fq_interval.b.assign(n, 0.0);
            chain_Fq_interval.c.assign(n, 0.0);
            auto& ch = chain_Fq_interval;
            ch.b[0] = 2.0 * w_q + w_F / (4.0 * s * s);
            ch.c[0] = -w_F / (4.0 * s);
            ch.a[1] = ch.c[0];
            for (int i = 1; i <= g.nx - 1; ++i) {
                ch.b[i] = w_F + 0.5 * w_F;
                if (i + 1 <= g.nx - 1) {
                    ch.c[i] = w_F / 4.0;
                    ch.a[i + 1] = w_F / 4.0;
                }
            }
            ch.c[g.nx - 1] = w_F / (4.0 * s);
            ch.a[g.nx] = ch.c[g.nx - 1];
            ch.b[g.nx] = 2.0 * w_q + w_F / (4.0 * s * s);
            ch.factor();
        } else {
            chain_Fx_strip.build(g.nx, 1.5 * w_F, w_F / 4.0);
            chain_G_strip.build(g.nx, 1.5 * w_G, w_G / 4.0);
            const int n = g.ny; // (q_i, Fy_1..Fy_{ny-1})
            auto& ch = chain_Fyq_strip;
            ch.a.assign(n, 0.0);
            ch.b.assign(n, 0.0);
            ch.c.assign(n, 0.0);
            ch.b[0] = 2.0 * w_q + w_F / (4.0 * s * s);
            ch.c[0] = -w_F / (4.0 * s);
            ch.a[1] = ch.c[0];
            for (int j = 1; j <= g.ny - 1; ++j) {
                ch.b[j] = 1.5 * w_F;
                if (j + 1 <= g.ny - 1) {
                    ch.c[j] = w_F / 4.0;
                    ch.a[j + 1] = w_F / 4.0;
                }
            }
            ch.factor();
        }
    }

    double kdiag_on() const { return opt.colocate ? 1.5 * w_on : w_on; }
    double kdiag_gn() const { return opt.colocate ? 1.5 * w_gn : w_gn; }
    double kdiag_F() const { return opt.colocate ? 1.5 * w_F : w_F; }
    double kdiag_G() const { return opt.colocate ? 1.5 * w_G : w_G; }
    double kdiag_q() const {
        const double s = opt.f_scale;
        return opt.colocate ? 2.0 * w_q + w_F / (4.0 * s * s) : w_q;
    }

    void build_jacobi() {
        jac_i.assign(static_cast<size_t>(nt) * nc, 0.0);
        jac_b.assign(static_cast<size_t>(nt) * nb, 0.0);
        const double s = opt.f_scale;
        const double idt2 = 1.0 / (dt * dt);
        for (int k = 0; k < nt; ++k) {
            for (int c = 0; c < nc; ++c) {
                double v = 0.0;
                if (k >= 1) v += idt2 / kdiag_on();
                if (k + 1 <= nt - 1) v += idt2 / kdiag_on();
                if (!g.is_strip()) {
                    if (c >= 1) v += 1.0 / (hx * hx) / kdiag_F();
                    if (c + 1 <= g.nx - 1) v += 1.0 / (hx * hx) / kdiag_F();
                } else {
                    v += 2.0 / (hx * hx) / kdiag_F();
                    const int j = g.iy(c);
                    if (j >= 1) v += 1.0 / (hy * hy) / kdiag_F();
                    if (j + 1 <= g.ny - 1) v += 1.0 / (hy * hy) / kdiag_F();
                }
                jac_i[static_cast<size_t>(k) * nc + c] = v;
            }
            for (int b = 0; b < nb; ++b) {
                double v = 0.0;
                if (k >= 1) v += idt2 / kdiag_gn();
                if (k + 1 <= nt - 1) v += idt2 / kdiag_gn();
                if (g.is_strip()) v += 2.0 / (hx * hx) / kdiag_G();
                v += 1.0 / (s * s) / kdiag_q();
                jac_b[static_cast<size_t>(k) * nb + b] = v;
            }
        }
        // q also appears in the interior row of its coupled cell
        for (int k = 0; k < nt; ++k)
            for (int b = 0; b < nb; ++b) {
                const int c = g.coupled_cell(b);
                const double coef = g.bcell_len / (s * g.cell_volume);
                jac_i[static_cast<size_t>(k) * nc + c] += coef * coef / kdiag_q();
            }
    }

    // Affine residual; endpoint slots are read from the bundle itself.
    void residual(const PathArrays& x, std::vector<double>& out_i,
                  std::vector<double>& out_b) const {
        const double s = opt.f_scale;
        out_i.resize(static_cast<size_t>(nt) * nc);
        out_b.resize(static_cast<size_t>(nt) * nb);
        for (int k = 0; k < nt; ++k) {
            const double* on0 = x.on.data() + static_cast<size_t>(k) * nc;
            const double* on1 = x.on.data() + static_cast<size_t>(k + 1) * nc;
            const double* Fk = x.F.data() + static_cast<size_t>(k) * nfree;
            const double* qk = x.q.data() + static_cast<size_t>(k) * nb;
            double* out = out_i.data() + static_cast<size_t>(k) * nc;
            if (!g.is_strip()) {
                for (int c = 0; c < nc; ++c) {
                    const double Fl = (c == 0) ? -qk[0] / s : Fk[c - 1];
                    const double Fr = (c == g.nx - 1) ? qk[1] / s : Fk[c];
                    out[c] = (on1[c] - on0[c]) / dt + (Fr - Fl) / hx;
                }
            } else {
                for (int j = 0; j < g.ny; ++j)
                    for (int i = 0; i < g.nx; ++i) {
                        const int c = g.cell(i, j);
                        const int ip = (i + 1) % g.nx;
                        const double Fxl = Fk[j * g.nx + i];
                        const double Fxr = Fk[j * g.nx + ip];
                        const double Fyd = (j == 0) ? -qk[i] / s
                                                    : Fk[g.nx * g.ny + (j - 1) * g.nx + i];
                        const double Fyu = (j == g.ny - 1) ? 0.0
                                                           : Fk[g.nx * g.ny + j * g.nx + i];
                        out[c] = (on1[c] - on0[c]) / dt + (Fxr - Fxl) / hx + (Fyu - Fyd) / hy;
                    }
            }
            const double* gn0 = x.gn.data() + static_cast<size_t>(k) * nb;
            const double* gn1 = x.gn.data() + static_cast<size_t>(k + 1) * nb;
            const double* Gk = x.G.data() + static_cast<size_t>(k) * nbf;
            double* outb = out_b.data() + static_cast<size_t>(k) * nb;
            for (int b = 0; b < nb; ++b) {
                double divG = 0.0;
                if (g.is_strip()) divG = (Gk[(b + 1) % g.nx] - Gk[b]) / hx;
                outb[b] = (gn1[b] - gn0[b]) / dt + divG - qk[b] / s;
            }
        }
    }

    // Adjoint scatter: bundle += A^T (li, lb); endpoint slots untouched (zero).
    void apply_At(const std::vector<double>& li, const std::vector<double>& lb,
                  PathArrays& out) const {
        const double s = opt.f_scale;
        std::fill(out.on.begin(), out.on.end(), 0.0);
        std::fill(out.F.begin(), out.F.end(), 0.0);
        std::fill(out.gn.begin(), out.gn.end(), 0.0);
        std::fill(out.G.begin(), out.G.end(), 0.0);
        std::fill(out.q.begin(), out.q.end(), 0.0);
        for (int k = 1; k <= nt - 1; ++k)
            for (int c = 0; c < nc; ++c)
                out.on[static_cast<size_t>(k) * nc + c] =
                    (li[static_cast<size_t>(k - 1) * nc + c] -
                     li[static_cast<size_t>(k) * nc + c]) / dt;
        for (int k = 1; k <= nt - 1; ++k)
            for (int b = 0; b < nb; ++b)
                out.gn[static_cast<size_t>(k) * nb + b] =
                    (lb[static_cast<size_t>(k - 1) * nb + b] -
                     lb[static_cast<size_t>(k) * nb + b]) / dt;
        for (int k = 0; k < nt; ++k) {
            const double* lik = li.data() + static_cast<size_t>(k) * nc;
            const double* lbk = lb.data() + static_cast<size_t>(k) * nb;
            double* Fk = out.F.data() + static_cast<size_t>(k) * nfree;
            double* qk = out.q.data() + static_cast<size_t>(k) * nb;
            if (!g.is_strip()) {
                for (int face = 1; face <= g.nx - 1; ++face)
                    Fk[face - 1] = (lik[face - 1] - lik[face]) / hx;
                qk[0] = lik[0] / (s * hx) - lbk[0] / s;
                qk[1] = lik[g.nx - 1] / (s * hx) - lbk[1] / s;
            } else {
                for (int j = 0; j < g.ny; ++j)
                    for (int i = 0; i < g.nx; ++i) {
                        const int im = (i - 1 + g.nx) % g.nx;
                        Fk[j * g.nx + i] = (lik[g.cell(im, j)] - lik[g.cell(i, j)]) / hx;
                    }
                for (int j = 1; j <= g.ny - 1; ++j)
                    for (int i = 0; i < g.nx; ++i)
                        Fk[g.nx * g.ny + (j - 1) * g.nx + i] =
                            (lik[g.cell(i, j - 1)] - lik[g.cell(i, j)]) / hy;
                double* Gk = out.G.data() + static_cast<size_t>(k) * nbf;
                for (int i = 0; i < g.nx; ++i) {
                    const int im = (i - 1 + g.nx) % g.nx;
                    Gk[i] = (lbk[im] - lbk[i]) / hx;
                }
                for (int b = 0; b < nb; ++b)
                    qk[b] = lik[g.coupled_cell(b)] * g.bcell_len / (s * g.cell_volume) -
                            lbk[b] / s;
            }
        }
    }

    // Solve K x = rhs on free slots. Endpoint slots of rhs/x carry the fixed
    // values to subtract when with_fixed_coupling is set; on exit x's
    // endpoint slots are preserved from `endpoints_from`.
    void ksolve(PathArrays& x, bool with_fixed_coupling) {
        if (!opt.colocate) {
            const double won = w_on, wgn = w_gn, wF = w_F, wG = w_G, wq = w_q;
            for (int k = 1; k <= nt - 1; ++k)
                for (int c = 0; c < nc; ++c) x.on[static_cast<size_t>(k) * nc + c] /= won;
            for (int k = 1; k <= nt - 1; ++k)
                for (int b = 0; b < nb; ++b) x.gn[static_cast<size_t>(k) * nb + b] /= wgn;
            for (double& v : x.F) v /= wF;
            for (double& v : x.G) v /= wG;
            for (double& v : x.q) v /= wq;
            return;
        }
        buf.resize(static_cast<size_t>(std::max({nt + 1, g.nx + 1, g.ny + 1, nc})));
        // omega time chains
        if (nt >= 2) {
            for (int c = 0; c < nc; ++c) {
                for (int k = 1; k <= nt - 1; ++k) buf[k - 1] = x.on[static_cast<size_t>(k) * nc + c];
                if (with_fixed_coupling) {
                    buf[0] -= (w_on / 4.0) * o0[c];
                    buf[nt - 2] -= (w_on / 4.0) * o1[c];
                }
                chain_on.solve(buf.data());
                for (int k = 1; k <= nt - 1; ++k) x.on[static_cast<size_t>(k) * nc + c] = buf[k - 1];
            }
            for (int b = 0; b < nb; ++b) {
                for (int k = 1; k <= nt - 1; ++k) buf[k - 1] = x.gn[static_cast<size_t>(k) * nb + b];
                if (with_fixed_coupling) {
                    buf[0] -= (w_gn / 4.0) * g0[b];
                    buf[nt - 2] -= (w_gn / 4.0) * g1[b];
                }
                chain_gn.solve(buf.data());
                for (int k = 1; k <= nt - 1; ++k) x.gn[static_cast<size_t>(k) * nb + b] = buf[k - 1];
            }
        } else {
            // nt == 1: no interior nodes
        }
        if (!g.is_strip()) {
            for (int k = 0; k < nt; ++k) {
                double* Fk = x.F.data() + static_cast<size_t>(k) * nfree;
                double* qk = x.q.data() + static_cast<size_t>(k) * nb;
                buf[0] = qk[0];
                for (int m = 0; m < nfree; ++m) buf[m + 1] = Fk[m];
                buf[g.nx] = qk[1];
                chain_Fq_interval.solve(buf.data());
                qk[0] = buf[0];
                for (int m = 0; m < nfree; ++m) Fk[m] = buf[m + 1];
                qk[1] = buf[g.nx];
            }
        } else {
            for (int k = 0; k < nt; ++k) {
                double* Fk = x.F.data() + static_cast<size_t>(k) * nfree;
                double* qk = x.q.data() + static_cast<size_t>(k) * nb;
                double* Gk = x.G.data() + static_cast<size_t>(k) * nbf;
                for (int j = 0; j < g.ny; ++j) {
                    chain_Fx_strip.solve(Fk + static_cast<size_t>(j) * g.nx);
                }
                for (int i = 0; i < g.nx; ++i) {
                    buf[0] = qk[i];
                    for (int j = 1; j <= g.ny - 1; ++j)
                        buf[j] = Fk[g.nx * g.ny + (j - 1) * g.nx + i];
                    chain_Fyq_strip.solve(buf.data());
                    qk[i] = buf[0];
                    for (int j = 1; j <= g.ny - 1; ++j)
                        Fk[g.nx * g.ny + (j - 1) * g.nx + i] = buf[j];
                }
                chain_G_strip.solve(Gk);
            }
        }
    }

    // c = W_U * yU + I^T (W_V * yV), assembled into `out` (free slots; the
    // endpoint slots keep the pinned values).
    void assemble_c(const PathArrays& yU, const ColoArrays& yV, PathArrays& out) const {
        out = yU;
        for (int k = 1; k <= nt - 1; ++k)
            for (int c = 0; c < nc; ++c) out.on[static_cast<size_t>(k) * nc + c] *= w_on;
        for (int k = 1; k <= nt - 1; ++k)
            for (int b = 0; b < nb; ++b) out.gn[static_cast<size_t>(k) * nb + b] *= w_gn;
        for (double& v : out.F) v *= w_F;
        for (double& v : out.G) v *= w_G;
        for (double& v : out.q) v *= w_q;

        const double s = opt.f_scale;
        for (int k = 0; k < nt; ++k) {
            const double* oc = yV.oc.data() + static_cast<size_t>(k) * nc;
            const double* gc = yV.gc.data() + static_cast<size_t>(k) * nb;
            const double* qc = yV.qc.data() + static_cast<size_t>(k) * nb;
            const double* Fc = yV.Fc.data() + static_cast<size_t>(k) * nc * d;
            for (int c = 0; c < nc; ++c) {
                const double v = 0.5 * w_on * oc[c];
                if (k >= 1) out.on[static_cast<size_t>(k) * nc + c] += v;
                if (k + 1 <= nt - 1) out.on[(static_cast<size_t>(k) + 1) * nc + c] += v;
            }
            for (int b = 0; b < nb; ++b) {
                const double v = 0.5 * w_gn * gc[b];
                if (k >= 1) out.gn[static_cast<size_t>(k) * nb + b] += v;
                if (k + 1 <= nt - 1) out.gn[(static_cast<size_t>(k) + 1) * nb + b] += v;
            }
            double* Fk = out.F.data() + static_cast<size_t>(k) * nfree;
            double* qk = out.q.data() + static_cast<size_t>(k) * nb;
            for (int b = 0; b < nb; ++b) qk[b] += w_q * qc[b];
            if (!g.is_strip()) {
                for (int c = 0; c < nc; ++c) {
                    const double v = 0.5 * w_F * Fc[c];
                    if (c >= 1) Fk[c - 1] += v; // left face of cell c is face index c
                    if (c + 1 <= g.nx - 1) Fk[c] += v;
                }
                qk[0] += 0.5 * w_F * Fc[0] * (-1.0 / s);
                qk[1] += 0.5 * w_F * Fc[nc - 1] * (+1.0 / s);
            } else {
                double* Gk = out.G.data() + static_cast<size_t>(k) * nbf;
                const double* Gc = yV.Gc.data() + static_cast<size_t>(k) * nb;
                for (int j = 0; j < g.ny; ++j)
                    for (int i = 0; i < g.nx; ++i) {
                        const int c = g.cell(i, j);
                        const double vx = 0.5 * w_F * Fc[static_cast<size_t>(c) * 2 + 0];
                        const double vy = 0.5 * w_F * Fc[static_cast<size_t>(c) * 2 + 1];
                        const int ip = (i + 1) % g.nx;
                        Fk[j * g.nx + i] += vx;
                        Fk[j * g.nx + ip] += vx;
                        if (j >= 1) Fk[g.nx * g.ny + (j - 1) * g.nx + i] += vy;
                        else qk[i] += vy * (-1.0 / s);
                        if (j + 1 <= g.ny - 1) Fk[g.nx * g.ny + j * g.nx + i] += vy;
                        // wall face dropped
                    }
                for (int b = 0; b < nb; ++b) {
                    const double v = 0.5 * w_G * Gc[b];
                    const int bp = (b + 1) % g.nx;
                    Gk[b] += v;
                    Gk[bp] += v;
                }
            }
        }
    }

    void colocate(const PathArrays& x, ColoArrays& co) const {
        co.oc.resize(static_cast<size_t>(nt) * nc);
        co.gc.resize(static_cast<size_t>(nt) * nb);
        co.qc = x.q;
        co.Fc.resize(static_cast<size_t>(nt) * nc * d);
        co.Gc.resize(g.is_strip() ? static_cast<size_t>(nt) * nb : 0);
        const double s = opt.f_scale;
        for (int k = 0; k < nt; ++k) {
            for (int c = 0; c < nc; ++c)
                co.oc[static_cast<size_t>(k) * nc + c] =
                    0.5 * (x.on[static_cast<size_t>(k) * nc + c] +
                           x.on[(static_cast<size_t>(k) + 1) * nc + c]);
            for (int b = 0; b < nb; ++b)
                co.gc[static_cast<size_t>(k) * nb + b] =
                    0.5 * (x.gn[static_cast<size_t>(k) * nb + b] +
                           x.gn[(static_cast<size_t>(k) + 1) * nb + b]);
            const double* Fk = x.F.data() + static_cast<size_t>(k) * nfree;
            const double* qk = x.q.data() + static_cast<size_t>(k) * nb;
            if (!g.is_strip()) {
                for (int c = 0; c < nc; ++c) {
                    const double Fl = (c == 0) ? -qk[0] / s : Fk[c - 1];
                    const double Fr = (c == g.nx - 1) ? qk[1] / s : Fk[c];
                    co.Fc[static_cast<size_t>(k) * nc + c] = 0.5 * (Fl + Fr);
                }
            } else {
                for (int j = 0; j < g.ny; ++j)
                    for (int i = 0; i < g.nx; ++i) {
                        const int c = g.cell(i, j);
                        const int ip = (i + 1) % g.nx;
                        const double Fyd = (j == 0) ? -qk[i] / s
                                                    : Fk[g.nx * g.ny + (j - 1) * g.nx + i];
                        const double Fyu = (j == g.ny - 1) ? 0.0
                                                           : Fk[g.nx * g.ny + j * g.nx + i];
                        co.Fc[(static_cast<size_t>(k) * nc + c) * 2 + 0] =
                            0.5 * (Fk[j * g.nx + i] + Fk[j * g.nx + ip]);
                        co.Fc[(static_cast<size_t>(k) * nc + c) * 2 + 1] = 0.5 * (Fyd + Fyu);
                    }
                const double* Gk = x.G.data() + static_cast<size_t>(k) * nbf;
                for (int b = 0; b < nb; ++b)
                    co.Gc[static_cast<size_t>(k) * nb + b] = 0.5 * (Gk[b] + Gk[(b + 1) % g.nx]);
            }
        }
    }
};

ConstraintProjector::ConstraintProjector(const Geometry& g, int nt, std::vector<double> omega0,
                                         std::vector<double> omega1, std::vector<double> gamma0,
                                         std::vector<double> gamma1, const ProjectorOptions& opt)
    : impl_(std::make_unique<Impl>(g, nt, std::move(omega0), std::move(omega1), std::move(gamma0),
                                   std::move(gamma1), opt)) {
    lam_i_.assign(static_cast<size_t>(nt) * g.n_cells, 0.0);
    lam_b_.assign(static_cast<size_t>(nt) * g.n_bcells, 0.0);
}

ConstraintProjector::~ConstraintProjector() = default;

int ConstraintProjector::n_constraints() const {
    return impl_->nt * (impl_->nc + impl_->nb);
}

PathArrays ConstraintProjector::make_arrays() const { return impl_->make_arrays_impl(); }

ColoArrays ConstraintProjector::make_colo() const {
    ColoArrays co;
    impl_->colocate(impl_->tmp_bundle, co);
    for (auto* v : {&co.oc, &co.Fc, &co.gc, &co.Gc, &co.qc}) std::fill(v->begin(), v->end(), 0.0);
    return co;
}

void ConstraintProjector::residual(const PathArrays& x, std::vector<double>& r_interior,
                                   std::vector<double>& r_boundary) const {
    impl_->residual(x, r_interior, r_boundary);
}

void ConstraintProjector::project(PathArrays& yU, ColoArrays* yV) {
    Impl& im = *impl_;
    const int nI = im.nt * im.nc, nB = im.nt * im.nb;

    // Pin endpoints.
    for (int c = 0; c < im.nc; ++c) {
        yU.on[c] = im.o0[c];
        yU.on[static_cast<size_t>(im.nt) * im.nc + c] = im.o1[c];
    }
    for (int b = 0; b < im.nb; ++b) {
        yU.gn[b] = im.g0[b];
        yU.gn[static_cast<size_t>(im.nt) * im.nb + b] = im.g1[b];
    }

    PathArrays& u0 = im.tmp_bundle;
    if (im.opt.colocate) {
        if (yV == nullptr) throw invalid_input("projector: colocate mode needs co-located fields");
        im.assemble_c(yU, *yV, u0);
        im.ksolve(u0, /*with_fixed_coupling=*/true);
        for (int c = 0; c < im.nc; ++c) {
            u0.on[c] = im.o0[c];
            u0.on[static_cast<size_t>(im.nt) * im.nc + c] = im.o1[c];
        }
        for (int b = 0; b < im.nb; ++b) {
            u0.gn[b] = im.g0[b];
            u0.gn[static_cast<size_t>(im.nt) * im.nb + b] = im.g1[b];
        }
    } else {
        u0 = yU;
    }

    // r0 = A u0 - b
    im.residual(u0, im.ri, im.rb);

    auto& r = im.cg_r;
    auto& p = im.cg_p;
    auto& z = im.cg_z;
    r.resize(nI + nB);
    p.resize(nI + nB);
    z.resize(nI + nB);
    im.cg_Ap_i.resize(nI);
    im.cg_Ap_b.resize(nB);

    // Normal operator apply: out = A K^{-1} A^T lam
    auto apply_M = [&](const std::vector<double>& li, const std::vector<double>& lb,
                       std::vector<double>& out_i, std::vector<double>& out_b) {
        im.apply_At(li, lb, im.tmp_bundle2);
        im.ksolve(im.tmp_bundle2, /*with_fixed_coupling=*/false);
        im.residual(im.tmp_bundle2, out_i, out_b);
    };

    // Warm start: rhs_cg = -r0 - M lam
    std::vector<double> li(lam_i_), lb(lam_b_);
    std::vector<double> Mi(nI), Mb(nB);
    apply_M(li, lb, Mi, Mb);
    double b_norm2 = 0.0;
    for (int i = 0; i < nI; ++i) {
        r[i] = -im.ri[i] - Mi[i];
        b_norm2 += im.ri[i] * im.ri[i];
    }
    for (int i = 0; i < nB; ++i) {
        r[nI + i] = -im.rb[i] - Mb[i];
        b_norm2 += im.rb[i] * im.rb[i];
    }
    const double tol = im.opt.cg_tol * (1.0 + std::sqrt(b_norm2));
    const int max_iter = im.opt.cg_max > 0 ? im.opt.cg_max : 10 * (nI + nB);

    auto precond = [&](const std::vector<double>& rr, std::vector<double>& zz) {
        for (int i = 0; i < nI; ++i) {
            const double dj = im.jac_i[i];
            zz[i] = dj > 0.0 ? rr[i] / dj : rr[i];
        }
        for (int i = 0; i < nB; ++i) {
            const double dj = im.jac_b[i];
            zz[nI + i] = dj > 0.0 ? rr[nI + i] / dj : rr[nI + i];
        }
    };

    precond(r, z);
    p = z;
    double rz = 0.0, rn2 = 0.0;
    for (int i = 0; i < nI + nB; ++i) {
        rz += r[i] * z[i];
        rn2 += r[i] * r[i];
    }
    int it = 0;
    std::vector<double> pi(nI), pb(nB);
    while (std::sqrt(rn2) > tol && it < max_iter) {
        for (int i = 0; i < nI; ++i) pi[i] = p[i];
        for (int i = 0; i < nB; ++i) pb[i] = p[nI + i];
        apply_M(pi, pb, Mi, Mb);
        double pAp = 0.0;
        for (int i = 0; i < nI; ++i) pAp += p[i] * Mi[i];
        for (int i = 0; i < nB; ++i) pAp += p[nI + i] * Mb[i];
        if (!(pAp > 0.0)) break; // operator is PSD; null component reached
        const double alpha = rz / pAp;
        for (int i = 0; i < nI; ++i) {
            li[i] += alpha * p[i];
            r[i] -= alpha * Mi[i];
        }
        for (int i = 0; i < nB; ++i) {
            lb[i] += alpha * p[nI + i];
            r[nI + i] -= alpha * Mb[i];
        }
        precond(r, z);
        double rz_new = 0.0;
        rn2 = 0.0;
        for (int i = 0; i < nI + nB; ++i) {
            rz_new += r[i] * z[i];
            rn2 += r[i] * r[i];
        }
        const double beta = rz_new / rz;
        rz = rz_new;
        for (int i = 0; i < nI + nB; ++i) p[i] = z[i] + beta * p[i];
        ++it;
    }
    last_iters_ = it;
    last_res_ = std::sqrt(rn2);
    if (last_res_ > tol && it >= max_iter)
        throw numerical_error("projection CG did not converge; achieved residual " +
                              std::to_string(last_res_));
    lam_i_ = li;
    lam_b_ = lb;

    // x = u0 + K^{-1} A^T lam
    im.apply_At(li, lb, im.tmp_bundle2);
    im.ksolve(im.tmp_bundle2, /*with_fixed_coupling=*/false);
    const PathArrays& dlt = im.tmp_bundle2;
    yU = u0;
    for (int k = 1; k <= im.nt - 1; ++k)
        for (int c = 0; c < im.nc; ++c)
            yU.on[static_cast<size_t>(k) * im.nc + c] += dlt.on[static_cast<size_t>(k) * im.nc + c];
    for (int k = 1; k <= im.nt - 1; ++k)
        for (int b = 0; b < im.nb; ++b)
            yU.gn[static_cast<size_t>(k) * im.nb + b] += dlt.gn[static_cast<size_t>(k) * im.nb + b];
    for (size_t i = 0; i < yU.F.size(); ++i) yU.F[i] += dlt.F[i];
    for (size_t i = 0; i < yU.G.size(); ++i) yU.G[i] += dlt.G[i];
    for (size_t i = 0; i < yU.q.size(); ++i) yU.q[i] += dlt.q[i];

    if (im.opt.colocate && yV) im.colocate(yU, *yV);
}

// ---------------------------------------------------------------------------

namespace {

PathArrays path_to_arrays(const SpaceTimePath& p, double f_scale) {
    PathArrays a;
    a.on = p.omega;
    a.F = p.F;
    a.gn = p.gamma;
    a.G = p.G;
    a.q = p.f;
    for (double& v : a.q) v *= f_scale;
    return a;
}

SpaceTimePath arrays_to_path(const Geometry& g, int nt, const PathArrays& a, double f_scale) {
    SpaceTimePath p = zero_path(g, nt);
    p.omega = a.on;
    p.F = a.F;
    p.gamma = a.gn;
    p.G = a.G;
    p.f = a.q;
    for (double& v : p.f) v /= f_scale;
    return p;
}

} // namespace

SpaceTimePath project_ce(const SpaceTimePath& path, const MeasurePair& rho0,
                         const MeasurePair& rho1, double cg_tol, int cg_max) {
    ProjectorOptions opt;
    opt.colocate = false;
    opt.quadrature_metric = false;
    opt.f_scale = 1.0;
    opt.cg_tol = cg_tol;
    opt.cg_max = cg_max;
    ConstraintProjector proj(path.geom, path.nt, rho0.omega, rho1.omega, rho0.gamma, rho1.gamma,
                             opt);
    PathArrays a = path_to_arrays(path, 1.0);
    proj.project(a, nullptr);
    return arrays_to_path(path.geom, path.nt, a, 1.0);
}

} // namespace ringroad
