#include "ringroad/geometry.hpp"

namespace ringroad {

Geometry build_interval(int nx, double lx) {
    if (nx < 2) throw invalid_input("build_interval: nx must be >= 2");
    if (!(lx > 0.0)) throw invalid_input("build_interval: lx must be positive");
    Geometry g;
    g.kind = GeometryKind::Interval;
    g.nx = nx;
    g.ny = 1;
    g.lx = lx;
    g.ly = 0.0;
    g.hx = lx / nx;
    g.hy = 0.0;
    g.cell_volume = g.hx;
    g.n_cells = nx;
    g.n_bcells = 2;
    g.n_faces = nx + 1;
    g.n_bfaces = 0;
    g.bcell_len = 1.0; // endpoint atoms, unit weight
    g.bmap = {BoundaryCoupling{0, -1.0}, BoundaryCoupling{nx, +1.0}};
    g.free_faces.reserve(nx - 1);
    for (int f = 1; f < nx; ++f) g.free_faces.push_back(f);
    return g;
}

Geometry build_strip(int nx, int ny, double lx, double ly) {
    if (nx < 3) throw invalid_input("build_strip: nx must be >= 3 (periodic direction)");
    if (ny < 2) throw invalid_input("build_strip: ny must be >= 2");
    if (!(lx > 0.0) || !(ly > 0.0)) throw invalid_input("build_strip: lengths must be positive");
    Geometry g;
    g.kind = GeometryKind::Strip;
    g.nx = nx;
    g.ny = ny;
    g.lx = lx;
    g.ly = ly;
    g.hx = lx / nx;
    g.hy = ly / ny;
    g.cell_volume = g.hx * g.hy;
    g.n_cells = nx * ny;
    g.n_bcells = nx;
    g.n_faces = nx * ny + nx * (ny + 1);
    g.n_bfaces = nx;
    g.bcell_len = g.hx;
    g.bmap.reserve(nx);
    for (int i = 0; i < nx; ++i) g.bmap.push_back(BoundaryCoupling{g.yface(i, 0), -1.0});
    g.wall_faces.reserve(nx);
    for (int i = 0; i < nx; ++i) g.wall_faces.push_back(g.yface(i, ny));
    g.free_faces.reserve(nx * ny + nx * (ny - 1));
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) g.free_faces.push_back(g.xface(i, j));
    for (int j = 1; j < ny; ++j)
        for (int i = 0; i < nx; ++i) g.free_faces.push_back(g.yface(i, j));
    return g;
}

std::vector<double> divergence_interior(const Geometry& g, std::span<const double> F) {
    if (static_cast<int>(F.size()) != g.n_faces)
        throw invalid_input("divergence_interior: face field has wrong size");
    std::vector<double> div(g.n_cells, 0.0);
    if (!g.is_strip()) {
        for (int c = 0; c < g.nx; ++c) div[c] = (F[c + 1] - F[c]) / g.hx;
        return div;
    }
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const int ip = (i + 1) % g.nx;
            const double dx = (F[g.xface(ip, j)] - F[g.xface(i, j)]) / g.hx;
            const double dy = (F[g.yface(i, j + 1)] - F[g.yface(i, j)]) / g.hy;
            div[g.cell(i, j)] = dx + dy;
        }
    }
    return div;
}

std::vector<double> divergence_boundary(const Geometry& g, std::span<const double> G) {
    if (!g.is_strip()) {
        if (!G.empty()) throw invalid_input("divergence_boundary: G must be empty on Interval");
        return std::vector<double>(g.n_bcells, 0.0);
    }
    if (static_cast<int>(G.size()) != g.n_bfaces)
        throw invalid_input("divergence_boundary: boundary face field has wrong size");
    std::vector<double> div(g.n_bcells, 0.0);
    for (int i = 0; i < g.nx; ++i) {
        const int ip = (i + 1) % g.nx;
        div[i] = (G[ip] - G[i]) / g.hx;
    }
    return div;
}

} // namespace ringroad
