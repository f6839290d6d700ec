// Discrete domain description: cell/face indexing, volumes, divergence
// stencils, and the interior<->boundary coupling map.
#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ringroad {

struct invalid_input : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class GeometryKind { Interval, Strip };

// One boundary flux slot: the interior face it couples to and the sign such
// that (outward mass flux through that face) = sign * F[face] * face_area.
struct BoundaryCoupling {
    int face;
    double outward_sign;
};

// Two geometries are supported.
//
// Interval: domain [0,Lx] split into Nx cells, boundary = the two endpoint
// atoms (unit atom weight). The boundary carries no tangential faces, so the
// G field is empty.
//
// Strip: periodic [0,Lx) x [0,Ly] with Nx*Ny cells. The boundary is the
// y=0 edge, a periodic 1-D grid of Nx cells of length Lx/Nx. The y=Ly edge
// is a closed wall: zero flux and no boundary density there.
//
// Face layout (full face vector, momentum densities; flux through a face is
// value * face_area):
//   Interval: faces 0..Nx, face i sits between cell i-1 and cell i.
//   Strip:    first Nx*Ny x-faces (xf(i,j) between cells (i-1 mod Nx,j) and
//             (i,j)), then Nx*(Ny+1) y-faces (yf(i,j) between cells (i,j-1)
//             and (i,j); j=0 is the boundary face, j=Ny the wall).
//
// Immutable after construction; safe to share read-only across threads.
struct Geometry {
    GeometryKind kind = GeometryKind::Interval;
    int nx = 0;
    int ny = 1;       // 1 for Interval
    double lx = 0.0;
    double ly = 0.0;  // 0 for Interval

    double hx = 0.0;
    double hy = 0.0;          // 0 for Interval
    double cell_volume = 0.0; // hx (Interval) or hx*hy (Strip)

    int n_cells = 0;
    int n_bcells = 0;
    int n_faces = 0;   // full face vector length (boundary and wall slots included)
    int n_bfaces = 0;  // tangential boundary faces (0 on Interval)

    double bcell_len = 0.0; // boundary cell length (Strip), atom weight 1 (Interval)

    std::vector<BoundaryCoupling> bmap; // one entry per boundary cell
    std::vector<int> wall_faces;        // faces pinned to zero flux
    std::vector<int> free_faces;        // faces carrying momentum unknowns

    // ---- indexing helpers ----
    int cell(int i, int j) const { return j * nx + i; }
    int xface(int i, int j) const { return j * nx + i; }
    int yface(int i, int j) const { return nx * ny + j * nx + i; }
    int ix(int c) const { return c % nx; }
    int iy(int c) const { return c / nx; }

    bool is_strip() const { return kind == GeometryKind::Strip; }
    int dim() const { return is_strip() ? 2 : 1; }

    // Coordinates of cell centers / boundary cell centers.
    double cell_x(int c) const { return (ix(c) + 0.5) * hx; }
    double cell_y(int c) const { return is_strip() ? (iy(c) + 0.5) * hy : 0.0; }
    double bcell_x(int b) const {
        if (is_strip()) return (b + 0.5) * hx;
        return b == 0 ? 0.0 : lx;
    }

    // Interior cell coupled to boundary cell b (the cell behind the flux slot).
    int coupled_cell(int b) const {
        if (is_strip()) return cell(b, 0);
        return b == 0 ? 0 : nx - 1;
    }

    double face_area(int f) const {
        if (!is_strip()) return 1.0;
        return f < nx * ny ? hy : hx;
    }
};

Geometry build_interval(int nx, double lx);
Geometry build_strip(int nx, int ny, double lx, double ly);

// Finite-volume divergence of a full interior face field: for each cell,
// (sum of outward face fluxes) / cell volume.
std::vector<double> divergence_interior(const Geometry& g, std::span<const double> F);

// Periodic finite-volume divergence on the boundary grid. On the Interval the
// G field must be empty and the result is the zero field.
std::vector<double> divergence_boundary(const Geometry& g, std::span<const double> G);

} // namespace ringroad
