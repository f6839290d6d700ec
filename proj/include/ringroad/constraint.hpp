// Discrete coupled continuity equations on a staggered space-time grid:
// residuals, the staggered<->co-located interpolation, and the Euclidean
// projection onto the affine constraint set CE(rho0, rho1).
#pragma once

#include <memory>
#include <span>
#include <vector>

#include "ringroad/measures.hpp"

namespace ringroad {

// Staggered discrete path. Densities live at time nodes k = 0..nt, momenta
// and the flux at time intervals k+1/2. The interior momentum F is stored on
// free faces only: boundary face slots are identified with the flux f
// (outward flux = f * boundary length) and wall slots are pinned to zero.
struct SpaceTimePath {
    Geometry geom;
    int nt = 0;
    std::vector<double> omega; // (nt+1) * n_cells
    std::vector<double> F;     // nt * free_faces
    std::vector<double> gamma; // (nt+1) * n_bcells
    std::vector<double> G;     // nt * n_bfaces
    std::vector<double> f;     // nt * n_bcells

    double dt() const { return 1.0 / nt; }
    int n_free() const { return static_cast<int>(geom.free_faces.size()); }
};

SpaceTimePath zero_path(const Geometry& g, int nt);

// Full face field (length n_faces) of the interior momentum at time
// interval k: free slots from F, boundary slots from f, walls zero.
std::vector<double> full_faces(const SpaceTimePath& path, int k);

// Pointwise residuals of both discrete continuity equations plus endpoint
// mismatches. All-zero iff the path lies in the discrete CE(rho0, rho1).
struct CeResidual {
    std::vector<double> interior;       // nt * n_cells
    std::vector<double> boundary;       // nt * n_bcells
    std::vector<double> endpoint_omega; // 2 * n_cells  (k=0 then k=nt)
    std::vector<double> endpoint_gamma; // 2 * n_bcells

    double max_abs() const;
};

CeResidual ce_residual(const SpaceTimePath& path, const MeasurePair& rho0,
                       const MeasurePair& rho1);

// Fields averaged onto co-located points: densities at (time interval, cell),
// momenta at cell centers (per component), the flux already lives there.
struct Colocated {
    std::vector<double> omega; // nt * n_cells
    std::vector<double> Fc;    // nt * n_cells * dim
    std::vector<double> gamma; // nt * n_bcells
    std::vector<double> Gc;    // nt * n_bcells (empty on Interval)
    std::vector<double> f;     // nt * n_bcells
};

Colocated interpolate_colocate(const SpaceTimePath& path);

// Adjoint of the co-location operator (for operator tests): maps co-located
// increments back onto staggered slots. The flux slot receives both its
// identity image and the boundary-face part of Fc; walls are dropped.
SpaceTimePath colocate_adjoint(const Geometry& g, int nt, const Colocated& co);

// Euclidean projection of the staggered variables onto the affine set
// {ce_residual = 0} with the endpoint slices pinned exactly. The normal
// equations A A^T lambda = A x - b are solved by Jacobi-preconditioned
// conjugate gradient; the returned path satisfies
// ||ce_residual|| <= cg_tol * (1 + ||b||).
SpaceTimePath project_ce(const SpaceTimePath& path, const MeasurePair& rho0,
                         const MeasurePair& rho1, double cg_tol = 1e-9, int cg_max = 0);

// ---------------------------------------------------------------------------
// Shared machinery, also used by the geodesic solver.

// Flat field bundle in solver variable layout. Density arrays carry their
// endpoint slots; `q` holds f_scale * f.
struct PathArrays {
    std::vector<double> on; // (nt+1)*nc
    std::vector<double> F;  // nt*n_free
    std::vector<double> gn; // (nt+1)*nb
    std::vector<double> G;  // nt*nbf
    std::vector<double> q;  // nt*nb
};

struct ColoArrays {
    std::vector<double> oc; // nt*nc
    std::vector<double> Fc; // nt*nc*dim
    std::vector<double> gc; // nt*nb
    std::vector<double> Gc; // nt*nbf (== nt*nb on Strip, empty on Interval)
    std::vector<double> qc; // nt*nb
};

struct ProjectorOptions {
    bool colocate = false;         // include {co-located = interpolation} rows
    bool quadrature_metric = false; // weight the metric by cell volume * dt
    double f_scale = 1.0;          // q = f_scale * f (kappa in the solver)
    double cg_tol = 1e-9;
    int cg_max = 0;                // 0: 10 * number of constraints
};

// Projection onto {A U = b} (plain) or {A U = b, V = I U} (colocate mode) in
// the diagonal metric selected by the options. Endpoint slices are pinned by
// elimination. Multipliers of the last solve are kept for dual recovery and
// CG warm starts.
class ConstraintProjector {
  public:
    ConstraintProjector(const Geometry& g, int nt, std::vector<double> omega0,
                        std::vector<double> omega1, std::vector<double> gamma0,
                        std::vector<double> gamma1, const ProjectorOptions& opt);
    ~ConstraintProjector();

    ConstraintProjector(const ConstraintProjector&) = delete;
    ConstraintProjector& operator=(const ConstraintProjector&) = delete;

    // In-place projection; yV may be null in plain mode. Endpoint slots of
    // yU are overwritten with the pinned values.
    void project(PathArrays& yU, ColoArrays* yV);

    // Affine residual A x - b of a bundle (endpoints read from the bundle).
    void residual(const PathArrays& x, std::vector<double>& r_interior,
                  std::vector<double>& r_boundary) const;

    const std::vector<double>& lambda_interior() const { return lam_i_; }
    const std::vector<double>& lambda_boundary() const { return lam_b_; }
    double last_cg_residual() const { return last_res_; }
    int last_cg_iters() const { return last_iters_; }
    int n_constraints() const;

    PathArrays make_arrays() const; // zero bundle with pinned endpoints
    ColoArrays make_colo() const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::vector<double> lam_i_, lam_b_;
    double last_res_ = 0.0;
    int last_iters_ = 0;
};

} // namespace ringroad
