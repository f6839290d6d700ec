// Geodesic solver: minimizes the transport action over the discrete
// continuity-equation set by Douglas-Rachford alternation of the pointwise
// kinetic prox and the combined affine projection, recovers dual potentials
// from the projection multipliers, and reports certified values.
#pragma once

#include <vector>

#include "ringroad/action.hpp"
#include "ringroad/constraint.hpp"

namespace ringroad {

struct SolverConfig {
    int nt = 32;
    double kappa = 1.0;
    double sigma = 1.0;       // prox step (rescaled internally with the data)
    int max_outer = 20000;
    double stop_tol = 1e-6;   // relative primal change + splitting gap
    double cg_tol = 1e-9;
    int cg_max = 0;           // 0: 10 * number of constraints
    int min_outer = 50;
    bool verbose = false;
};

// Dual fields sampled per (time interval, cell) / (time interval, boundary
// cell); discrete counterparts of the Hamilton-Jacobi pair.
struct PotentialPair {
    Geometry geom;
    int nt = 0;
    std::vector<double> phi; // nt * n_cells
    std::vector<double> psi; // nt * n_bcells
};

struct IterationRecord {
    double primal;
    double gap; // splitting gap |x - z| / (1 + |x|), metric norm
};

struct GeodesicResult {
    SpaceTimePath path;
    double primal_value = 0.0;
    double dual_value = 0.0;     // certified lower bound (after feasibilization)
    bool dual_certified = false; // feasibilization reached its residual target
    std::vector<double> action_slices;
    PotentialPair potentials;
    int iterations = 0;
    bool converged = false;
    std::vector<IterationRecord> history;
    double kappa = 1.0;
    double flux_tv = 0.0; // sum |f| len dt
};

GeodesicResult solve_geodesic(const MeasurePair& rho0, const MeasurePair& rho1,
                              const SolverConfig& config);

// One solve per kappa (ascending), warm-started from the previous solution.
std::vector<GeodesicResult> sweep_kappa(const MeasurePair& rho0, const MeasurePair& rho1,
                                        const std::vector<double>& kappas,
                                        const SolverConfig& config);

// Time-node slices of the solved path (nearest node), clipped at zero below
// 1e-12 and renormalized within 1e-9; frames violating mass by more than
// 1e-6 are flagged.
struct Frame {
    double time = 0.0;
    MeasurePair rho;
    bool flagged = false;
};
std::vector<Frame> geodesic_frames(const GeodesicResult& result, const std::vector<double>& times);

} // namespace ringroad
