// Dual certificates: Hamilton-Jacobi residuals of candidate potentials, the
// feasibilization that restores the subsolution property, and the dual
// objective giving a certified lower bound on the squared distance.
#pragma once

#include "ringroad/solver.hpp"

namespace ringroad {

struct HJReport {
    std::vector<double> phi_residual; // nt * n_cells: d_t phi + |grad phi|^2/2
    std::vector<double> psi_residual; // nt * n_bcells: + |psi-phi|^2/(2 kappa^2)
    double phi_positive_l1 = 0.0;     // weighted l1 of positive parts
    double psi_positive_l1 = 0.0;
    double phi_support_l1 = 0.0;      // weighted l1 of |residual| where density > threshold
    double psi_support_l1 = 0.0;
    double dual_value = 0.0;          // J^kappa of the given potentials and path endpoints
};

// Finite-difference residuals: forward in time (the last interval copies the
// preceding difference), centered in space with one-sided stencils at walls.
// `support_threshold` is relative to the maximum density of the path.
HJReport hj_residuals(const PotentialPair& potentials, const SpaceTimePath& path, double kappa,
                      double support_threshold = 1e-6);

// Subtracts from phi (and psi alongside, preserving psi - phi) the running
// time-integral of the sup over space of the positive part of the phi
// residual, then repairs psi the same way against the corrected phi,
// repeating once. `achieved` reports the remaining positive-part violation;
// the pair certifies a lower bound when achieved <= 1e-9 * scale.
struct FeasibilizeResult {
    PotentialPair potentials;
    double achieved = 0.0;
    bool feasible = false;
};
FeasibilizeResult feasibilize(const PotentialPair& potentials, double kappa);

// The four endpoint integrals of the dual objective, volume-weighted. The
// potentials are sampled on intervals; the first/last interval values stand
// in for t = 0 / t = 1.
double dual_objective(const PotentialPair& potentials, const MeasurePair& rho0,
                      const MeasurePair& rho1);

} // namespace ringroad
