// Generalized kinetic Lagrangians for the interior and the boundary, the
// total action of a discrete path, and their proximal operators.
#pragma once

#include <array>
#include <span>
#include <vector>

#include "ringroad/constraint.hpp"

namespace ringroad {

// Extended-real action value; +infinity is carried as a flag, never as a
// float sentinel inside arithmetic.
struct ActionValue {
    double value = 0.0;
    bool finite = true;
};

struct ProxParams {
    double sigma = 1.0;
    double newton_tol = 1e-12;
    int max_newton = 100;
};

// Perspective kinetic value |p|^2 / (2 rho) with the convention
//   +inf  iff rho < 0, or rho == 0 with p != 0,
//   0     at (0, 0).
ActionValue kinetic_value(double rho, std::span<const double> p);

struct KineticPoint {
    double rho = 0.0;
    std::array<double, 3> p{0.0, 0.0, 0.0}; // first `dim` slots used
    int dim = 1;
};

// prox of the perspective function: argmin over (rho >= 0, p) of
//   |p|^2/(2 rho) + (1/(2 sigma)) [ (rho - rho~)^2 + |p - p~|^2 ].
// The minimizer is (rho*, p~ rho*/(rho*+sigma)) where rho* is the unique
// root of (rho - rho~)(rho + sigma)^2 = sigma |p~|^2 / 2 when that root is
// positive, and (0, 0) otherwise. Newton iteration with a bisection
// fallback on a bracketing interval.
KineticPoint prox_kinetic(double rho_in, std::span<const double> p_in, const ProxParams& params);

// Boundary prox: packs the momentum as (G, kappa*f), calls prox_kinetic,
// and unpacks f = (last slot)/kappa.
struct BoundaryPoint {
    double gamma = 0.0;
    double G = 0.0; // tangential momentum (ignored on Interval)
    double f = 0.0;
};
BoundaryPoint prox_boundary(double gamma_in, double G_in, double f_in, double kappa,
                            const ProxParams& params, bool has_G = true);

// Total action of co-located fields: sum over space-time cells of
// [A_interior + A_boundary^kappa] * (cell volume * dt). `vacuum_tol` relaxes
// the extended-value rule for solver output: densities in (-vacuum_tol, 0]
// are clamped to zero and a zero-density point contributes 0 whenever its
// momentum is below vacuum_tol as well (the strict rule is vacuum_tol = 0).
ActionValue eval_action_colocated(const Geometry& g, int nt, const Colocated& co, double kappa,
                                  double vacuum_tol = 0.0);

ActionValue eval_action(const SpaceTimePath& path, double kappa, double vacuum_tol = 0.0);

// Per-time-interval action slices (same conventions; infinite slices are
// clamped into huge finite values only in the `finite=false` case).
std::vector<double> action_slices(const SpaceTimePath& path, double kappa,
                                  double vacuum_tol = 0.0);

} // namespace ringroad
