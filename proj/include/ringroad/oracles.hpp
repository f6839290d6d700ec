// Closed-form reference solutions and independent baseline distances used to
// validate the solver.
#pragma once

#include <optional>
#include <vector>

#include "ringroad/geometry.hpp"

namespace ringroad {

// Closed form for the interior-point-to-boundary-atom geodesic at distance R
// with toll kappa.
struct DiracGeodesic {
    double R = 0.0;
    double kappa = 1.0;
    double alpha = 2.0; // 1 + sqrt(1 + R^2/kappa^2)
    double cost = 0.0;  // (1/2)(R^2 + kappa^2 alpha) alpha/(alpha-1)
};

DiracGeodesic dirac_geodesic(double R, double kappa);
double dirac_cost(double R, double kappa);

// Time slice of the same geodesic: interior density sampled at radii `r`
// (density alpha (Rt/r)^alpha / r on [Rt, R]), boundary mass t^alpha,
// velocity r/t and flux alpha t^(alpha-1).
struct DiracFrame {
    double boundary_mass = 0.0;
    double flux = 0.0;
    std::vector<double> density;
    std::vector<double> velocity;
    bool atom_at_origin = false; // t = 0 limit case
};

DiracFrame dirac_frame(double R, double kappa, double t, const std::vector<double>& radii);

// Pure-reaction transport cost between masses at the same site.
double fisher_rao_cost(double m0, double m1, double kappa);

// One-dimensional measure: piecewise-constant cells (x0 + i h, width h, mass
// cell_mass[i]) plus point atoms. Used by the quantile oracles.
struct Measure1D {
    double x0 = 0.0;
    double h = 1.0;
    std::vector<double> cell_mass;
    std::vector<std::pair<double, double>> atoms; // (position, mass)

    double total_mass() const;
};

// Squared quadratic Wasserstein distance (1/2 integral of |Q0-Q1|^2 over
// mass) between equal-mass measures on the line, via piecewise-linear CDF
// inversion. Returns nullopt when masses mismatch beyond 1e-9 (the value is
// +infinity in that case).
std::optional<double> wasserstein_1d(const Measure1D& mu0, const Measure1D& mu1);

// Periodic variant on the circle of given circumference: minimizes the
// quantile cost over the rotation offset (convex in the offset).
std::optional<double> wasserstein_1d_periodic(const Measure1D& mu0, const Measure1D& mu1,
                                              double period);

// Bounded-Lipschitz distance between two mass vectors supported on the nodes
// of a path (or cycle) graph with the given node positions: the value of
//   max sum Phi (mu1 - mu0)  s.t.  ||Phi||_inf + Lip(Phi) <= 1,
// with the Lipschitz constraint imposed along adjacent nodes. Solved as a
// small LP by a primal-dual first-order scheme to the requested tolerance.
double bounded_lipschitz(const std::vector<double>& mass0, const std::vector<double>& mass1,
                         const std::vector<double>& pos, bool periodic = false,
                         double period = 0.0, double tol = 1e-6);

} // namespace ringroad
