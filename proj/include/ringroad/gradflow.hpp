// Finite-volume solver for the entropy gradient flows of the transport
// metric: a coupled heat system (Boltzmann entropy) and a coupled
// porous-medium system (Renyi entropy), with conservation and dissipation
// diagnostics.
#pragma once

#include <vector>

#include "ringroad/measures.hpp"

namespace ringroad {

enum class EnergyKind { Boltzmann, Renyi };

struct EnergySpec {
    EnergyKind kind = EnergyKind::Boltzmann;
    std::vector<double> V_interior; // potential per interior cell (may be empty = 0)
    std::vector<double> V_boundary; // potential per boundary cell
    double m_interior = 2.0;        // Renyi exponents, > 1 (ignored for Boltzmann)
    double m_boundary = 2.0;
};

struct FlowState {
    MeasurePair rho;
    double time = 0.0;
    double energy = 0.0;
    double mass_drift = 0.0; // relative drift of the total mass since t = 0
};

// Gibbs pair (e^{-V_interior}, e^{-V_boundary}) / Z, the stationary state of
// the Boltzmann flow.
MeasurePair gibbs_measure(const Geometry& g, const std::vector<double>& V_interior,
                          const std::vector<double>& V_boundary);

double energy_value(const MeasurePair& rho, const EnergySpec& spec);

// Flow-oriented fluxes: the state evolves by
//   d omega/dt = -div(interior flux),  d gamma/dt = -div(boundary flux) + f,
// with interior face momentum -theta * grad E'_interior (theta the upwind
// face density; log-mean for the Boltzmann diffusion so the Gibbs state is
// an exact fixed point) and transfer f = gamma (E'_interior - E'_boundary)
// / kappa^2, which is also the boundary-face flux of the interior field.
struct GradientField {
    std::vector<double> interior_flux; // full face vector (boundary slots = f-consistent)
    std::vector<double> boundary_flux; // per boundary face
    std::vector<double> transfer;      // f per boundary cell
};

GradientField gradient_field(const MeasurePair& rho, const EnergySpec& spec, double kappa);

// Squared metric speed of the flow at this state: the tangent-norm integrand
// evaluated on the emitted fluxes (face densities match the flux weights).
double gradient_norm_sq(const MeasurePair& rho, const EnergySpec& spec, double kappa);

// Largest stable explicit step (one half of the stability limit).
double cfl_bound(const MeasurePair& rho, const EnergySpec& spec, double kappa);

// One explicit conservative step of size tau. Rejects tau above the CFL
// bound (invalid_input carrying the bound) and steps producing negative
// densities (numerical_error; the caller halves tau).
FlowState step(const FlowState& state, const EnergySpec& spec, double kappa, double tau);

// Repeated stepping with adaptive halving on rejection; records states every
// `record_every` accepted steps (and the final one). Aborts when tau
// underflows below 1e-12.
std::vector<FlowState> run(const MeasurePair& rho_init, const EnergySpec& spec, double kappa,
                           double T, double tau, int record_every = 1);

} // namespace ringroad
