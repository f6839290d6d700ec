// Data model for pairs rho = (omega, gamma) of nonnegative interior/boundary
// densities with total mass one, plus construction helpers and file I/O.
#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ringroad/geometry.hpp"

namespace ringroad {

// Densities are stored with respect to cell volume (omega) and boundary cell
// length / atom weight (gamma); every integral below is volume-weighted.
struct MeasurePair {
    Geometry geom;
    std::vector<double> omega; // per interior cell
    std::vector<double> gamma; // per boundary cell

    // Renormalization applied at load time, recorded for diagnostics.
    std::optional<double> renormalized_from;
};

struct MassBudget {
    double interior_mass = 0.0;
    double boundary_mass = 0.0;
};

enum class Side { Interior, Boundary };

// (interior, boundary) volume-weighted masses.
MassBudget total_mass(const MeasurePair& rho);

// Throws invalid_input unless entries are nonnegative and the total mass is
// 1 within tol (the pair is not modified).
void validate(const MeasurePair& rho, double tol = 1e-12);

// Zero pair on a geometry.
MeasurePair zero_pair(const Geometry& g);

// Truncated Gaussian bump of the given mass centred at `location`
// (x for Interval and boundary fields, (x,y) for Strip interior), written
// into `rho`'s side by accumulation. `width` is the Gaussian standard
// deviation and must resolve at least two cells. On the Interval the
// boundary side produces an atom at the nearest endpoint.
void add_mollified_dirac(MeasurePair& rho, double x, double y, double mass, double width,
                         Side side);

// Uniform density of the given total mass on a side.
void add_uniform(MeasurePair& rho, double mass, Side side);

// Normalize total mass to exactly one (used by builders; requires mass > 0).
void normalize(MeasurePair& rho);

// JSON file I/O. load() rejects files with negative entries; total mass must
// be 1 within 1e-9 (values inside that tolerance are renormalized and the
// original mass is recorded in `renormalized_from`).
void save(const MeasurePair& rho, const std::string& path);
MeasurePair load(const std::string& path);

// CSV export for plotting: one row per cell with coordinates.
void export_csv(const MeasurePair& rho, const std::string& path);

} // namespace ringroad
