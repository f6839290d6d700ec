#include "ringroad/measures.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"

namespace ringroad {

using nlohmann::json;

MassBudget total_mass(const MeasurePair& rho) {
    MassBudget m;
    for (double w : rho.omega) m.interior_mass += w;
    m.interior_mass *= rho.geom.cell_volume;
    for (double g : rho.gamma) m.boundary_mass += g;
    m.boundary_mass *= rho.geom.bcell_len;
    return m;
}

void validate(const MeasurePair& rho, double tol) {
    if (static_cast<int>(rho.omega.size()) != rho.geom.n_cells ||
        static_cast<int>(rho.gamma.size()) != rho.geom.n_bcells)
        throw invalid_input("measure: field sizes do not match geometry");
    for (double w : rho.omega)
        if (!(w >= 0.0)) throw invalid_input("measure: negative interior density");
    for (double g : rho.gamma)
        if (!(g >= 0.0)) throw invalid_input("measure: negative boundary density");
    const MassBudget m = total_mass(rho);
    if (std::abs(m.interior_mass + m.boundary_mass - 1.0) > tol)
        throw invalid_input("measure: total mass is not 1");
}

MeasurePair zero_pair(const Geometry& g) {
    MeasurePair rho;
    rho.geom = g;
    rho.omega.assign(g.n_cells, 0.0);
    rho.gamma.assign(g.n_bcells, 0.0);
    return rho;
}

namespace {

// Periodic x-offset folded into [-lx/2, lx/2).
double fold(double dx, double lx) {
    dx = std::fmod(dx, lx);
    if (dx < -0.5 * lx) dx += lx;
    if (dx >= 0.5 * lx) dx -= lx;
    return dx;
}

} // namespace

void add_mollified_dirac(MeasurePair& rho, double x, double y, double mass, double width,
                         Side side) {
    const Geometry& g = rho.geom;
    if (!(mass > 0.0) || mass > 1.0 + 1e-12)
        throw invalid_input("mollified_dirac: mass must lie in (0,1]");

    if (side == Side::Boundary && !g.is_strip()) {
        // Endpoint atom: snap to the nearest boundary point.
        if (std::abs(x) > 1e-9 * g.lx && std::abs(x - g.lx) > 1e-9 * g.lx)
            throw invalid_input("mollified_dirac: boundary atom location must be 0 or lx");
        const int b = (x < 0.5 * g.lx) ? 0 : 1;
        rho.gamma[b] += mass; // atom weight 1
        return;
    }

    const double hmin = (side == Side::Interior && g.is_strip()) ? std::min(g.hx, g.hy) : g.hx;
    if (width < 2.0 * hmin)
        throw invalid_input("mollified_dirac: width must resolve at least two cells");

    if (side == Side::Boundary) { // strip edge, periodic 1-D bump
        std::vector<double> w(g.n_bcells, 0.0);
        double sum = 0.0;
        for (int b = 0; b < g.n_bcells; ++b) {
            const double dx = fold(g.bcell_x(b) - x, g.lx);
            if (std::abs(dx) <= 4.0 * width) {
                w[b] = std::exp(-0.5 * dx * dx / (width * width));
                sum += w[b] * g.bcell_len;
            }
        }
        if (!(sum > 0.0)) throw invalid_input("mollified_dirac: empty support");
        for (int b = 0; b < g.n_bcells; ++b) rho.gamma[b] += mass * w[b] / sum;
        return;
    }

    // Interior bump.
    if (!g.is_strip()) {
        if (x < 0.0 || x > g.lx) throw invalid_input("mollified_dirac: location outside domain");
        std::vector<double> w(g.n_cells, 0.0);
        double sum = 0.0;
        for (int c = 0; c < g.n_cells; ++c) {
            const double dx = g.cell_x(c) - x;
            if (std::abs(dx) <= 4.0 * width) {
                w[c] = std::exp(-0.5 * dx * dx / (width * width));
                sum += w[c] * g.cell_volume;
            }
        }
        if (!(sum > 0.0)) throw invalid_input("mollified_dirac: empty support");
        for (int c = 0; c < g.n_cells; ++c) rho.omega[c] += mass * w[c] / sum;
        return;
    }
    if (y < 0.0 || y > g.ly) throw invalid_input("mollified_dirac: location outside domain");
    std::vector<double> w(g.n_cells, 0.0);
    double sum = 0.0;
    for (int c = 0; c < g.n_cells; ++c) {
        const double dx = fold(g.cell_x(c) - x, g.lx);
        const double dy = g.cell_y(c) - y;
        const double r2 = dx * dx + dy * dy;
        if (r2 <= 16.0 * width * width) {
            w[c] = std::exp(-0.5 * r2 / (width * width));
            sum += w[c] * g.cell_volume;
        }
    }
    if (!(sum > 0.0)) throw invalid_input("mollified_dirac: empty support");
    for (int c = 0; c < g.n_cells; ++c) rho.omega[c] += mass * w[c] / sum;
}

void add_uniform(MeasurePair& rho, double mass, Side side) {
    const Geometry& g = rho.geom;
    if (side == Side::Interior) {
        const double dens = mass / (g.n_cells * g.cell_volume);
        for (double& w : rho.omega) w += dens;
    } else {
        const double dens = mass / (g.n_bcells * g.bcell_len);
        for (double& v : rho.gamma) v += dens;
    }
}

void normalize(MeasurePair& rho) {
    const MassBudget m = total_mass(rho);
    const double total = m.interior_mass + m.boundary_mass;
    if (!(total > 0.0)) throw invalid_input("normalize: zero total mass");
    for (double& w : rho.omega) w /= total;
    for (double& g : rho.gamma) g /= total;
}

namespace {

json geometry_to_json(const Geometry& g) {
    json j;
    j["kind"] = g.is_strip() ? "strip" : "interval";
    j["nx"] = g.nx;
    j["lx"] = g.lx;
    if (g.is_strip()) {
        j["ny"] = g.ny;
        j["ly"] = g.ly;
    }
    return j;
}

Geometry geometry_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "interval") return build_interval(j.at("nx").get<int>(), j.at("lx").get<double>());
    if (kind == "strip")
        return build_strip(j.at("nx").get<int>(), j.at("ny").get<int>(), j.at("lx").get<double>(),
                           j.at("ly").get<double>());
    throw invalid_input("geometry: unknown kind '" + kind + "'");
}

} // namespace

void save(const MeasurePair& rho, const std::string& path) {
    json j;
    j["geometry"] = geometry_to_json(rho.geom);
    j["omega"] = rho.omega;
    j["gamma"] = rho.gamma;
    std::ofstream out(path);
    if (!out) throw invalid_input("save: cannot open '" + path + "'");
    out << j.dump(2) << "\n";
}

MeasurePair load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw invalid_input("load: cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw invalid_input(std::string("load: parse error: ") + e.what());
    }
    MeasurePair rho;
    try {
        rho.geom = geometry_from_json(j.at("geometry"));
        rho.omega = j.at("omega").get<std::vector<double>>();
        rho.gamma = j.at("gamma").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw invalid_input(std::string("load: malformed measure file: ") + e.what());
    }
    if (static_cast<int>(rho.omega.size()) != rho.geom.n_cells ||
        static_cast<int>(rho.gamma.size()) != rho.geom.n_bcells)
        throw invalid_input("load: field sizes do not match geometry");
    for (double w : rho.omega)
        if (!(w >= 0.0)) throw invalid_input("load: negative interior density");
    for (double g : rho.gamma)
        if (!(g >= 0.0)) throw invalid_input("load: negative boundary density");
    const MassBudget m = total_mass(rho);
    const double total = m.interior_mass + m.boundary_mass;
    if (std::abs(total - 1.0) > 1e-9)
        throw invalid_input("load: total mass deviates from 1 beyond 1e-9, refusing to normalize");
    if (total != 1.0) {
        rho.renormalized_from = total;
        for (double& w : rho.omega) w /= total;
        for (double& g : rho.gamma) g /= total;
    }
    return rho;
}

void export_csv(const MeasurePair& rho, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw invalid_input("export_csv: cannot open '" + path + "'");
    out.precision(17);
    out << "side,x,y,density\n";
    const Geometry& g = rho.geom;
    for (int c = 0; c < g.n_cells; ++c)
        out << "interior," << g.cell_x(c) << "," << g.cell_y(c) << "," << rho.omega[c] << "\n";
    for (int b = 0; b < g.n_bcells; ++b)
        out << "boundary," << g.bcell_x(b) << "," << 0.0 << "," << rho.gamma[b] << "\n";
}

} // namespace ringroad
