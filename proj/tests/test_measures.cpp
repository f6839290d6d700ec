#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <fstream>

#include "ringroad/measures.hpp"

using namespace ringroad;

TEST_CASE("total mass splits") {
    const Geometry g = build_interval(8, 1.0);
    MeasurePair rho = zero_pair(g);
    add_uniform(rho, 1.0, Side::Interior);
    auto m = total_mass(rho);
    CHECK(m.interior_mass == doctest::Approx(1.0));
    CHECK(m.boundary_mass == doctest::Approx(0.0));

    MeasurePair atom = zero_pair(g);
    atom.gamma[1] = 1.0;
    m = total_mass(atom);
    CHECK(m.interior_mass == 0.0);
    CHECK(m.boundary_mass == doctest::Approx(1.0));

    MeasurePair half = zero_pair(g);
    add_uniform(half, 0.5, Side::Interior);
    half.gamma[0] = 0.5;
    m = total_mass(half);
    CHECK(m.interior_mass == doctest::Approx(0.5));
    CHECK(m.boundary_mass == doctest::Approx(0.5));
    CHECK_NOTHROW(validate(half));
}

TEST_CASE("mollified dirac mass and moment") {
    const Geometry g = build_interval(64, 1.0);
    MeasurePair rho = zero_pair(g);
    add_mollified_dirac(rho, 0.5, 0.0, 1.0, 0.05, Side::Interior);
    auto m = total_mass(rho);
    CHECK(m.interior_mass == doctest::Approx(1.0).epsilon(1e-14));
    // discrete first moment stays within half a cell of the requested location
    double mean = 0.0;
    for (int c = 0; c < g.n_cells; ++c) mean += g.cell_x(c) * rho.omega[c] * g.cell_volume;
    CHECK(std::abs(mean - 0.5) <= 0.5 * g.hx);

    MeasurePair atom = zero_pair(g);
    add_mollified_dirac(atom, g.lx, 0.0, 0.3, 0.05, Side::Boundary);
    CHECK(atom.gamma[0] == 0.0);
    CHECK(atom.gamma[1] == doctest::Approx(0.3));

    CHECK_THROWS_AS(add_mollified_dirac(rho, 0.5, 0.0, 1.0, 0.5 * g.hx, Side::Interior),
                    invalid_input);
    CHECK_THROWS_AS(add_mollified_dirac(rho, 2.0, 0.0, 1.0, 0.05, Side::Interior), invalid_input);
}

TEST_CASE("strip mollifier with periodic wrap") {
    const Geometry g = build_strip(32, 8, 1.0, 0.5);
    MeasurePair rho = zero_pair(g);
    add_mollified_dirac(rho, 0.02, 0.25, 0.6, 0.07, Side::Interior);
    add_mollified_dirac(rho, 0.98, 0.0, 0.4, 0.07, Side::Boundary);
    auto m = total_mass(rho);
    CHECK(m.interior_mass == doctest::Approx(0.6).epsilon(1e-13));
    CHECK(m.boundary_mass == doctest::Approx(0.4).epsilon(1e-13));
    CHECK_NOTHROW(validate(rho, 1e-9));
}

TEST_CASE("save/load round-trip is exact") {
    const Geometry g = build_strip(16, 8, 1.0, 0.5);
    MeasurePair rho = zero_pair(g);
    add_mollified_dirac(rho, 0.3, 0.2, 0.7, 0.15, Side::Interior);
    add_mollified_dirac(rho, 0.6, 0.0, 0.3, 0.15, Side::Boundary);
    const std::string path = "measure_roundtrip.json";
    save(rho, path);
    const MeasurePair back = load(path);
    REQUIRE(back.omega.size() == rho.omega.size());
    for (size_t i = 0; i < rho.omega.size(); ++i) CHECK(back.omega[i] == rho.omega[i]);
    for (size_t i = 0; i < rho.gamma.size(); ++i) CHECK(back.gamma[i] == rho.gamma[i]);
    CHECK(!back.renormalized_from.has_value());
    std::remove(path.c_str());
}

TEST_CASE("load rejects invalid files") {
    const std::string path = "measure_invalid.json";
    {
        std::ofstream out(path);
        out << R"({"geometry":{"kind":"interval","nx":2,"lx":1.0},)"
            << R"("omega":[-1.0,3.0],"gamma":[0.0,0.0]})";
    }
    CHECK_THROWS_AS(load(path), invalid_input);
    {
        std::ofstream out(path);
        out << R"({"geometry":{"kind":"interval","nx":2,"lx":1.0},)"
            << R"("omega":[1.0,0.9],"gamma":[0.0,0.0]})"; // mass 0.95
    }
    CHECK_THROWS_AS(load(path), invalid_input);
    {
        std::ofstream out(path);
        out << "not json";
    }
    CHECK_THROWS_AS(load(path), invalid_input);
    std::remove(path.c_str());
}

TEST_CASE("load renormalizes tiny mass defects and records it") {
    const std::string path = "measure_renorm.json";
    {
        std::ofstream out(path);
        out << R"({"geometry":{"kind":"interval","nx":2,"lx":1.0},)"
            << R"("omega":[0.999999999,0.999999999],"gamma":[0.0,0.0]})";
    }
    const MeasurePair rho = load(path);
    REQUIRE(rho.renormalized_from.has_value());
    CHECK(*rho.renormalized_from == doctest::Approx(0.999999999));
    auto m = total_mass(rho);
    CHECK(m.interior_mass + m.boundary_mass == doctest::Approx(1.0).epsilon(1e-15));
    std::remove(path.c_str());
}
