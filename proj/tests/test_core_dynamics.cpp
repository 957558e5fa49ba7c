#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "h4bp/dynamics.hpp"
#include "h4bp/propagation.hpp"

using namespace h4bp;

namespace {

PhaseState random_planar_state(std::mt19937& rng, double posLo = 0.2, double posHi = 1.5) {
    std::uniform_real_distribution<double> rad(posLo, posHi), ang(0.0, 2.0 * M_PI),
        vel(-0.8, 0.8);
    double r = rad(rng), th = ang(rng);
    return {r * std::cos(th), r * std::sin(th), 0.0, vel(rng), vel(rng), 0.0};
}

}  // namespace

TEST_CASE("make_params closed forms") {
    auto hill = make_params(0.0);
    CHECK(hill.d == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(hill.lambda2 == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(hill.lambda1 == 0.0);

    auto sym = make_params(0.5);
    CHECK(sym.d == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(sym.lambda2 == doctest::Approx(2.25).epsilon(1e-15));
    CHECK(sym.lambda1 == doctest::Approx(0.75).epsilon(1e-15));

    // reference values from an independent high-precision evaluation
    auto sj = make_params(0.00095);
    CHECK(sj.d == doctest::Approx(0.99857533892040414).epsilon(1e-15));
    CHECK(sj.lambda2 == doctest::Approx(2.9978630083806062).epsilon(1e-15));
    CHECK(sj.lambda1 == doctest::Approx(0.0021369916193937864).epsilon(1e-12));

    CHECK_THROWS_AS(make_params(-0.1), std::domain_error);
    CHECK_THROWS_AS(make_params(0.6), std::domain_error);
}

TEST_CASE("lambda1 + lambda2 = 3 for random mu") {
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> mu(0.0, 0.5);
    for (int i = 0; i < 1000; ++i) {
        auto p = make_params(mu(rng));
        CHECK(p.lambda1 + p.lambda2 == doctest::Approx(3.0).epsilon(1e-15));
        CHECK(p.d >= 0.5);
        CHECK(p.d <= 1.0);
        CHECK(p.lambda1 >= 0.0);
        CHECK(p.lambda1 <= 1.5);
        CHECK(p.lambda2 >= 1.5);
        CHECK(p.lambda2 <= 3.0);
    }
}

TEST_CASE("effective potential values") {
    auto hill = make_params(0.0);
    CHECK(effective_potential(hill, {1, 0, 0, 0, 0, 0}) == doctest::Approx(2.5).epsilon(1e-15));

    auto any = make_params(0.31);
    CHECK(effective_potential(any, {0, 0, 1, 0, 0, 0}) == doctest::Approx(0.5).epsilon(1e-15));

    // 2 Omega(L1) = 3 lambda2^(1/3); at mu = 0 this is exactly 3^(4/3)
    auto sj = make_params(0.00095);
    double xL1 = std::pow(sj.lambda2, -1.0 / 3.0);
    double twoOmega = 2.0 * effective_potential(sj, {xL1, 0, 0, 0, 0, 0});
    CHECK(twoOmega == doctest::Approx(3.0 * std::cbrt(sj.lambda2)).epsilon(1e-14));
    CHECK(std::abs(twoOmega - 4.3263) < 1e-3);
    double hillL1 = 2.0 * effective_potential(hill, {std::pow(3.0, -1.0 / 3.0), 0, 0, 0, 0, 0});
    CHECK(hillL1 == doctest::Approx(4.3267487109222251).epsilon(1e-14));

    CHECK_THROWS_AS(effective_potential(hill, {0, 0, 0, 0, 0, 0}), CollisionError);
}

TEST_CASE("equations of motion") {
    auto sj = make_params(0.00095);
    double xL1 = std::pow(sj.lambda2, -1.0 / 3.0);
    PhaseState eq{xL1, 0, 0, 0, 0, 0};
    auto ds = eom(sj, eq);
    CHECK(std::abs(ds.vx) < 1e-14);
    CHECK(std::abs(ds.vy) < 1e-14);
    CHECK(std::abs(ds.vz) < 1e-14);

    auto hill = make_params(0.0);
    double y0 = 0.7;
    auto d2 = eom(hill, {0, y0, 0, 0, 0, 0});
    CHECK(std::abs(d2.vx) < 1e-15);
    CHECK(d2.vy == doctest::Approx(-1.0 / (y0 * y0)).epsilon(1e-14));
}

TEST_CASE("eom matches finite differences of the flow") {
    auto p = make_params(0.2);
    IntegratorConfig cfg;
    std::mt19937 rng(7);
    for (int k = 0; k < 5; ++k) {
        PhaseState s = random_planar_state(rng, 0.5, 1.2);
        double h = 1e-5;
        PhaseState fwd = propagate_to(p, cfg, s, h);
        PhaseState bwd = propagate_to(p, cfg, s, -h);
        auto fd = [&](double a, double b) { return (a - b) / (2.0 * h); };
        auto ds = eom(p, s);
        CHECK(fd(fwd.x, bwd.x) == doctest::Approx(ds.x).epsilon(1e-8));
        CHECK(fd(fwd.y, bwd.y) == doctest::Approx(ds.y).epsilon(1e-8));
        CHECK(fd(fwd.vx, bwd.vx) == doctest::Approx(ds.vx).epsilon(1e-8));
        CHECK(fd(fwd.vy, bwd.vy) == doctest::Approx(ds.vy).epsilon(1e-8));
    }
}

TEST_CASE("mu = 0 reduction to the classical Hill field") {
    auto hill = make_params(0.0);
    std::mt19937 rng(3);
    for (int k = 0; k < 50; ++k) {
        PhaseState s = random_planar_state(rng);
        auto ds = eom(hill, s);
        double r = s.r();
        double ir3 = 1.0 / (r * r * r);
        // classical Hill: xdd - 2 yd = 3x - x/r^3, ydd + 2 xd = -y/r^3
        CHECK(ds.vx == doctest::Approx(2.0 * s.vy + 3.0 * s.x - s.x * ir3).epsilon(1e-15));
        CHECK(ds.vy == doctest::Approx(-2.0 * s.vx - s.y * ir3).epsilon(1e-15));
    }
}

TEST_CASE("jacobi constant") {
    auto hill = make_params(0.0);
    double xL1 = std::pow(3.0, -1.0 / 3.0);
    CHECK(jacobi_constant(hill, {xL1, 0, 0, 0, 0, 0}) ==
          doctest::Approx(4.3267487109222251).epsilon(1e-14));

    auto p = make_params(0.00095);
    PhaseState s{0.4, 0.3, 0, 0.1, 0.2, 0};
    double c0 = jacobi_constant(p, s);
    s.vx *= 3.0;
    s.vy *= 3.0;
    CHECK(jacobi_constant(p, s) < c0);

    // H = -C/2 at the conjugate-momentum image
    CHECK(hamiltonian(p, to_hamiltonian(s)) == doctest::Approx(-0.5 * jacobi_constant(p, s))
                                                   .epsilon(1e-13));

    // Table 2 row 1: reconstructing the transverse velocity from C reproduces C
    double yL3 = std::pow(p.lambda1, -1.0 / 3.0);
    double cRow = 0.386390;
    PhaseState pos{0.0052630577, yL3, 0, 0, 0, 0};
    double vy = speed_from_jacobi(p, pos, cRow + 0.000003114 * 0.000003114);
    PhaseState full = pos;
    full.vx = -0.000003114;
    full.vy = -vy;
    CHECK(jacobi_constant(p, full) == doctest::Approx(cRow).epsilon(1e-12));
}

TEST_CASE("phase <-> hamiltonian round trip") {
    std::mt19937 rng(11);
    for (int k = 0; k < 100; ++k) {
        PhaseState s = random_planar_state(rng);
        PhaseState back = from_hamiltonian(to_hamiltonian(s));
        CHECK(back.x == doctest::Approx(s.x).epsilon(1e-15));
        CHECK(back.vx == doctest::Approx(s.vx).epsilon(1e-15));
        CHECK(back.vy == doctest::Approx(s.vy).epsilon(1e-15));
    }
}

TEST_CASE("symmetries") {
    PhaseState s{0.3, -0.2, 0, 0.5, 0.1, 0};
    auto twice = apply_symmetry(Symmetry2D::S, apply_symmetry(Symmetry2D::S, s).state).state;
    CHECK(twice.x == s.x);
    CHECK(twice.y == s.y);
    CHECK(twice.vx == s.vx);
    CHECK(twice.vy == s.vy);

    auto o = apply_symmetry(Symmetry2D::SSp, s);
    CHECK(o.state.x == -s.x);
    CHECK(o.state.y == -s.y);
    CHECK(o.state.vx == -s.vx);
    CHECK(o.state.vy == -s.vy);
    CHECK_FALSE(o.reversesTime);
    CHECK(apply_symmetry(Symmetry2D::S, s).reversesTime);
    CHECK(apply_symmetry(Symmetry2D::Sp, s).reversesTime);
}

TEST_CASE("S-mapped trajectory solves the equations backward") {
    auto p = make_params(0.00095);
    IntegratorConfig cfg;
    PhaseState s{0.35, 0.1, 0, 0.05, 1.4, 0};
    // forward trajectory of s, and backward trajectory of S s, must mirror
    double T = 1.0;
    PhaseState fwd = propagate_to(p, cfg, s, T);
    PhaseState mapped = apply_symmetry(Symmetry2D::S, s).state;
    PhaseState bwd = propagate_to(p, cfg, mapped, -T);
    PhaseState expect = apply_symmetry(Symmetry2D::S, fwd).state;
    CHECK(std::abs(bwd.x - expect.x) < 1e-10);
    CHECK(std::abs(bwd.y - expect.y) < 1e-10);
    CHECK(std::abs(bwd.vx - expect.vx) < 1e-10);
    CHECK(std::abs(bwd.vy - expect.vy) < 1e-10);

    // symmetry closure for S', via the origin symmetry of the pair
    PhaseState mapped2 = apply_symmetry(Symmetry2D::Sp, s).state;
    PhaseState bwd2 = propagate_to(p, cfg, mapped2, -T);
    PhaseState expect2 = apply_symmetry(Symmetry2D::Sp, fwd).state;
    CHECK(std::abs(bwd2.x - expect2.x) < 1e-10);
    CHECK(std::abs(bwd2.vy - expect2.vy) < 1e-10);
}

TEST_CASE("potential gradient matches finite differences") {
    auto p = make_params(0.17);
    std::mt19937 rng(19);
    std::uniform_real_distribution<double> u(-1.2, 1.2);
    int checked = 0;
    while (checked < 100) {
        PhaseState s{u(rng), u(rng), u(rng), 0, 0, 0};
        if (s.r() < 0.3) continue;
        ++checked;
        double h = 1e-6;
        auto g = potential_gradient(p, s);
        auto at = [&](double dx, double dy, double dz) {
            PhaseState q = s;
            q.x += dx;
            q.y += dy;
            q.z += dz;
            return effective_potential(p, q);
        };
        double fx = (at(h, 0, 0) - at(-h, 0, 0)) / (2 * h);
        double fy = (at(0, h, 0) - at(0, -h, 0)) / (2 * h);
        double fz = (at(0, 0, h) - at(0, 0, -h)) / (2 * h);
        double scale = std::max(1.0, std::abs(g.ox) + std::abs(g.oy) + std::abs(g.oz));
        CHECK(std::abs(fx - g.ox) / scale < 1e-7);
        CHECK(std::abs(fy - g.oy) / scale < 1e-7);
        CHECK(std::abs(fz - g.oz) / scale < 1e-7);
    }
}

TEST_CASE("hill perturbation split") {
    auto p0 = make_params(0.0);
    HamiltonianState h = to_hamiltonian({0.5, 0.3, 0, 0.1, -0.2, 0});
    CHECK(hill_perturbation_split(p0, h).residual == 0.0);

    // P vanishes on |x| = |y|
    auto any = make_params(0.02);
    HamiltonianState diag = to_hamiltonian({1, 1, 0, 0.1, 0.1, 0});
    CHECK(hill_perturbation_split(any, diag).p == 0.0);

    // residual is O(mu^2): the ratio residual/mu^2 varies by < 5% over decades
    double ratios[3];
    double mus[3] = {1e-2, 1e-3, 1e-4};
    for (int i = 0; i < 3; ++i) {
        auto p = make_params(mus[i]);
        auto split = hill_perturbation_split(p, h);
        ratios[i] = split.residual / (mus[i] * mus[i]);
    }
    CHECK(std::abs(ratios[0] / ratios[2] - 1.0) < 0.05);
    CHECK(std::abs(ratios[1] / ratios[2] - 1.0) < 0.05);
}
