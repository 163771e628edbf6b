#include <cmath>
#include <random>

#include "doctest.h"

#include "flightrl/airframe.hpp"
#include "flightrl/atmosphere.hpp"
#include "flightrl/autopilot.hpp"
#include "flightrl/envelope.hpp"
#include "oracles.hpp"

using namespace flightrl;
using doctest::Approx;

TEST_CASE("ISA density matches tabulated values") {
    CHECK(atmosphere::air_density(0.0) == Approx(1.2250).epsilon(1e-4));
    // published tables are in geometric altitude; the model takes height as geopotential
    CHECK(atmosphere::air_density(6000.0) == Approx(0.6601).epsilon(1e-3));
    CHECK(atmosphere::air_density(11000.0) == Approx(0.3639).epsilon(1e-4));
    for (double h = 0.0; h <= 20000.0; h += 250.0) {
        CHECK(atmosphere::air_density(h) == Approx(oracle::isa_density(h)).epsilon(1e-12));
    }
}

TEST_CASE("ISA speed of sound") {
    CHECK(atmosphere::speed_of_sound(0.0) == Approx(340.29).epsilon(2e-5));
    CHECK(atmosphere::speed_of_sound(10000.0) == Approx(299.53).epsilon(1e-3));
    CHECK(atmosphere::speed_of_sound(11000.0) == atmosphere::speed_of_sound(14000.0));
    for (double h = 0.0; h <= 20000.0; h += 500.0) {
        CHECK(atmosphere::speed_of_sound(h) == Approx(oracle::isa_sound(h)).epsilon(1e-12));
    }
}

TEST_CASE("atmosphere is continuous at the tropopause") {
    const double below = atmosphere::air_density(11000.0 - 1e-9);
    const double above = atmosphere::air_density(11000.0 + 1e-9);
    CHECK(std::abs(above - below) / below < 1e-9);
    const double sb = atmosphere::speed_of_sound(11000.0 - 1e-9);
    const double sa = atmosphere::speed_of_sound(11000.0 + 1e-9);
    CHECK(std::abs(sa - sb) / sb < 1e-9);
}

TEST_CASE("atmosphere rejects heights outside the model") {
    CHECK_THROWS_AS(atmosphere::air_density(-1.0), DomainError);
    CHECK_THROWS_AS(atmosphere::speed_of_sound(20001.0), DomainError);
}

TEST_CASE("aero coefficients") {
    const AeroCoefficientsTable t;
    auto c = aero_coefficients(0.0, 2.0, 0.0, t);
    CHECK(c.c_a == 0.3);
    CHECK(c.c_n == 0.0);
    CHECK(c.c_m == 0.0);

    c = aero_coefficients(0.1, 3.0, 0.0, t);
    CHECK(c.c_n == Approx(-1.262557).epsilon(1e-9));
    CHECK(c.c_m == Approx(-0.30751).epsilon(1e-9));

    c = aero_coefficients(0.0, 2.0, 0.1, t);
    CHECK(c.c_n == Approx(-0.19480).epsilon(1e-12));
    CHECK(c.c_m == Approx(-1.18030).epsilon(1e-12));
}

TEST_CASE("aero coefficients are odd in alpha at zero fin") {
    const AeroCoefficientsTable t;
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> a(-0.6, 0.6), m(1.5, 4.5);
    for (int i = 0; i < 1000; ++i) {
        const double al = a(rng), ma = m(rng);
        const auto p = aero_coefficients(al, ma, 0.0, t);
        const auto n = aero_coefficients(-al, ma, 0.0, t);
        CHECK(p.c_n == -n.c_n);
        CHECK(p.c_m == -n.c_m);
    }
}

TEST_CASE("state derivative identities") {
    const AirframeModel m;
    SystemState s;
    s.alpha = 0.05;
    s.q = 0.5;
    s.theta = 0.2;
    s.mach = 3.0;
    s.height = 9000.0;
    s.delta = -0.01;
    const auto r = state_derivative(s, m.physical, m.aero);
    CHECK(r.theta_dot == 0.5);
    CHECK(s.gamma() == doctest::Approx(0.15));

    // alpha = delta = gamma = 0: only gravity and q remain in alpha_dot
    SystemState z;
    z.mach = 3.0;
    z.height = 10000.0;
    z.q = 0.3;
    const double v = 3.0 * oracle::isa_sound(10000.0);
    CHECK(state_derivative(z, m.physical, m.aero).alpha_dot == Approx(9.8 / v + 0.3).epsilon(1e-12));

    z.q = 0.0;
    z.delta = 0.1;
    const double qbar = 0.5 * oracle::isa_density(10000.0) * v * v;
    const double qdot = qbar * 0.0409 * 0.2286 * oracle::c_m(0.0, 3.0, 0.1) / 247.439;
    CHECK(state_derivative(z, m.physical, m.aero).q_dot == Approx(qdot).epsilon(1e-12));
}

TEST_CASE("lateral acceleration is V (q - alpha_dot)") {
    const AirframeModel m;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        SystemState s;
        s.alpha = 0.3 * u(rng);
        s.q = u(rng);
        s.theta = 0.3 * u(rng);
        s.mach = 3.0 + u(rng);
        s.height = 10000.0 + 4000.0 * u(rng);
        s.delta = 0.2 * u(rng);
        const auto r = state_derivative(s, m.physical, m.aero);
        const double v = s.mach * atmosphere::speed_of_sound(s.height);
        CHECK(lateral_acceleration(s, m.physical, m.aero) == Approx(v * (s.q - r.alpha_dot)).epsilon(1e-12));
    }
}

TEST_CASE("actuator derivative") {
    const ActuatorParams a;
    auto r = actuator_derivative(0.2, 0.0, 0.2, a);
    CHECK(r.delta_dot == 0.0);
    CHECK(r.delta_ddot == 0.0);
    r = actuator_derivative(0.0, 0.0, 0.1, a);
    CHECK(r.delta_ddot == Approx(2250.0).epsilon(1e-12));
}

TEST_CASE("integrate_step holds theta_dot = q with forces removed") {
    AirframeModel m;
    m.aero = {0, 0, 0, 0, 0, 0, 0, 0, 0};
    m.physical.gravity = 0.0;
    SystemState s;
    s.alpha = 0.1;
    s.q = 0.4;
    s.theta = 0.1;
    s.mach = 3.0;
    s.height = 10000.0;
    for (int i = 0; i < 100; ++i) s = integrate_step(s, 0.0, 0.01, m);
    CHECK(s.theta == Approx(0.1 + 0.4 * 1.0).epsilon(1e-12));
    CHECK(s.mach == Approx(3.0).epsilon(1e-12));
    CHECK(s.q == 0.4);
}

TEST_CASE("fin converges to a held command") {
    const AirframeModel m;
    const auto t = trim(3.0, 10000.0, m.physical, m.aero);
    SystemState s;
    s.alpha = s.theta = t.alpha;
    s.mach = 3.0;
    s.height = 10000.0;
    s.delta = t.delta;
    const double command = t.delta + 0.002;
    for (int i = 0; i < 20; ++i) s = integrate_step(s, command, 0.01, m);
    CHECK(s.delta == Approx(command).epsilon(1e-6));
    CHECK(std::abs(s.delta_dot) < 1e-4);
}

TEST_CASE("integrate_step rejects non-finite results") {
    const AirframeModel m;
    SystemState s;
    s.mach = 3.0;
    s.height = 10000.0;
    CHECK_THROWS_AS(integrate_step(s, 1e300, 0.01, m), Error);
}

TEST_CASE("optional fin saturation clamps the command") {
    AirframeModel m;
    m.fin_limit = deg2rad(30.0);
    SystemState s;
    s.mach = 3.0;
    s.height = 10000.0;
    const SystemState a = integrate_step(s, 5.0, 0.01, m);
    const SystemState b = integrate_step(s, deg2rad(30.0), 0.01, m);
    CHECK(a.delta == b.delta);
    CHECK(a.alpha == b.alpha);
}
