#include <cmath>

#include "doctest.h"
#include "mqi/moments.hpp"
#include "mqi/rng.hpp"

using namespace mqi;

TEST_CASE("tmsv moments: vacuum, pure, and degraded") {
    const auto vac = tmsv_moments(0.0, 1.0);
    CHECK(vac.n_s == 0.0);
    CHECK(vac.n_i == 0.0);
    CHECK(vac.c == cdouble(0.0, 0.0));

    const auto pure = tmsv_moments(1.0, 1.0);
    CHECK(pure.c.real() == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    const auto eig = symplectic_eigenvalues(pure);
    CHECK(eig.nu_minus == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(eig.nu_plus == doctest::Approx(0.5).epsilon(1e-12));

    const auto mixed = tmsv_moments(1.0, 0.9);
    CHECK(mixed.c.real() == doctest::Approx(0.9 * std::sqrt(2.0)).epsilon(1e-12));
    CHECK(is_physical(mixed));
    CHECK(symplectic_eigenvalues(mixed).nu_minus > 0.5);

    CHECK_THROWS_AS(tmsv_moments(-0.1, 1.0), std::domain_error);
    CHECK_THROWS_AS(tmsv_moments(1.0, 1.2), std::domain_error);
    CHECK_THROWS_AS(tmsv_moments(1.0, -0.2), std::domain_error);
}

TEST_CASE("classical moments saturate the classical bound") {
    const auto zero = classical_moments(0.0, 0.0);
    CHECK(zero.c == cdouble(0.0, 0.0));
    CHECK(classical_moments(1.0, 1.0).c.real() == doctest::Approx(1.0));
    const auto asym = classical_moments(0.5, 2.0);
    CHECK(asym.c.real() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(is_physical(asym));
    CHECK(satisfies_classical_bound(asym));
    CHECK(duan_delta(asym) >= 1.0);
    CHECK_THROWS_AS(classical_moments(-1.0, 1.0), std::domain_error);
}

TEST_CASE("coherent moments") {
    CHECK(coherent_moments(0.0).mean_s == cdouble(0.0, 0.0));
    CHECK(coherent_moments(0.5).mean_s.real() == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
    CHECK(coherent_moments(4.0).mean_s.real() == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(coherent_moments(1.0).n_s == 0.0);
    CHECK_THROWS_AS(coherent_moments(-1e-9), std::domain_error);
}

TEST_CASE("duan witness: closed-form values and boundaries") {
    CHECK(duan_delta(tmsv_moments(0.0)) == doctest::Approx(1.0));
    CHECK(duan_delta(tmsv_moments(1.0, 1.0)) ==
          doctest::Approx(3.0 - 2.0 * std::sqrt(2.0)).epsilon(1e-12));
    CHECK(duan_delta(classical_moments(1.0, 1.0)) == doctest::Approx(1.0).epsilon(1e-12));

    // classical states never dip below 1; pure tmsv always does for n > 0
    for (double n : {0.01, 0.1, 0.7, 3.0, 20.0}) {
        CHECK(duan_delta(classical_moments(n, n)) >= 1.0 - 1e-12);
        CHECK(duan_delta(tmsv_moments(n, 1.0)) < 1.0);
    }
}

TEST_CASE("phase rotation moves the correlation phase only") {
    SecondMoments m = tmsv_moments(1.0, 1.0);
    m.c = cdouble(0.0, 1.0);
    const auto rot = apply_phase_rotation(m, -kPi / 2.0);
    CHECK(rot.c.real() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rot.c.imag() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(rot.n_s == m.n_s);
    CHECK(rot.n_i == m.n_i);

    const auto same = apply_phase_rotation(m, 0.0);
    CHECK(same.c == m.c);

    m.c = cdouble(0.3, 0.4);
    const auto best = apply_phase_rotation(m, optimal_rotation(m).theta);
    CHECK(best.c.real() == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(std::abs(best.c.imag()) < 1e-12);
}

TEST_CASE("optimal rotation examples and grid-search oracle") {
    SecondMoments m = tmsv_moments(1.0, 1.0);
    m.c = cdouble(1.0, 0.0);
    CHECK(optimal_rotation(m).theta == doctest::Approx(0.0));
    m.c = cdouble(0.0, 1.0);
    CHECK(optimal_rotation(m).theta == doctest::Approx(-kPi / 2.0));
    m.c = cdouble(-0.2, 0.0);
    const double theta = optimal_rotation(m).theta;
    CHECK(std::abs(std::abs(theta) - kPi) < 1e-12);
    CHECK(apply_phase_rotation(m, theta).c.real() == doctest::Approx(0.2).epsilon(1e-12));

    // independent oracle: argmax over a fine grid of Re(c e^{i theta})
    m.c = cdouble(-0.37, 0.82);
    double best_theta = 0, best_val = -1e300;
    for (int i = 0; i < 20000; ++i) {
        const double th = -kPi + 2.0 * kPi * i / 20000.0;
        const double v = (m.c * std::polar(1.0, th)).real();
        if (v > best_val) {
            best_val = v;
            best_theta = th;
        }
    }
    const double opt = optimal_rotation(m).theta;
    CHECK((m.c * std::polar(1.0, opt)).real() >= best_val - 1e-6);
    CHECK(std::abs(std::remainder(opt - best_theta, 2.0 * kPi)) < 1e-3);

    m.c = cdouble(0.0, 0.0);
    const auto degenerate = optimal_rotation(m);
    CHECK(degenerate.degenerate);
    CHECK(degenerate.theta == 0.0);
}

TEST_CASE("witness is rotation invariant after optimal rotation") {
    RecordRng rng(derive_key(99, 0), 0);
    for (int trial = 0; trial < 200; ++trial) {
        const double n_s = 3.0 * rng.next_unit();
        const double n_i = 3.0 * rng.next_unit();
        // random physical correlation: scale the bound by a random fraction
        const double cap = std::sqrt(n_s * n_i + std::min(n_s, n_i));
        const double mag = cap * rng.next_unit();
        const double phase = 2.0 * kPi * rng.next_unit();
        SecondMoments m;
        m.n_s = n_s;
        m.n_i = n_i;
        m.c = std::polar(mag, phase);
        if (!is_physical(m)) continue;
        const auto rotated = rotated_to_real(m);
        CHECK(duan_delta(rotated) ==
              doctest::Approx(n_s + n_i + 1.0 - 2.0 * std::abs(m.c)).epsilon(1e-12));
        for (double th : {0.3, 1.1, 4.0}) {
            CHECK(std::abs(apply_phase_rotation(m, th).c) ==
                  doctest::Approx(std::abs(m.c)).epsilon(1e-12));
        }
    }
}

TEST_CASE("physicality check rejects over-correlated states") {
    SecondMoments bad;
    bad.n_s = 1.0;
    bad.n_i = 1.0;
    bad.c = cdouble(1.5, 0.0); // beyond sqrt(n(n+1)) = 1.414
    CHECK_FALSE(is_physical(bad));

    // asymmetric state: the naive symmetric bound would mislabel this one
    SecondMoments asym;
    asym.n_s = 0.1;
    asym.n_i = 3.0;
    asym.c = cdouble(std::sqrt(0.1 * 3.0 + 0.1) * 0.999, 0.0);
    CHECK(is_physical(asym));
    asym.c *= 1.05;
    CHECK_FALSE(is_physical(asym));
}
