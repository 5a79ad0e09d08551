#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "billiards/ergodic.hpp"
#include "test_support.hpp"

#include <cmath>

using namespace billiards;
using namespace testsup;

TEST_CASE("birkhoff averages on the square parabolic orbit") {
    Polygon P = build_polygon(unit_square());
    ReflectionLaw f = linear_law(0.5);
    ObservableSet obs = ObservableSet::defaults(P);
    BirkhoffResult b = birkhoff_average(P, f, {0.125, 0.0}, obs, 10000, 100);
    CHECK(b.converged);
    CHECK_FALSE(b.died);
    // theta is identically zero on the orbit.
    CHECK(std::abs(b.means[2]) < 1e-14);
    CHECK(std::abs(b.means[3]) < 1e-14);
    // Side indicators sum to one at every collision (constant observable).
    double side_sum = 0.0;
    for (int i = 0; i < 4; ++i) side_sum += b.means[4 + i];
    CHECK(side_sum == doctest::Approx(1.0).epsilon(1e-13));
    // The orbit alternates bottom and top.
    CHECK(b.means[4] == doctest::Approx(0.5).epsilon(1e-3));
    CHECK(b.means[6] == doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("birkhoff split-sample self-consistency on the right triangle") {
    Polygon P = build_polygon(right_triangle());
    ReflectionLaw f = linear_law(0.5);
    ObservableSet obs = ObservableSet::defaults(P);
    SplitMix64 rng(2026);
    for (int trial = 0; trial < 3; ++trial) {
        PhasePoint x0{rng.uniform(), rng.uniform(-0.7, 0.7)};
        BirkhoffResult b = birkhoff_average(P, f, x0, obs, 1000000, 1000, 1e-3);
        if (b.died) continue;
        CHECK(b.converged); // gaps below 1e-3 at n = 1e6
        for (double g : b.half_gap) CHECK(g < 1e-3);
    }
}

TEST_CASE("orbit dying on the singular set reports non-convergence") {
    Polygon P = build_polygon(unit_square());
    ReflectionLaw f = linear_law(0.5);
    ObservableSet obs = ObservableSet::defaults(P);
    BoundaryPoint bp = P.boundary_point(0.125);
    Vec2 dir = normalized(Vec2{0.25, 0.25} - bp.position);
    double theta = std::atan2(dot(dir, bp.tangent), dot(dir, bp.inward_normal));
    BirkhoffResult b = birkhoff_average(P, f, {0.125, theta}, obs, 10000, 10);
    CHECK(b.died);
    CHECK_FALSE(b.converged);
}

TEST_CASE("lyapunov exponents on the square parabolic orbit are exact") {
    Polygon P = build_polygon(unit_square());
    ReflectionLaw f = linear_law(0.5);
    auto lp = lyapunov(P, f, {0.125, 0.0}, 1000);
    REQUIRE(lp.has_value());
    CHECK(std::abs(lp->chi_u) < 1e-14);
    CHECK(lp->chi_s == doctest::Approx(std::log(0.5)).epsilon(1e-14));
    CHECK(lp->chi_u + lp->chi_s == doctest::Approx(lp->det_avg).epsilon(1e-12));
}

TEST_CASE("generic triangle orbit has a positive unstable exponent") {
    Polygon P = build_polygon(right_triangle());
    ReflectionLaw f = linear_law(0.5);
    SplitMix64 rng(4);
    int done = 0;
    while (done < 5) {
        PhasePoint x0{rng.uniform(), rng.uniform(-0.7, 0.7)};
        auto lp = lyapunov(P, f, x0, 100000);
        if (!lp) continue;
        CHECK(lp->chi_u > 0.0);
        CHECK(lp->chi_s < 0.0);
        CHECK(lp->chi_u + lp->chi_s < 0.0);
        CHECK(lp->chi_u + lp->chi_s == doctest::Approx(lp->det_avg).epsilon(1e-10));
        ++done;
    }
}

TEST_CASE("component scan is stable under grid refinement on the triangle") {
    Polygon P = build_polygon(right_triangle());
    ReflectionLaw f = linear_law(0.5);
    ObservableSet obs = ObservableSet::defaults(P);
    SrbOptions opt;
    opt.steps = 30000;
    opt.burn_in = 500;
    opt.enrich = false;
    SrbScan coarse = find_ergodic_components(P, f, 12, 12, obs, opt);
    SrbScan fine = find_ergodic_components(P, f, 24, 24, obs, opt);
    CHECK(coarse.components.size() == fine.components.size());
    CHECK(fine.unassigned_fraction < 0.05);
    REQUIRE(!fine.components.empty());
    CHECK(fine.components[0].basin_fraction > 0.9);
    // Distinct components (if any) differ in some coordinate by more than
    // the cluster tolerance.
    for (std::size_t a = 0; a < fine.components.size(); ++a) {
        for (std::size_t b = a + 1; b < fine.components.size(); ++b) {
            double gap = 0.0;
            for (std::size_t q = 0; q < obs.size(); ++q)
                gap = std::max(gap, std::abs(fine.components[a].mean_vector[q] -
                                             fine.components[b].mean_vector[q]));
            CHECK(gap > opt.cluster_tol);
        }
    }
}

TEST_CASE("square periodic orbits: the two perpendicular parabolic families") {
    Polygon P = build_polygon(unit_square());
    ReflectionLaw f = linear_law(0.5);
    auto orbits = find_periodic_orbits(P, f, 2);
    REQUIRE(orbits.size() == 2);
    for (const auto& o : orbits) {
        CHECK(o.parabolic_family);
        CHECK(o.residual < 1e-9);
        CHECK(o.theta_multiplier == doctest::Approx(0.25).epsilon(1e-13));
        CHECK(o.s_multiplier == doctest::Approx(1.0).epsilon(1e-12));
        REQUIRE(o.points.size() == 2);
        CHECK(std::abs(o.points[0].theta) < 1e-13);
    }
    CHECK(orbits[0].itinerary == Itinerary{0, 2});
    CHECK(orbits[1].itinerary == Itinerary{1, 3});
    CHECK(orbits[0].points[0].s == doctest::Approx(0.125).epsilon(1e-6));
    CHECK(orbits[1].points[0].s == doctest::Approx(0.375).epsilon(1e-6));
}

TEST_CASE("found periodic orbits close through the full step map") {
    Polygon P = build_polygon(right_triangle());
    ReflectionLaw f = linear_law(0.5);
    auto orbits = find_periodic_orbits(P, f, 6);
    CHECK(!orbits.empty());
    for (const auto& o : orbits) {
        int p = static_cast<int>(o.itinerary.size());
        Orbit re = orbit(P, f, o.points[0], p);
        REQUIRE_FALSE(re.terminated.has_value());
        CHECK(phase_dist(re.points.back(), o.points[0]) < 1e-9);
        CHECK(o.theta_multiplier <= std::pow(f.lambda(), p) + 1e-15);
        // Multiplier identity: s_multiplier = exp(p * chi_u along the orbit).
        auto lp = lyapunov(P, f, o.points[0], p);
        REQUIRE(lp.has_value());
        CHECK(o.s_multiplier == doctest::Approx(std::exp(p * lp->chi_u)).epsilon(1e-10));
        // Contraction bound on the angle iteration.
        int bound = static_cast<int>(
            std::ceil(std::log(1e-13) / std::log(std::pow(f.lambda(), p))));
        CHECK(o.theta_iterations <= bound);
    }
}

TEST_CASE("periodic orbits approach the attractor as the period cap grows") {
    Polygon P = build_polygon(right_triangle());
    ReflectionLaw f = linear_law(0.5);
    auto cloud = attractor_sample(P, f, 64, 3000, 256, 99);
    REQUIRE(!cloud.empty());
    auto hausdorff_to_orbits = [&](int cap) {
        auto orbits = find_periodic_orbits(P, f, cap);
        REQUIRE(!orbits.empty());
        double worst = 0.0;
        for (const auto& pt : cloud) {
            double best = 1e300;
            for (const auto& o : orbits)
                for (const auto& q : o.points) best = std::min(best, phase_dist(pt, q));
            worst = std::max(worst, best);
        }
        return worst;
    };
    double d3 = hausdorff_to_orbits(3);
    double d6 = hausdorff_to_orbits(6);
    CHECK(d6 <= d3 + 1e-12);
}

TEST_CASE("autocorrelation basics") {
    Polygon P = build_polygon(right_triangle());
    ReflectionLaw f = linear_law(0.5);

    // Constant observable: zero variance, no usable fit.
    AutocorrResult flat = autocorrelation(P, f, {0.1, 0.2},
                                          [](PhasePoint, int) { return 1.0; }, 20000, 10);
    CHECK_FALSE(flat.ok);

    AutocorrResult ac = autocorrelation(
        P, f, {0.1, 0.2}, [](PhasePoint, int side) { return side == 0 ? 1.0 : 0.0; },
        400000, 30);
    REQUIRE(ac.ok);
    CHECK(ac.C[0] > 0.0);
    CHECK(ac.fitted_rate > 0.0);
    CHECK(ac.usable_lags >= 3);
}

TEST_CASE("attractor samples stay inside the image strip") {
    Polygon P = build_polygon(right_triangle());
    ReflectionLaw f = linear_law(0.5);
    auto pts = attractor_sample(P, f, 32, 500, 64, 7);
    REQUIRE(!pts.empty());
    for (const auto& p : pts) CHECK(std::abs(p.theta) <= f.lambda() * kHalfPi + 1e-12);
}

TEST_CASE("attractor theta histograms agree between seeds") {
    Polygon P = build_polygon(right_triangle());
    ReflectionLaw f = linear_law(0.5);
    auto a = attractor_sample(P, f, 128, 2000, 128, 11);
    auto b = attractor_sample(P, f, 128, 2000, 128, 222);
    REQUIRE(a.size() == b.size());
    const int bins = 8;
    double strip = f.lambda() * kHalfPi;
    std::vector<double> ha(bins, 0.0), hb(bins, 0.0);
    for (const auto& p : a)
        ha[std::min(bins - 1, static_cast<int>((p.theta + strip) / (2 * strip) * bins))] += 1;
    for (const auto& p : b)
        hb[std::min(bins - 1, static_cast<int>((p.theta + strip) / (2 * strip) * bins))] += 1;
    double n = static_cast<double>(a.size());
    for (int i = 0; i < bins; ++i) {
        double pa = ha[i] / n, pb = hb[i] / n;
        double sigma = std::sqrt(std::max(pa * (1 - pa), 1.0 / n) / n) +
                       std::sqrt(std::max(pb * (1 - pb), 1.0 / n) / n);
        CHECK(std::abs(pa - pb) <= 3.0 * sigma + 0.02);
    }
}

TEST_CASE("square attractor collapses onto the perpendicular lines") {
    Polygon P = build_polygon(unit_square());
    ReflectionLaw f = linear_law(0.5);
    auto pts = attractor_sample(P, f, 64, 2000, 32, 5);
    REQUIRE(!pts.empty());
    for (const auto& p : pts) CHECK(std::abs(p.theta) < 1e-9);
}
