#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "hlab/pathint.hpp"

using namespace hlab;
using namespace hlab::coefficients;
using namespace hlab::pathint;

namespace {

CurveCatalog bundled() { return CurveCatalog::load(std::string(HLAB_DATA_DIR) + "/curves.txt"); }

// single-term series a_1 = 1, declared tail-free
QExpansion one_term() {
    QExpansion f;
    f.truncation = 1;
    f.a = {0.0, 1.0};
    f.growth = GrowthBound::supplied(0.0);
    f.normalized = true;
    return f;
}

QExpansion finite_series(std::vector<cplx> coeffs) {
    QExpansion f;
    f.truncation = static_cast<int>(coeffs.size());
    f.a.assign(1, 0.0);
    for (cplx c : coeffs) f.a.push_back(c);
    f.growth = GrowthBound::supplied(0.0);
    return f;
}

QExpansion lin_comb(cplx s, const QExpansion& f, cplx t, const QExpansion& g) {
    QExpansion h;
    h.truncation = std::max(f.truncation, g.truncation);
    h.a.assign(static_cast<size_t>(h.truncation) + 1, 0.0);
    for (long long n = 1; n <= h.truncation; ++n)
        h.a[static_cast<size_t>(n)] = s * f.coeff(n) + t * g.coeff(n);
    h.growth = GrowthBound::supplied(std::abs(s) * f.growth.constant + std::abs(t) * g.growth.constant);
    return h;
}

PathSpec simple_path(cplx z0, cplx z1) {
    PathSpec p;
    p.segments.push_back(Segment::line(z0, z1));
    return p;
}

}  // namespace

TEST_CASE("evaluate_series basics") {
    auto f = one_term();
    auto v = evaluate_series(f, cplx{0.0, 1.0});
    CHECK(std::abs(v.value - std::exp(-kTwoPi)) < 1e-18);
    CHECK(v.tail_bound == 0.0);

    // leading term dominates at large height
    auto cat = bundled();
    auto f11 = newform_expansion(*cat.find("11a"), 200);
    cplx z{0.3, 12.0};
    auto w = evaluate_series(f11, z, 1e-12);
    CHECK(std::abs(w.value / std::exp(kTwoPi * kI * z) - 1.0) < 1e-6);

    // tail bound blows up near the real axis
    auto f100 = newform_expansion(*cat.find("11a"), 100);
    CHECK_THROWS_AS(evaluate_series(f100, cplx{0.0, 0.001}, 1e-9), TailTooLarge);
    CHECK_THROWS_AS(evaluate_series(f100, cplx{0.0, -1.0}), DomainError);
}

TEST_CASE("declared tail bound is honest") {
    auto cat = bundled();
    auto full = newform_expansion(*cat.find("37a"), 3000);
    auto part = full;
    part.truncation = 60;
    part.a.resize(61);
    for (double y : {0.2, 0.35, 0.5, 1.0}) {
        for (double x : {-0.4, 0.0, 0.3}) {
            cplx z{x, y};
            cplx truth = evaluate_series(full, z, 0.0).value;
            auto approx = evaluate_series(part, z, 0.0);
            INFO("z = " << x << "+" << y << "i");
            CHECK(std::abs(truth - approx.value) <= series_tail_bound(part, 60, y) * (1 + 1e-9));
        }
    }
}

TEST_CASE("integrate_path closed forms on vertical rays") {
    auto f = one_term();
    // i -> i inf:  antiderivative of e^{2 pi i z} gives i e^{-2 pi} / (2 pi)
    PathSpec p;
    p.segments.push_back(Segment::line(cplx{0, 1}, cplx{0, 3}));
    p.end_cusp = Cusp{true};
    auto r = integrate_path(f, p);
    cplx expect = kI * std::exp(-kTwoPi) / kTwoPi;
    CHECK(std::abs(r.value - expect) < 1e-16);
    CHECK(r.quad_error == 0.0);

    // 0 -> i inf termwise: i / (2 pi)
    PathSpec p2;
    p2.start_cusp = Cusp{};  // 0
    p2.end_cusp = Cusp{true};
    auto r2 = integrate_path(f, p2);
    CHECK(std::abs(r2.value - kI / kTwoPi) < 1e-16);
}

TEST_CASE("path independence for homotopic interior paths (level 11)") {
    auto cat = bundled();
    auto f = newform_expansion(*cat.find("11a"), 400);
    std::mt19937 rng(20240811);
    std::uniform_real_distribution<double> ux(-1.0, 1.0), uy(0.25, 2.5);
    for (int trial = 0; trial < 8; ++trial) {
        cplx z0{ux(rng), uy(rng)}, z1{ux(rng) + 1.0, uy(rng)};
        PathSpec straight = simple_path(z0, z1);
        PathSpec detour;
        cplx mid = 0.5 * (z0 + z1) + cplx{0.0, 1.0 + 0.5 * uy(rng)};
        detour.segments.push_back(Segment::line(z0, mid));
        detour.segments.push_back(Segment::line(mid, z1));
        auto a = integrate_path(f, straight);
        auto b = integrate_path(f, detour);
        INFO("trial " << trial);
        CHECK(std::abs(a.value - b.value) < 1e-9);
    }
}

TEST_CASE("reversal negates and integral is linear") {
    auto cat = bundled();
    auto f = newform_expansion(*cat.find("11a"), 300);
    auto g = newform_expansion(*cat.find("37a"), 300);
    PathSpec p;
    p.segments.push_back(Segment::line(cplx{-0.3, 0.8}, cplx{0.2, 1.1}));
    p.segments.push_back(Segment::arc(cplx{0.2, 1.6}, 0.5, -kPi / 2, 0.0));
    auto forward = integrate_path(f, p);
    auto backward = integrate_path(f, p.reversed());
    CHECK(std::abs(forward.value + backward.value) < 1e-12);

    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    cplx a{u(rng), u(rng)}, b{u(rng), u(rng)};
    auto combo = integrate_path(lin_comb(a, f, b, g), p);
    auto vf = integrate_path(f, p);
    auto vg = integrate_path(g, p);
    CHECK(std::abs(combo.value - (a * vf.value + b * vg.value)) <
          1e-10 * (1.0 + std::abs(a) + std::abs(b)));
}

TEST_CASE("period_lattice wrapper") {
    auto cat = bundled();
    auto f = newform_expansion(*cat.find("11a"), 400);
    auto p = simple_path(cplx{0, 1}, cplx{1, 1});
    auto L = period_lattice(f, p, p);
    CHECK(L.omega1 == L.omega2);  // degenerate by construction

    auto f2 = lin_comb(2.0, f, 0.0, f);
    auto L2 = period_lattice(f2, p, p);
    CHECK(std::abs(L2.omega1 - 2.0 * L.omega1) < 1e-12);
    CHECK(L.provenance1 == p.to_string());
}

TEST_CASE("fricke_sign detection on bundled newforms") {
    auto cat = bundled();
    auto f11 = newform_expansion(*cat.find("11a"), 600);
    auto f37a = newform_expansion(*cat.find("37a"), 800);
    auto f37b = newform_expansion(*cat.find("37b"), 800);
    CHECK(fricke_sign(f11, 11) == 1);
    CHECK(fricke_sign(f37a, 37) == -1);
    CHECK(fricke_sign(f37b, 37) == 1);

    // deformed series fail the transformation law
    AngleProfile prof;
    for (int p : primes_up_to(600)) prof.angles[p] = 0.3 + 0.001 * p;
    while (prof.angles.rbegin()->second > kPi) prof.angles.erase(std::prev(prof.angles.end()));
    for (auto& [p, th] : prof.angles) th = std::min(th, kPi - 0.01);
    auto F = extend_coefficients(prof, 600, HeckeMode::Deformed);
    CHECK_THROWS_AS(fricke_sign(F, 11), InconsistentSamples);
}

TEST_CASE("l_value_at_1: termwise and path-integral agree on finite series") {
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<cplx> coeffs;
        coeffs.push_back(1.0);
        for (int k = 0; k < 6; ++k) coeffs.push_back(cplx{u(rng), u(rng)});
        auto f = finite_series(coeffs);
        auto t = l_value_at_1(f, LMethod::Termwise);
        auto p = l_value_at_1(f, LMethod::PathIntegral);
        INFO("trial " << trial);
        CHECK(std::abs(t.value - p.value) < 1e-10);
        CHECK(t.tail_bound == 0.0);
    }
    auto f1 = one_term();
    CHECK(std::abs(l_value_at_1(f1, LMethod::Termwise).value - 1.0) < 1e-15);
    CHECK(std::abs(l_value_at_1(f1, LMethod::PathIntegral).value - 1.0) < 1e-12);
}

TEST_CASE("l_value_at_1 rank signals for conductors 11 and 37") {
    auto cat = bundled();
    auto f11 = newform_expansion(*cat.find("11a"), 2000);
    auto f37 = newform_expansion(*cat.find("37a"), 2000);

    auto s11 = l_value_at_1(f11, LMethod::SmoothedSum);
    auto p11 = l_value_at_1(f11, LMethod::PathIntegral);
    CHECK(s11.value.real() > 0.1);
    CHECK(std::abs(s11.value.imag()) < 1e-12);
    CHECK(std::abs(s11.value - p11.value) < 1e-6);
    CHECK(s11.fricke == 1);

    auto s37 = l_value_at_1(f37, LMethod::SmoothedSum);
    auto p37 = l_value_at_1(f37, LMethod::PathIntegral);
    CHECK(std::abs(s37.value) < 1e-4);
    CHECK(std::abs(p37.value) < 1e-4);
    CHECK(std::abs(s37.value - p37.value) < 1e-6);
    CHECK(s37.fricke == -1);

    CHECK_THROWS_AS(l_value_at_1(extend_coefficients(angle_profile_from_system(
                                                         hecke_system_from_curve(*cat.find("11a"), 50)),
                                                     50, HeckeMode::Deformed),
                                 LMethod::SmoothedSum),
                    MethodUnavailable);
}

TEST_CASE("fricke split is split-point independent") {
    auto cat = bundled();
    auto f = newform_expansion(*cat.find("11a"), 2000);
    IntegrateOptions o1, o2;
    o1.split_height = 1.0 / std::sqrt(11.0);
    o2.split_height = 2.0 / std::sqrt(11.0);
    auto v1 = fricke_integral_zero_to_infinity(f, 11, o1);
    auto v2 = fricke_integral_zero_to_infinity(f, 11, o2);
    CHECK(std::abs(v1.value - v2.value) < 1e-8);
    auto l1 = l_value_at_1(f, LMethod::PathIntegral, o1);
    auto l2 = l_value_at_1(f, LMethod::PathIntegral, o2);
    CHECK(std::abs(l1.value - l2.value) < 1e-8);
}

TEST_CASE("l_derivative_at_1 for the rank-1 conductor-37 class") {
    auto cat = bundled();
    auto f = newform_expansion(*cat.find("37a"), 3000);
    auto d1 = l_derivative_at_1(f, 37, DerivativeKernel::Library);
    auto d2 = l_derivative_at_1(f, 37, DerivativeKernel::ContinuedFraction);
    CHECK(d1.value > 0.0);
    CHECK(std::abs(d1.value - d2.value) < 1e-6);

    auto shorter = newform_expansion(*cat.find("37a"), 1500);
    auto d3 = l_derivative_at_1(shorter, 37);
    CHECK(std::abs(d3.value - d1.value) < 1e-8);

    auto f11 = newform_expansion(*cat.find("11a"), 600);
    CHECK_THROWS_AS(l_derivative_at_1(f11, 11), WrongSign);
}

TEST_CASE("regularized rational-cusp integrals report sensitivity") {
    AngleProfile prof;
    for (int p : primes_up_to(400)) prof.angles[p] = kPi / 2 + 0.2 * std::sin(static_cast<double>(p));
    auto F = extend_coefficients(prof, 400, HeckeMode::Deformed);
    PathSpec p;
    p.segments.push_back(Segment::line(cplx{0.5, 1.0}, cplx{0.25, 0.5}));
    p.end_cusp = Cusp{false, 1, 4};  // rational cusp 1/4
    auto r = integrate_path(F, p);
    CHECK(r.regularized);
    CHECK(r.cutoff_sensitivity > 0.0);
}

TEST_CASE("group periods and shipped default paths") {
    auto cat = bundled();
    auto f = newform_expansion(*cat.find("11a"), 1200);
    auto basis = find_period_basis(f, 11);
    double covol_full = std::abs(basis.omega1.real() * basis.omega2.imag() -
                                 basis.omega1.imag() * basis.omega2.real());
    CHECK(covol_full * 4.0 * kPi * kPi == Catch::Approx(1.85154362345592).epsilon(1e-9));

    auto [g1, g2] = default_period_paths(11);
    auto L = period_lattice(f, g1, g2);
    double covol_pair =
        std::abs(L.omega1.real() * L.omega2.imag() - L.omega1.imag() * L.omega2.real());
    CHECK(covol_pair == Catch::Approx(covol_full).epsilon(1e-9));

    // quadrature route along the default paths agrees with the antiderivative route
    cplx w1 = group_period(f, 2, -15, 11, -82);
    CHECK(std::abs(w1 - L.omega1) < 1e-9);

    CHECK_THROWS_AS(default_period_paths(13), MethodUnavailable);
}

TEST_CASE("path grammar") {
    auto p = PathSpec::parse("line(0.1+0.9i, 1.1+0.9i); to(1.1+2i); to_cusp(inf)");
    CHECK(p.segments.size() == 2);
    REQUIRE(p.end_cusp.has_value());
    CHECK(p.end_cusp->at_infinity);

    auto q = PathSpec::parse("from_cusp(0); line(0.5i, 2i)");
    REQUIRE(q.start_cusp.has_value());
    CHECK(q.start_cusp->num == 0);

    auto r = PathSpec::parse("arc(0.5+1i, 0.25, 0, 3.14159); to_cusp(1/2)");
    CHECK(r.segments.front().kind == Segment::Kind::Arc);
    CHECK(r.end_cusp->den == 2);

    auto round = PathSpec::parse(p.to_string());
    CHECK(round.segments.size() == p.segments.size());
    CHECK(std::abs(round.segments[0].z1 - p.segments[0].z1) < 1e-15);

    CHECK_THROWS_AS(PathSpec::parse("line(0,1i); line(5+5i, 6+6i)"), ParseError);  // gap
    CHECK_THROWS_AS(PathSpec::parse("line(0.1-0.9i, 1+1i)"), ParseError);          // lower half
    CHECK_THROWS_AS(PathSpec::parse("boop(1,2)"), ParseError);
}
