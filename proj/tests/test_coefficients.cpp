#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "hlab/coefficients.hpp"

using namespace hlab;
using namespace hlab::coefficients;

namespace {

CurveCatalog bundled() { return CurveCatalog::load(std::string(HLAB_DATA_DIR) + "/curves.txt"); }

// Test-only oracle: count points of the full Weierstrass equation by testing
// every (x, y) pair in F_p x F_p.
long long count_points_bruteforce(const CurveModel& e, long long p) {
    long long n = 1;  // infinity
    for (long long x = 0; x < p; ++x)
        for (long long y = 0; y < p; ++y) {
            long long lhs = y * y + e.a1 * x * y + e.a3 * y;
            long long rhs = x * x * x + e.a2 * x * x + e.a4 * x + e.a6;
            if (((lhs - rhs) % p + p) % p == 0) ++n;
        }
    return n;
}

CurveModel curve_32a() {
    CurveModel e;
    e.label = "32a";
    e.a4 = 1;  // y^2 = x^3 + x
    e.conductor = 32;
    validate_curve(e);
    return e;
}

CurveModel curve_36a() {
    CurveModel e;
    e.label = "36a";
    e.a6 = 1;  // y^2 = x^3 + 1
    e.conductor = 36;
    validate_curve(e);
    return e;
}

}  // namespace

TEST_CASE("count_points on small curves matches enumeration") {
    CHECK(count_points(curve_32a(), 3) == 4);  // (0,0),(2,1),(2,2),infinity
    CHECK(count_points_bruteforce(curve_32a(), 3) == 4);
    CHECK(count_points_bruteforce(curve_36a(), 5) == count_points(curve_36a(), 5));
    // y^2 = x^3 + 1 over F_2 would be p | N here; check the arithmetic on a
    // conductor-sharing-free stand-in instead: the curve mod 2 has 3 points.
    CurveModel e = curve_36a();
    e.conductor = 9;  // pretend-good at 2 for the raw count (model is smooth mod 2? no)
    // y^2 = x^3+1 mod 2: x=0:y^2=1 ->y=1; x=1:y^2=0 ->y=0; plus infinity = 3
    CHECK(count_points_bruteforce(curve_36a(), 2) == 3);
}

TEST_CASE("count_points rejects bad reduction primes") {
    CHECK_THROWS_AS(count_points(curve_32a(), 2), BadReduction);
    CHECK_THROWS_AS(count_points(curve_36a(), 3), BadReduction);
}

TEST_CASE("the two point counters agree for p <= 50 on all bundled curves") {
    auto cat = bundled();
    for (const auto& e : cat.curves)
        for (int p : primes_up_to(50)) {
            if (e.conductor % p == 0) continue;
            INFO(e.label << " p=" << p);
            long long n1 = count_points(e, p);
            CHECK(n1 == count_points_character_sum(e, p));
            if (p <= 31) CHECK(n1 == count_points_bruteforce(e, p));
        }
}

TEST_CASE("ap_from_curve basic values") {
    CHECK(ap_from_curve(curve_32a(), 3) == 0);  // 1 + 3 - 4
    auto cat = bundled();
    const CurveModel* c11 = cat.find("11a");
    REQUIRE(c11 != nullptr);
    CHECK(ap_from_curve(*c11, 2) == -2);
}

TEST_CASE("bad-prime eigenvalues from the reduced singular curve") {
    auto cat = bundled();
    // 11a is split multiplicative at 11; 37a non-split at 37; 37b split.
    CHECK(ap_from_curve(*cat.find("11a"), 11) == 1);
    CHECK(ap_from_curve(*cat.find("37a"), 37) == -1);
    CHECK(ap_from_curve(*cat.find("37b"), 37) == 1);
    // additive cases
    CHECK(ap_from_curve(curve_32a(), 2) == 0);
    CHECK(ap_from_curve(curve_36a(), 2) == 0);
    CHECK(ap_from_curve(curve_36a(), 3) == 0);
    for (const auto& e : cat.curves)
        for (const auto& pe : factorize(e.conductor)) {
            long long a = ap_from_curve(e, pe.p);
            CHECK(std::abs(a) <= 1);
        }
}

TEST_CASE("Hasse bound holds exhaustively for bundled curves, p <= 1000") {
    auto cat = bundled();
    for (const auto& e : cat.curves)
        for (int p : primes_up_to(1000)) {
            if (e.conductor % p == 0) continue;
            long long a = ap_from_curve(e, p);
            INFO(e.label << " p=" << p << " ap=" << a);
            CHECK(static_cast<double>(a) * a <= 4.0 * p);
            double th = theta_from_ap(static_cast<double>(a), p);
            CHECK(th >= 0.0);
            CHECK(th <= kPi);
        }
}

TEST_CASE("theta/ap conversions") {
    CHECK(theta_from_ap(0.0, 7) == Catch::Approx(kPi / 2));
    CHECK(theta_from_ap(2.0 * std::sqrt(7.0), 7) == Catch::Approx(0.0).margin(1e-12));
    CHECK(theta_from_ap(-2.0 * std::sqrt(7.0), 7) == Catch::Approx(kPi));
    CHECK(ap_from_theta(kPi / 2, 5) == Catch::Approx(0.0).margin(1e-12));
    CHECK(ap_from_theta(0.0, 2) == Catch::Approx(2.0 * std::sqrt(2.0)));
    CHECK_THROWS_AS(theta_from_ap(6.0, 5), HasseBoundViolation);
    CHECK_THROWS_AS(ap_from_theta(-0.5, 5), DomainError);
    CHECK_THROWS_AS(ap_from_theta(3.5, 5), DomainError);

    std::mt19937 rng(20240811);
    std::uniform_real_distribution<double> uth(0.0, kPi);
    for (int i = 0; i < 200; ++i) {
        long long p = 2 + (rng() % 400);
        while (!is_prime(p)) ++p;
        double th = uth(rng);
        CHECK(theta_from_ap(ap_from_theta(th, p), p) == Catch::Approx(th).margin(1e-12));
        double a = ap_from_theta(uth(rng), p);
        CHECK(ap_from_theta(theta_from_ap(a, p), p) == Catch::Approx(a).margin(1e-12));
    }
}

TEST_CASE("extend_coefficients: newform mode recurrences") {
    HeckeSystem s;
    s.level = 5;
    for (int p : primes_up_to(50)) s.ap[p] = 0.0;
    s.ap[3] = 2.0;
    auto f = extend_coefficients(s, 27, HeckeMode::Newform);
    CHECK(f.a[9].real() == Catch::Approx(1.0));   // a_9 = a_3^2 - 3
    CHECK(f.a[27].real() == Catch::Approx(-4.0)); // a_27 = a_3 a_9 - 3 a_3

    HeckeSystem bad;
    bad.level = 7;
    for (int p : primes_up_to(60)) bad.ap[p] = 0.0;
    bad.ap[7] = 1.0;
    auto g = extend_coefficients(bad, 49, HeckeMode::Newform);
    CHECK(g.a[7].real() == Catch::Approx(1.0));
    CHECK(g.a[49].real() == Catch::Approx(1.0));  // delta_N(7) = 0 collapses the recurrence
}

TEST_CASE("extend_coefficients: deformed mode at theta = pi/2") {
    AngleProfile prof;
    for (int p : primes_up_to(130)) prof.angles[p] = kPi / 2;
    auto f = extend_coefficients(prof, 125, HeckeMode::Deformed);
    CHECK(std::abs(f.a[5]) == Catch::Approx(0.0).margin(1e-12));
    CHECK(f.a[25].real() == Catch::Approx(-5.0));
    CHECK(std::abs(f.a[125]) == Catch::Approx(0.0).margin(1e-12));
    CHECK(f.a[4].real() == Catch::Approx(-2.0));
    CHECK(f.a[100].real() == Catch::Approx(10.0));  // a_4 a_25 = (-2)(-5)
}

TEST_CASE("deformed coefficients satisfy the Ramanujan-type bound") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> uth(0.0, kPi);
    for (int trial = 0; trial < 5; ++trial) {
        AngleProfile prof;
        for (int p : primes_up_to(260)) prof.angles[p] = uth(rng);
        auto f = extend_coefficients(prof, 256, HeckeMode::Deformed);
        for (long long n = 1; n <= f.truncation; ++n) {
            double bound = divisor_count(n) * std::sqrt(static_cast<double>(n));
            INFO("n=" << n);
            CHECK(std::abs(f.a[static_cast<size_t>(n)]) <= bound * (1.0 + 1e-9));
        }
        // |a_{p^r}| <= (r+1) p^{r/2}
        for (long long p : {2LL, 3LL, 5LL}) {
            long long pr = p;
            int r = 1;
            while (pr <= f.truncation) {
                CHECK(std::abs(f.a[static_cast<size_t>(pr)]) <=
                      (r + 1) * std::pow(static_cast<double>(p), r / 2.0) * (1.0 + 1e-9));
                pr *= p;
                ++r;
            }
        }
        CHECK(verify_hecke_relations(f, 1, HeckeMode::Deformed).ok());
    }
}

TEST_CASE("extend_coefficients missing prime raises") {
    HeckeSystem s;
    s.level = 1;
    s.ap[2] = 1.0;
    CHECK_THROWS_AS(extend_coefficients(s, 10, HeckeMode::Newform), MissingPrime);
}

TEST_CASE("verify_hecke_relations is clean on construction and catches defects") {
    auto cat = bundled();
    auto f = newform_expansion(*cat.find("11a"), 500);
    CHECK(f.has_exact());
    CHECK(verify_hecke_relations(f, 11, HeckeMode::Newform).ok());

    auto broken = f;
    broken.a[6] += 1.0;
    auto rep = verify_hecke_relations(broken, 11, HeckeMode::Newform);
    REQUIRE_FALSE(rep.ok());
    bool found6 = false;
    for (const auto& v : rep.violations) found6 |= v.n == 6;
    CHECK(found6);

    auto nudged = f;
    nudged.a[4] += 1e-3;
    auto rep4 = verify_hecke_relations(nudged, 11, HeckeMode::Newform, 1e-9);
    REQUIRE_FALSE(rep4.ok());
    bool found4 = false;
    for (const auto& v : rep4.violations)
        if (v.n == 4) {
            found4 = true;
            CHECK(v.residual == Catch::Approx(1e-3).epsilon(0.01));
        }
    CHECK(found4);
}

TEST_CASE("exact and floating extensions agree for curve systems") {
    auto cat = bundled();
    for (const auto& label : {"11a", "37a", "91b"}) {
        auto f = newform_expansion(*cat.find(label), 1000);
        REQUIRE(f.has_exact());
        for (long long n = 1; n <= f.truncation; ++n)
            CHECK(f.a[static_cast<size_t>(n)].real() ==
                  Catch::Approx(static_cast<double>(f.exact[static_cast<size_t>(n)])).margin(1e-9));
        CHECK_NOTHROW(validate_expansion(f));
    }
}

TEST_CASE("detect_newform_match") {
    auto cat = bundled();
    auto sys = hecke_system_from_curve(*cat.find("11a"), 100);
    auto hit = detect_newform_match(sys, cat, 100);
    REQUIRE(hit.has_value());
    CHECK(*hit == "11a");

    auto prof = angle_profile_from_system(sys);
    prof.angles[2] += 0.3;
    CHECK_FALSE(detect_newform_match(prof, cat, 100).has_value());

    CurveCatalog empty;
    CHECK_FALSE(detect_newform_match(sys, empty, 100).has_value());
}

TEST_CASE("catalog parsing and validation") {
    auto cat = bundled();
    REQUIRE(cat.curves.size() == 5);
    CHECK(cat.checksum != 0);
    const CurveModel* c = cat.find("37a");
    REQUIRE(c != nullptr);
    CHECK(c->conductor == 37);
    CHECK(c->known_rank == 1);
    CHECK(static_cast<long long>(c->discriminant()) == 37);
    CHECK(static_cast<long long>(cat.find("11a")->discriminant()) == -161051);
    CHECK(static_cast<long long>(cat.find("91a")->discriminant()) == -91);
    CHECK(static_cast<long long>(cat.find("91b")->discriminant()) == -91);

    CHECK_THROWS_AS(CurveCatalog::parse("x [0,0,0,0,0] 11"), SingularModel);
    CHECK_THROWS_AS(CurveCatalog::parse("x [0,-1,1,-10,-20] 7"), ConfigError);
    CHECK_THROWS_AS(CurveCatalog::parse("x [0,-1,1] 11"), ParseError);

    auto inline_curve = resolve_curve("0,-1,1,-10,-20:11", cat);
    CHECK(inline_curve.conductor == 11);
    CHECK(ap_from_curve(inline_curve, 2) == -2);
}
