#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "hlab/quadclass.hpp"

using namespace hlab;
using namespace hlab::coefficients;
using namespace hlab::quadclass;

namespace {

CurveCatalog bundled() { return CurveCatalog::load(std::string(HLAB_DATA_DIR) + "/curves.txt"); }

// brute-force representation count for the oracle cross-check
long long reps_bruteforce(const QuadForm& f, long long n) {
    long long count = 0;
    for (long long x = -200; x <= 200; ++x)
        for (long long y = -200; y <= 200; ++y)
            if (f.a * x * x + f.b * x * y + f.c * y * y == n) ++count;
    return count;
}

}  // namespace

TEST_CASE("build_field small discriminants") {
    auto k3 = build_field(-3);
    CHECK(k3.w == 6);
    REQUIRE(k3.h() == 1);
    CHECK(k3.group.classes[0] == QuadForm{1, 1, 1});

    auto k4 = build_field(-4);
    CHECK(k4.w == 4);
    REQUIRE(k4.h() == 1);
    CHECK(k4.group.classes[0] == QuadForm{1, 0, 1});

    auto k23 = build_field(-23);
    CHECK(k23.w == 2);
    REQUIRE(k23.h() == 3);
    // classes (1,1,6), (2,+-1,3); the group is cyclic of order 3
    int nontrivial = 0;
    for (int i = 0; i < 3; ++i)
        if (i != k23.group.identity) {
            ++nontrivial;
            int sq = k23.group.table[i][i];
            CHECK(sq != i);
            CHECK(sq != k23.group.identity);
            CHECK(k23.group.inverse[i] == sq);
        }
    CHECK(nontrivial == 2);

    CHECK_THROWS_AS(build_field(-12), NotFundamental);
    CHECK_THROWS_AS(build_field(-9), NotFundamental);
    CHECK_THROWS_AS(build_field(5), NotFundamental);
}

TEST_CASE("group axioms hold exhaustively for |D| <= 200") {
    for (long long D = -3; D >= -200; --D) {
        if (!is_fundamental_discriminant(D)) continue;
        auto K = build_field(D);
        const auto& G = K.group;
        const int h = G.h();
        INFO("D = " << D << " h = " << h);
        for (int i = 0; i < h; ++i) {
            CHECK(G.table[G.identity][i] == i);
            CHECK(G.table[i][G.inverse[i]] == G.identity);
            for (int j = 0; j < h; ++j) {
                CHECK(G.table[i][j] == G.table[j][i]);
                for (int k = 0; k < h; ++k)
                    CHECK(G.table[G.table[i][j]][k] == G.table[i][G.table[j][k]]);
            }
        }
    }
}

TEST_CASE("epsilon character values and complete multiplicativity") {
    auto K = build_field(-3);
    CHECK(epsilon_character(K, 2) == -1);
    CHECK(epsilon_character(K, 3) == 0);
    CHECK(epsilon_character(K, 7) == 1);
    for (long long D : {-3LL, -4LL, -7LL, -20LL, -23LL}) {
        auto F = build_field(D);
        for (long long m = 1; m <= 100; ++m)
            for (long long n = 1; n <= 100 / m; ++n)
                CHECK(epsilon_character(F, m * n) ==
                      epsilon_character(F, m) * epsilon_character(F, n));
    }
}

TEST_CASE("r_count examples for D = -3") {
    auto K = build_field(-3);
    CHECK(r_count(K, 0, 0).num == 1);
    CHECK(r_count(K, 0, 0).den == 6);
    CHECK(r_count(K, 0, 1).value() == 1.0);
    CHECK(r_count(K, 0, 3).value() == 1.0);
    CHECK(r_count(K, 0, 7).value() == 2.0);
    // theta sequence starts 1/6, 1, 0, 1, 1, 0, 0, 2
    auto th = theta_series(K, 0, 7);
    CHECK(th.wr == std::vector<long long>{1, 6, 0, 6, 6, 0, 0, 12});
    CHECK(theta_series(K, 0, 0).wr == std::vector<long long>{1});
}

TEST_CASE("theta sweep equals per-n count equals brute force") {
    for (long long D : {-3LL, -4LL, -7LL, -23LL, -47LL}) {
        auto K = build_field(D);
        for (int cls = 0; cls < K.h(); ++cls) {
            auto th = theta_series(K, cls, 60);
            for (long long n = 0; n <= 60; ++n) {
                INFO("D=" << D << " class " << cls << " n=" << n);
                CHECK(th.wr[static_cast<size_t>(n)] == r_count(K, cls, n).num);
                if (n >= 1)
                    CHECK(th.wr[static_cast<size_t>(n)] ==
                          reps_bruteforce(K.group.classes[static_cast<size_t>(cls)], n));
            }
        }
    }
}

TEST_CASE("oracle equivalence: representations/w equal direct ideal counts") {
    for (long long D : {-3LL, -4LL, -7LL, -8LL, -11LL, -23LL}) {
        auto K = build_field(D);
        for (int cls = 0; cls < K.h(); ++cls) {
            auto th = theta_series(K, cls, 200);
            for (long long n = 1; n <= 200; ++n) {
                INFO("D=" << D << " class " << cls << " n=" << n);
                CHECK(th.wr[static_cast<size_t>(n)] == K.w * ideal_count_in_class(K, cls, n));
            }
        }
    }
}

TEST_CASE("summed theta coefficients are multiplicative away from D") {
    for (long long D : {-23LL, -7LL}) {
        auto K = build_field(D);
        std::vector<long long> total(201, 0);
        for (int cls = 0; cls < K.h(); ++cls) {
            auto th = theta_series(K, cls, 200);
            for (long long n = 1; n <= 200; ++n) total[static_cast<size_t>(n)] += th.wr[static_cast<size_t>(n)];
        }
        for (long long n = 1; n <= 200; ++n) {
            if (total[static_cast<size_t>(n)] % K.w != 0) FAIL("non-integral total");
            total[static_cast<size_t>(n)] /= K.w;
        }
        for (long long m = 2; m <= 14; ++m)
            for (long long n = 2; n <= 200 / m; ++n) {
                if (std::gcd(m, n) != 1) continue;
                if (std::gcd(m * n, std::abs(D)) != 1) continue;
                INFO("D=" << D << " m=" << m << " n=" << n);
                CHECK(total[static_cast<size_t>(m * n)] ==
                      total[static_cast<size_t>(m)] * total[static_cast<size_t>(n)]);
            }
        // classical identity sum_A r_A(n) = sum_{d | n} eps(d) on gcd(n, D) = 1
        for (long long n = 1; n <= 200; ++n) {
            if (std::gcd(n, std::abs(D)) != 1) continue;
            long long expect = 0;
            for (long long d = 1; d <= n; ++d)
                if (n % d == 0) expect += epsilon_character(K, d);
            CHECK(total[static_cast<size_t>(n)] == expect);
        }
    }
}

TEST_CASE("characters: counts, multiplicativity, orthogonality") {
    for (long long D : {-3LL, -23LL, -47LL, -84LL}) {
        auto K = build_field(D);
        auto chars = characters(K);
        REQUIRE(static_cast<int>(chars.size()) == K.h());
        CHECK(chars[0].is_trivial());
        const auto& G = K.group;
        for (const auto& chi : chars) {
            CHECK(std::abs(chi(G.identity) - cplx{1.0, 0.0}) < 1e-12);
            for (int i = 0; i < K.h(); ++i) {
                CHECK(std::abs(std::abs(chi(i)) - 1.0) < 1e-12);
                for (int j = 0; j < K.h(); ++j)
                    CHECK(std::abs(chi(G.table[i][j]) - chi(i) * chi(j)) < 1e-12);
            }
        }
        // column orthogonality: sum_chi chi(A) = h [A = identity]
        for (int i = 0; i < K.h(); ++i) {
            cplx s = 0.0;
            for (const auto& chi : chars) s += chi(i);
            double expect = (i == G.identity) ? static_cast<double>(K.h()) : 0.0;
            CHECK(std::abs(s - expect) < 1e-10);
        }
    }
}

TEST_CASE("rankin coefficients: printed factor sequences") {
    auto cat = bundled();
    auto f = newform_expansion(*cat.find("37a"), 300);
    auto K = build_field(-3);
    auto rk = rankin_coefficients(f, K, 0, 300);
    CHECK(rk.u[3] == 0);
    CHECK(rk.u[37] == 0);
    CHECK(rk.u[2] == -1);
    CHECK(rk.u[7] == 1);
    CHECK(rk.v_num[1] == 1 * rk.w);                        // v(1) = a_1 r(1) = 1
    CHECK(rk.v_num[7] == f.exact[7] * 2 * rk.w);           // r(7) = 2
    for (long long n = 1; n <= 300; ++n)
        if (std::gcd(n, 3LL * 37LL) != 1) CHECK(rk.u[static_cast<size_t>(n)] == 0);
}

TEST_CASE("partial_L convergence contract and region guard") {
    auto cat = bundled();
    auto f = newform_expansion(*cat.find("37a"), 4000);
    auto K = build_field(-3);
    auto a = partial_L(f, K, 0, 2.0, 2000);
    auto b = partial_L(f, K, 0, 2.0, 4000);
    CHECK(std::abs(a.value - b.value) <= a.tail_bound + b.tail_bound);
    CHECK(b.tail_bound < a.tail_bound);
    CHECK_THROWS_AS(partial_L(f, K, 0, 1.0, 1000), OutsideConvergenceRegion);

    // h = 1: total equals partial for any character
    auto chars = characters(K);
    auto t = total_L(f, K, chars[0], 2.0, 2000);
    CHECK(std::abs(t.value - a.value) < 1e-12 * std::abs(a.value));
}

TEST_CASE("total_L over D = -23 classes; conjugate symmetry; orthogonality") {
    auto cat = bundled();
    auto f = newform_expansion(*cat.find("11a"), 2000);
    auto K = build_field(-23);
    auto chars = characters(K);
    REQUIRE(chars.size() == 3);

    PartialL direct;
    for (int i = 0; i < 3; ++i) {
        auto pl = partial_L(f, K, i, 2.0, 2000);
        direct.value += pl.value;
    }
    auto t0 = total_L(f, K, chars[0], 2.0, 2000);
    CHECK(std::abs(t0.value - direct.value) < 1e-12 * (1.0 + std::abs(direct.value)));

    // conjugate characters give conjugate values
    auto t1 = total_L(f, K, chars[1], 2.0, 2000);
    auto t2 = total_L(f, K, chars[2], 2.0, 2000);
    CHECK(std::abs(t1.value - std::conj(t2.value)) < 1e-10 * (1.0 + std::abs(t1.value)));

    // sum over all characters = h * principal-class partial value
    cplx sum = 0.0;
    for (const auto& chi : chars) sum += total_L(f, K, chi, 2.0, 2000).value;
    auto principal = partial_L(f, K, K.group.identity, 2.0, 2000);
    CHECK(std::abs(sum - 3.0 * principal.value) < 1e-10 * (1.0 + std::abs(sum)));
}

TEST_CASE("factorization identity: exact zero residuals on coprime indices") {
    auto cat = bundled();
    {
        auto f = newform_expansion(*cat.find("37a"), 200);
        auto rep = verify_factorization(f, build_field(-3), 200);
        for (const auto& r : rep.residuals)
            if (r.coprime_to_DN) {
                INFO("n = " << r.n);
                CHECK(r.residual == 0);
            }
        CHECK(rep.ok());
    }
    {
        auto f = newform_expansion(*cat.find("11a"), 200);
        auto rep = verify_factorization(f, build_field(-7), 200);
        CHECK(rep.ok());
    }
}

TEST_CASE("factorization identity flags a planted corruption at its multiples") {
    auto cat = bundled();
    auto f = newform_expansion(*cat.find("37a"), 120);
    f.exact[5] += 1;
    f.a[5] += 1.0;
    auto rep = verify_factorization(f, build_field(-3), 120);
    CHECK_FALSE(rep.ok());
    for (const auto& r : rep.residuals) {
        if (!r.coprime_to_DN) continue;
        INFO("n = " << r.n);
        if (r.n % 5 != 0) CHECK(r.residual == 0);  // defects only at multiples of 5
    }
}

TEST_CASE("twisted L-value basics") {
    auto cat = bundled();
    auto f = newform_expansion(*cat.find("37a"), 6000);
    auto K = build_field(-3);
    auto t1 = twisted_l_value(f, K);
    CHECK(t1.sign == 1);  // eps' = eps_K(-37) * (-1) = +1
    CHECK(std::abs(t1.value) > 0.0);

    // doubling the truncation moves the value less than the reported error
    auto f2 = newform_expansion(*cat.find("37a"), 12000);
    auto t2 = twisted_l_value(f2, K);
    CHECK(std::abs(t1.value - t2.value) < 1e-8);

    // finitely supported series evaluate exactly: a_1 = 1 alone gives 1
    QExpansion delta;
    delta.truncation = 1;
    delta.a = {0.0, 1.0};
    delta.growth = coefficients::GrowthBound::supplied(0.0);
    auto tu = twisted_l_value(delta, K);
    CHECK(tu.value == Catch::Approx(1.0).margin(1e-15));

    CHECK_THROWS_AS(twisted_l_value(f, build_field(-148)), DomainError);  // gcd(148, 37) > 1
}

TEST_CASE("gross-zagier pairing for the rank-1 conductor-37 class") {
    auto cat = bundled();
    auto f = newform_expansion(*cat.find("37a"), 6000);
    auto K = choose_twist_field(f, 37, 60);
    REQUIRE(K.has_value());
    auto gz = gross_zagier_pairing(f, *K);
    INFO("D = " << gz.D << " L' = " << gz.l_derivative << " Ltw = " << gz.twisted_value
                << " value = " << gz.value << " err = " << gz.err);
    CHECK(gz.value > 0.0);
    CHECK(gz.value > 10.0 * gz.err);

    // the pairing is linear in f: scaling f by 2 scales the result by 2
    auto f2 = f;
    for (auto& c : f2.a) c *= 2.0;
    for (auto& c : f2.exact) c *= 2;
    f2.growth = coefficients::GrowthBound::supplied(2.0);
    f2.normalized = false;
    auto gz2 = gross_zagier_pairing(f2, *K);
    CHECK(gz2.value == Catch::Approx(2.0 * gz.value).epsilon(1e-9));

    auto f11 = newform_expansion(*cat.find("11a"), 3000);
    CHECK_THROWS_AS(gross_zagier_pairing(f11, build_field(-7)), PreconditionFailed);
}
