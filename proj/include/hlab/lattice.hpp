#pragma once

// Period-pair classification and lattice invariants.
//
// A pair (omega1, omega2) spans Z omega1 + Z omega2. The quotient C/Lambda
// is an elliptic curve iff the ratio is genuinely non-real; otherwise the
// group degenerates (trivial, cyclic, or a dense line). For the elliptic
// case we reduce tau = omega2/omega1 to the standard fundamental domain and
// compute g2 = 60 sum' w^-4, g3 = 140 sum' w^-6 two ways:
//   - direct square-cutoff summation with an exterior-integral correction,
//   - the q-series E4 = 1 + 240 sum sigma_3(n) q^n, E6 = 1 - 504 sum sigma_5(n) q^n
// and j = 1728 g2^3 / (g2^3 - 27 g3^2).

#include <cmath>
#include <complex>
#include <optional>

#include "hlab/coefficients.hpp"
#include "hlab/modgroup.hpp"
#include "hlab/pathint.hpp"
#include "hlab/util.hpp"

namespace hlab::lattice {

using coefficients::CurveModel;
using pathint::PeriodLattice;

// ------------------------------------------------------------- invariants

struct EisensteinPair {
    cplx g2{}, g3{};
    double err = 0.0;
};

// Direct lattice sum over the square max(|m|,|n|) <= K plus the closed-form
// integral of the exterior (midpoint rule in reverse); the correction drops
// the truncation error to O(K^-4).
inline EisensteinPair eisenstein_invariants_direct(cplx tau, double tol = 1e-10) {
    if (tau.imag() <= 0.0) throw DomainError("eisenstein_invariants_direct: Im tau > 0 required");
    auto partial = [&](long long K) {
        cplx s4 = 0.0, s6 = 0.0;
        for (long long k = 1; k <= K; ++k) {
            // square shell max(|m|,|n|) = k
            for (long long m = -k; m <= k; ++m) {
                for (long long n : {-k, k}) {
                    cplx w = static_cast<double>(m) + static_cast<double>(n) * tau;
                    cplx w2 = w * w, w4 = w2 * w2;
                    s4 += 1.0 / w4;
                    s6 += 1.0 / (w4 * w2);
                }
            }
            for (long long n = -k + 1; n <= k - 1; ++n) {
                for (long long m : {-k, k}) {
                    cplx w = static_cast<double>(m) + static_cast<double>(n) * tau;
                    cplx w2 = w * w, w4 = w2 * w2;
                    s4 += 1.0 / w4;
                    s6 += 1.0 / (w4 * w2);
                }
            }
        }
        const double L = static_cast<double>(K) + 0.5;
        const cplx p1 = 1.0 + tau, m1 = tau - 1.0;
        cplx t4 = -(1.0 / (L * L)) / (3.0 * tau) * (1.0 / (p1 * p1) - 1.0 / (m1 * m1));
        cplx t6 = -(1.0 / (L * L * L * L)) / (10.0 * tau) *
                  (1.0 / (p1 * p1 * p1 * p1) - 1.0 / (m1 * m1 * m1 * m1));
        return std::make_pair(s4 + t4, s6 + t6);
    };
    long long K = 40;
    auto [a4, a6] = partial(K);
    for (int it = 0; it < 6; ++it) {
        K *= 2;
        auto [b4, b6] = partial(K);
        double change = std::abs(b4 - a4) + std::abs(b6 - a6);
        if (change < tol) {
            EisensteinPair out;
            out.g2 = 60.0 * b4;
            out.g3 = 140.0 * b6;
            out.err = 200.0 * change;
            return out;
        }
        a4 = b4;
        a6 = b6;
    }
    throw NotConverged("eisenstein_invariants_direct: no convergence at K = " + std::to_string(K));
}

// q-series route; tau with small imaginary part is first reduced to the
// standard domain and the weight-4/6 covariance (c tau + d)^{4,6} undone.
inline EisensteinPair eisenstein_invariants_q(cplx tau) {
    if (tau.imag() <= 0.0) throw DomainError("eisenstein_invariants_q: Im tau > 0 required");
    cplx factor4 = 1.0, factor6 = 1.0;
    if (tau.imag() < 0.5) {
        auto red = modgroup::reduce_to_standard_domain(tau);
        cplx cd = static_cast<double>(red.g.c) * tau + static_cast<double>(red.g.d);
        // Lambda_tau = cd * Lambda_tau', so g_k(tau) = cd^{-2k} g_k(tau')
        cplx cd2 = cd * cd;
        factor4 = 1.0 / (cd2 * cd2);
        factor6 = factor4 / cd2;
        tau = red.z0;
    }
    const cplx q = std::exp(kTwoPi * kI * tau);
    cplx e4 = 1.0, e6 = 1.0, qn = 1.0;
    for (int n = 1; n <= 64; ++n) {
        qn *= q;
        double s3 = 0.0, s5 = 0.0;
        for (int d = 1; d * d <= n; ++d) {
            if (n % d) continue;
            int e = n / d;
            s3 += std::pow(d, 3);
            s5 += std::pow(d, 5);
            if (e != d) {
                s3 += std::pow(e, 3);
                s5 += std::pow(e, 5);
            }
        }
        e4 += 240.0 * s3 * qn;
        e6 -= 504.0 * s5 * qn;
        if (std::abs(qn) < 1e-30) break;
    }
    const double pi4 = kPi * kPi * kPi * kPi;
    EisensteinPair out;
    out.g2 = factor4 * (4.0 * pi4 / 3.0) * e4;
    out.g3 = factor6 * (8.0 * pi4 * kPi * kPi / 27.0) * e6;
    out.err = 1e-13 * std::abs(out.g2);
    return out;
}

enum class EisensteinMethod { QSeries, DirectSum };

inline EisensteinPair eisenstein_invariants(cplx tau,
                                            EisensteinMethod method = EisensteinMethod::QSeries,
                                            double tol = 1e-10) {
    return method == EisensteinMethod::QSeries ? eisenstein_invariants_q(tau)
                                               : eisenstein_invariants_direct(tau, tol);
}

inline cplx j_invariant(cplx tau, EisensteinMethod method = EisensteinMethod::QSeries) {
    if (method == EisensteinMethod::DirectSum) {
        auto [g2, g3, err] = eisenstein_invariants_direct(tau);
        cplx g2c = g2 * g2 * g2;
        cplx den = g2c - 27.0 * g3 * g3;
        if (std::abs(den) < 1e-12 * std::max(1.0, std::abs(g2c)))
            throw NearSingular("j_invariant: discriminant numerically zero");
        return 1728.0 * g2c / den;
    }
    // j = E4^3 / (q prod (1-q^n)^24); the eta-product discriminant avoids
    // the E4^3 - E6^2 cancellation for small q
    if (tau.imag() <= 0.0) throw DomainError("j_invariant: Im tau > 0 required");
    if (tau.imag() < 0.5) tau = modgroup::reduce_to_standard_domain(tau).z0;
    const cplx q = std::exp(kTwoPi * kI * tau);
    cplx e4 = 1.0, qn = 1.0;
    for (int n = 1; n <= 64; ++n) {
        qn *= q;
        double s3 = 0.0;
        for (int d = 1; d * d <= n; ++d) {
            if (n % d) continue;
            s3 += std::pow(d, 3);
            if (d != n / d) s3 += std::pow(n / d, 3);
        }
        e4 += 240.0 * s3 * qn;
        if (std::abs(qn) < 1e-40) break;
    }
    cplx eta24 = 1.0;
    qn = 1.0;
    for (int n = 1; n <= 64; ++n) {
        qn *= q;
        cplx factor = 1.0 - qn;
        cplx f2 = factor * factor, f4 = f2 * f2, f8 = f4 * f4;
        eta24 *= f8 * f8 * f8;  // (1-q^n)^24
        if (std::abs(qn) < 1e-40) break;
    }
    cplx den = q * eta24;
    if (std::abs(den) < 1e-300) throw NearSingular("j_invariant: discriminant underflow");
    return e4 * e4 * e4 / den;
}

// ---------------------------------------------------------------- reduce

// tau in the standard fundamental domain from a period pair; the second
// period is exchanged/negated as needed so Im tau > 0.
inline cplx reduce_tau(cplx omega1, cplx omega2, double tol = 1e-12) {
    if (std::abs(omega1) == 0.0 || std::abs(omega2) == 0.0)
        throw DegenerateInput("reduce_tau: zero period");
    cplx ratio = omega2 / omega1;
    if (std::abs(ratio.imag()) < tol * std::max(1.0, std::abs(ratio)))
        throw DegenerateInput("reduce_tau: real period ratio");
    if (ratio.imag() < 0.0) ratio = 1.0 / ratio;
    return modgroup::reduce_to_standard_domain(ratio).z0;
}

// -------------------------------------------------------- classification

enum class LatticeKind { DegenerateRank0, DegenerateRank1, DegenerateIndiscrete, Elliptic };

inline const char* to_string(LatticeKind k) {
    switch (k) {
        case LatticeKind::DegenerateRank0: return "rank0";
        case LatticeKind::DegenerateRank1: return "rank1";
        case LatticeKind::DegenerateIndiscrete: return "indiscrete";
        case LatticeKind::Elliptic: return "elliptic";
    }
    return "?";
}

struct LatticeClassification {
    LatticeKind kind = LatticeKind::DegenerateRank0;
    std::optional<cplx> tau;
    std::optional<cplx> j;
    std::optional<RationalApprox> ratio;  // for rank-1: omega2/omega1 = num/den
};

// Rank 0: both periods vanish. Rank 1: one vanishes, or the ratio is real
// and a rational p/q with q <= 10^6 within tolerance. Real irrational
// ratio: a dense (indiscrete) line. Otherwise a genuine elliptic quotient.
inline LatticeClassification classify_quotient(const PeriodLattice& L, double tol = 1e-9) {
    LatticeClassification out;
    const double s1 = std::abs(L.omega1), s2 = std::abs(L.omega2);
    const double scale = std::max(s1, s2);
    if (scale <= tol) {
        out.kind = LatticeKind::DegenerateRank0;
        return out;
    }
    if (std::min(s1, s2) <= tol * scale) {
        out.kind = LatticeKind::DegenerateRank1;
        return out;
    }
    const cplx ratio = L.omega2 / L.omega1;
    if (std::abs(ratio.imag()) <= tol * std::max(1.0, std::abs(ratio))) {
        // rational iff some convergent p/q, q <= 10^6, is abnormally good:
        // closer than tol AND far below the generic 1/q^2 convergent spacing
        auto approx = nearest_rational(ratio.real(), 1000000);
        const bool close = approx.err <= tol * std::max(1.0, std::abs(ratio.real()));
        const bool sharp =
            approx.den <= 100 ||
            approx.err * static_cast<double>(approx.den) * static_cast<double>(approx.den) <= 1e-3;
        if (close && sharp) {
            out.kind = LatticeKind::DegenerateRank1;
            out.ratio = approx;
        } else {
            out.kind = LatticeKind::DegenerateIndiscrete;
        }
        return out;
    }
    out.kind = LatticeKind::Elliptic;
    out.tau = reduce_tau(L.omega1, L.omega2, tol);
    out.j = j_invariant(*out.tau);
    return out;
}

// ------------------------------------------------------------ exact side

struct RationalJ {
    long long num = 0;
    long long den = 1;

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

// j = c4^3 / Delta in exact integer arithmetic.
inline RationalJ j_from_curve(const CurveModel& e) {
    __int128 disc = e.discriminant();
    if (disc == 0) throw SingularModel("j_from_curve: singular model");
    __int128 c4 = e.c4();
    __int128 num = c4 * c4 * c4;
    __int128 den = disc;
    if (den < 0) {
        den = -den;
        num = -num;
    }
    __int128 a = num < 0 ? -num : num, b = den;
    while (b) {
        __int128 t = a % b;
        a = b;
        b = t;
    }
    if (a == 0) a = 1;
    num /= a;
    den /= a;
    RationalJ out;
    out.num = static_cast<long long>(num);
    out.den = static_cast<long long>(den);
    return out;
}

}  // namespace hlab::lattice
