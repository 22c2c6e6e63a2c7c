#pragma once

// Shared numeric plumbing: error types, prime sieves, Kronecker symbol,
// quadrature node tables, the exponential integral E1, and small helpers
// used across the library.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hlab {

using cplx = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr cplx kI{0.0, 1.0};

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define HLAB_DEFINE_ERROR(NAME) \
    struct NAME : Error {       \
        using Error::Error;     \
    };

HLAB_DEFINE_ERROR(BadReduction)
HLAB_DEFINE_ERROR(HasseBoundViolation)
HLAB_DEFINE_ERROR(DomainError)
HLAB_DEFINE_ERROR(MissingPrime)
HLAB_DEFINE_ERROR(TailTooLarge)
HLAB_DEFINE_ERROR(DivergentCuspIntegral)
HLAB_DEFINE_ERROR(MethodUnavailable)
HLAB_DEFINE_ERROR(WrongSign)
HLAB_DEFINE_ERROR(InconsistentSamples)
HLAB_DEFINE_ERROR(ConfigError)
HLAB_DEFINE_ERROR(NotConverged)
HLAB_DEFINE_ERROR(NearSingular)
HLAB_DEFINE_ERROR(SingularModel)
HLAB_DEFINE_ERROR(DegenerateInput)
HLAB_DEFINE_ERROR(NotFundamental)
HLAB_DEFINE_ERROR(OutsideConvergenceRegion)
HLAB_DEFINE_ERROR(MeshUnusable)
HLAB_DEFINE_ERROR(PreconditionFailed)
HLAB_DEFINE_ERROR(ParseError)

#undef HLAB_DEFINE_ERROR

// ---------------------------------------------------------------- primes

inline std::vector<int> primes_up_to(int n) {
    std::vector<int> ps;
    if (n < 2) return ps;
    std::vector<bool> comp(static_cast<size_t>(n) + 1, false);
    for (int i = 2; i <= n; ++i) {
        if (!comp[i]) {
            ps.push_back(i);
            for (long long j = 1LL * i * i; j <= n; j += i) comp[static_cast<size_t>(j)] = true;
        }
    }
    return ps;
}

// spf[k] = smallest prime factor of k (spf[0] = spf[1] = 0).
inline std::vector<int> smallest_prime_factor(int n) {
    std::vector<int> spf(static_cast<size_t>(n) + 1, 0);
    for (int i = 2; i <= n; ++i) {
        if (spf[i] == 0) {
            for (long long j = i; j <= n; j += i)
                if (spf[static_cast<size_t>(j)] == 0) spf[static_cast<size_t>(j)] = i;
        }
    }
    return spf;
}

inline bool is_prime(long long n) {
    if (n < 2) return false;
    for (long long d = 2; d * d <= n; ++d)
        if (n % d == 0) return false;
    return true;
}

inline long long mod_pow(long long base, long long exp, long long mod) {
    long long r = 1 % mod;
    base %= mod;
    if (base < 0) base += mod;
    while (exp > 0) {
        if (exp & 1) r = static_cast<long long>(static_cast<__int128>(r) * base % mod);
        base = static_cast<long long>(static_cast<__int128>(base) * base % mod);
        exp >>= 1;
    }
    return r;
}

struct PrimePower {
    long long p;
    int e;
};

inline std::vector<PrimePower> factorize(long long n) {
    std::vector<PrimePower> f;
    if (n < 0) n = -n;
    for (long long d = 2; d * d <= n; ++d) {
        if (n % d == 0) {
            int e = 0;
            while (n % d == 0) { n /= d; ++e; }
            f.push_back({d, e});
        }
    }
    if (n > 1) f.push_back({n, 1});
    return f;
}

inline int divisor_count(long long n) {
    int d = 1;
    for (const auto& pe : factorize(n)) d *= pe.e + 1;
    return d;
}

inline long long radical(long long n) {
    long long r = 1;
    for (const auto& pe : factorize(n)) r *= pe.p;
    return r;
}

// Kronecker symbol (a|n), full generality (Cohen, Alg. 1.4.10).
inline int kronecker(long long a, long long n) {
    if (n == 0) return (a == 1 || a == -1) ? 1 : 0;
    if (a % 2 == 0 && n % 2 == 0) return 0;
    int v = 0;
    while (n % 2 == 0) { n /= 2; ++v; }
    int k = 1;
    if (v % 2 != 0) {
        long long am = ((a % 8) + 8) % 8;
        if (am == 3 || am == 5) k = -1;
    }
    if (n < 0) {
        n = -n;
        if (a < 0) k = -k;
    }
    a %= n;
    if (a < 0) a += n;
    while (a != 0) {
        v = 0;
        while (a % 2 == 0) { a /= 2; ++v; }
        if (v % 2 != 0) {
            long long nm = n % 8;
            if (nm == 3 || nm == 5) k = -k;
        }
        // quadratic reciprocity, both odd here
        if (a % 4 == 3 && n % 4 == 3) k = -k;
        long long t = a;
        a = n % t;
        n = t;
    }
    return n == 1 ? k : 0;
}

// -------------------------------------------------- rational reconstruction

struct RationalApprox {
    long long num = 0;
    long long den = 1;
    double err = 0.0;
};

// Best continued-fraction convergent p/q of x with q <= max_den.
inline RationalApprox nearest_rational(double x, long long max_den) {
    long long p0 = 1, q0 = 0;  // p_{-1}/q_{-1}
    long long p1 = static_cast<long long>(std::floor(x)), q1 = 1;
    double frac = x - std::floor(x);
    for (int it = 0; it < 64 && frac > 1e-18; ++it) {
        double inv = 1.0 / frac;
        double fl = std::floor(inv);
        if (fl > 4e18) break;
        long long ai = static_cast<long long>(fl);
        long long p2 = ai * p1 + p0;
        long long q2 = ai * q1 + q0;
        if (q2 > max_den || q2 < 0 || p2 < -(1LL << 62) || p2 > (1LL << 62)) break;
        p0 = p1; q0 = q1; p1 = p2; q1 = q2;
        frac = inv - fl;
    }
    return {p1, q1, std::abs(x - static_cast<double>(p1) / static_cast<double>(q1))};
}

// ------------------------------------------------------------- quadrature

// 7-point Gauss / 15-point Kronrod pair on [-1, 1] (QUADPACK dqk15 nodes).
struct GaussKronrod15 {
    static constexpr std::array<double, 8> xk = {
        0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
        0.586087235467691, 0.405845151377397, 0.207784955007898, 0.0};
    static constexpr std::array<double, 8> wk = {
        0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
        0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728};
    // Gauss weights belong to nodes xk[1], xk[3], xk[5], xk[7].
    static constexpr std::array<double, 4> wg = {
        0.129484966168870, 0.279705391489277, 0.381830050505119, 0.417959183673469};
};

// Adaptive Gauss-Kronrod integration of a complex-valued f over [t0, t1].
template <typename F>
cplx integrate_gk_adaptive(F&& f, double t0, double t1, double abs_tol, double rel_tol,
                           double* err_out = nullptr, int max_depth = 48) {
    struct Piece {
        double a, b;
        int depth;
    };
    auto eval_panel = [&](double a, double b, cplx& coarse) -> cplx {
        const double h = 0.5 * (b - a);
        const double m = 0.5 * (a + b);
        cplx fine = 0.0;
        coarse = 0.0;
        for (size_t i = 0; i < GaussKronrod15::xk.size(); ++i) {
            const double x = GaussKronrod15::xk[i];
            cplx v = (x == 0.0) ? f(m) : f(m - h * x) + f(m + h * x);
            fine += GaussKronrod15::wk[i] * v;
            if (i % 2 == 1) coarse += GaussKronrod15::wg[i / 2] * v;
        }
        fine *= h;
        coarse *= h;
        return fine;
    };
    cplx total = 0.0;
    double err_total = 0.0;
    std::vector<Piece> stack{{t0, t1, 0}};
    while (!stack.empty()) {
        Piece pc = stack.back();
        stack.pop_back();
        cplx coarse;
        cplx fine = eval_panel(pc.a, pc.b, coarse);
        double err = std::abs(fine - coarse);
        double bound = std::max(abs_tol, rel_tol * std::abs(fine));
        // spread tolerance over the subinterval fraction
        double frac = (pc.b - pc.a) / (t1 - t0);
        if (err <= std::max(1e-300, bound * frac) || pc.depth >= max_depth) {
            total += fine;
            err_total += err;
        } else {
            double mid = 0.5 * (pc.a + pc.b);
            stack.push_back({pc.a, mid, pc.depth + 1});
            stack.push_back({mid, pc.b, pc.depth + 1});
        }
    }
    if (err_out) *err_out = err_total;
    return total;
}

// 4-point and 2-point Gauss-Legendre on [-1,1], used for mesh cells.
struct GaussLegendre4 {
    static constexpr std::array<double, 4> x = {-0.8611363115940526, -0.3399810435848563,
                                                0.3399810435848563, 0.8611363115940526};
    static constexpr std::array<double, 4> w = {0.3478548451374538, 0.6521451548625461,
                                                0.6521451548625461, 0.3478548451374538};
};
struct GaussLegendre2 {
    static constexpr std::array<double, 2> x = {-0.5773502691896257, 0.5773502691896257};
    static constexpr std::array<double, 2> w = {1.0, 1.0};
};

// ------------------------------------------------ exponential integral E1

// Power series for x <= 1:  E1(x) = -gamma - log x + sum (-1)^{k+1} x^k / (k k!)
// Continued fraction (modified Lentz) for x > 1.
inline double exp_integral_e1_cf(double x) {
    if (x <= 0.0) throw DomainError("exp_integral_e1_cf: x must be positive");
    constexpr double euler_gamma = 0.5772156649015328606;
    if (x <= 1.0) {
        double sum = 0.0, term = 1.0;
        for (int k = 1; k < 64; ++k) {
            term *= -x / k;
            double add = -term / k;
            sum += add;
            if (std::abs(add) < 1e-18 * std::abs(sum)) break;
        }
        return -euler_gamma - std::log(x) + sum;
    }
    // E1(x) = e^{-x} * 1/(x+1- 1/(x+3- 4/(x+5- 9/(...))))
    const double tiny = 1e-300;
    double b = x + 1.0;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 200; ++i) {
        double a = -static_cast<double>(i) * i;
        b += 2.0;
        d = a * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + a / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-16) break;
    }
    return h * std::exp(-x);
}

// Library route through Ei: E1(x) = -Ei(-x).
inline double exp_integral_e1_std(double x) {
    if (x <= 0.0) throw DomainError("exp_integral_e1_std: x must be positive");
    return -std::expint(-x);
}

// ------------------------------------------------------------ checksums

inline std::uint64_t fnv1a64(const void* data, size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 1469598103934665603ULL;
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

// ------------------------------------------------------------ formatting

// Shortest exact decimal round trip; used everywhere results are persisted
// so that reruns are byte-identical.
inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string format_complex(cplx z) {
    return format_double(z.real()) + (z.imag() < 0 ? "" : "+") + format_double(z.imag()) + "i";
}

}  // namespace hlab
