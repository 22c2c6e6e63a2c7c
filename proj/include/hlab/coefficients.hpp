#pragma once

// Hecke coefficient systems: integral Weierstrass models, point counts over
// F_p, the a_p <-> Frobenius angle dictionary, and multiplicative extension
// of prime data to full q-expansion coefficient tables.
//
// Two extension modes are supported and never mixed:
//   Newform:  a_{p^{r+1}} = a_p a_{p^r} - delta_N(p) p a_{p^{r-1}}
//   Deformed: a_{p^{r+1}} = a_p a_{p^r} - p a_{p^{r-1}}   (all primes alike)
// plus a_{mn} = a_m a_n for (m,n) = 1 in both modes.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hlab/util.hpp"

namespace hlab::coefficients {

// ----------------------------------------------------------- curve models

struct CurveModel {
    std::string label;
    long long a1 = 0, a2 = 0, a3 = 0, a4 = 0, a6 = 0;
    long long conductor = 0;
    std::optional<int> known_rank;  // metadata only, never used in computations

    long long b2() const { return a1 * a1 + 4 * a2; }
    long long b4() const { return 2 * a4 + a1 * a3; }
    long long b6() const { return a3 * a3 + 4 * a6; }
    long long b8() const {
        return a1 * a1 * a6 + 4 * a2 * a6 - a1 * a3 * a4 + a2 * a3 * a3 - a4 * a4;
    }
    long long c4() const { return b2() * b2() - 24 * b4(); }
    long long c6() const {
        return -b2() * b2() * b2() + 36 * b2() * b4() - 216 * b6();
    }
    __int128 discriminant() const {
        __int128 B2 = b2(), B4 = b4(), B6 = b6(), B8 = b8();
        return -B2 * B2 * B8 - 8 * B4 * B4 * B4 - 27 * B6 * B6 + 9 * B2 * B4 * B6;
    }
};

// Model invariants: nonzero discriminant, and every prime of bad reduction
// (equivalently every prime dividing the conductor) divides the discriminant.
inline void validate_curve(const CurveModel& e) {
    __int128 disc = e.discriminant();
    if (disc == 0) throw SingularModel("curve '" + e.label + "': discriminant is zero");
    if (e.conductor <= 0) throw ConfigError("curve '" + e.label + "': conductor must be positive");
    for (const auto& pe : factorize(e.conductor)) {
        if (disc % pe.p != 0)
            throw ConfigError("curve '" + e.label + "': conductor prime " +
                              std::to_string(pe.p) + " does not divide the discriminant");
    }
}

inline long long mod_reduce(long long x, long long p) {
    long long r = x % p;
    return r < 0 ? r + p : r;
}

// #E(F_p) including the point at infinity, one pass over x completing the
// square (char != 2); the y-solution count per x is 1 + chi(4x^3+b2x^2+2b4x+b6)
// with chi read off a precomputed square table.
inline long long count_points(const CurveModel& e, long long p) {
    if (!is_prime(p)) throw DomainError("count_points: p must be prime");
    if (e.conductor % p == 0)
        throw BadReduction("count_points: p=" + std::to_string(p) + " divides the conductor");
    if (p == 2) {
        long long n = 1;  // infinity
        for (long long x = 0; x < 2; ++x)
            for (long long y = 0; y < 2; ++y) {
                long long lhs = y * y + e.a1 * x * y + e.a3 * y;
                long long rhs = x * x * x + e.a2 * x * x + e.a4 * x + e.a6;
                if (mod_reduce(lhs - rhs, 2) == 0) ++n;
            }
        return n;
    }
    std::vector<signed char> chi(static_cast<size_t>(p), -1);
    chi[0] = 0;
    for (long long y = 1; y <= (p - 1) / 2; ++y)
        chi[static_cast<size_t>(y * y % p)] = 1;
    const long long B2 = mod_reduce(e.b2(), p), B4 = mod_reduce(e.b4(), p),
                    B6 = mod_reduce(e.b6(), p);
    long long sum = 0;
    for (long long x = 0; x < p; ++x) {
        long long r = (4 * x + B2) % p;  // Horner on 4x^3 + b2 x^2 + 2 b4 x + b6
        r = (r * x + 2 * B4) % p;
        r = (r * x + B6) % p;
        sum += chi[static_cast<size_t>(r)];
    }
    return p + 1 + sum;
}

// Independent counter: same character sum but with chi evaluated through
// Euler's criterion a^{(p-1)/2} mod p instead of a square table.
inline long long count_points_character_sum(const CurveModel& e, long long p) {
    if (!is_prime(p)) throw DomainError("count_points_character_sum: p must be prime");
    if (e.conductor % p == 0)
        throw BadReduction("count_points_character_sum: p divides the conductor");
    if (p == 2) return count_points(e, 2);
    const long long B2 = mod_reduce(e.b2(), p), B4 = mod_reduce(e.b4(), p),
                    B6 = mod_reduce(e.b6(), p);
    long long sum = 0;
    for (long long x = 0; x < p; ++x) {
        long long r = (4 * x + B2) % p;
        r = (r * x + 2 * B4) % p;
        r = (r * x + B6) % p;
        if (r == 0) continue;
        long long s = mod_pow(r, (p - 1) / 2, p);
        sum += (s == 1) ? 1 : -1;
    }
    return p + 1 + sum;
}

enum class ReductionType { Additive, SplitMultiplicative, NonsplitMultiplicative };

// Classify the reduction of E mod p for p | N from the singular point of the
// reduced curve: a double tangent means additive; otherwise the node is
// split or non-split according to whether the tangent-slope discriminant
// a1^2 + 4(3 x0 + a2) is a square mod p.
inline ReductionType bad_reduction_type(const CurveModel& e, long long p) {
    if (e.conductor % p != 0)
        throw DomainError("bad_reduction_type: p does not divide the conductor");
    long long x0 = -1, y0 = -1;
    for (long long x = 0; x < p && x0 < 0; ++x) {
        for (long long y = 0; y < p; ++y) {
            long long f = y * y + e.a1 * x * y + e.a3 * y - (x * x * x + e.a2 * x * x + e.a4 * x + e.a6);
            long long fx = e.a1 * y - (3 * x * x + 2 * e.a2 * x + e.a4);
            long long fy = 2 * y + e.a1 * x + e.a3;
            if (mod_reduce(f, p) == 0 && mod_reduce(fx, p) == 0 && mod_reduce(fy, p) == 0) {
                x0 = x;
                y0 = y;
                break;
            }
        }
    }
    (void)y0;
    if (x0 < 0)
        throw SingularModel("bad_reduction_type: no singular point found mod " + std::to_string(p) +
                            " (model not minimal at p?)");
    if (p == 2) {
        if (mod_reduce(e.a1, 2) == 0) return ReductionType::Additive;
        return mod_reduce(3 * x0 + e.a2, 2) == 0 ? ReductionType::SplitMultiplicative
                                                 : ReductionType::NonsplitMultiplicative;
    }
    long long disc = mod_reduce(e.a1 * e.a1 + 4 * (3 * x0 + e.a2), p);
    if (disc == 0) return ReductionType::Additive;
    return mod_pow(disc, (p - 1) / 2, p) == 1 ? ReductionType::SplitMultiplicative
                                              : ReductionType::NonsplitMultiplicative;
}

// a_p for any prime: 1 + p - #E(F_p) at good primes, the standard 0 / +1 / -1
// at additive / split / non-split bad primes.
inline long long ap_from_curve(const CurveModel& e, long long p) {
    if (!is_prime(p)) throw DomainError("ap_from_curve: p must be prime");
    if (e.conductor % p != 0) return 1 + p - count_points(e, p);
    switch (bad_reduction_type(e, p)) {
        case ReductionType::Additive: return 0;
        case ReductionType::SplitMultiplicative: return 1;
        case ReductionType::NonsplitMultiplicative: return -1;
    }
    return 0;
}

// ------------------------------------------------------------ catalog I/O

struct CurveCatalog {
    std::vector<CurveModel> curves;
    std::string source_path;
    std::uint64_t checksum = 0;

    const CurveModel* find(std::string_view label) const {
        for (const auto& c : curves)
            if (c.label == label) return &c;
        return nullptr;
    }

    // One record per line: label [a1,a2,a3,a4,a6] conductor [rank]
    static CurveCatalog parse(const std::string& text) {
        CurveCatalog cat;
        cat.checksum = fnv1a64(text);
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            std::istringstream ls(line);
            std::string label, coeffs;
            if (!(ls >> label)) continue;  // blank
            if (!(ls >> coeffs))
                throw ParseError("catalog line " + std::to_string(lineno) + ": missing coefficients");
            if (coeffs.front() != '[' || coeffs.back() != ']')
                throw ParseError("catalog line " + std::to_string(lineno) + ": expected [a1,a2,a3,a4,a6]");
            CurveModel e;
            e.label = label;
            std::string inner = coeffs.substr(1, coeffs.size() - 2);
            for (auto& ch : inner)
                if (ch == ',') ch = ' ';
            std::istringstream cs(inner);
            if (!(cs >> e.a1 >> e.a2 >> e.a3 >> e.a4 >> e.a6))
                throw ParseError("catalog line " + std::to_string(lineno) + ": bad coefficient list");
            if (!(ls >> e.conductor))
                throw ParseError("catalog line " + std::to_string(lineno) + ": missing conductor");
            int rank;
            if (ls >> rank) e.known_rank = rank;
            validate_curve(e);
            cat.curves.push_back(std::move(e));
        }
        return cat;
    }

    static CurveCatalog load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ConfigError("cannot open curve catalog: " + path);
        std::ostringstream ss;
        ss << in.rdbuf();
        CurveCatalog cat = parse(ss.str());
        cat.source_path = path;
        return cat;
    }
};

// "label" from the catalog, or an inline model "a1,a2,a3,a4,a6:N".
inline CurveModel resolve_curve(const std::string& spec, const CurveCatalog& cat) {
    if (spec.find(':') == std::string::npos) {
        const CurveModel* c = cat.find(spec);
        if (!c) throw ConfigError("unknown curve label: " + spec);
        return *c;
    }
    const auto colon = spec.find(':');
    std::string inner = spec.substr(0, colon);
    for (auto& ch : inner)
        if (ch == ',') ch = ' ';
    CurveModel e;
    e.label = spec;
    std::istringstream cs(inner);
    if (!(cs >> e.a1 >> e.a2 >> e.a3 >> e.a4 >> e.a6))
        throw ParseError("bad inline curve spec: " + spec);
    e.conductor = std::stoll(spec.substr(colon + 1));
    validate_curve(e);
    return e;
}

// ------------------------------------------------- angles and eigenvalues

// theta_p = arccos(a_p / 2 sqrt p), defined whenever |a_p| <= 2 sqrt p.
inline double theta_from_ap(double ap, long long p) {
    const double bound = 2.0 * std::sqrt(static_cast<double>(p));
    double c = ap / bound;
    if (std::abs(c) > 1.0 + 1e-12)
        throw HasseBoundViolation("theta_from_ap: |a_p| = " + format_double(std::abs(ap)) +
                                  " exceeds 2 sqrt p = " + format_double(bound));
    c = std::clamp(c, -1.0, 1.0);
    return std::acos(c);
}

inline double ap_from_theta(double theta, long long p) {
    if (theta < -1e-12 || theta > kPi + 1e-12)
        throw DomainError("ap_from_theta: angle outside [0, pi]");
    return 2.0 * std::sqrt(static_cast<double>(p)) * std::cos(theta);
}

enum class SystemOrigin { FromCurve, FromAngles, Manual };

struct HeckeSystem {
    long long level = 1;
    std::map<long long, double> ap;            // prime -> eigenvalue
    std::map<long long, long long> ap_exact;   // populated when integral (curve systems)
    SystemOrigin origin = SystemOrigin::Manual;
    std::string label;

    bool has_exact() const { return !ap_exact.empty() && ap_exact.size() == ap.size(); }
};

inline void validate_system(const HeckeSystem& s) {
    for (const auto& [p, a] : s.ap) {
        if (s.level % p != 0) {
            if (std::abs(a) > 2.0 * std::sqrt(static_cast<double>(p)) + 1e-9)
                throw HasseBoundViolation("HeckeSystem: a_" + std::to_string(p) +
                                          " violates the Hasse bound");
        } else if (s.origin == SystemOrigin::FromCurve) {
            if (a != -1.0 && a != 0.0 && a != 1.0)
                throw ConfigError("HeckeSystem: bad-prime a_" + std::to_string(p) +
                                  " must be in {-1,0,1}");
        }
    }
}

inline HeckeSystem hecke_system_from_curve(const CurveModel& e, long long max_prime) {
    HeckeSystem s;
    s.level = e.conductor;
    s.origin = SystemOrigin::FromCurve;
    s.label = e.label;
    for (int p : primes_up_to(static_cast<int>(max_prime))) {
        long long a = ap_from_curve(e, p);
        s.ap[p] = static_cast<double>(a);
        s.ap_exact[p] = a;
    }
    validate_system(s);
    return s;
}

struct AngleProfile {
    std::map<long long, double> angles;  // prime -> theta in [0, pi]
};

inline void validate_profile(const AngleProfile& prof) {
    for (const auto& [p, th] : prof.angles)
        if (th < -1e-12 || th > kPi + 1e-12)
            throw DomainError("AngleProfile: theta_" + std::to_string(p) + " outside [0, pi]");
}

inline AngleProfile angle_profile_from_system(const HeckeSystem& s) {
    AngleProfile prof;
    for (const auto& [p, a] : s.ap) prof.angles[p] = theta_from_ap(a, p);
    return prof;
}

inline HeckeSystem hecke_system_from_angles(const AngleProfile& prof, long long level = 1) {
    validate_profile(prof);
    HeckeSystem s;
    s.level = level;
    s.origin = SystemOrigin::FromAngles;
    for (const auto& [p, th] : prof.angles) s.ap[p] = ap_from_theta(th, p);
    return s;
}

// --------------------------------------------------------- q-expansions

struct GrowthBound {
    enum class Mode { Ramanujan, Supplied };
    Mode mode = Mode::Ramanujan;
    double constant = 1.0;  // |a_n| <= constant * d(n) * sqrt(n)

    static GrowthBound ramanujan() { return {Mode::Ramanujan, 1.0}; }
    static GrowthBound supplied(double c) { return {Mode::Supplied, c}; }
};

struct QExpansion {
    int truncation = 0;       // coefficients stored for 1 <= n <= truncation
    std::vector<cplx> a;      // a[0] unused
    GrowthBound growth = GrowthBound::ramanujan();
    bool normalized = false;
    long long level = 0;      // 0 when unknown / not applicable
    std::string label;        // matched rational newform label, empty otherwise
    std::vector<long long> exact;  // integer coefficients when available (size B+1)

    bool is_matched() const { return !label.empty(); }
    bool has_exact() const { return !exact.empty(); }
    cplx coeff(long long n) const { return n >= 1 && n <= truncation ? a[static_cast<size_t>(n)] : cplx{0.0}; }
};

inline void validate_expansion(const QExpansion& f) {
    if (f.normalized && f.truncation >= 1 && std::abs(f.a[1] - cplx{1.0}) > 1e-12)
        throw ConfigError("QExpansion flagged normalized but a_1 != 1");
    if (f.growth.mode == GrowthBound::Mode::Ramanujan) {
        for (long long n = 1; n <= f.truncation; ++n) {
            double bound = divisor_count(n) * std::sqrt(static_cast<double>(n));
            if (std::abs(f.a[static_cast<size_t>(n)]) > bound * (1.0 + 1e-9))
                throw ConfigError("QExpansion: a_" + std::to_string(n) +
                                  " violates the declared Ramanujan bound");
        }
    }
}

enum class HeckeMode { Newform, Deformed };

namespace detail {

// Fill a[1..B] from prime values via the prime-power recurrence and
// coprime multiplicativity. cp(p) is the recurrence coefficient:
// delta_N(p) in Newform mode, identically 1 in Deformed mode.
template <typename T, typename ApFn, typename CpFn>
std::vector<T> extend_table(int B, ApFn&& ap_of, CpFn&& cp_of) {
    std::vector<T> a(static_cast<size_t>(B) + 1, T{});
    if (B >= 1) a[1] = T{1};
    const auto spf = smallest_prime_factor(B);
    for (int p : primes_up_to(B)) {
        const T ap = ap_of(p);
        const T cp = cp_of(p);
        // a_{p^{r+1}} = a_p a_{p^r} - cp * p * a_{p^{r-1}}
        long long pr = p;  // p^r
        T prev = T{1}, cur = ap;
        while (pr <= B) {
            a[static_cast<size_t>(pr)] = cur;
            if (pr > B / p) break;
            T next = ap * cur - cp * T(p) * prev;
            prev = cur;
            cur = next;
            pr *= p;
        }
    }
    for (int n = 2; n <= B; ++n) {
        int p = spf[n];
        long long pk = p;
        int m = n / p;
        while (m % p == 0) {
            m /= p;
            pk *= p;
        }
        if (m > 1) a[n] = a[static_cast<size_t>(pk)] * a[m];
    }
    return a;
}

}  // namespace detail

inline QExpansion extend_coefficients(const HeckeSystem& sys, int B, HeckeMode mode) {
    QExpansion f;
    f.truncation = B;
    f.normalized = true;
    f.level = sys.level;
    if (sys.origin == SystemOrigin::FromCurve) f.label = sys.label;
    auto ap_of = [&](int p) -> double {
        auto it = sys.ap.find(p);
        if (it == sys.ap.end())
            throw MissingPrime("extend_coefficients: a_" + std::to_string(p) + " not available");
        return it->second;
    };
    auto cp_of = [&](int p) -> double {
        if (mode == HeckeMode::Deformed) return 1.0;
        return sys.level % p == 0 ? 0.0 : 1.0;
    };
    auto table = detail::extend_table<double>(B, ap_of, cp_of);
    f.a.assign(table.size(), cplx{});
    for (size_t i = 0; i < table.size(); ++i) f.a[i] = table[i];
    if (sys.has_exact()) {
        auto ap_exact = [&](int p) -> long long {
            auto it = sys.ap_exact.find(p);
            if (it == sys.ap_exact.end())
                throw MissingPrime("extend_coefficients: exact a_" + std::to_string(p) + " missing");
            return it->second;
        };
        auto cp_exact = [&](int p) -> long long {
            if (mode == HeckeMode::Deformed) return 1;
            return sys.level % p == 0 ? 0 : 1;
        };
        f.exact = detail::extend_table<long long>(B, ap_exact, cp_exact);
    }
    return f;
}

inline QExpansion extend_coefficients(const AngleProfile& prof, int B, HeckeMode mode,
                                      long long level = 1) {
    return extend_coefficients(hecke_system_from_angles(prof, level), B, mode);
}

// Convenience: curve -> newform expansion with exact integer coefficients.
inline QExpansion newform_expansion(const CurveModel& e, int B) {
    return extend_coefficients(hecke_system_from_curve(e, B), B, HeckeMode::Newform);
}

// Coefficientwise s f + t g. The result is generally not a Hecke system;
// growth bounds add, matching flags are dropped unless the levels agree.
inline QExpansion linear_combination(cplx s, const QExpansion& f, cplx t, const QExpansion& g) {
    QExpansion h;
    h.truncation = std::max(f.truncation, g.truncation);
    h.a.assign(static_cast<size_t>(h.truncation) + 1, cplx{});
    for (long long n = 1; n <= h.truncation; ++n)
        h.a[static_cast<size_t>(n)] = s * f.coeff(n) + t * g.coeff(n);
    h.growth = GrowthBound::supplied(std::abs(s) * f.growth.constant +
                                     std::abs(t) * g.growth.constant);
    h.level = (f.level == g.level) ? f.level : 0;
    h.normalized = std::abs(h.truncation >= 1 ? h.a[1] - cplx{1.0} : cplx{1.0}) < 1e-12;
    return h;
}

// ------------------------------------------------------ relation checking

struct HeckeViolation {
    long long n;
    std::string kind;  // "prime-power" or "multiplicative"
    double residual;
};

struct HeckeReport {
    std::vector<HeckeViolation> violations;
    bool ok() const { return violations.empty(); }
};

// Re-checks every index n <= B: prime powers against the recurrence,
// composites against a_{p^k} a_m with p the smallest prime factor of n.
inline HeckeReport verify_hecke_relations(const QExpansion& f, long long N, HeckeMode mode,
                                          double tol = 1e-9) {
    HeckeReport rep;
    const int B = f.truncation;
    if (B < 1) return rep;
    const auto spf = smallest_prime_factor(B);
    auto a = [&](long long n) { return f.a[static_cast<size_t>(n)]; };
    for (int p : primes_up_to(B)) {
        double cp = (mode == HeckeMode::Deformed) ? 1.0 : (N % p == 0 ? 0.0 : 1.0);
        long long pr = p;  // check a_{p^{r+1}} for p^{r+1} <= B
        while (pr <= B / p) {
            long long pr1 = pr * p;
            cplx prev = (pr == p) ? cplx{1.0} : a(pr / p);  // a_{p^{r-1}}, a_{p^0} = 1
            cplx expect = a(p) * a(pr) - cp * static_cast<double>(p) * prev;
            double res = std::abs(a(pr1) - expect);
            double scale = std::max({1.0, std::abs(a(p) * a(pr)), static_cast<double>(p) * std::abs(prev)});
            if (res > tol * scale) rep.violations.push_back({pr1, "prime-power", res});
            pr = pr1;
        }
    }
    for (long long n = 2; n <= B; ++n) {
        int p = spf[static_cast<size_t>(n)];
        long long pk = p, m = n / p;
        while (m % p == 0) {
            m /= p;
            pk *= p;
        }
        if (m == 1) continue;
        double res = std::abs(a(n) - a(pk) * a(m));
        double scale = std::max(1.0, std::abs(a(pk) * a(m)));
        if (res > tol * scale) rep.violations.push_back({n, "multiplicative", res});
    }
    return rep;
}

// ------------------------------------------------------- newform matching

// Agreement with a catalog system at every good prime p <= P0 (p coprime to
// both levels). This is the finite stand-in for "a_p(f) = a_p(F) for almost
// all p".
inline std::optional<std::string> detect_newform_match(const HeckeSystem& sys,
                                                       const CurveCatalog& cat, long long P0 = 100,
                                                       double tol = 1e-6) {
    const auto primes = primes_up_to(static_cast<int>(P0));
    for (const auto& e : cat.curves) {
        bool all_match = true;
        for (int p : primes) {
            if (sys.level % p == 0 || e.conductor % p == 0) continue;
            auto it = sys.ap.find(p);
            if (it == sys.ap.end()) {
                all_match = false;
                break;
            }
            if (std::abs(it->second - static_cast<double>(ap_from_curve(e, p))) > tol) {
                all_match = false;
                break;
            }
        }
        if (all_match) return e.label;
    }
    return std::nullopt;
}

inline std::optional<std::string> detect_newform_match(const AngleProfile& prof,
                                                       const CurveCatalog& cat, long long P0 = 100,
                                                       double tol = 1e-6) {
    return detect_newform_match(hecke_system_from_angles(prof), cat, P0, tol);
}

}  // namespace hlab::coefficients
