#pragma once

// Evaluation of truncated q-expansions on H and their path integrals.
//
// A QExpansion is a finite sum F_B(z) = sum_{n<=B} a_n e^{2 pi i n z}; it is
// entire, so integrals between interior points are exact up to quadrature.
// What separates cases is the *tail* of the underlying infinite series:
//   - interior points / cusp at infinity: the tail integral has a closed
//     geometric bound from |a_n| <= C d(n) sqrt(n),
//   - a rational cusp endpoint: the tail bound diverges. For a matched
//     newform the integral is computed through the Fricke involution
//     z -> -1/(Nz); otherwise it is truncated at Im = y_cut and reported as
//     regularized together with its cutoff sensitivity.
//
// L(F,1) is defined by the Mellin identity -2 pi i int_0^{i inf} F dz and
// comes in three routes (Termwise / PathIntegral / SmoothedSum).

#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hlab/coefficients.hpp"
#include "hlab/util.hpp"

namespace hlab::pathint {

using coefficients::QExpansion;

// ------------------------------------------------------ series evaluation

// Bound on |sum_{n > m} a_n q^n| at |q| = e^{-2 pi y}, from
// |a_n| <= C d(n) sqrt(n) <= 2 C n:  2C x^{m+1} ((m+1) - m x) / (1-x)^2.
inline double series_tail_bound(const QExpansion& f, long long m, double y) {
    const double C = f.growth.constant;
    if (C == 0.0) return 0.0;
    const double x = std::exp(-kTwoPi * y);
    if (x >= 1.0) return std::numeric_limits<double>::infinity();
    const double xm = std::pow(x, static_cast<double>(m + 1));
    return 2.0 * C * xm * ((m + 1) - m * x) / ((1.0 - x) * (1.0 - x));
}

// Bound on |int_{y0}^{inf} (F - F_B)(x + iy) dy| along vertical tails, from
// |a_n|/n <= 2C:  (C/pi) x^{m+1} / (1-x).
inline double series_tail_integral_bound(const QExpansion& f, long long m, double y0) {
    const double C = f.growth.constant;
    if (C == 0.0) return 0.0;
    const double x = std::exp(-kTwoPi * y0);
    if (x >= 1.0) return std::numeric_limits<double>::infinity();
    return (C / kPi) * std::pow(x, static_cast<double>(m + 1)) / (1.0 - x);
}

// Smallest working truncation m <= B whose dropped tail stays below tol at
// height y (binary search on the closed-form bound).
inline int series_terms_needed(const QExpansion& f, double y, double tol) {
    if (f.growth.constant == 0.0) return f.truncation;
    if (tol <= 0.0 || series_tail_bound(f, f.truncation, y) > tol) return f.truncation;
    int lo = 1, hi = f.truncation;
    while (lo < hi) {
        int mid = lo + (hi - lo) / 2;
        if (series_tail_bound(f, mid, y) <= tol) hi = mid;
        else lo = mid + 1;
    }
    return lo;
}

// Horner evaluation of the first m terms.
inline cplx evaluate_series_n(const QExpansion& f, cplx z, int m) {
    const cplx q = std::exp(kTwoPi * kI * z);
    cplx s = 0.0;
    for (int n = std::min<int>(m, f.truncation); n >= 1; --n)
        s = s * q + f.a[static_cast<size_t>(n)];
    return s * q;
}

struct SeriesValue {
    cplx value;
    double tail_bound;
    int terms_used;
};

// F_B(z) with a rigorous tail bound; throws TailTooLarge when the declared
// growth bound cannot certify the requested tolerance at this height.
inline SeriesValue evaluate_series(const QExpansion& f, cplx z, double tol = 1e-9) {
    if (z.imag() <= 0.0) throw DomainError("evaluate_series: Im z must be positive");
    const double full_bound = series_tail_bound(f, f.truncation, z.imag());
    if (tol > 0.0 && full_bound > tol)
        throw TailTooLarge("evaluate_series: tail bound " + format_double(full_bound) +
                           " exceeds tolerance " + format_double(tol) + " at Im z = " +
                           format_double(z.imag()) + " (truncation B = " +
                           std::to_string(f.truncation) + ")");
    const int m = series_terms_needed(f, z.imag(), tol > 0.0 ? 0.25 * tol : 0.0);
    return {evaluate_series_n(f, z, m), series_tail_bound(f, m, z.imag()), m};
}

// Termwise antiderivative hat F(z) = (1/(2 pi i)) sum (a_n/n) q^n; entire,
// exact for the truncated series, defined for Im z >= 0 (|q| <= 1).
inline cplx termwise_antiderivative(const QExpansion& f, cplx z) {
    const cplx q = std::exp(kTwoPi * kI * z);
    cplx s = 0.0;
    for (int n = f.truncation; n >= 1; --n)
        s = s * q + f.a[static_cast<size_t>(n)] / static_cast<double>(n);
    s *= q;
    return s / (kTwoPi * kI);
}

// int_{z0}^{i inf} F_B dz = (i / 2 pi) sum (a_n / n) e^{2 pi i n z0}
inline cplx integral_to_infinity(const QExpansion& f, cplx z0) {
    return -termwise_antiderivative(f, z0);
}

// ------------------------------------------------------------- path specs

struct Cusp {
    bool at_infinity = false;
    long long num = 0, den = 1;  // rational cusp num/den, den >= 1

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    bool is_integer() const { return den == 1; }
    std::string to_string() const {
        if (at_infinity) return "inf";
        if (den == 1) return std::to_string(num);
        return std::to_string(num) + "/" + std::to_string(den);
    }
};

struct Segment {
    enum class Kind { Line, Arc };
    Kind kind = Kind::Line;
    cplx z0, z1;  // endpoints (derived for arcs)
    cplx center;  // Arc only
    double radius = 0.0, th0 = 0.0, th1 = 0.0;

    static Segment line(cplx a, cplx b) {
        Segment s;
        s.z0 = a;
        s.z1 = b;
        return s;
    }
    static Segment arc(cplx c, double r, double a0, double a1) {
        Segment s;
        s.kind = Kind::Arc;
        s.center = c;
        s.radius = r;
        s.th0 = a0;
        s.th1 = a1;
        s.z0 = c + std::polar(r, a0);
        s.z1 = c + std::polar(r, a1);
        return s;
    }
    cplx at(double t) const {
        if (kind == Kind::Line) return z0 + t * (z1 - z0);
        return center + std::polar(radius, th0 + t * (th1 - th0));
    }
    cplx deriv(double t) const {
        if (kind == Kind::Line) return z1 - z0;
        return kI * (th1 - th0) * std::polar(radius, th0 + t * (th1 - th0));
    }
    double length() const {
        if (kind == Kind::Line) return std::abs(z1 - z0);
        return radius * std::abs(th1 - th0);
    }
    bool vertical() const {
        return kind == Kind::Line && std::abs(z0.real() - z1.real()) < 1e-14;
    }
    double min_im() const {
        double m = std::min(z0.imag(), z1.imag());
        if (kind == Kind::Arc) {
            double lo = std::min(th0, th1), hi = std::max(th0, th1);
            double th = -kPi / 2;  // lowest point of the circle
            while (th < lo) th += kTwoPi;
            if (th <= hi) m = std::min(m, center.imag() - radius);
        }
        return m;
    }
};

struct PathSpec {
    std::optional<Cusp> start_cusp;
    std::vector<Segment> segments;
    std::optional<Cusp> end_cusp;

    bool has_interior() const { return !segments.empty(); }
    cplx first_point() const {
        if (segments.empty()) throw DomainError("PathSpec: no interior points");
        return segments.front().z0;
    }
    cplx last_point() const {
        if (segments.empty()) throw DomainError("PathSpec: no interior points");
        return segments.back().z1;
    }
    PathSpec reversed() const {
        PathSpec r;
        r.start_cusp = end_cusp;
        r.end_cusp = start_cusp;
        for (auto it = segments.rbegin(); it != segments.rend(); ++it) {
            Segment s = *it;
            std::swap(s.z0, s.z1);
            if (s.kind == Segment::Kind::Arc) std::swap(s.th0, s.th1);
            r.segments.push_back(s);
        }
        return r;
    }

    static PathSpec parse(const std::string& text);
    std::string to_string() const;
};

namespace detail {

inline cplx parse_complex(const std::string& tok) {
    std::string s;
    for (char ch : tok)
        if (!std::isspace(static_cast<unsigned char>(ch))) s += ch;
    if (s.empty()) throw ParseError("empty complex literal");
    bool has_i = s.back() == 'i' || s.back() == 'I';
    if (!has_i) return {std::stod(s), 0.0};
    s.pop_back();
    size_t split = std::string::npos;
    for (size_t k = s.size(); k-- > 1;) {
        if ((s[k] == '+' || s[k] == '-') && s[k - 1] != 'e' && s[k - 1] != 'E') {
            split = k;
            break;
        }
    }
    if (split == std::string::npos) {
        if (s.empty() || s == "+") return {0.0, 1.0};
        if (s == "-") return {0.0, -1.0};
        return {0.0, std::stod(s)};
    }
    double re = std::stod(s.substr(0, split));
    std::string im = s.substr(split);
    if (im == "+") return {re, 1.0};
    if (im == "-") return {re, -1.0};
    return {re, std::stod(im)};
}

inline Cusp parse_cusp(const std::string& tok) {
    std::string s;
    for (char ch : tok)
        if (!std::isspace(static_cast<unsigned char>(ch))) s += ch;
    Cusp c;
    if (s == "inf" || s == "oo" || s == "infinity") {
        c.at_infinity = true;
        return c;
    }
    auto slash = s.find('/');
    if (slash == std::string::npos) {
        c.num = std::stoll(s);
        return c;
    }
    c.num = std::stoll(s.substr(0, slash));
    c.den = std::stoll(s.substr(slash + 1));
    if (c.den < 0) {
        c.den = -c.den;
        c.num = -c.num;
    }
    if (c.den == 0) throw ParseError("cusp with zero denominator");
    long long g = std::gcd(std::abs(c.num), c.den);
    if (g > 1) {
        c.num /= g;
        c.den /= g;
    }
    return c;
}

inline std::vector<std::string> split_args(const std::string& inner) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : inner) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace detail

// Grammar (items separated by ';'):
//   line(z0, z1)        straight segment
//   to(z)               straight segment from the previous endpoint
//   arc(c, r, th0, th1) circular arc, angles in radians
//   from_cusp(c)        only first;  c is 'inf', an integer, or p/q
//   to_cusp(c)          only last
inline PathSpec PathSpec::parse(const std::string& text) {
    PathSpec path;
    std::string item;
    std::vector<std::string> items;
    for (char ch : text) {
        if (ch == ';') {
            items.push_back(item);
            item.clear();
        } else {
            item += ch;
        }
    }
    items.push_back(item);
    for (auto& raw : items) {
        std::string s;
        for (char ch : raw)
            if (!std::isspace(static_cast<unsigned char>(ch))) s += ch;
        if (s.empty()) continue;
        auto lp = s.find('(');
        if (lp == std::string::npos || s.back() != ')')
            throw ParseError("path item '" + raw + "': expected name(args)");
        std::string name = s.substr(0, lp);
        auto args = detail::split_args(s.substr(lp + 1, s.size() - lp - 2));
        if (name == "line") {
            if (args.size() != 2) throw ParseError("line() takes two points");
            path.segments.push_back(
                Segment::line(detail::parse_complex(args[0]), detail::parse_complex(args[1])));
        } else if (name == "to") {
            if (args.size() != 1) throw ParseError("to() takes one point");
            if (path.segments.empty()) throw ParseError("to() needs a previous segment");
            path.segments.push_back(
                Segment::line(path.segments.back().z1, detail::parse_complex(args[0])));
        } else if (name == "arc") {
            if (args.size() != 4) throw ParseError("arc() takes center, radius, th0, th1");
            path.segments.push_back(Segment::arc(detail::parse_complex(args[0]), std::stod(args[1]),
                                                 std::stod(args[2]), std::stod(args[3])));
        } else if (name == "from_cusp") {
            if (!path.segments.empty() || path.start_cusp)
                throw ParseError("from_cusp() must be the first item");
            path.start_cusp = detail::parse_cusp(args.at(0));
        } else if (name == "to_cusp") {
            if (path.end_cusp) throw ParseError("duplicate to_cusp()");
            path.end_cusp = detail::parse_cusp(args.at(0));
        } else {
            throw ParseError("unknown path item '" + name + "'");
        }
    }
    for (size_t i = 0; i + 1 < path.segments.size(); ++i)
        if (std::abs(path.segments[i].z1 - path.segments[i + 1].z0) > 1e-9)
            throw ParseError("path segments are not contiguous");
    for (const auto& seg : path.segments)
        if (seg.z0.imag() <= 0.0 || seg.z1.imag() <= 0.0 || seg.min_im() <= 0.0)
            throw ParseError("path leaves the upper half-plane");
    if (!path.has_interior() && !(path.start_cusp && path.end_cusp))
        throw ParseError("path needs at least one segment or two cusps");
    return path;
}

inline std::string PathSpec::to_string() const {
    std::string out;
    auto app = [&](const std::string& s) {
        if (!out.empty()) out += "; ";
        out += s;
    };
    if (start_cusp) app("from_cusp(" + start_cusp->to_string() + ")");
    for (const auto& seg : segments) {
        if (seg.kind == Segment::Kind::Line)
            app("line(" + format_complex(seg.z0) + ", " + format_complex(seg.z1) + ")");
        else
            app("arc(" + format_complex(seg.center) + ", " + format_double(seg.radius) + ", " +
                format_double(seg.th0) + ", " + format_double(seg.th1) + ")");
    }
    if (end_cusp) app("to_cusp(" + end_cusp->to_string() + ")");
    return out;
}

// ------------------------------------------------------------ Fricke sign

// Functional-equation sign epsilon, from testing f(-1/(Nz)) = -eps N z^2 f(z)
// at sample points on |z| = 1/sqrt(N); all samples must agree.
inline int fricke_sign(const QExpansion& f, long long N, double consistency_tol = 1e-8) {
    if (N <= 0) throw MethodUnavailable("fricke_sign: positive level required");
    const double s = 1.0 / std::sqrt(static_cast<double>(N));
    // samples z = i rho e^{i eta} / sqrt N, kept away from the involution's
    // fixed point i/sqrt N where sign -1 forms vanish identically
    const std::pair<double, double> samples[] = {
        {1.10, 0.0}, {1.0, 0.15}, {1.0, -0.15}, {1.15, 0.20}, {1.20, -0.25},
        {1.0, 0.30}, {1.30, 0.10}, {1.25, -0.35}};
    std::vector<cplx> ratios;
    double scale = 0.0;
    std::vector<std::pair<cplx, cplx>> pairs;  // (f(z), N z^2 f(z) denominator data)
    for (auto [rho, eta] : samples) {
        cplx z = kI * std::polar(rho * s, eta);
        cplx zi = -1.0 / (static_cast<double>(N) * z);
        cplx fz = evaluate_series(f, z, 0.0).value;
        cplx fzi = evaluate_series(f, zi, 0.0).value;
        scale = std::max({scale, std::abs(fz), std::abs(fzi)});
        pairs.emplace_back(fz, fzi / (static_cast<double>(N) * z * z));
    }
    for (auto& [fz, num] : pairs)
        if (std::abs(fz) > 1e-6 * scale) ratios.push_back(num / fz);
    if (ratios.size() < 3)
        throw InconsistentSamples("fricke_sign: series vanishes at too many sample points");
    cplx mean = 0.0;
    for (cplx r : ratios) mean += r;
    mean /= static_cast<double>(ratios.size());
    double wr = std::round(mean.real());
    if (std::abs(wr) != 1.0 || std::abs(mean - cplx{wr, 0.0}) > consistency_tol)
        throw InconsistentSamples("fricke_sign: samples do not vote a consistent sign (mean " +
                                  format_complex(mean) + ")");
    for (cplx r : ratios)
        if (std::abs(r - cplx{wr, 0.0}) > consistency_tol)
            throw InconsistentSamples("fricke_sign: sample scatter exceeds tolerance");
    return static_cast<int>(-wr);  // f(-1/(Nz)) = -eps N z^2 f(z)
}

// ------------------------------------------------------------ integration

struct IntegrateOptions {
    double tol = 1e-11;              // absolute quadrature tolerance
    double rel_tol = 1e-11;
    double y_cut = 1e-3;             // regularization height at rational cusps
    double divergence_factor = 4.0;  // drift growth triggering DivergentCuspIntegral
    double split_height = 0.0;       // Fricke split y0 (0 -> 2 / sqrt N)
    int fricke_sign = 0;             // +-1 if already known, else detected
};

struct PathIntegral {
    cplx value{};
    double quad_error = 0.0;
    double trunc_bound = 0.0;  // bound on the dropped tail of the infinite series
    bool regularized = false;
    double cutoff_sensitivity = 0.0;
};

namespace detail {

inline void add_segment(const QExpansion& f, const Segment& seg, double tol, double rel_tol,
                        PathIntegral& acc) {
    if (seg.vertical()) {
        acc.value += termwise_antiderivative(f, seg.z1) - termwise_antiderivative(f, seg.z0);
        acc.trunc_bound += series_tail_integral_bound(f, f.truncation, seg.min_im());
        return;
    }
    const int terms = series_terms_needed(f, seg.min_im(), 0.01 * tol / std::max(1.0, seg.length()));
    auto integrand = [&](double t) { return evaluate_series_n(f, seg.at(t), terms) * seg.deriv(t); };
    double err = 0.0;
    acc.value += integrate_gk_adaptive(integrand, 0.0, 1.0, tol, rel_tol, &err);
    acc.quad_error += err;
    acc.trunc_bound += seg.length() * series_tail_bound(f, f.truncation, seg.min_im());
}

}  // namespace detail

// int_0^{i inf} F dz for a matched newform, via the Fricke split at iy0:
//   int_0^{i inf} = int_{i y0}^{i inf} F  -  w int_{i/(N y0)}^{i inf} F,
// where F(-1/(Nz)) = w N z^2 F(z) and w = -epsilon. Termwise closed forms.
inline PathIntegral fricke_integral_zero_to_infinity(const QExpansion& f, long long N,
                                                     const IntegrateOptions& opt = {}) {
    if (N <= 0) throw MethodUnavailable("fricke split: level unknown");
    const double y0 =
        opt.split_height > 0.0 ? opt.split_height : 2.0 / std::sqrt(static_cast<double>(N));
    const int eps = opt.fricke_sign != 0 ? opt.fricke_sign : fricke_sign(f, N, 1e-8);
    const int w = -eps;
    PathIntegral out;
    const double y1 = 1.0 / (static_cast<double>(N) * y0);
    out.value = integral_to_infinity(f, cplx{0.0, y0}) -
                static_cast<double>(w) * integral_to_infinity(f, cplx{0.0, y1});
    out.trunc_bound = series_tail_integral_bound(f, f.truncation, y0) +
                      series_tail_integral_bound(f, f.truncation, std::min(y0, y1));
    return out;
}

// Integral of F along the path. Endpoints at rational cusps of generic
// tail-carrying series are regularized at Im = y_cut with the sensitivity
// |v(y_cut) - v(y_cut/2)| reported; failure of the successive drifts to
// contract raises DivergentCuspIntegral.
inline PathIntegral integrate_path(const QExpansion& f, const PathSpec& path,
                                   const IntegrateOptions& opt = {}) {
    PathIntegral acc;
    const bool tail_free = f.growth.constant == 0.0;

    for (const auto& seg : path.segments) detail::add_segment(f, seg, opt.tol, opt.rel_tol, acc);

    // anchor for cusp pieces when the path has no interior segment
    cplx bare_anchor{0.0, 1.0};
    if (!path.has_interior()) {
        double x = 0.0;
        if (path.start_cusp && !path.start_cusp->at_infinity) x = path.start_cusp->value();
        if (path.end_cusp && !path.end_cusp->at_infinity) x = path.end_cusp->value();
        bare_anchor = cplx{x, 1.0};
    }

    if (path.end_cusp && path.end_cusp->at_infinity) {
        cplx z1 = path.has_interior() ? path.last_point() : bare_anchor;
        acc.value += integral_to_infinity(f, z1);
        acc.trunc_bound += series_tail_integral_bound(f, f.truncation, z1.imag());
    }
    if (path.start_cusp && path.start_cusp->at_infinity) {
        cplx z0 = path.has_interior() ? path.first_point() : bare_anchor;
        acc.value -= integral_to_infinity(f, z0);
        acc.trunc_bound += series_tail_integral_bound(f, f.truncation, z0.imag());
    }

    // int_{anchor}^{cusp} F dz, added with the given orientation
    auto rational_piece = [&](const Cusp& cusp, cplx anchor, int orientation) {
        if (tail_free) {
            cplx cz{cusp.value(), 0.0};
            acc.value += static_cast<double>(orientation) *
                         (termwise_antiderivative(f, cz) - termwise_antiderivative(f, anchor));
            return;
        }
        if (f.is_matched() && cusp.is_integer() && f.level > 0) {
            // periodicity moves the integer cusp to 0, the Fricke split finishes:
            // int_{anchor}^{m} = int_{anchor}^{i inf} - int_0^{i inf}
            PathIntegral zero_inf = fricke_integral_zero_to_infinity(f, f.level, opt);
            cplx val = integral_to_infinity(f, anchor) - zero_inf.value;
            acc.value += static_cast<double>(orientation) * val;
            acc.trunc_bound += series_tail_integral_bound(f, f.truncation, anchor.imag()) +
                               zero_inf.trunc_bound;
            return;
        }
        auto value_at = [&](double ycut) {
            Segment approach = Segment::line(anchor, cplx{cusp.value(), ycut});
            PathIntegral tmp;
            detail::add_segment(f, approach, opt.tol, opt.rel_tol, tmp);
            acc.quad_error += tmp.quad_error;
            return tmp.value;
        };
        cplx v1 = value_at(opt.y_cut);
        cplx v2 = value_at(opt.y_cut / 2.0);
        cplx v3 = value_at(opt.y_cut / 4.0);
        double drift1 = std::abs(v2 - v1), drift2 = std::abs(v3 - v2);
        if (drift2 > opt.divergence_factor * std::max(drift1, 1e-14) && drift2 > 10.0 * opt.tol)
            throw DivergentCuspIntegral(
                "integrate_path: regularized cusp value does not stabilize (drifts " +
                format_double(drift1) + " -> " + format_double(drift2) + ")");
        acc.regularized = true;
        acc.cutoff_sensitivity += drift1;
        acc.value += static_cast<double>(orientation) * v1;
    };

    if (path.end_cusp && !path.end_cusp->at_infinity)
        rational_piece(*path.end_cusp, path.has_interior() ? path.last_point() : bare_anchor, +1);
    if (path.start_cusp && !path.start_cusp->at_infinity)
        rational_piece(*path.start_cusp, path.has_interior() ? path.first_point() : bare_anchor, -1);
    return acc;
}

// ---------------------------------------------------------- period lattice

struct PeriodLattice {
    cplx omega1{}, omega2{};
    double err1 = 0.0, err2 = 0.0;
    std::string provenance1, provenance2;
};

inline PeriodLattice period_lattice(const QExpansion& f, const PathSpec& g1, const PathSpec& g2,
                                    const IntegrateOptions& opt = {}) {
    PeriodLattice L;
    auto r1 = integrate_path(f, g1, opt);
    auto r2 = integrate_path(f, g2, opt);
    L.omega1 = r1.value;
    L.omega2 = r2.value;
    L.err1 = r1.quad_error + r1.trunc_bound;
    L.err2 = r2.quad_error + r2.trunc_bound;
    L.provenance1 = g1.to_string();
    L.provenance2 = g2.to_string();
    return L;
}

// ---------------------------------------------------------------- L-values

enum class LMethod { Termwise, PathIntegral, SmoothedSum };

struct LValue {
    cplx value{};
    double quad_error = 0.0;
    double tail_bound = 0.0;
    LMethod method = LMethod::Termwise;
    int fricke = 0;  // sign used, when applicable
    bool regularized = false;
    double sensitivity = 0.0;
};

// L(F,1) := -2 pi i int_0^{i inf} F dz.
inline LValue l_value_at_1(const QExpansion& f, LMethod method, const IntegrateOptions& opt = {}) {
    LValue out;
    out.method = method;
    const bool tail_free = f.growth.constant == 0.0;
    switch (method) {
        case LMethod::Termwise: {
            // exact for the truncated series: int_0^{i inf} termwise
            cplx s = 0.0;
            for (int n = f.truncation; n >= 1; --n)
                s += f.a[static_cast<size_t>(n)] / static_cast<double>(n);
            out.value = s;
            out.tail_bound = tail_free ? 0.0 : std::numeric_limits<double>::infinity();
            return out;
        }
        case LMethod::PathIntegral: {
            if (f.is_matched() && f.level > 0 && !tail_free) {
                const int eps =
                    opt.fricke_sign != 0 ? opt.fricke_sign : fricke_sign(f, f.level, 1e-8);
                const int w = -eps;
                const double y0 = opt.split_height > 0.0
                                      ? opt.split_height
                                      : 2.0 / std::sqrt(static_cast<double>(f.level));
                const double y1 = 1.0 / (static_cast<double>(f.level) * y0);
                auto piece = [&](double ylo) {
                    // int_{i ylo}^{i inf}: quadrature up to Y, closed tail above
                    const double Y = std::max(2.0, 4.0 * ylo);
                    const int terms = series_terms_needed(f, ylo, 0.01 * opt.tol);
                    auto integrand = [&](double y) {
                        return evaluate_series_n(f, cplx{0.0, y}, terms) * kI;
                    };
                    double err = 0.0;
                    cplx v = integrate_gk_adaptive(integrand, ylo, Y, opt.tol, opt.rel_tol, &err);
                    out.quad_error += err;
                    out.tail_bound += series_tail_integral_bound(f, f.truncation, ylo);
                    return v + integral_to_infinity(f, cplx{0.0, Y});
                };
                cplx total = piece(y0) - static_cast<double>(w) * piece(y1);
                out.value = -kTwoPi * kI * total;
                out.fricke = eps;
                out.quad_error *= kTwoPi;
                out.tail_bound *= kTwoPi;
                return out;
            }
            PathSpec path;
            path.start_cusp = Cusp{};  // cusp 0
            path.end_cusp = Cusp{true, 0, 1};
            path.segments.push_back(Segment::line(cplx{0.0, 0.5}, cplx{0.0, 2.0}));
            auto r = integrate_path(f, path, opt);
            out.value = -kTwoPi * kI * r.value;
            out.quad_error = kTwoPi * r.quad_error;
            out.tail_bound = kTwoPi * r.trunc_bound;
            out.regularized = r.regularized;
            out.sensitivity = kTwoPi * r.cutoff_sensitivity;
            return out;
        }
        case LMethod::SmoothedSum: {
            if (!f.is_matched() || f.level <= 0)
                throw MethodUnavailable("SmoothedSum requires a matched newform with known level");
            const int eps = opt.fricke_sign != 0 ? opt.fricke_sign : fricke_sign(f, f.level, 1e-8);
            const double y = 1.0 / std::sqrt(static_cast<double>(f.level));
            cplx s = 0.0;
            for (int n = f.truncation; n >= 1; --n)
                s += f.a[static_cast<size_t>(n)] / static_cast<double>(n) * std::exp(-kTwoPi * n * y);
            out.value = (1.0 + eps) * s;
            out.fricke = eps;
            const double x = std::exp(-kTwoPi * y);
            out.tail_bound = 2.0 * 2.0 * f.growth.constant *
                             std::pow(x, static_cast<double>(f.truncation + 1)) / (1.0 - x);
            return out;
        }
    }
    throw MethodUnavailable("l_value_at_1: unknown method");
}

// L'(f,1) = 2 sum (a_n/n) E1(2 pi n / sqrt N), valid when eps = -1.
enum class DerivativeKernel { Library, ContinuedFraction };

struct LDerivative {
    double value = 0.0;
    double tail_bound = 0.0;
    int fricke = -1;
};

inline LDerivative l_derivative_at_1(const QExpansion& f, long long N,
                                     DerivativeKernel kernel = DerivativeKernel::Library,
                                     const IntegrateOptions& opt = {}) {
    if (!f.is_matched()) throw MethodUnavailable("l_derivative_at_1: matched newform required");
    const int eps = opt.fricke_sign != 0 ? opt.fricke_sign : fricke_sign(f, N, 1e-8);
    if (eps != -1)
        throw WrongSign("l_derivative_at_1: functional-equation sign is +1; formula requires -1");
    const double c = kTwoPi / std::sqrt(static_cast<double>(N));
    double s = 0.0;
    for (int n = 1; n <= f.truncation; ++n) {
        double an = f.a[static_cast<size_t>(n)].real();
        if (an == 0.0) continue;
        double x = c * n;
        if (x > 700.0) break;  // kernel underflows past this point
        s += an / n *
             ((kernel == DerivativeKernel::Library) ? exp_integral_e1_std(x)
                                                    : exp_integral_e1_cf(x));
    }
    LDerivative out;
    out.value = 2.0 * s;
    // |a_n/n| <= 2C and E1(x) <= e^{-x}/x
    const double x = std::exp(-c);
    out.tail_bound = 2.0 * 2.0 * f.growth.constant / (c * (f.truncation + 1)) *
                     std::pow(x, static_cast<double>(f.truncation + 1)) / (1.0 - x);
    out.fricke = eps;
    return out;
}

// --------------------------------------------- period basis construction

// Periods of group elements: phi(g) = int_alpha^{g alpha} F dz is
// independent of alpha for a weight-2 form and additive in g. For g with
// lower row (c, d), alpha = (-d + i)/c maps to (a + i)/c, keeping both
// endpoints at height 1/c.
struct PeriodBasis {
    cplx omega1{}, omega2{};
    std::vector<std::pair<long long, long long>> generators;  // (a, d) with c = N
};

inline cplx group_period(const QExpansion& f, long long a, long long b, long long c, long long d) {
    if (a * d - b * c != 1) throw DomainError("group_period: determinant must be 1");
    if (c == 0) return 0.0;  // translations have zero period
    cplx alpha{static_cast<double>(-d) / c, 1.0 / c};
    cplx galpha{static_cast<double>(a) / c, 1.0 / c};
    return termwise_antiderivative(f, galpha) - termwise_antiderivative(f, alpha);
}

namespace detail {

// Greedy completion: build a Z-basis of the discrete subgroup generated by
// the given vectors (assumed to span a rank-2 lattice).
inline std::pair<cplx, cplx> lattice_basis(std::vector<cplx> vecs, double eps = 1e-9) {
    auto near_zero = [&](cplx v) { return std::abs(v) < eps; };
    std::vector<cplx> basis;
    auto reduce_pair = [&](cplx& u, cplx& v) {
        // Lagrange reduction of a 2D basis
        for (int it = 0; it < 64; ++it) {
            if (std::abs(u) > std::abs(v)) std::swap(u, v);
            double mu = (v.real() * u.real() + v.imag() * u.imag()) / std::norm(u);
            double m = std::round(mu);
            if (m == 0.0) break;
            v -= m * u;
        }
    };
    for (cplx v : vecs) {
        if (near_zero(v)) continue;
        if (basis.empty()) {
            basis.push_back(v);
            continue;
        }
        if (basis.size() == 1) {
            cplx u = basis[0];
            double area = std::abs(u.real() * v.imag() - u.imag() * v.real());
            if (area > eps * std::abs(u) * std::abs(v)) {
                basis.push_back(v);
                reduce_pair(basis[0], basis[1]);
                continue;
            }
            // colinear: 1D Euclid
            double r = (std::abs(u) > std::abs(v)) ? 0.0 : 0.0;
            (void)r;
            cplx x = u, y = v;
            for (int it = 0; it < 128 && !near_zero(y); ++it) {
                double q = std::round((x.real() * y.real() + x.imag() * y.imag()) / std::norm(y));
                cplx rem = x - q * y;
                x = y;
                y = rem;
            }
            basis[0] = x;
            continue;
        }
        // express v in the current basis; integral coordinates mean v is inside
        cplx u1 = basis[0], u2 = basis[1];
        double det = u1.real() * u2.imag() - u1.imag() * u2.real();
        double xo = (v.real() * u2.imag() - v.imag() * u2.real()) / det;
        double yo = (u1.real() * v.imag() - u1.imag() * v.real()) / det;
        cplx rem = v - std::round(xo) * u1 - std::round(yo) * u2;
        if (near_zero(rem)) continue;
        // enlarge: reduce the triple {u1, u2, rem} down to two vectors
        std::vector<cplx> triple{u1, u2, rem};
        for (int it = 0; it < 256; ++it) {
            std::sort(triple.begin(), triple.end(),
                      [](cplx p, cplx q) { return std::abs(p) < std::abs(q); });
            while (triple.size() > 1 && near_zero(triple.front()))
                triple.erase(triple.begin());
            if (triple.size() <= 2) break;
            cplx w = triple.back();
            double d2 = triple[0].real() * triple[1].imag() - triple[0].imag() * triple[1].real();
            if (std::abs(d2) < eps * eps) {  // still degenerate; reduce against shortest
                double q = std::round((w.real() * triple[0].real() + w.imag() * triple[0].imag()) /
                                      std::norm(triple[0]));
                triple.back() = w - q * triple[0];
                continue;
            }
            double xq = (w.real() * triple[1].imag() - w.imag() * triple[1].real()) / d2;
            double yq = (triple[0].real() * w.imag() - triple[0].imag() * w.real()) / d2;
            triple.back() = w - std::round(xq) * triple[0] - std::round(yq) * triple[1];
            if (near_zero(triple.back())) triple.pop_back();
        }
        basis.assign(triple.begin(), triple.begin() + std::min<size_t>(2, triple.size()));
        if (basis.size() == 2) reduce_pair(basis[0], basis[1]);
    }
    if (basis.size() < 2)
        throw DegenerateInput("lattice_basis: vectors do not span a rank-2 lattice");
    reduce_pair(basis[0], basis[1]);
    cplx w1 = basis[0], w2 = basis[1];
    if ((w2 / w1).imag() < 0.0) w2 = -w2;
    return {w1, w2};
}

}  // namespace detail

// Scan small-entry elements of Gamma_0(N) with lower-left entry N, 2N, 3N,
// collect their periods, and return a reduced basis of the lattice they
// generate. (Restricting to c = N can miss homology generators: for N = 11
// it produces an index-2 sublattice.)
inline PeriodBasis find_period_basis(const QExpansion& f, long long N, int max_a = 24) {
    if (f.truncation < 32 * N)
        throw MethodUnavailable("find_period_basis: need truncation B >= 32 N for height 1/N");
    PeriodBasis out;
    std::vector<cplx> periods;
    for (long long k = 1; k <= 3; ++k) {
        const long long c = k * N;
        if (c > f.truncation / 10) break;  // keep e^{-2 pi B / c} negligible
        for (long long a = 1; a <= max_a; ++a) {
            for (long long d = -max_a * c; d <= max_a * c; ++d) {
                if ((a * d - 1) % c != 0) continue;
                long long b = (a * d - 1) / c;
                if (std::abs(b) > 4 * max_a) continue;
                cplx v = group_period(f, a, b, c, d);
                if (std::abs(v) > 1e-12) {
                    periods.push_back(v);
                    out.generators.emplace_back(a, d);
                }
            }
        }
    }
    auto [w1, w2] = detail::lattice_basis(periods);
    out.omega1 = w1;
    out.omega2 = w2;
    return out;
}

// Shipped period-path pairs: horizontal segments alpha -> g alpha at height
// 1/N for vetted generator pairs g1, g2 of Gamma_0(N) whose periods span the
// full lattice (validated against find_period_basis covolumes; see tests).
inline std::pair<PathSpec, PathSpec> default_period_paths(long long N) {
    struct Gen {
        long long a, b, c, d;
    };
    auto path_of = [](Gen g) {
        PathSpec p;
        cplx alpha{static_cast<double>(-g.d) / g.c, 1.0 / g.c};
        cplx galpha{static_cast<double>(g.a) / g.c, 1.0 / g.c};
        p.segments.push_back(Segment::line(alpha, galpha));
        return p;
    };
    Gen g1{}, g2{};
    switch (N) {
        case 11: g1 = {2, -15, 11, -82}; g2 = {3, -23, 11, -84}; break;
        case 37: g1 = {3, -22, 37, -271}; g2 = {5, -38, 37, -281}; break;
        case 91: g1 = {3, -22, 91, -667}; g2 = {8, -35, 91, -398}; break;
        default:
            throw MethodUnavailable("default_period_paths: no vetted pair for level " +
                                    std::to_string(N) + "; pass explicit paths");
    }
    return {path_of(g1), path_of(g2)};
}

}  // namespace hlab::pathint
