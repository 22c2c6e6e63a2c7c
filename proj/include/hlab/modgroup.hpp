#pragma once

// Modular group machinery: PSL2(Z) elements and their action on H, right
// coset representatives for Gamma_0(N) indexed by P^1(Z/N), reduction to the
// standard fundamental domain D = {|Re z| <= 1/2, |z| >= 1}, and quadrature
// meshes on truncations of D used by the Petersson pairing.
//
// Boundary convention for D: Re z = -1/2 kept, |z| = 1 kept for Re z <= 0.

#include <cmath>
#include <complex>
#include <cstdint>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <vector>

#include "hlab/util.hpp"

namespace hlab::modgroup {

struct GroupElement {
    long long a = 1, b = 0, c = 0, d = 1;

    long long det() const { return a * d - b * c; }
};

// Projective normalization: flip signs so that c > 0, or c == 0 and a > 0.
inline GroupElement normalized(GroupElement g) {
    if (g.c < 0 || (g.c == 0 && g.a < 0)) {
        g.a = -g.a;
        g.b = -g.b;
        g.c = -g.c;
        g.d = -g.d;
    }
    return g;
}

inline GroupElement mul(const GroupElement& g, const GroupElement& h) {
    return normalized({g.a * h.a + g.b * h.c, g.a * h.b + g.b * h.d,
                       g.c * h.a + g.d * h.c, g.c * h.b + g.d * h.d});
}

inline GroupElement inverse(const GroupElement& g) { return normalized({g.d, -g.b, -g.c, g.a}); }

inline bool operator==(const GroupElement& g, const GroupElement& h) {
    GroupElement gn = normalized(g), hn = normalized(h);
    return gn.a == hn.a && gn.b == hn.b && gn.c == hn.c && gn.d == hn.d;
}

inline cplx act(const GroupElement& g, cplx z) {
    if (z.imag() <= 0.0) throw DomainError("act: point must lie in the upper half-plane");
    const cplx den = static_cast<double>(g.c) * z + static_cast<double>(g.d);
    return (static_cast<double>(g.a) * z + static_cast<double>(g.b)) / den;
}

// ------------------------------------------------------ coset enumeration

struct CosetSystem {
    long long level = 1;
    std::vector<GroupElement> reps;

    size_t index() const { return reps.size(); }
};

inline bool in_gamma0(const GroupElement& g, long long N) { return g.c % N == 0; }

inline bool same_right_coset(const GroupElement& g, const GroupElement& h, long long N) {
    return in_gamma0(mul(g, inverse(h)), N);
}

// [PSL2(Z) : Gamma_0(N)] = N prod_{p | N} (1 + 1/p)
inline long long gamma0_index(long long N) {
    long long idx = N;
    for (const auto& pe : factorize(N)) idx = idx / pe.p * (pe.p + 1);
    return idx;
}

// Right cosets of Gamma_0(N) biject with P^1(Z/N) through the bottom row.
inline CosetSystem coset_representatives(long long N) {
    if (N < 1) throw DomainError("coset_representatives: N must be >= 1");
    CosetSystem sys;
    sys.level = N;
    if (N == 1) {
        sys.reps.push_back({});
        return sys;
    }
    std::vector<long long> units;
    for (long long u = 1; u < N; ++u)
        if (std::gcd(u, N) == 1) units.push_back(u);
    std::map<std::pair<long long, long long>, std::pair<long long, long long>> canon_of;
    std::vector<std::pair<long long, long long>> classes;
    for (long long c = 0; c < N; ++c)
        for (long long d = 0; d < N; ++d) {
            if (std::gcd(std::gcd(c, d), N) != 1) continue;
            std::pair<long long, long long> best{N, N};
            for (long long u : units)
                best = std::min(best, {u * c % N, u * d % N});
            auto [it, fresh] = canon_of.try_emplace({c, d}, best);
            (void)it;
            if (fresh && best == std::make_pair(c, d)) classes.push_back(best);
        }
    for (auto [c, d] : classes) {
        GroupElement g;
        if (c == 0) {
            g = {};  // class (0:1) -> identity
        } else {
            long long dd = d;
            while (std::gcd(c, dd) != 1) dd += N;
            // extended gcd: a*dd - b*c = 1
            long long x = 0, y = 0, r0 = c, r1 = dd, s0 = 1, s1 = 0, t0 = 0, t1 = 1;
            while (r1 != 0) {
                long long q = r0 / r1;
                std::tie(r0, r1) = std::make_pair(r1, r0 - q * r1);
                std::tie(s0, s1) = std::make_pair(s1, s0 - q * s1);
                std::tie(t0, t1) = std::make_pair(t1, t0 - q * t1);
            }
            // s0*c + t0*dd = r0 = +-1
            x = t0 * r0;  // a
            y = -s0 * r0; // b
            g = normalized({x, y, c, dd});
        }
        if (g.det() != 1) throw Error("coset_representatives: lift failed");
        sys.reps.push_back(g);
    }
    if (static_cast<long long>(sys.reps.size()) != gamma0_index(N))
        throw Error("coset_representatives: wrong coset count for N=" + std::to_string(N));
    return sys;
}

// --------------------------------------------------- fundamental domain

struct ReductionResult {
    cplx z0;
    GroupElement g;  // g * z = z0
};

inline ReductionResult reduce_to_standard_domain(cplx z) {
    if (z.imag() <= 0.0) throw DomainError("reduce_to_standard_domain: Im z must be positive");
    GroupElement g;
    const double eps = 1e-14;
    for (int it = 0; it < 10000; ++it) {
        double n = std::round(z.real());
        if (n != 0.0) {
            z -= n;
            g = mul({1, -static_cast<long long>(n), 0, 1}, g);
        }
        if (std::norm(z) < 1.0 - eps) {
            z = -1.0 / z;
            g = mul({0, -1, 1, 0}, g);
            continue;
        }
        break;
    }
    // boundary conventions: Re = +1/2 -> -1/2; |z| = 1 with Re > 0 -> reflect
    if (z.real() > 0.5 - eps) {
        z -= 1.0;
        g = mul({1, -1, 0, 1}, g);
    }
    if (std::abs(std::norm(z) - 1.0) < eps && z.real() > eps) {
        z = -1.0 / z;
        g = mul({0, -1, 1, 0}, g);
    }
    return {z, g};
}

// ------------------------------------------------------------------ mesh

struct MeshNode {
    double x, y, w;
};

struct MeshCell {
    double area = 0.0;            // Euclidean area (sum of fine weights)
    std::vector<MeshNode> fine;   // 4x4 Gauss nodes
    std::vector<MeshNode> coarse; // 2x2 embedded rule for error estimates
};

struct DomainMesh {
    long long level = 1;
    double y_min = 0.05, y_max = 8.0;
    int resolution = 4;
    std::vector<MeshCell> base_cells;      // cells in the standard domain D
    std::vector<GroupElement> reps;        // one copy of D per coset rep
    double truncated_area = 0.0;           // Euclidean area of one D copy
    double hyperbolic_area = 0.0;          // hyperbolic area of one D copy
    double hyperbolic_deficit = 0.0;       // index * pi/3 minus covered mass

    size_t cell_count() const { return base_cells.size() * reps.size(); }
};

namespace detail {

// Cell over phi in [phi0, phi1] (y = sin phi), x spanning the fraction
// [c0, c1] of [side * cos phi, side * 1/2]; side = +1 right, -1 left.
inline MeshCell band_cell(double phi0, double phi1, double c0, double c1, int side) {
    MeshCell cell;
    auto fill = [&](const auto& rule, std::vector<MeshNode>& out) {
        for (size_t i = 0; i < rule.x.size(); ++i) {
            double phi = 0.5 * (phi0 + phi1) + 0.5 * (phi1 - phi0) * rule.x[i];
            double y = std::sin(phi);
            double L = std::cos(phi), R = 0.5;
            for (size_t j = 0; j < rule.x.size(); ++j) {
                double frac = c0 + (c1 - c0) * 0.5 * (1.0 + rule.x[j]);
                double x = L + frac * (R - L);
                double w = rule.w[i] * 0.5 * (phi1 - phi0) * std::cos(phi) *
                           rule.w[j] * 0.5 * (c1 - c0) * (R - L);
                out.push_back({side > 0 ? x : -x, y, w});
            }
        }
    };
    fill(GaussLegendre4{}, cell.fine);
    fill(GaussLegendre2{}, cell.coarse);
    for (const auto& n : cell.fine) cell.area += n.w;
    return cell;
}

inline MeshCell strip_cell(double x0, double x1, double y0, double y1) {
    MeshCell cell;
    auto fill = [&](const auto& rule, std::vector<MeshNode>& out) {
        for (size_t i = 0; i < rule.x.size(); ++i) {
            double y = 0.5 * (y0 + y1) + 0.5 * (y1 - y0) * rule.x[i];
            for (size_t j = 0; j < rule.x.size(); ++j) {
                double x = 0.5 * (x0 + x1) + 0.5 * (x1 - x0) * rule.x[j];
                double w = rule.w[i] * rule.w[j] * 0.25 * (y1 - y0) * (x1 - x0);
                out.push_back({x, y, w});
            }
        }
    };
    fill(GaussLegendre4{}, cell.fine);
    fill(GaussLegendre2{}, cell.coarse);
    for (const auto& n : cell.fine) cell.area += n.w;
    return cell;
}

}  // namespace detail

inline DomainMesh build_domain_mesh(long long N, double y_min, double y_max, int resolution) {
    if (y_min <= 0.0 || y_min >= y_max)
        throw ConfigError("build_domain_mesh: need 0 < y_min < y_max");
    if (resolution < 1) throw ConfigError("build_domain_mesh: resolution must be >= 1");
    DomainMesh mesh;
    mesh.level = N;
    mesh.y_min = y_min;
    mesh.y_max = y_max;
    mesh.resolution = resolution;
    mesh.reps = coset_representatives(N).reps;

    const double sqrt3_2 = std::sqrt(3.0) / 2.0;
    // Arc band: y from max(y_min, sqrt3/2) to min(1, y_max), via y = sin phi.
    double band_lo = std::max(y_min, sqrt3_2), band_hi = std::min(1.0, y_max);
    if (band_hi > band_lo) {
        double phi_lo = std::asin(band_lo), phi_hi = std::asin(std::min(band_hi, 1.0));
        int n_rows = 2 * resolution, n_cols = resolution;
        for (int i = 0; i < n_rows; ++i) {
            double p0 = phi_lo + (phi_hi - phi_lo) * i / n_rows;
            double p1 = phi_lo + (phi_hi - phi_lo) * (i + 1) / n_rows;
            for (int j = 0; j < n_cols; ++j) {
                double c0 = static_cast<double>(j) / n_cols;
                double c1 = static_cast<double>(j + 1) / n_cols;
                for (int side : {+1, -1})
                    mesh.base_cells.push_back(detail::band_cell(p0, p1, c0, c1, side));
            }
        }
    }
    // Strip above y = 1: geometric rows, uniform columns.
    double strip_lo = std::max(1.0, y_min);
    if (y_max > strip_lo) {
        int n_rows = 4 * resolution, n_cols = 2 * resolution;
        double rho = std::pow(y_max / strip_lo, 1.0 / n_rows);
        for (int i = 0; i < n_rows; ++i) {
            double y0 = strip_lo * std::pow(rho, i);
            double y1 = (i + 1 == n_rows) ? y_max : strip_lo * std::pow(rho, i + 1);
            for (int j = 0; j < n_cols; ++j) {
                double x0 = -0.5 + static_cast<double>(j) / n_cols;
                double x1 = -0.5 + static_cast<double>(j + 1) / n_cols;
                mesh.base_cells.push_back(detail::strip_cell(x0, x1, y0, y1));
            }
        }
    }
    for (const auto& cell : mesh.base_cells) {
        mesh.truncated_area += cell.area;
        for (const auto& n : cell.fine) mesh.hyperbolic_area += n.w / (n.y * n.y);
    }
    mesh.hyperbolic_deficit =
        static_cast<double>(mesh.reps.size()) * (kPi / 3.0 - mesh.hyperbolic_area);
    return mesh;
}

// --------------------------------------------------------- serialization

inline void write_mesh(const DomainMesh& mesh, std::ostream& out) {
    out << "hlab-mesh 1\n";
    out << "level " << mesh.level << "\n";
    out << "y_min " << format_double(mesh.y_min) << " y_max " << format_double(mesh.y_max)
        << " resolution " << mesh.resolution << "\n";
    out << "reps " << mesh.reps.size() << "\n";
    for (const auto& g : mesh.reps) out << g.a << " " << g.b << " " << g.c << " " << g.d << "\n";
    out << "cells " << mesh.base_cells.size() << "\n";
    for (const auto& cell : mesh.base_cells) {
        out << "cell " << format_double(cell.area) << " " << cell.fine.size() << " "
            << cell.coarse.size() << "\n";
        for (const auto& n : cell.fine)
            out << format_double(n.x) << " " << format_double(n.y) << " " << format_double(n.w)
                << "\n";
        for (const auto& n : cell.coarse)
            out << format_double(n.x) << " " << format_double(n.y) << " " << format_double(n.w)
                << "\n";
    }
}

inline DomainMesh read_mesh(std::istream& in) {
    DomainMesh mesh;
    std::string tag;
    int version;
    in >> tag >> version;
    if (tag != "hlab-mesh" || version != 1) throw ParseError("read_mesh: bad header");
    size_t n_reps = 0, n_cells = 0;
    in >> tag >> mesh.level;
    in >> tag >> mesh.y_min >> tag >> mesh.y_max >> tag >> mesh.resolution;
    in >> tag >> n_reps;
    mesh.reps.resize(n_reps);
    for (auto& g : mesh.reps) in >> g.a >> g.b >> g.c >> g.d;
    in >> tag >> n_cells;
    mesh.base_cells.resize(n_cells);
    for (auto& cell : mesh.base_cells) {
        size_t nf = 0, nc = 0;
        in >> tag >> cell.area >> nf >> nc;
        cell.fine.resize(nf);
        cell.coarse.resize(nc);
        for (auto& n : cell.fine) in >> n.x >> n.y >> n.w;
        for (auto& n : cell.coarse) in >> n.x >> n.y >> n.w;
    }
    if (!in) throw ParseError("read_mesh: truncated stream");
    for (const auto& cell : mesh.base_cells) {
        mesh.truncated_area += cell.area;
        for (const auto& n : cell.fine) mesh.hyperbolic_area += n.w / (n.y * n.y);
    }
    mesh.hyperbolic_deficit =
        static_cast<double>(mesh.reps.size()) * (kPi / 3.0 - mesh.hyperbolic_area);
    return mesh;
}

}  // namespace hlab::modgroup
