#pragma once

// Numerical pairings (G, F)_{N,R} = int_R G(z) conj(F(z)) dx dy over the
// fundamental domain R realized as coset translates of the standard domain:
// the integral over g.cell is pulled back to the base cell,
//   int_{g cell} G conj(F) dx dy = int_cell G(gz) conj(F(gz)) |cz+d|^{-4} dx dy.
// Nodes whose image drops below y_min are excluded; their Euclidean area and
// an estimated integrand mass are reported as the truncation deficit. The
// quadrature error is the summed |fine - coarse| of the embedded cell rules.

#include <cmath>
#include <complex>
#include <vector>

#include "hlab/coefficients.hpp"
#include "hlab/modgroup.hpp"
#include "hlab/pathint.hpp"
#include "hlab/util.hpp"

namespace hlab::petersson {

using coefficients::QExpansion;
using modgroup::DomainMesh;
using modgroup::GroupElement;

struct PairingOptions {
    double series_tol = 1e-12;  // per-node certified series tolerance
};

struct PairingResult {
    cplx value{};
    double quadrature_error = 0.0;
    double truncation_deficit = 0.0;  // estimated integrand mass excluded by y_min/y_max
    double excluded_area = 0.0;       // Euclidean area of the excluded image region
    std::vector<cplx> per_coset;      // partial sums, one per representative
};

namespace detail {

// Evaluator with a Fricke fallback. Low image points of the coset translates
// cluster near integer cusps; for a matched newform these are reachable
// through f(w) = -eps N wt^2 f(wt), wt = -1/(N (w - m)), which is high
// exactly where the direct series is not. Generic series have only the
// direct route and report unreachable nodes to the truncation deficit.
struct SeriesEvaluator {
    const QExpansion& f;
    double tol;
    int fricke = 0;  // 0 = unavailable

    explicit SeriesEvaluator(const QExpansion& series, double series_tol)
        : f(series), tol(series_tol) {
        if (f.is_matched() && f.level > 0) {
            try {
                fricke = pathint::fricke_sign(f, f.level, 1e-8);
            } catch (const Error&) {
                fricke = 0;  // fall back to direct evaluation only
            }
        }
    }

    bool direct_ok(double y) const {
        return pathint::series_tail_bound(f, f.truncation, y) <= tol;
    }
    // evaluate at w; returns false if neither route is certifiable
    bool eval(cplx w, cplx& out) const {
        if (direct_ok(w.imag())) {
            out = pathint::evaluate_series_n(f, w, pathint::series_terms_needed(f, w.imag(), tol));
            return true;
        }
        if (fricke != 0) {
            const double N = static_cast<double>(f.level);
            cplx w0 = w - std::round(w.real());
            cplx wt = -1.0 / (N * w0);
            if (wt.imag() > 0.0 && direct_ok(wt.imag())) {
                cplx fwt = pathint::evaluate_series_n(
                    f, wt, pathint::series_terms_needed(f, wt.imag(), tol));
                out = static_cast<double>(-fricke) * N * wt * wt * fwt;
                return true;
            }
        }
        return false;
    }
};

}  // namespace detail

inline PairingResult petersson_pairing(const QExpansion& G, const QExpansion& F,
                                       const DomainMesh& mesh, const PairingOptions& opt = {}) {
    PairingResult out;
    out.per_coset.assign(mesh.reps.size(), cplx{});
    detail::SeriesEvaluator evalG(G, opt.series_tol), evalF(F, opt.series_tol);
    for (size_t ri = 0; ri < mesh.reps.size(); ++ri) {
        const GroupElement& g = mesh.reps[ri];
        const double gc = static_cast<double>(g.c), gd = static_cast<double>(g.d);
        cplx coset_sum = 0.0;
        for (const auto& cell : mesh.base_cells) {
            auto image = [&](const modgroup::MeshNode& node) {
                cplx z{node.x, node.y};
                cplx den = gc * z + gd;
                cplx w = (static_cast<double>(g.a) * z + static_cast<double>(g.b)) / den;
                return std::pair<cplx, double>(w, 1.0 / std::norm(den * den));
            };
            auto rule_value = [&](const std::vector<modgroup::MeshNode>& nodes, bool record) {
                cplx acc = 0.0;
                double local_max = 0.0;
                double dropped_area = 0.0;
                for (const auto& node : nodes) {
                    auto [w, jac] = image(node);
                    if (w.imag() < mesh.y_min) {  // declared truncation floor
                        dropped_area += node.w * jac;
                        continue;
                    }
                    cplx gv, fv;
                    if (!evalG.eval(w, gv) || !evalF.eval(w, fv))
                        throw MeshUnusable(
                            "petersson_pairing: series tail not certifiable at image height " +
                            format_double(w.imag()) + " >= y_min; raise the truncation B");
                    cplx term = gv * std::conj(fv);
                    acc += node.w * jac * term;
                    local_max = std::max(local_max, std::abs(term));
                }
                if (record) {
                    out.excluded_area += dropped_area;
                    out.truncation_deficit += dropped_area * local_max;
                }
                return acc;
            };
            cplx fine = rule_value(cell.fine, true);
            cplx coarse = rule_value(cell.coarse, false);
            coset_sum += fine;
            out.quadrature_error += std::abs(fine - coarse);
        }
        out.per_coset[ri] = coset_sum;
        out.value += coset_sum;
    }
    return out;
}

// ------------------------------------------------------- level predicate

struct LevelDecision {
    bool is_level = false;
    bool deferred = false;  // threshold below the resolvable quadrature scale
    PairingResult evidence;
};

// F is of level N with respect to R when (G, F)_{N,R} != 0; numerically:
// |value| must clear both the caller's threshold and 10x the quadrature
// error. A threshold below the quadrature scale defers the decision.
inline LevelDecision is_level_N(const QExpansion& F, const QExpansion& G, const DomainMesh& mesh,
                                double threshold, const PairingOptions& opt = {}) {
    LevelDecision out;
    out.evidence = petersson_pairing(G, F, mesh, opt);
    const double bar = std::max(threshold, 10.0 * out.evidence.quadrature_error);
    if (std::abs(out.evidence.value) > bar) {
        out.is_level = true;
    } else if (threshold < 10.0 * out.evidence.quadrature_error) {
        out.deferred = true;
    }
    return out;
}

// ------------------------------------------------------- linearity check

struct LinearityReport {
    cplx combined{};
    cplx expected{};
    double residual = 0.0;
    double tolerance = 0.0;
    bool ok = false;
};

// pairing(G, a F1 + b F2) against conj(a) pairing(G, F1) + conj(b) pairing(G, F2)
// (the second slot is conjugate-linear under the printed integrand G conj F).
inline LinearityReport pairing_linearity_check(const QExpansion& G, const QExpansion& F1,
                                               const QExpansion& F2, cplx a, cplx b,
                                               const DomainMesh& mesh,
                                               const PairingOptions& opt = {}) {
    auto combo = coefficients::linear_combination(a, F1, b, F2);
    auto pc = petersson_pairing(G, combo, mesh, opt);
    auto p1 = petersson_pairing(G, F1, mesh, opt);
    auto p2 = petersson_pairing(G, F2, mesh, opt);
    LinearityReport rep;
    rep.combined = pc.value;
    rep.expected = std::conj(a) * p1.value + std::conj(b) * p2.value;
    rep.residual = std::abs(rep.combined - rep.expected);
    rep.tolerance = pc.quadrature_error + std::abs(a) * p1.quadrature_error +
                    std::abs(b) * p2.quadrature_error + 1e-12;
    rep.ok = rep.residual <= rep.tolerance;
    return rep;
}

}  // namespace hlab::petersson
