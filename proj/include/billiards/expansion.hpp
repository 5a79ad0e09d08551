#pragma once

#include "billiards/rng.hpp"
#include "billiards/singular.hpp"

#include <algorithm>
#include <vector>

namespace billiards {

/// Horizontal open segment (theta = const), the unstable direction of the
/// map. Lives on the arclength circle; length in (0, 1).
struct HCurve {
    double theta = 0.0;
    double s_begin = 0.0;
    double length = 0.0;

    double midpoint() const { return wrap_s(s_begin + 0.5 * length); }
    double at(double t) const { return wrap_s(s_begin + t * length); }
};

/// One-step expansion factor of the horizontal direction,
/// alpha(x) = cos(theta)/cos(arrival angle); nullopt at singular points.
inline std::optional<double> alpha(const Polygon& P, const ReflectionLaw& f, PhasePoint x) {
    StepResult r = step(P, f, x);
    if (!r.regular()) return std::nullopt;
    return std::cos(x.theta) / std::cos(r.pre_angle);
}

struct ExpansionFactor {
    bool ok = false;
    double value = 1.0;
    int fail_step = -1; // step index of the singular failure when !ok
};

/// n-step expansion factor alpha_n(x) = alpha(x) ... alpha(Phi^{n-1} x),
/// the |(1,1)| entry of the n-step derivative product. n = 0 gives 1.
inline ExpansionFactor expansion_n(const Polygon& P, const ReflectionLaw& f, PhasePoint x,
                                   int n) {
    ExpansionFactor res;
    res.value = 1.0;
    int side = P.side_of(wrap_s(x.s));
    PhasePoint cur{wrap_s(x.s), x.theta};
    for (int k = 0; k < n; ++k) {
        StepResult r = detail::step_on_side(P, &f, side, cur.s, cur.theta);
        if (!r.regular()) {
            res.fail_step = k;
            return res;
        }
        res.value *= std::cos(cur.theta) / std::cos(r.pre_angle);
        cur = r.out;
        side = r.side_hit;
    }
    res.ok = true;
    return res;
}

/// Connected component of an h-curve minus the order-n singular set.
struct HComponent {
    HCurve part;
    Itinerary itinerary; // negative tail entry marks an orbit that dies
    double alpha_n = 0.0;
    bool alive = true;
};

namespace detail {

inline Itinerary h_itinerary(const Polygon& P, const ReflectionLaw& f, double s, double theta,
                             int n) {
    Itinerary it;
    it.reserve(n);
    PhasePoint x{wrap_s(s), theta};
    int side = P.side_of(x.s);
    for (int k = 0; k < n; ++k) {
        StepResult r = step_on_side(P, &f, side, x.s, x.theta);
        if (!r.regular()) {
            it.push_back(-(k + 1));
            return it;
        }
        it.push_back(r.side_hit);
        x = r.out;
        side = r.side_hit;
    }
    return it;
}

} // namespace detail

/**
 * Splits an h-curve at its intersections with N+_n, using itinerary changes
 * as the split oracle (bisection-refined to 1e-10 in s, independent of the
 * polyline arrangement). alpha_n is constant on each component, so it is
 * evaluated once at the component midpoint.
 */
inline std::vector<HComponent> subdivide_h_curve(const Polygon& P, const ReflectionLaw& f,
                                                 const HCurve& curve, int n,
                                                 int initial_scan = 512) {
    auto itin_at = [&](double t) {
        return detail::h_itinerary(P, f, curve.at(t), curve.theta, n);
    };

    std::vector<double> cuts; // in curve parameter t in [0,1]
    Itinerary prev = itin_at(0.0);
    double prev_t = 0.0;
    for (int i = 1; i <= initial_scan; ++i) {
        double t = static_cast<double>(i) / initial_scan;
        Itinerary cur = itin_at(t);
        if (cur != prev) {
            double lo = prev_t, hi = t;
            const double tol = 1e-10 / std::max(curve.length, 1e-12);
            while (hi - lo > tol) {
                double mid = 0.5 * (lo + hi);
                if (itin_at(mid) == prev) lo = mid; else hi = mid;
            }
            cuts.push_back(0.5 * (lo + hi));
            prev = cur;
        }
        prev_t = t;
    }

    std::vector<HComponent> comps;
    double from = 0.0;
    for (std::size_t i = 0; i <= cuts.size(); ++i) {
        double to = i < cuts.size() ? cuts[i] : 1.0;
        if (to - from < 1e-12) { from = to; continue; }
        HComponent c;
        c.part.theta = curve.theta;
        c.part.s_begin = curve.at(from);
        c.part.length = (to - from) * curve.length;
        double tm = 0.5 * (from + to);
        c.itinerary = itin_at(tm);
        c.alive = std::none_of(c.itinerary.begin(), c.itinerary.end(),
                               [](int v) { return v < 0; });
        if (c.alive) {
            ExpansionFactor e = expansion_n(P, f, {curve.at(tm), curve.theta}, n);
            c.alive = e.ok;
            c.alpha_n = e.value;
        }
        comps.push_back(std::move(c));
        from = to;
    }
    return comps;
}

/// Sum over components of 1/alpha_n; the quantity whose smallness (< 1)
/// expresses n-step expansion. Dead components are skipped.
inline double h_curve_beta(const std::vector<HComponent>& comps) {
    double beta = 0.0;
    for (const auto& c : comps)
        if (c.alive) beta += 1.0 / c.alpha_n;
    return beta;
}

struct ExpansionReport {
    int n = 0;
    double beta_hat = 0.0; // max beta over the sampled curves
    HCurve worst_curve;
    double A_n = 1e300; // least alpha_n over all sampled components
    std::vector<HComponent> component_table; // components of the worst curve
    int curves_sampled = 0;
    bool expansion_holds = false; // beta_hat < 1
};

/**
 * Estimates the n-step expansion coefficient by sampling h-curves of length
 * delta: half centered at the candidate fan vertices (worst cases; supply
 * `centers` from arrangement_candidates), half uniformly at random inside
 * the forward-invariant strip |theta| <= lambda * pi/2 where the bound
 * alpha >= cos(pi lambda / 2) applies.
 */
inline ExpansionReport n_step_expansion(const Polygon& P, const ReflectionLaw& f, int n,
                                        double delta, int samples, std::uint64_t seed,
                                        const std::vector<PhasePoint>* centers = nullptr,
                                        int initial_scan = 512) {
    ExpansionReport rep;
    rep.n = n;
    SplitMix64 rng(seed);
    const double strip = f.lambda() * kHalfPi;

    std::vector<HCurve> curves;
    curves.reserve(static_cast<std::size_t>(samples));
    if (centers) {
        for (const auto& c : *centers) {
            if (static_cast<int>(curves.size()) >= samples / 2) break;
            if (std::abs(c.theta) > strip) continue;
            curves.push_back({c.theta, wrap_s(c.s - 0.5 * delta), delta});
        }
    }
    while (static_cast<int>(curves.size()) < samples) {
        double theta = rng.uniform(-strip, strip);
        curves.push_back({theta, wrap_s(rng.uniform() - 0.5 * delta), delta});
    }

    rep.curves_sampled = static_cast<int>(curves.size());
    for (const auto& g : curves) {
        auto comps = subdivide_h_curve(P, f, g, n, initial_scan);
        double beta = h_curve_beta(comps);
        for (const auto& c : comps)
            if (c.alive) rep.A_n = std::min(rep.A_n, c.alpha_n);
        if (beta > rep.beta_hat) {
            rep.beta_hat = beta;
            rep.worst_curve = g;
            rep.component_table = comps;
        }
    }
    rep.expansion_holds = rep.beta_hat < 1.0;
    return rep;
}

namespace detail {

/// Crossing arclengths of N = V u S with the horizontal line theta = level.
inline std::vector<double> base_singular_crossings(const Polygon& P,
                                                   const std::vector<SingularCurve>& s_curves,
                                                   double level) {
    std::vector<double> z(P.s_vertices());
    for (const auto& c : s_curves) {
        const auto& nd = c.nodes;
        if (nd.size() < 2) continue;
        // theta decreases along the nodes; binary search for the level.
        if (level > nd.front().theta || level < nd.back().theta) continue;
        std::size_t lo = 0, hi = nd.size() - 1;
        while (hi - lo > 1) {
            std::size_t mid = (lo + hi) / 2;
            if (nd[mid].theta >= level) lo = mid; else hi = mid;
        }
        double t0 = nd[lo].theta, t1 = nd[hi].theta;
        if (t0 == t1) continue;
        double w = (level - t0) / (t1 - t0);
        z.push_back(nd[lo].s + w * (nd[hi].s - nd[lo].s));
    }
    std::sort(z.begin(), z.end());
    return z;
}

/// Total measure of the union of (z - eps, z + eps) on the circle, plus the
/// merged interval list for partial-arc queries.
struct EpsNeighborhood {
    std::vector<std::pair<double, double>> intervals; // sorted, within [0,1)
    double total = 0.0;
};

inline EpsNeighborhood build_eps_neighborhood(const std::vector<double>& z, double eps) {
    EpsNeighborhood nb;
    if (z.empty()) return nb;
    std::vector<std::pair<double, double>> raw;
    for (double c : z) {
        double a = c - eps, b = c + eps;
        if (b - a >= 1.0) {
            nb.intervals = {{0.0, 1.0}};
            nb.total = 1.0;
            return nb;
        }
        a = wrap_s(a);
        b = a + 2 * eps;
        if (b <= 1.0) {
            raw.push_back({a, b});
        } else {
            raw.push_back({a, 1.0});
            raw.push_back({0.0, b - 1.0});
        }
    }
    std::sort(raw.begin(), raw.end());
    for (auto& iv : raw) {
        if (!nb.intervals.empty() && iv.first <= nb.intervals.back().second) {
            nb.intervals.back().second = std::max(nb.intervals.back().second, iv.second);
        } else {
            nb.intervals.push_back(iv);
        }
    }
    for (auto& iv : nb.intervals) nb.total += iv.second - iv.first;
    return nb;
}

/// Measure of the union intersected with the circular arc [a, a + len].
inline double neighborhood_arc_measure(const EpsNeighborhood& nb, double a, double len) {
    if (len <= 0.0 || nb.intervals.empty()) return 0.0;
    if (len >= 1.0) return nb.total;
    a = wrap_s(a);
    double b = a + len;
    double m = 0.0;
    for (const auto& iv : nb.intervals) {
        for (double shift : {0.0, 1.0}) {
            double lo = std::max(iv.first + shift, a);
            double hi = std::min(iv.second + shift, b);
            if (hi > lo) m += hi - lo;
        }
    }
    return m;
}

} // namespace detail

/**
 * Length of the set of points of an h-curve whose r-step image lands within
 * horizontal distance eps of N = V u S (the growth-lemma measurand). The
 * curve is split into its Phi^r branches; on each branch the s-image is
 * affine, so the measure is computed exactly from the eps-neighborhood of
 * the crossing set at the image level. Components whose orbits die before r
 * steps are counted in full. Requires eps below the strip margin
 * (pi/2)(1 - lambda) so the boundary component of N+ plays no role.
 */
inline double growth_check(const Polygon& P, const ReflectionLaw& f,
                           const std::vector<SingularCurve>& s_curves, const HCurve& curve,
                           int r, double eps, int initial_scan = 512) {
    if (!(eps < kHalfPi * (1.0 - f.lambda())))
        throw std::invalid_argument("growth_check: eps exceeds the boundary margin");

    auto comps = subdivide_h_curve(P, f, curve, r, initial_scan);
    double measured = 0.0;
    for (const auto& c : comps) {
        if (!c.alive) {
            measured += c.part.length;
            continue;
        }
        // Image of the component: an h-interval at the orbit-final angle,
        // centered at the image of the midpoint, of length alpha_r * len.
        PhasePoint mid{c.part.midpoint(), c.part.theta};
        Orbit o = orbit(P, f, mid, r);
        if (o.terminated) {
            measured += c.part.length;
            continue;
        }
        PhasePoint y = o.points.back();
        double alpha_r = c.alpha_n;
        double img_len = alpha_r * c.part.length;
        auto z = detail::base_singular_crossings(P, s_curves, y.theta);
        auto nb = detail::build_eps_neighborhood(z, eps);
        double inside;
        if (img_len >= 1.0) {
            double wraps = std::floor(img_len);
            inside = wraps * nb.total +
                     detail::neighborhood_arc_measure(nb, y.s - 0.5 * (img_len - wraps),
                                                      img_len - wraps);
        } else {
            inside = detail::neighborhood_arc_measure(nb, y.s - 0.5 * img_len, img_len);
        }
        measured += inside / alpha_r;
    }
    return measured;
}

struct GrowthCell {
    int r = 0;
    double eps = 0.0;
    double curve_length = 0.0;
    double measured = 0.0;
};

struct GrowthFit {
    double C = 0.0;
    double a = 0.0;
    bool feasible = false;      // >= 99% of cells under C eps (a^r + len)
    double within_fraction = 0.0;
    double max_over_bound = 0.0; // max measured / bound ratio (<= 2 required)
};

/// Fits feasible constants (C > 0, a < 1) with
/// measured <= C eps (a^r + len(Gamma)) over the table, allowing a 1%
/// remainder within a factor 2. Scans a and takes the smallest workable C.
inline GrowthFit fit_growth(const std::vector<GrowthCell>& cells) {
    GrowthFit best;
    best.C = 1e300;
    for (int ia = 1; ia < 50; ++ia) {
        double a = ia / 50.0;
        std::vector<double> q;
        q.reserve(cells.size());
        for (const auto& cell : cells) {
            double bound = cell.eps * (std::pow(a, cell.r) + cell.curve_length);
            q.push_back(cell.measured / bound);
        }
        std::vector<double> sorted = q;
        std::sort(sorted.begin(), sorted.end());
        double q99 = sorted[static_cast<std::size_t>(std::ceil(0.99 * sorted.size())) - 1];
        double qmax = sorted.back();
        double C = std::max(q99, 0.5 * qmax);
        if (C <= 0.0) C = 1e-12;
        if (C < best.C) {
            std::size_t within = 0;
            for (double v : q) within += v <= C ? 1 : 0;
            best.C = C;
            best.a = a;
            best.feasible = within >= static_cast<std::size_t>(std::ceil(0.99 * q.size())) &&
                            qmax <= 2.0 * C;
            best.within_fraction = static_cast<double>(within) / q.size();
            best.max_over_bound = qmax / C;
        }
    }
    return best;
}

} // namespace billiards
