#pragma once

#include "billiards/map.hpp"

#include <cstdint>
#include <unordered_map>
#include <vector>

namespace billiards {

/// Default node spacing (phase-space distance) of the polyline arrangements.
inline constexpr double kCurveSpacing = 1e-3;

/**
 * Polyline approximation of one smooth component of the singular set.
 * Generation 0 curves are pieces of S (first collision hits target_vertex);
 * generation k curves are k-fold pullbacks, with branch_itinerary recording
 * the sides of the pullback path (length k). Nodes are ordered by increasing
 * arclength and the curves are strictly decreasing in (s, theta).
 */
struct SingularCurve {
    int side = 0;
    int generation = 0;
    int target_vertex = 0;
    Itinerary branch_itinerary;
    std::vector<PhasePoint> nodes;
};

namespace detail {

inline void append_node(std::vector<PhasePoint>& nodes, PhasePoint p) {
    if (!nodes.empty() && phase_dist(nodes.back(), p) < 1e-7) return;
    nodes.push_back(p);
}

/// Angle of the ray from boundary arclength s (on `side`) to vertex k,
/// measured from the inward normal; nullopt when the ray does not enter the
/// interior or the vertex is not the first collision.
inline std::optional<double> vertex_sight_angle(const Polygon& P, int side, double s, int k) {
    Vec2 tau = P.side_tangent(side);
    Vec2 n = P.side_normal(side);
    Vec2 p = P.vertex(side) + tau * (s - P.side_start(side));
    Vec2 rel = P.vertex(k) - p;
    double dist = norm(rel);
    if (dist < 1e-12) return std::nullopt;
    Vec2 dir{rel.x / dist, rel.y / dist};
    if (dot(dir, n) < 1e-9) return std::nullopt;
    RayHit hit;
    try {
        hit = P.cast_ray(p, dir);
    } catch (const GeometryError&) {
        return std::nullopt;
    }
    if (hit.t < dist - 1e-9) return std::nullopt; // vertex occluded
    return std::atan2(dot(dir, tau), dot(dir, n));
}

} // namespace detail

/**
 * Generation-0 singular curves: for each (side, vertex) pair with nonempty
 * visibility, the strictly decreasing curve s -> theta(s) of directions whose
 * first collision is the vertex. Sampled adaptively so adjacent nodes are
 * closer than `spacing` in phase-space distance.
 */
inline std::vector<SingularCurve> compute_S(const Polygon& P, double spacing = kCurveSpacing) {
    std::vector<SingularCurve> out;
    const int d = P.side_count();
    for (int side = 0; side < d; ++side) {
        double s0 = P.side_start(side) + 4.0 * kVertexTol;
        double s1 = P.side_start(side) + P.side_length(side) - 4.0 * kVertexTol;
        if (s1 <= s0) continue;
        for (int k = 0; k < d; ++k) {
            if (k == side || k == (side + 1) % d) continue;

            auto angle_at = [&](double s) { return detail::vertex_sight_angle(P, side, s, k); };

            SingularCurve cur;
            cur.side = side;
            cur.generation = 0;
            cur.target_vertex = k;
            auto flush = [&]() {
                if (cur.nodes.size() >= 2) out.push_back(cur);
                cur.nodes.clear();
            };

            // Recursive refinement between seed samples; closes runs at
            // visibility boundaries located by bisection.
            const int seeds = 64;
            std::optional<double> prev = angle_at(s0);
            double prev_s = s0;
            if (prev) detail::append_node(cur.nodes, {s0, *prev});

            auto refine = [&](auto&& self, double sa, double ta, double sb, double tb,
                              int depth) -> void {
                double dist = std::hypot(sb - sa, tb - ta);
                if (dist < spacing || depth > 24) {
                    detail::append_node(cur.nodes, {sb, tb});
                    return;
                }
                double sm = 0.5 * (sa + sb);
                auto tm = angle_at(sm);
                if (!tm) {
                    // Visibility dip inside the segment: close around it.
                    double lo = sa, hi = sm;
                    for (int i = 0; i < 45; ++i) {
                        double mid = 0.5 * (lo + hi);
                        if (angle_at(mid)) lo = mid; else hi = mid;
                    }
                    if (auto te = angle_at(lo)) detail::append_node(cur.nodes, {lo, *te});
                    flush();
                    lo = sm; hi = sb;
                    for (int i = 0; i < 45; ++i) {
                        double mid = 0.5 * (lo + hi);
                        if (angle_at(mid)) hi = mid; else lo = mid;
                    }
                    if (auto te = angle_at(hi)) detail::append_node(cur.nodes, {hi, *te});
                    self(self, hi, angle_at(hi).value_or(tb), sb, tb, depth + 1);
                    return;
                }
                self(self, sa, ta, sm, *tm, depth + 1);
                self(self, sm, *tm, sb, tb, depth + 1);
            };

            for (int i = 1; i <= seeds; ++i) {
                double s = s0 + (s1 - s0) * i / seeds;
                auto th = angle_at(s);
                if (prev && th) {
                    refine(refine, prev_s, *prev, s, *th, 0);
                } else if (prev && !th) {
                    double lo = prev_s, hi = s;
                    for (int it = 0; it < 45; ++it) {
                        double mid = 0.5 * (lo + hi);
                        if (angle_at(mid)) lo = mid; else hi = mid;
                    }
                    if (auto te = angle_at(lo)) detail::append_node(cur.nodes, {lo, *te});
                    flush();
                } else if (!prev && th) {
                    double lo = prev_s, hi = s;
                    for (int it = 0; it < 45; ++it) {
                        double mid = 0.5 * (lo + hi);
                        if (angle_at(mid)) hi = mid; else lo = mid;
                    }
                    if (auto te = angle_at(hi)) detail::append_node(cur.nodes, {hi, *te});
                    detail::append_node(cur.nodes, {s, *th});
                }
                prev = th;
                prev_s = s;
            }
            flush();
        }
    }
    return out;
}

namespace detail {

/**
 * Signed arclength offset between the terminal flight of a candidate
 * singular-curve point and its target vertex. The point must visit `path`
 * (the branch itinerary) regularly; the flight after the last entry is cast
 * without the vertex-tolerance barrier.
 */
inline std::optional<double> vertex_flight_offset(const Polygon& P, const ReflectionLaw& f,
                                                  PhasePoint x, int side0,
                                                  const Itinerary& path, int target) {
    if (std::abs(x.theta) > kHalfPi - kGrazeTol) return std::nullopt;
    double s = wrap_s(x.s);
    if (P.side_of(s) != side0) return std::nullopt;
    PhasePoint cur{s, x.theta};
    int side = side0;
    for (int expected : path) {
        StepResult r = step_on_side(P, &f, side, cur.s, cur.theta);
        if (!r.regular() || r.side_hit != expected) return std::nullopt;
        cur = r.out;
        side = r.side_hit;
    }
    Vec2 tau = P.side_tangent(side), n = P.side_normal(side);
    Vec2 pos = P.vertex(side) + tau * (cur.s - P.side_start(side));
    double sn = std::sin(cur.theta), cs = std::cos(cur.theta);
    Vec2 dir{cs * n.x + sn * tau.x, cs * n.y + sn * tau.y};
    try {
        RayHit hit = P.cast_ray(pos, dir);
        return circle_delta(hit.s, P.s_vertices()[static_cast<std::size_t>(target)]);
    } catch (const GeometryError&) {
        return std::nullopt;
    }
}

/// Secant iteration in theta (s fixed) pulling a near-curve point exactly
/// onto the singular curve; nodes that fail to converge are dropped so that
/// every stored node maps forward onto its vertex within the hit tolerance.
inline bool polish_curve_node(const Polygon& P, const ReflectionLaw& f, int side0,
                              const Itinerary& path, int target, PhasePoint& x) {
    auto offset = [&](double th) {
        return vertex_flight_offset(P, f, {x.s, th}, side0, path, target);
    };
    double t0 = x.theta;
    auto f0 = offset(t0);
    if (!f0 || std::abs(*f0) > 1e-2) return false;
    double t1 = t0 + (std::abs(*f0) + 1e-9);
    auto f1 = offset(t1);
    if (!f1) {
        t1 = t0 - (std::abs(*f0) + 1e-9);
        f1 = offset(t1);
        if (!f1) return false;
    }
    for (int it = 0; it < 40; ++it) {
        if (std::abs(*f1) < 1e-12) {
            x.theta = t1;
            return true;
        }
        double denom = *f1 - *f0;
        if (denom == 0.0) break;
        double t2 = t1 - *f1 * (t1 - t0) / denom;
        auto f2 = offset(t2);
        if (!f2) break;
        t0 = t1; f0 = f1;
        t1 = t2; f1 = f2;
    }
    if (f1 && std::abs(*f1) < 1e-10) {
        x.theta = t1;
        return true;
    }
    return false;
}

} // namespace detail

/**
 * Pulls curves back k times through every admissible inverse branch,
 * splitting polylines where the branch precondition fails. Node spacing is
 * kept under `spacing` by on-curve subdivision, so every emitted node lies on
 * the exact singular curve. Returns the input curves together with all
 * descendants (k = 0 returns the input unchanged).
 */
inline std::vector<SingularCurve> pull_back(const Polygon& P, const ReflectionLaw& f,
                                            const std::vector<SingularCurve>& curves, int k,
                                            double spacing = kCurveSpacing) {
    std::vector<SingularCurve> all = curves;
    std::vector<std::size_t> frontier(all.size());
    for (std::size_t i = 0; i < all.size(); ++i) frontier[i] = i;

    for (int round = 0; round < k; ++round) {
        std::vector<SingularCurve> next;
        for (std::size_t pi : frontier) {
            const SingularCurve parent = all[pi];
            const auto& nodes = parent.nodes;
            if (nodes.size() < 2) continue;
            for (int branch = 0; branch < P.side_count(); ++branch) {
                SingularCurve child;
                child.side = branch;
                child.generation = parent.generation + 1;
                child.target_vertex = parent.target_vertex;
                // Forward path of a child node: parent side, then the
                // parent's own path (length = generation).
                child.branch_itinerary.reserve(parent.branch_itinerary.size() + 1);
                child.branch_itinerary.push_back(parent.side);
                child.branch_itinerary.insert(child.branch_itinerary.end(),
                                              parent.branch_itinerary.begin(),
                                              parent.branch_itinerary.end());
                const Itinerary& path = child.branch_itinerary;

                auto flush = [&]() {
                    if (child.nodes.size() >= 2) {
                        if (child.nodes.front().s > child.nodes.back().s)
                            std::reverse(child.nodes.begin(), child.nodes.end());
                        next.push_back(child);
                        next.back().nodes.shrink_to_fit();
                    }
                    child.nodes.clear();
                };

                auto pre = [&](PhasePoint y) { return inverse_branch_step(P, f, y, branch); };
                auto lerp = [](PhasePoint a, PhasePoint b, double t) {
                    return PhasePoint{a.s + (b.s - a.s) * t, a.theta + (b.theta - a.theta) * t};
                };
                auto polish = [&](PhasePoint& x) {
                    return detail::polish_curve_node(P, f, branch, path, child.target_vertex, x);
                };

                // Feasibility edge on the parent segment (a ok, b not); the
                // resulting child point is polished back onto the curve.
                auto edge_toward = [&](PhasePoint a, PhasePoint b) -> std::optional<PhasePoint> {
                    double lo = 0.0, hi = 1.0;
                    for (int it = 0; it < 45; ++it) {
                        double mid = 0.5 * (lo + hi);
                        if (pre(lerp(a, b, mid))) lo = mid; else hi = mid;
                    }
                    auto xe = pre(lerp(a, b, lo));
                    if (!xe) return std::nullopt;
                    if (!polish(*xe)) return std::nullopt;
                    return xe;
                };

                // On-curve subdivision between two exact child nodes.
                auto refine = [&](auto&& self, PhasePoint xa, PhasePoint xb, int depth) -> void {
                    if (phase_dist(xa, xb) < spacing || depth > 14) {
                        detail::append_node(child.nodes, xb);
                        return;
                    }
                    PhasePoint xm{0.5 * (xa.s + xb.s), 0.5 * (xa.theta + xb.theta)};
                    if (!polish(xm)) {
                        detail::append_node(child.nodes, xb);
                        return;
                    }
                    self(self, xa, xm, depth + 1);
                    self(self, xm, xb, depth + 1);
                };

                std::optional<PhasePoint> prev_x = pre(nodes[0]);
                if (prev_x) detail::append_node(child.nodes, *prev_x);
                for (std::size_t i = 1; i < nodes.size(); ++i) {
                    auto x = pre(nodes[i]);
                    if (prev_x && x) {
                        refine(refine, *prev_x, *x, 0);
                    } else if (prev_x && !x) {
                        if (auto xe = edge_toward(nodes[i - 1], nodes[i]))
                            detail::append_node(child.nodes, *xe);
                        flush();
                    } else if (!prev_x && x) {
                        if (auto xe = edge_toward(nodes[i], nodes[i - 1]))
                            detail::append_node(child.nodes, *xe);
                        detail::append_node(child.nodes, *x);
                    }
                    prev_x = x;
                }
                flush();
            }
        }
        std::size_t first_new = all.size();
        all.insert(all.end(), next.begin(), next.end());
        frontier.clear();
        for (std::size_t i = first_new; i < all.size(); ++i) frontier.push_back(i);
    }
    return all;
}

/**
 * Polyline arrangement approximating N+_n = V u dM u S+_n. Carries the
 * singular curves of generations 0..n-1; the vertical lines V are implicit
 * (every curve lives strictly inside one side's arclength range).
 */
struct Arrangement {
    int order = 1; // n
    std::vector<SingularCurve> curves;
};

inline Arrangement build_arrangement(const Polygon& P, const ReflectionLaw& f, int order,
                                     double spacing = kCurveSpacing) {
    Arrangement arr;
    arr.order = order;
    arr.curves = pull_back(P, f, compute_S(P, spacing), order - 1, spacing);
    return arr;
}

struct ArrangementVertex {
    PhasePoint point;
    bool near_tangential = false; // crossing angle too shallow to resolve
    int curve_a = -1;
    int curve_b = -1; // -1 for curve-endpoint-on-V candidates
};

namespace detail {

inline std::int64_t cell_key(int ix, int iy) {
    return (static_cast<std::int64_t>(ix) << 24) ^ (iy & 0xffffff);
}

} // namespace detail

/**
 * Candidate fan centers. Distinct singular curves never cross transversally
 * (a point has a single forward orbit), so the arrangement's vertices are
 * curve endpoints: they land either on V, or on the curve of an earlier
 * generation (corner-grazing branch boundaries), or at tangential limits.
 * Pairwise polyline intersections are kept as well; they flag near-touching
 * configurations that the finite sampling cannot separate.
 */
inline std::vector<ArrangementVertex> arrangement_candidates(const Polygon& P,
                                                             const Arrangement& arr) {
    std::vector<ArrangementVertex> out;
    const double cell = 4.0 * kCurveSpacing;

    struct Seg {
        Vec2 a, b;
        int curve;
    };
    std::vector<Seg> segs;
    for (std::size_t ci = 0; ci < arr.curves.size(); ++ci) {
        const auto& nd = arr.curves[ci].nodes;
        for (std::size_t i = 0; i + 1 < nd.size(); ++i)
            segs.push_back({{nd[i].s, nd[i].theta}, {nd[i + 1].s, nd[i + 1].theta},
                            static_cast<int>(ci)});
    }
    std::unordered_map<std::int64_t, std::vector<int>> grid;
    auto insert_seg = [&](int idx) {
        const Seg& s = segs[idx];
        int x0 = static_cast<int>(std::floor(std::min(s.a.x, s.b.x) / cell));
        int x1 = static_cast<int>(std::floor(std::max(s.a.x, s.b.x) / cell));
        int y0 = static_cast<int>(std::floor(std::min(s.a.y, s.b.y) / cell));
        int y1 = static_cast<int>(std::floor(std::max(s.a.y, s.b.y) / cell));
        for (int ix = x0; ix <= x1; ++ix)
            for (int iy = y0; iy <= y1; ++iy) grid[detail::cell_key(ix, iy)].push_back(idx);
    };
    for (std::size_t i = 0; i < segs.size(); ++i) insert_seg(static_cast<int>(i));

    auto try_pair = [&](const Seg& p, const Seg& q, int ci, int cj) {
        Vec2 dp = p.b - p.a, dq = q.b - q.a;
        double den = cross(dp, dq);
        double sc = std::max({norm(dp), norm(dq), 1e-30});
        if (std::abs(den) < 1e-18) return;
        double t = cross(q.a - p.a, dq) / den;
        double u = cross(q.a - p.a, dp) / den;
        if (t < -1e-9 || t > 1 + 1e-9 || u < -1e-9 || u > 1 + 1e-9) return;
        Vec2 x = p.a + dp * t;
        ArrangementVertex v;
        v.point = {wrap_s(x.x), x.y};
        v.near_tangential = std::abs(den) < 1e-3 * sc * sc;
        v.curve_a = ci;
        v.curve_b = cj;
        out.push_back(v);
    };

    for (auto& [key, bucket] : grid) {
        for (std::size_t i = 0; i < bucket.size(); ++i) {
            for (std::size_t j = i + 1; j < bucket.size(); ++j) {
                const Seg& p = segs[bucket[i]];
                const Seg& q = segs[bucket[j]];
                if (p.curve == q.curve) continue;
                try_pair(p, q, p.curve, q.curve);
            }
        }
    }

    // Every curve endpoint is an arrangement vertex.
    for (std::size_t ci = 0; ci < arr.curves.size(); ++ci) {
        const auto& c = arr.curves[ci];
        if (c.nodes.empty()) continue;
        for (const PhasePoint& e : {c.nodes.front(), c.nodes.back()}) {
            ArrangementVertex v;
            v.point = e;
            v.curve_a = static_cast<int>(ci);
            out.push_back(v);
        }
    }

    // Deduplicate.
    std::vector<ArrangementVertex> unique;
    for (const auto& v : out) {
        bool dup = false;
        for (const auto& u : unique)
            if (phase_dist(u.point, v.point) < 1e-5) { dup = true; break; }
        if (!dup) unique.push_back(v);
    }
    return unique;
}

/// Distance from a phase point to the polyline of one curve.
inline double curve_distance(const SingularCurve& c, PhasePoint p) {
    double best = 1e300;
    for (std::size_t i = 0; i + 1 < c.nodes.size(); ++i) {
        Vec2 a{circle_delta(c.nodes[i].s, p.s), c.nodes[i].theta - p.theta};
        Vec2 b{circle_delta(c.nodes[i + 1].s, p.s), c.nodes[i + 1].theta - p.theta};
        Vec2 e = b - a;
        double len2 = dot(e, e);
        double t = len2 > 0 ? std::clamp(-dot(a, e) / len2, 0.0, 1.0) : 0.0;
        Vec2 q = a + e * t;
        best = std::min(best, norm(q));
    }
    return best;
}

struct CurveBBox {
    double s_lo = 0.0, s_hi = 0.0, th_lo = 0.0, th_hi = 0.0;

    double lower_bound_dist(PhasePoint p) const {
        double ds = 0.0;
        if (circle_delta(p.s, s_lo) < 0.0 || circle_delta(p.s, s_hi) > 0.0)
            ds = std::min(circle_dist(p.s, s_lo), circle_dist(p.s, s_hi));
        double dt = 0.0;
        if (p.theta < th_lo) dt = th_lo - p.theta;
        else if (p.theta > th_hi) dt = p.theta - th_hi;
        return std::hypot(ds, dt);
    }
};

inline std::vector<CurveBBox> curve_bounds(const Arrangement& arr) {
    std::vector<CurveBBox> out(arr.curves.size());
    for (std::size_t i = 0; i < arr.curves.size(); ++i) {
        const auto& nd = arr.curves[i].nodes;
        CurveBBox b{1e300, -1e300, 1e300, -1e300};
        for (const auto& p : nd) {
            b.s_lo = std::min(b.s_lo, p.s);
            b.s_hi = std::max(b.s_hi, p.s);
            b.th_lo = std::min(b.th_lo, p.theta);
            b.th_hi = std::max(b.th_hi, p.theta);
        }
        out[i] = b;
    }
    return out;
}

/// Distance from a phase point to the arrangement N+_n (curves, V and dM).
inline double arrangement_distance(const Polygon& P, const Arrangement& arr, PhasePoint p,
                                   const std::vector<CurveBBox>* bounds = nullptr) {
    double best = kHalfPi - std::abs(p.theta); // dM
    best = std::min(best, P.vertex_distance(p.s)); // V (horizontal gap)
    for (std::size_t i = 0; i < arr.curves.size(); ++i) {
        if (bounds && (*bounds)[i].lower_bound_dist(p) >= best) continue;
        best = std::min(best, curve_distance(arr.curves[i], p));
    }
    return best;
}

struct Sector {
    Itinerary itinerary;      // side sequence; a negative tail entry -(k+1)
                              // records an orbit dying at step k
    double arc_begin = 0.0;   // radians on the probe circle
    double arc_end = 0.0;     // arc_end > arc_begin, wraps modulo 2 pi
    bool regular = false;
};

struct SectorFan {
    PhasePoint center;
    double radius = 0.0;
    std::vector<Sector> sectors;

    int regular_count() const {
        int n = 0;
        for (const auto& s : sectors) n += s.regular ? 1 : 0;
        return n;
    }
};

/**
 * Classifies a probe circle around a point of N+_n into sectors by the
 * n-step itinerary. The probe radius shrinks automatically until every curve
 * meeting the circle passes through the center. A sector is flagged regular
 * when its itinerary is stable under radius/2 refinement and none of its
 * probe orbits comes within the grazing tolerance of a tangential collision.
 */
inline SectorFan sector_fan(const Polygon& P, const ReflectionLaw& f, const Arrangement& arr,
                            PhasePoint center, double radius, int probes = 720,
                            const std::vector<CurveBBox>* bounds = nullptr) {
    if (arrangement_distance(P, arr, center, bounds) > 1e-6)
        throw std::invalid_argument("sector_fan: center is not on the singular arrangement");

    // Shrink until only through-center curves cross the probe circle.
    double margin = kHalfPi - std::abs(center.theta);
    radius = std::min(radius, 0.5 * margin);
    {
        double dv = P.vertex_distance(center.s);
        if (dv > 1e-7) radius = std::min(radius, 0.5 * dv);
        for (std::size_t i = 0; i < arr.curves.size(); ++i) {
            if (bounds && (*bounds)[i].lower_bound_dist(center) >= radius) continue;
            double dmin = curve_distance(arr.curves[i], center);
            if (dmin > 1e-7 && dmin < radius) radius = std::max(0.5 * dmin, 1e-7);
        }
    }

    const int n = arr.order;
    struct Probe {
        Itinerary itin;
        double graze_margin = kHalfPi;
    };
    auto classify = [&](double r, double phi) {
        Probe pr;
        PhasePoint x{wrap_s(center.s + r * std::cos(phi)), center.theta + r * std::sin(phi)};
        pr.itin.reserve(n);
        int side = P.side_of(x.s);
        for (int k = 0; k < n; ++k) {
            StepResult st = detail::step_on_side(P, &f, side, x.s, x.theta);
            if (!st.regular()) {
                pr.itin.push_back(-(k + 1));
                return pr;
            }
            pr.graze_margin = std::min(pr.graze_margin, kHalfPi - std::abs(st.pre_angle));
            pr.itin.push_back(st.side_hit);
            x = st.out;
            side = st.side_hit;
        }
        return pr;
    };

    const int m = probes;
    std::vector<Probe> ring(m);
    std::vector<double> phis(m);
    for (int i = 0; i < m; ++i) {
        phis[i] = 2.0 * kPi * (i + 0.5) / m;
        ring[i] = classify(radius, phis[i]);
    }

    SectorFan fan;
    fan.center = center;
    fan.radius = radius;

    // Merge circular runs with equal itinerary.
    int first_change = -1;
    for (int i = 0; i < m; ++i) {
        if (ring[i].itin != ring[(i + m - 1) % m].itin) { first_change = i; break; }
    }
    if (first_change < 0) {
        Sector s;
        s.itinerary = ring[0].itin;
        s.arc_begin = 0.0;
        s.arc_end = 2.0 * kPi;
        double gm = kHalfPi;
        for (auto& p : ring) gm = std::min(gm, p.graze_margin);
        s.regular = gm > kGrazeTol && classify(radius / 2, phis[0]).itin == s.itinerary;
        fan.sectors.push_back(s);
        return fan;
    }
    int i = first_change;
    do {
        int j = i;
        double gm = kHalfPi;
        while (true) {
            gm = std::min(gm, ring[j % m].graze_margin);
            int nxt = (j + 1) % m;
            if (ring[nxt].itin != ring[i % m].itin || nxt == first_change) break;
            ++j;
        }
        Sector s;
        s.itinerary = ring[i % m].itin;
        s.arc_begin = phis[i % m];
        s.arc_end = phis[j % m] + (j >= m ? 2.0 * kPi : 0.0);
        if (s.arc_end < s.arc_begin) s.arc_end += 2.0 * kPi;
        bool dead = false;
        for (int v : s.itinerary) dead = dead || v < 0;
        // Refinement check at radius/2 over the middle of the arc.
        bool stable = true;
        for (double frac : {0.3, 0.5, 0.7}) {
            double phi = s.arc_begin + (s.arc_end - s.arc_begin) * frac;
            if (classify(radius / 2, phi).itin != s.itinerary) { stable = false; break; }
        }
        s.regular = !dead && stable && gm > kGrazeTol;
        fan.sectors.push_back(s);
        i = (j + 1) % m;
    } while (i != first_change);
    return fan;
}

struct BranchingResult {
    int b = 0;
    PhasePoint witness;
    int candidates_examined = 0;
};

/**
 * Branching number of order n: the maximum number of distinct regular
 * sectors over the candidate fan centers (polyline crossings and endpoints
 * on V). The candidate set is a heuristic superset of the fan-rich points.
 */
inline BranchingResult branching_number(const Polygon& P, const ReflectionLaw& f, int n,
                                        double probe_radius = 1e-4, int probes = 720,
                                        const Arrangement* prebuilt = nullptr) {
    Arrangement local;
    const Arrangement* arr = prebuilt;
    if (!arr) {
        local = build_arrangement(P, f, n);
        arr = &local;
    }
    auto candidates = arrangement_candidates(P, *arr);
    auto bounds = curve_bounds(*arr);
    BranchingResult res;
    res.candidates_examined = static_cast<int>(candidates.size());
    for (const auto& cand : candidates) {
        SectorFan fan = sector_fan(P, f, *arr, cand.point, probe_radius, probes, &bounds);
        int reg = fan.regular_count();
        if (reg > res.b) {
            res.b = reg;
            res.witness = cand.point;
        }
    }
    return res;
}

} // namespace billiards
