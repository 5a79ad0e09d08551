#pragma once

#include "billiards/geometry.hpp"
#include "billiards/reflection.hpp"

#include <optional>
#include <vector>

namespace billiards {

/// Point of the phase cylinder M = S^1 x [-pi/2, pi/2]. The angle theta is
/// measured from the inward normal, positive toward the positive tangent;
/// theta = 0 is motion perpendicular to the side.
struct PhasePoint {
    double s = 0.0;
    double theta = 0.0;
};

inline double phase_dist(PhasePoint a, PhasePoint b) {
    return std::hypot(circle_delta(a.s, b.s), a.theta - b.theta);
}

enum class StepOutcome { Regular, VertexHit, Grazing, StartAtVertex };

/// One application of the billiard map. Singular outcomes are values, not
/// exceptions, so grid scans over initial conditions can cross the singular
/// set without unwinding.
struct StepResult {
    StepOutcome outcome = StepOutcome::Regular;
    double pre_angle = 0.0;  // arrival angle before the reflection law
    PhasePoint out;          // next phase point
    double flight = 0.0;     // Euclidean flight length (normalized units)
    int side_hit = -1;

    bool regular() const { return outcome == StepOutcome::Regular; }
};

namespace detail {

/// Core step with the departure side already known. `apply_law` selects
/// between the specular map (false) and the full billiard map (true).
inline StepResult step_on_side(const Polygon& P, const ReflectionLaw* f,
                               int side, double s, double theta) {
    StepResult r;
    if (P.vertex_distance(s) < kVertexTol) {
        r.outcome = StepOutcome::StartAtVertex;
        return r;
    }
    if (std::abs(theta) > kHalfPi - kGrazeTol) {
        r.outcome = StepOutcome::Grazing;
        return r;
    }
    double sn = std::sin(theta), cs = std::cos(theta);
    Vec2 n = P.side_normal(side), tau = P.side_tangent(side);
    Vec2 origin = P.vertex(side) + tau * (s - P.side_start(side));
    Vec2 dir{cs * n.x + sn * tau.x, cs * n.y + sn * tau.y};
    RayHit hit = P.cast_ray(origin, dir);
    if (hit.kind == HitKind::Vertex) {
        r.outcome = StepOutcome::VertexHit;
        r.flight = hit.t;
        r.side_hit = hit.side;
        return r;
    }
    if (hit.kind == HitKind::Grazing) {
        r.outcome = StepOutcome::Grazing;
        r.flight = hit.t;
        r.side_hit = hit.side;
        return r;
    }
    // Arrival angle from the pair offset; equals atan2 of the hit data.
    double pre = wrap_angle(P.pair_offset(side, hit.side) - theta);
    r.outcome = StepOutcome::Regular;
    r.pre_angle = pre;
    r.out.s = hit.s;
    r.out.theta = f ? f->eval(pre) : pre;
    r.flight = hit.t;
    r.side_hit = hit.side;
    return r;
}

} // namespace detail

/// Specular billiard map: out.theta is the arrival angle itself.
inline StepResult standard_step(const Polygon& P, PhasePoint x) {
    return detail::step_on_side(P, nullptr, P.side_of(wrap_s(x.s)), wrap_s(x.s), x.theta);
}

/// Billiard map with reflection law: out.theta = f(arrival angle).
inline StepResult step(const Polygon& P, const ReflectionLaw& f, PhasePoint x) {
    return detail::step_on_side(P, &f, P.side_of(wrap_s(x.s)), wrap_s(x.s), x.theta);
}

struct Mat2 {
    double a11 = 0.0, a12 = 0.0, a21 = 0.0, a22 = 0.0;

    Mat2 operator*(const Mat2& o) const {
        return {a11 * o.a11 + a12 * o.a21, a11 * o.a12 + a12 * o.a22,
                a21 * o.a11 + a22 * o.a21, a21 * o.a12 + a22 * o.a22};
    }
    double det() const { return a11 * a22 - a12 * a21; }
};

/// Derivative of the billiard map at a regular point:
///   -[[cos(theta)/cos(pre), t/cos(pre)], [0, f'(pre)]].
inline std::optional<Mat2> derivative(const Polygon& P, const ReflectionLaw& f, PhasePoint x) {
    StepResult r = step(P, f, x);
    if (!r.regular()) return std::nullopt;
    double cpre = std::cos(r.pre_angle);
    Mat2 m;
    m.a11 = -std::cos(x.theta) / cpre;
    m.a12 = -r.flight / cpre;
    m.a21 = 0.0;
    m.a22 = -f.deriv(r.pre_angle);
    return m;
}

/// Sequence of sides hit along an orbit; consecutive entries differ because
/// a flight leaves its side.
using Itinerary = std::vector<int>;

struct Termination {
    int step_index = 0; // index of the failed step, counting from 0
    StepOutcome outcome = StepOutcome::VertexHit;
};

struct Orbit {
    std::vector<PhasePoint> points; // points[0] = x0
    Itinerary itinerary;            // side of points[k] for k >= 1
    std::optional<Termination> terminated;
};

/// Iterates the map up to n steps, stopping early at a singular outcome.
inline Orbit orbit(const Polygon& P, const ReflectionLaw& f, PhasePoint x0, int n) {
    Orbit o;
    o.points.reserve(static_cast<std::size_t>(n) + 1);
    o.points.push_back(x0);
    PhasePoint x = x0;
    int side = P.side_of(wrap_s(x.s));
    for (int k = 0; k < n; ++k) {
        StepResult r = detail::step_on_side(P, &f, side, wrap_s(x.s), x.theta);
        if (!r.regular()) {
            o.terminated = Termination{k, r.outcome};
            return o;
        }
        x = r.out;
        side = r.side_hit;
        o.points.push_back(x);
        o.itinerary.push_back(side);
    }
    return o;
}

/**
 * Inverse branch of the billiard map: recovers x on `prev_side` with
 * step(P, f, x) = y. Returns nullopt when y is not reachable by a regular
 * step from prev_side (the reversed ray misses the side, hits a vertex, or
 * y.theta is outside the image of the law).
 */
inline std::optional<PhasePoint> inverse_branch_step(const Polygon& P, const ReflectionLaw& f,
                                                     PhasePoint y, int prev_side) {
    auto pre = f.try_inverse(y.theta);
    if (!pre) return std::nullopt;
    if (std::abs(*pre) > kHalfPi - kGrazeTol) return std::nullopt;
    double sy = wrap_s(y.s);
    if (P.vertex_distance(sy) < kVertexTol) return std::nullopt;
    int side_y = P.side_of(sy);
    Vec2 n = P.side_normal(side_y), tau = P.side_tangent(side_y);
    Vec2 origin = P.vertex(side_y) + tau * (sy - P.side_start(side_y));
    double sn = std::sin(*pre), cs = std::cos(*pre);
    // Mirror of the outgoing direction in the normal, i.e. the flight reversed.
    Vec2 back{cs * n.x - sn * tau.x, cs * n.y - sn * tau.y};
    RayHit hit;
    try {
        hit = P.cast_ray(origin, back);
    } catch (const GeometryError&) {
        return std::nullopt;
    }
    if (hit.kind != HitKind::Side || hit.side != prev_side) return std::nullopt;
    double theta_x = wrap_angle(P.pair_offset(prev_side, side_y) - *pre);
    if (std::abs(theta_x) > kHalfPi - kGrazeTol) return std::nullopt;
    return PhasePoint{hit.s, theta_x};
}

} // namespace billiards
