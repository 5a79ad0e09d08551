#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace billiards {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kHalfPi = std::numbers::pi / 2.0;

/// Arclength distance below which a boundary hit counts as a vertex hit.
inline constexpr double kVertexTol = 1e-9;
/// Angular distance from +-pi/2 below which an arrival counts as grazing.
inline constexpr double kGrazeTol = 1e-9;
/// Minimum flight length accepted by the ray caster; rejects the self-hit
/// of the starting side.
inline constexpr double kRayTmin = 1e-11;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double px, double py) : x(px), y(py) {}

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double k) const { return {x * k, y * k}; }
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline Vec2 normalized(Vec2 a) {
    double n = norm(a);
    return {a.x / n, a.y / n};
}
/// Rotation by +90 degrees; maps a ccw tangent to the inward normal.
inline Vec2 rot90(Vec2 a) { return {-a.y, a.x}; }

/// Wraps an arclength coordinate into [0, 1).
inline double wrap_s(double s) {
    double r = s - std::floor(s);
    return r >= 1.0 ? 0.0 : r;
}

/// Signed circle distance from a to b, in (-0.5, 0.5].
inline double circle_delta(double a, double b) {
    double d = a - b;
    d -= std::round(d);
    return d;
}

inline double circle_dist(double a, double b) { return std::abs(circle_delta(a, b)); }

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
    a = std::remainder(a, 2.0 * kPi);
    return a;
}

class PolygonError : public std::invalid_argument {
public:
    enum class Kind { TooFewVertices, DegenerateVertex, NotSimple };
    PolygonError(Kind k, const std::string& msg) : std::invalid_argument(msg), kind(k) {}
    Kind kind;
};

class GeometryError : public std::runtime_error {
public:
    explicit GeometryError(const std::string& msg) : std::runtime_error(msg) {}
};

class AtVertexError : public std::invalid_argument {
public:
    explicit AtVertexError(double s)
        : std::invalid_argument("arclength " + std::to_string(s) + " is at a vertex") {}
};

/// Point on the boundary away from the corners.
struct BoundaryPoint {
    double s = 0.0;       // arclength in [0,1)
    int side = -1;        // side index in [0, d)
    Vec2 position;
    Vec2 tangent;         // unit, positive (ccw) orientation
    Vec2 inward_normal;   // unit, tangent rotated +90 degrees
};

enum class HitKind { Side, Vertex, Grazing };

struct RayHit {
    double s = 0.0;   // arclength of the hit point
    double t = 0.0;   // Euclidean flight length (normalized units)
    HitKind kind = HitKind::Side;
    int side = -1;    // side containing the hit
    Vec2 point;
    double sin_arrival = 0.0; // dir . tangent at the hit
    double cos_arrival = 0.0; // -dir . inward normal at the hit

    /// Arrival angle measured from the inward normal at the hit point.
    double arrival_angle() const { return std::atan2(sin_arrival, cos_arrival); }
};

namespace detail {

// Proper intersection test for open segments (a0,a1) x (b0,b1); touching at
// shared endpoints does not count.
inline bool segments_cross(Vec2 a0, Vec2 a1, Vec2 b0, Vec2 b1) {
    Vec2 da = a1 - a0, db = b1 - b0;
    double den = cross(da, db);
    double scale = std::max({std::abs(da.x), std::abs(da.y), std::abs(db.x), std::abs(db.y), 1e-30});
    if (std::abs(den) < 1e-14 * scale * scale) {
        // Parallel: overlap counts as failing simplicity.
        if (std::abs(cross(b0 - a0, da)) > 1e-12 * scale * scale) return false;
        double la = dot(da, da);
        double t0 = dot(b0 - a0, da) / la, t1 = dot(b1 - a0, da) / la;
        if (t0 > t1) std::swap(t0, t1);
        return t1 > 1e-9 && t0 < 1.0 - 1e-9;
    }
    double t = cross(b0 - a0, db) / den;
    double u = cross(b0 - a0, da) / den;
    const double eps = 1e-12;
    return t > eps && t < 1.0 - eps && u > eps && u < 1.0 - eps;
}

} // namespace detail

/**
 * Polygonal table with arclength parametrization normalized so that the
 * perimeter equals one. Vertices are stored in counterclockwise order and
 * the side through arclength s in [s_i, s_{i+1}) is side i. Immutable after
 * construction; all queries are const and safe for concurrent use.
 */
class Polygon {
public:
    static Polygon build(std::vector<Vec2> raw_vertices);

    int side_count() const { return static_cast<int>(verts_.size()); }
    double scale() const { return scale_; }
    const std::vector<Vec2>& vertices() const { return verts_; }
    const std::vector<double>& s_vertices() const { return s_vert_; }

    Vec2 vertex(int i) const { return verts_[mod(i)]; }
    double side_start(int i) const { return s_vert_[mod(i)]; }
    double side_length(int i) const { return len_[mod(i)]; }
    Vec2 side_tangent(int i) const { return tan_[mod(i)]; }
    Vec2 side_normal(int i) const { return nrm_[mod(i)]; }
    /// World angle of the side tangent.
    double side_angle(int i) const { return ang_[mod(i)]; }

    /// Arrival-angle offset between two sides: for a flight from side i to
    /// side j, theta_arrival = wrap(pair_offset(i,j) - theta_departure).
    double pair_offset(int i, int j) const { return off_[mod(i) * side_count() + mod(j)]; }

    /// Side index containing arclength s (s in [0,1), may be a vertex value;
    /// a vertex belongs to the side it starts).
    int side_of(double s) const {
        auto it = std::upper_bound(s_vert_.begin(), s_vert_.end(), s);
        return static_cast<int>(it - s_vert_.begin()) - 1;
    }

    /// Arclength distance from s to the nearest vertex.
    double vertex_distance(double s) const {
        int i = side_of(wrap_s(s));
        double a = circle_dist(s, s_vert_[i]);
        double b = circle_dist(s, s_vert_[(i + 1) % side_count()]);
        return std::min(a, b);
    }

    BoundaryPoint boundary_point(double s) const {
        s = wrap_s(s);
        if (vertex_distance(s) < kVertexTol) throw AtVertexError(s);
        int i = side_of(s);
        BoundaryPoint bp;
        bp.s = s;
        bp.side = i;
        bp.position = verts_[i] + tan_[i] * (s - s_vert_[i]);
        bp.tangent = tan_[i];
        bp.inward_normal = nrm_[i];
        return bp;
    }

    Vec2 point_at(double s) const {
        s = wrap_s(s);
        int i = side_of(s);
        return verts_[i] + tan_[i] * (s - s_vert_[i]);
    }

    /**
     * First intersection of the ray from `origin` in direction `dir` (unit,
     * pointing strictly into the interior) with the boundary. Every side is
     * tested, so non-convex tables are supported. Throws GeometryError when
     * no side is hit, which signals corrupted geometry.
     */
    RayHit cast_ray(Vec2 origin, Vec2 dir) const {
        int d = side_count();
        double best_t = 1e300;
        int best_side = -1;
        double best_u = 0.0;
        for (int j = 0; j < d; ++j) {
            Vec2 rel = verts_[j] - origin;
            Vec2 edge = tan_[j] * len_[j];
            double den = cross(dir, edge);
            if (std::abs(den) < 1e-15) continue;
            double t = cross(rel, edge) / den;
            if (t <= kRayTmin || t >= best_t) continue;
            double u = cross(rel, dir) / den; // in [0,1] across the side
            if (u < -1e-12 || u > 1.0 + 1e-12) continue;
            best_t = t;
            best_side = j;
            best_u = std::clamp(u, 0.0, 1.0);
        }
        if (best_side < 0) throw GeometryError("cast_ray: ray escaped the polygon");
        RayHit hit;
        hit.t = best_t;
        hit.side = best_side;
        double along = best_u * len_[best_side];
        hit.s = wrap_s(s_vert_[best_side] + along);
        hit.point = verts_[best_side] + tan_[best_side] * along;
        hit.sin_arrival = dot(dir, tan_[best_side]);
        hit.cos_arrival = -dot(dir, nrm_[best_side]);
        double dv = std::min(along, len_[best_side] - along);
        if (dv < kVertexTol) {
            hit.kind = HitKind::Vertex;
        } else if (hit.cos_arrival < kGrazeTol) {
            // cos(pi/2 - eps) ~ eps, so this is |arrival| > pi/2 - kGrazeTol.
            hit.kind = HitKind::Grazing;
        } else {
            hit.kind = HitKind::Side;
        }
        return hit;
    }

    RayHit cast_ray(const BoundaryPoint& from, Vec2 dir) const {
        return cast_ray(from.position, dir);
    }

    /// Even-odd test; points within ~1e-12 of the boundary are unreliable.
    bool contains(Vec2 p) const {
        bool in = false;
        int d = side_count();
        for (int i = 0; i < d; ++i) {
            Vec2 a = verts_[i], b = verts_[(i + 1) % d];
            if ((a.y > p.y) != (b.y > p.y)) {
                double xz = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if (p.x < xz) in = !in;
            }
        }
        return in;
    }

    /**
     * True when a straight segment inside the polygon joins two parallel
     * sides orthogonally with at least one endpoint away from the corners.
     * Such tables carry parabolic period-two orbits.
     */
    bool has_parallel_facing_sides() const {
        int d = side_count();
        for (int i = 0; i < d; ++i) {
            for (int j = i + 1; j < d; ++j) {
                if (std::abs(cross(tan_[i], tan_[j])) > 1e-9) continue;
                if (dot(tan_[i], tan_[j]) > 0.0) continue; // same direction: not facing
                double h = dot(verts_[j] - verts_[i], nrm_[i]);
                if (h < 1e-12) continue; // side j behind side i
                // Overlap of the two sides projected on side i's axis.
                double ai0 = dot(verts_[i], tan_[i]);
                double ai1 = ai0 + len_[i];
                double bj0 = dot(verts_[(j + 1) % d], tan_[i]);
                double bj1 = dot(verts_[j], tan_[i]);
                if (bj0 > bj1) std::swap(bj0, bj1);
                double lo = std::max(ai0, bj0), hi = std::min(ai1, bj1);
                if (hi - lo < 2.0 * kVertexTol) continue;
                for (double frac : {0.5, 0.25, 0.75}) {
                    double m = lo + (hi - lo) * frac;
                    Vec2 w = verts_[i] + tan_[i] * (m - ai0);
                    Vec2 q = w + nrm_[i] * h;
                    bool blocked = false;
                    for (int k = 0; k < d && !blocked; ++k) {
                        if (k == i || k == j) continue;
                        blocked = detail::segments_cross(w, q, verts_[k], verts_[(k + 1) % d]);
                    }
                    if (!blocked) return true;
                }
            }
        }
        return false;
    }

private:
    int mod(int i) const {
        int d = side_count();
        return ((i % d) + d) % d;
    }

    std::vector<Vec2> verts_;
    std::vector<double> s_vert_;
    std::vector<double> len_;
    std::vector<Vec2> tan_;
    std::vector<Vec2> nrm_;
    std::vector<double> ang_;
    std::vector<double> off_;
    double scale_ = 1.0;
};

inline Polygon Polygon::build(std::vector<Vec2> v) {
    const std::size_t d = v.size();
    if (d < 3) throw PolygonError(PolygonError::Kind::TooFewVertices, "polygon needs at least 3 vertices");

    // Reject collinear consecutive triples: every listed vertex must be a corner.
    for (std::size_t i = 0; i < d; ++i) {
        Vec2 a = v[i], b = v[(i + 1) % d], c = v[(i + 2) % d];
        double cr = cross(b - a, c - b);
        double sc = std::max({norm(b - a), norm(c - b), 1e-30});
        if (std::abs(cr) < 1e-12 * sc * sc)
            throw PolygonError(PolygonError::Kind::DegenerateVertex,
                               "collinear consecutive vertices at index " + std::to_string((i + 1) % d));
    }

    // Simplicity: non-adjacent sides must not intersect.
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i + 1; j < d; ++j) {
            bool adjacent = (j == i + 1) || (i == 0 && j == d - 1);
            if (adjacent) continue;
            if (detail::segments_cross(v[i], v[(i + 1) % d], v[j], v[(j + 1) % d]))
                throw PolygonError(PolygonError::Kind::NotSimple, "sides cross: polygon is not simple");
        }
    }

    // Normalize orientation to counterclockwise, keeping vertex 0 first.
    double area2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) area2 += cross(v[i], v[(i + 1) % d]);
    if (area2 < 0.0) std::reverse(v.begin() + 1, v.end());

    double perimeter = 0.0;
    for (std::size_t i = 0; i < d; ++i) perimeter += norm(v[(i + 1) % d] - v[i]);

    Polygon p;
    p.scale_ = perimeter;
    p.verts_.resize(d);
    for (std::size_t i = 0; i < d; ++i) p.verts_[i] = {v[i].x / perimeter, v[i].y / perimeter};

    p.s_vert_.resize(d);
    p.len_.resize(d);
    p.tan_.resize(d);
    p.nrm_.resize(d);
    p.ang_.resize(d);
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        p.s_vert_[i] = s;
        Vec2 e = p.verts_[(i + 1) % d] - p.verts_[i];
        p.len_[i] = norm(e);
        p.tan_[i] = normalized(e);
        p.nrm_[i] = rot90(p.tan_[i]);
        p.ang_[i] = std::atan2(p.tan_[i].y, p.tan_[i].x);
        s += p.len_[i];
    }
    p.off_.resize(d * d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            p.off_[i * d + j] = wrap_angle(kPi + p.ang_[i] - p.ang_[j]);
    return p;
}

inline Polygon build_polygon(const std::vector<Vec2>& raw_vertices) {
    return Polygon::build(raw_vertices);
}

inline BoundaryPoint boundary_point(const Polygon& p, double s) { return p.boundary_point(s); }

inline bool has_parallel_facing_sides(const Polygon& p) { return p.has_parallel_facing_sides(); }

} // namespace billiards
