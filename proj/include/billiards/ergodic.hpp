#pragma once

#include "billiards/expansion.hpp"
#include "billiards/parallel.hpp"
#include "billiards/rng.hpp"

#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

namespace billiards {

/**
 * Fixed observable set used by the component scans: sin 2 pi s, cos 2 pi s,
 * theta, theta^2, and one indicator per side. Keeping the set fixed makes
 * component counts comparable across runs; the side indicators separate
 * measures that would agree on the smooth observables.
 */
struct ObservableSet {
    std::vector<std::string> names;
    int side_count = 0;             // indicators occupy the last side_count slots
    double bound = kHalfPi * kHalfPi; // declared bound on |observable|

    static ObservableSet defaults(const Polygon& P) {
        ObservableSet obs;
        obs.side_count = P.side_count();
        obs.names = {"sin2pis", "cos2pis", "theta", "theta2"};
        for (int i = 0; i < P.side_count(); ++i)
            obs.names.push_back("side" + std::to_string(i));
        return obs;
    }

    std::size_t size() const { return names.size(); }

    void eval(PhasePoint x, int side, double* out) const {
        double a = 2.0 * kPi * x.s;
        out[0] = std::sin(a);
        out[1] = std::cos(a);
        out[2] = x.theta;
        out[3] = x.theta * x.theta;
        for (int i = 0; i < side_count; ++i) out[4 + i] = (i == side) ? 1.0 : 0.0;
    }
};

struct BirkhoffResult {
    std::vector<double> means;      // full-sample Birkhoff averages
    std::vector<double> half_gap;   // |half-sample mean - full mean| per observable
    bool converged = false;
    bool died = false;
    int steps_done = 0;
};

/**
 * Birkhoff averages of the observable set along the orbit of x0, discarding
 * the first `burn_in` collisions. Convergence is judged by the split-sample
 * test: first half versus the whole, gap below conv_tol per observable.
 * Orbits that terminate on the singular set report died (never converged).
 */
inline BirkhoffResult birkhoff_average(const Polygon& P, const ReflectionLaw& f, PhasePoint x0,
                                       const ObservableSet& obs, long n, long burn_in,
                                       double conv_tol = 1.5e-2) {
    const std::size_t m = obs.size();
    BirkhoffResult res;
    res.means.assign(m, 0.0);
    res.half_gap.assign(m, 0.0);
    std::vector<double> half(m, 0.0), full(m, 0.0), vals(m, 0.0);

    const long samples = n - burn_in;
    if (samples <= 1) return res;
    const long half_count = samples / 2;

    PhasePoint x = x0;
    int side = P.side_of(wrap_s(x.s));
    long taken = 0;
    for (long k = 0; k < n; ++k) {
        StepResult r = detail::step_on_side(P, &f, side, x.s, x.theta);
        if (!r.regular()) {
            res.died = true;
            res.steps_done = static_cast<int>(k);
            if (taken > 0)
                for (std::size_t i = 0; i < m; ++i) res.means[i] = full[i] / taken;
            return res;
        }
        x = r.out;
        side = r.side_hit;
        if (k >= burn_in) {
            obs.eval(x, side, vals.data());
            for (std::size_t i = 0; i < m; ++i) full[i] += vals[i];
            if (taken < half_count)
                for (std::size_t i = 0; i < m; ++i) half[i] += vals[i];
            ++taken;
        }
    }
    res.steps_done = static_cast<int>(n);
    res.converged = true;
    for (std::size_t i = 0; i < m; ++i) {
        res.means[i] = full[i] / taken;
        res.half_gap[i] = std::abs(half[i] / half_count - res.means[i]);
        if (res.half_gap[i] >= conv_tol) res.converged = false;
    }
    return res;
}

struct LyapunovPair {
    double chi_u = 0.0;  // horizontal (unstable) exponent
    double chi_s = 0.0;  // vertical (stable) exponent
    double det_avg = 0.0; // Birkhoff average of log |det DPhi|
};

/// Lyapunov exponents along a regular orbit segment. The cocycle is upper
/// triangular, so both exponents are Birkhoff averages of the diagonal.
inline std::optional<LyapunovPair> lyapunov(const Polygon& P, const ReflectionLaw& f,
                                            PhasePoint x0, long n) {
    LyapunovPair out;
    double sum_u = 0.0, sum_s = 0.0, sum_det = 0.0;
    PhasePoint x = x0;
    int side = P.side_of(wrap_s(x.s));
    for (long k = 0; k < n; ++k) {
        StepResult r = detail::step_on_side(P, &f, side, x.s, x.theta);
        if (!r.regular()) return std::nullopt;
        double a = std::cos(x.theta) / std::cos(r.pre_angle);
        double d = f.deriv(r.pre_angle);
        sum_u += std::log(a);
        sum_s += std::log(d);
        sum_det += std::log(a * d);
        x = r.out;
        side = r.side_hit;
    }
    out.chi_u = sum_u / static_cast<double>(n);
    out.chi_s = sum_s / static_cast<double>(n);
    out.det_avg = sum_det / static_cast<double>(n);
    return out;
}

/// Random regular points pushed through a transient; `keep` further images
/// per surviving orbit approximate the attractor.
inline std::vector<PhasePoint> attractor_sample(const Polygon& P, const ReflectionLaw& f,
                                                int ensemble, int transient, int keep,
                                                std::uint64_t seed) {
    std::vector<PhasePoint> out;
    SplitMix64 rng(seed);
    for (int e = 0; e < ensemble; ++e) {
        PhasePoint x{rng.uniform(), rng.uniform(-1.0, 1.0) * (kHalfPi * 0.999)};
        int side = P.side_of(wrap_s(x.s));
        bool alive = true;
        for (int k = 0; k < transient && alive; ++k) {
            StepResult r = detail::step_on_side(P, &f, side, x.s, x.theta);
            alive = r.regular();
            if (alive) { x = r.out; side = r.side_hit; }
        }
        for (int k = 0; k < keep && alive; ++k) {
            StepResult r = detail::step_on_side(P, &f, side, x.s, x.theta);
            alive = r.regular();
            if (alive) {
                x = r.out;
                side = r.side_hit;
                out.push_back(x);
            }
        }
    }
    return out;
}

struct AutocorrResult {
    bool ok = false;
    std::vector<double> C;   // autocovariance at lags 0..max_lag
    double fitted_rate = 0.0; // decay exponent per iteration (positive = decay)
    double r_squared = 0.0;
    int usable_lags = 0;
};

/**
 * Empirical autocovariance of one observable along a single long orbit and
 * a least-squares exponential-decay fit of log |C(k)| over the lags above
 * the noise floor 3 C(0) / sqrt(n).
 */
inline AutocorrResult autocorrelation(const Polygon& P, const ReflectionLaw& f, PhasePoint x0,
                                      const std::function<double(PhasePoint, int)>& observable,
                                      long n, int max_lag, long burn_in = 1000) {
    AutocorrResult res;
    const int L = max_lag + 1;
    std::vector<double> ring(L, 0.0), acc(L, 0.0);
    double sum = 0.0;
    long count = 0;

    PhasePoint x = x0;
    int side = P.side_of(wrap_s(x.s));
    for (long k = 0; k < burn_in; ++k) {
        StepResult r = detail::step_on_side(P, &f, side, x.s, x.theta);
        if (!r.regular()) return res;
        x = r.out;
        side = r.side_hit;
    }
    const long total = n + max_lag;
    for (long k = 0; k < total; ++k) {
        StepResult r = detail::step_on_side(P, &f, side, x.s, x.theta);
        if (!r.regular()) return res;
        x = r.out;
        side = r.side_hit;
        double v = observable(x, side);
        ring[k % L] = v;
        sum += v;
        ++count;
        if (k >= max_lag)
            for (int lag = 0; lag <= max_lag; ++lag) acc[lag] += v * ring[(k - lag) % L];
    }
    double mean = sum / static_cast<double>(count);
    res.C.resize(L);
    double pairs = static_cast<double>(total - max_lag);
    for (int lag = 0; lag <= max_lag; ++lag) res.C[lag] = acc[lag] / pairs - mean * mean;

    double c0 = res.C[0];
    if (c0 <= 0.0) { res.ok = false; return res; }
    double noise_floor = 3.0 * c0 / std::sqrt(static_cast<double>(n));
    // OLS of log|C(k)| against k over the usable lags.
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    int used = 0;
    for (int lag = 1; lag <= max_lag; ++lag) {
        if (std::abs(res.C[lag]) <= noise_floor) break;
        double lx = static_cast<double>(lag), ly = std::log(std::abs(res.C[lag]));
        sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly; syy += ly * ly;
        ++used;
    }
    res.usable_lags = used;
    if (used < 3) return res;
    double nn = used;
    double slope = (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
    double ss_tot = syy - sy * sy / nn;
    double intercept = (sy - slope * sx) / nn;
    double ss_res = 0.0;
    for (int lag = 1; lag <= used; ++lag) {
        double ly = std::log(std::abs(res.C[lag]));
        double e = ly - (intercept + slope * lag);
        ss_res += e * e;
    }
    res.fitted_rate = -slope;
    res.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 0.0;
    res.ok = true;
    return res;
}

struct ErgodicComponentReport {
    int id = 0;
    std::vector<double> mean_vector;
    double basin_fraction = 0.0;
    LyapunovPair lyap;
    std::vector<PhasePoint> attractor_points;
    double correlation_rate = 0.0;
    double correlation_r2 = 0.0;
    PhasePoint representative;
};

struct SrbScan {
    std::vector<ErgodicComponentReport> components;
    double unassigned_fraction = 1.0;
    int grid_s = 0;
    int grid_theta = 0;
    long converged_points = 0;
};

struct SrbOptions {
    long steps = 100000;
    long burn_in = 1000;
    double conv_tol = 1.5e-2;
    double cluster_tol = 0.15; // 10x the expected split-sample error
    long lyapunov_steps = 200000;
    int attractor_keep = 512;
    long correlation_steps = 1000000;
    int correlation_max_lag = 30;
    unsigned workers = 1;
    std::uint64_t seed = 1;
    bool enrich = true; // attach Lyapunov/attractor/correlation data
};

/**
 * Grid scan for ergodic SRB components: Birkhoff averages per grid point,
 * complete-linkage clustering (max-metric; a cluster is a box of diameter
 * at most cluster_tol) of the converged mean vectors. Grid points whose
 * orbits die or fail the convergence test are reported as unassigned, never
 * extrapolated.
 */
inline SrbScan find_ergodic_components(const Polygon& P, const ReflectionLaw& f, int grid_s,
                                       int grid_theta, const ObservableSet& obs,
                                       const SrbOptions& opt = {}) {
    SrbScan scan;
    scan.grid_s = grid_s;
    scan.grid_theta = grid_theta;
    const long total = static_cast<long>(grid_s) * grid_theta;
    const std::size_t m = obs.size();

    std::vector<std::uint8_t> ok(total, 0);
    std::vector<double> means(static_cast<std::size_t>(total) * m, 0.0);

    parallel_for(static_cast<std::size_t>(total), opt.workers, [&](std::size_t idx) {
        int i = static_cast<int>(idx) % grid_s;
        int j = static_cast<int>(idx) / grid_s;
        PhasePoint x{(i + 0.5) / grid_s, -kHalfPi + kPi * (j + 0.5) / grid_theta};
        BirkhoffResult b = birkhoff_average(P, f, x, obs, opt.steps, opt.burn_in, opt.conv_tol);
        if (b.converged) {
            ok[idx] = 1;
            for (std::size_t q = 0; q < m; ++q) means[idx * m + q] = b.means[q];
        }
    });

    // Complete-linkage under the max metric: a point joins a cluster iff the
    // enlarged bounding box stays within cluster_tol; clusters merge while
    // their union box does.
    struct Cluster {
        std::vector<double> lo, hi, sum;
        long count = 0;
        long first = 0;
    };
    std::vector<Cluster> clusters;
    for (long idx = 0; idx < total; ++idx) {
        if (!ok[idx]) continue;
        const double* v = &means[static_cast<std::size_t>(idx) * m];
        ++scan.converged_points;
        bool placed = false;
        for (auto& c : clusters) {
            double ext = 0.0;
            for (std::size_t q = 0; q < m; ++q) {
                double lo = std::min(c.lo[q], v[q]), hi = std::max(c.hi[q], v[q]);
                ext = std::max(ext, hi - lo);
            }
            if (ext <= opt.cluster_tol) {
                for (std::size_t q = 0; q < m; ++q) {
                    c.lo[q] = std::min(c.lo[q], v[q]);
                    c.hi[q] = std::max(c.hi[q], v[q]);
                    c.sum[q] += v[q];
                }
                ++c.count;
                placed = true;
                break;
            }
        }
        if (!placed) {
            Cluster c;
            c.lo.assign(v, v + m);
            c.hi.assign(v, v + m);
            c.sum.assign(v, v + m);
            c.count = 1;
            c.first = idx;
            clusters.push_back(std::move(c));
        }
    }
    // Merge pass until stable.
    bool merged = true;
    while (merged) {
        merged = false;
        for (std::size_t a = 0; a < clusters.size() && !merged; ++a) {
            for (std::size_t b = a + 1; b < clusters.size() && !merged; ++b) {
                double ext = 0.0;
                for (std::size_t q = 0; q < m; ++q) {
                    double lo = std::min(clusters[a].lo[q], clusters[b].lo[q]);
                    double hi = std::max(clusters[a].hi[q], clusters[b].hi[q]);
                    ext = std::max(ext, hi - lo);
                }
                if (ext <= opt.cluster_tol) {
                    for (std::size_t q = 0; q < m; ++q) {
                        clusters[a].lo[q] = std::min(clusters[a].lo[q], clusters[b].lo[q]);
                        clusters[a].hi[q] = std::max(clusters[a].hi[q], clusters[b].hi[q]);
                        clusters[a].sum[q] += clusters[b].sum[q];
                    }
                    clusters[a].count += clusters[b].count;
                    clusters[a].first = std::min(clusters[a].first, clusters[b].first);
                    clusters.erase(clusters.begin() + static_cast<long>(b));
                    merged = true;
                }
            }
        }
    }

    std::sort(clusters.begin(), clusters.end(), [](const Cluster& a, const Cluster& b) {
        if (a.count != b.count) return a.count > b.count;
        return a.first < b.first;
    });

    double assigned = 0.0;
    for (std::size_t ci = 0; ci < clusters.size(); ++ci) {
        const Cluster& c = clusters[ci];
        ErgodicComponentReport rep;
        rep.id = static_cast<int>(ci);
        rep.basin_fraction = static_cast<double>(c.count) / static_cast<double>(total);
        rep.mean_vector.resize(m);
        for (std::size_t q = 0; q < m; ++q) rep.mean_vector[q] = c.sum[q] / c.count;
        int i = static_cast<int>(c.first) % grid_s;
        int j = static_cast<int>(c.first) / grid_s;
        rep.representative = {(i + 0.5) / grid_s, -kHalfPi + kPi * (j + 0.5) / grid_theta};
        if (opt.enrich) {
            // Burn the representative into the attractor before measuring.
            Orbit burn = orbit(P, f, rep.representative, 2000);
            PhasePoint x0 = burn.terminated ? rep.representative : burn.points.back();
            if (auto lp = lyapunov(P, f, x0, opt.lyapunov_steps)) rep.lyap = *lp;
            rep.attractor_points = attractor_sample(P, f, 8, 2000, opt.attractor_keep / 8,
                                                    derive_seed(opt.seed, 1000 + ci));
            AutocorrResult ac = autocorrelation(
                P, f, x0, [](PhasePoint, int side) { return side == 0 ? 1.0 : 0.0; },
                opt.correlation_steps, opt.correlation_max_lag);
            if (ac.ok) {
                rep.correlation_rate = ac.fitted_rate;
                rep.correlation_r2 = ac.r_squared;
            }
        }
        assigned += rep.basin_fraction;
        scan.components.push_back(std::move(rep));
    }
    scan.unassigned_fraction = 1.0 - assigned;
    return scan;
}

struct PeriodicOrbit {
    Itinerary itinerary;            // canonical rotation, length = period
    std::vector<PhasePoint> points; // one per collision
    double theta_multiplier = 0.0;  // product of f' along the cycle
    double s_multiplier = 0.0;      // alpha_p along the cycle
    double residual = 0.0;          // closure error through the full step map
    int theta_iterations = 0;       // contraction iterations used
    bool parabolic_family = false;  // degenerate s-map (parallel bounce family)
};

namespace detail {

inline bool cyclic_ok(const Itinerary& it) {
    int p = static_cast<int>(it.size());
    for (int i = 0; i < p; ++i)
        if (it[i] == it[(i + 1) % p]) return false;
    return true;
}

inline bool is_canonical_primitive(const Itinerary& it) {
    int p = static_cast<int>(it.size());
    // Primitive: no smaller period divides it.
    for (int q = 1; q < p; ++q) {
        if (p % q != 0) continue;
        bool rep = true;
        for (int i = 0; i < p && rep; ++i) rep = it[i] == it[i % q];
        if (rep) return false;
    }
    // Canonical: lexicographically minimal among rotations.
    for (int r = 1; r < p; ++r) {
        for (int i = 0; i < p; ++i) {
            int a = it[(i + r) % p], b = it[i];
            if (a < b) return false;
            if (a > b) break;
        }
    }
    return true;
}

} // namespace detail

/**
 * Periodic-orbit search by itinerary enumeration. For each primitive cyclic
 * side sequence the angle cycle is solved by iterating the contraction
 * theta -> f(c - theta) (factor at most lambda^p), then the arclength
 * fixed point of the affine return map is computed from two line-marching
 * evaluations. Candidates are accepted only when the full step map closes
 * the orbit with every collision strictly inside its side. A degenerate
 * affine map (slope 1, zero offset) signals the parabolic parallel-bounce
 * family; the midpoint of the feasible interval is reported for it.
 */
inline std::vector<PeriodicOrbit> find_periodic_orbits(const Polygon& P, const ReflectionLaw& f,
                                                       int max_period) {
    std::vector<PeriodicOrbit> found;
    const int d = P.side_count();

    auto solve_itinerary = [&](const Itinerary& it) {
        const int p = static_cast<int>(it.size());
        // Pair offsets c_k for the flight it[k] -> it[(k+1)%p].
        std::vector<double> c(p);
        for (int k = 0; k < p; ++k) c[k] = P.pair_offset(it[k], it[(k + 1) % p]);

        // Contraction iteration for the angle cycle. One uncounted warm-up
        // cycle from 0 seeds the iteration inside the image of f, after
        // which the gap shrinks by lambda^p per counted cycle.
        double lamp = std::pow(f.lambda(), p);
        int cap = static_cast<int>(std::ceil(std::log(1e-13) / std::log(lamp))) + 10;
        double theta = 0.0;
        {
            double cur = theta;
            for (int j = 0; j < p; ++j) {
                double pre = wrap_angle(c[j] - cur);
                if (std::abs(pre) > kHalfPi - kGrazeTol) return;
                cur = f.eval(pre);
            }
            theta = cur;
        }
        int iters = 0;
        bool settled = false;
        for (int k = 0; k < cap; ++k) {
            double cur = theta;
            for (int j = 0; j < p; ++j) {
                double pre = wrap_angle(c[j] - cur);
                if (std::abs(pre) > kHalfPi - kGrazeTol) return; // outside the domain
                cur = f.eval(pre);
            }
            double delta = std::abs(cur - theta);
            theta = cur;
            ++iters;
            if (delta < 1e-13) { settled = true; break; }
        }
        if (!settled) return;
        for (int k = 0; k < 3; ++k) { // polish to machine precision
            double cur = theta;
            for (int j = 0; j < p; ++j) cur = f.eval(wrap_angle(c[j] - cur));
            theta = cur;
        }

        // Angle sequence along the cycle.
        std::vector<double> tht(p), pre(p);
        tht[0] = theta;
        for (int j = 0; j < p; ++j) {
            pre[j] = wrap_angle(c[j] - tht[j]);
            if (std::abs(pre[j]) > kHalfPi - kGrazeTol) return;
            if (j + 1 < p) tht[j + 1] = f.eval(pre[j]);
        }

        // Affine arclength return map via line marching at the fixed angles.
        auto advance = [&](double s) -> std::optional<double> {
            double cur = s;
            for (int j = 0; j < p; ++j) {
                int a = it[j], b = it[(j + 1) % p];
                Vec2 ta = P.side_tangent(a), na = P.side_normal(a);
                Vec2 pos = P.vertex(a) + ta * (cur - P.side_start(a));
                double sn = std::sin(tht[j]), cs = std::cos(tht[j]);
                Vec2 dir{cs * na.x + sn * ta.x, cs * na.y + sn * ta.y};
                Vec2 tb = P.side_tangent(b);
                double den = cross(dir, tb);
                if (std::abs(den) < 1e-14) return std::nullopt;
                double u = cross(P.vertex(b) - pos, dir) / den;
                cur = P.side_start(b) + u;
            }
            return cur;
        };

        double base = P.side_start(it[0]), len = P.side_length(it[0]);
        auto g0 = advance(base + 0.25 * len);
        auto g1 = advance(base + 0.75 * len);
        if (!g0 || !g1) return;
        double slope = (*g1 - *g0) / (0.5 * len);

        PeriodicOrbit orb;
        orb.itinerary = it;
        orb.theta_iterations = iters;

        auto validate = [&](double s0) -> bool {
            PhasePoint x{wrap_s(s0), tht[0]};
            Orbit o = orbit(P, f, x, p);
            if (o.terminated) return false;
            for (int j = 0; j < p; ++j)
                if (o.itinerary[j] != it[(j + 1) % p]) return false;
            orb.residual = phase_dist(o.points.back(), x);
            if (orb.residual >= 1e-9) return false;
            orb.points.assign(o.points.begin(), o.points.end() - 1);
            double tm = 1.0, sm = 1.0;
            PhasePoint cur = x;
            for (int j = 0; j < p; ++j) {
                StepResult r = step(P, f, cur);
                tm *= f.deriv(r.pre_angle);
                sm *= std::cos(cur.theta) / std::cos(r.pre_angle);
                cur = r.out;
            }
            orb.theta_multiplier = tm;
            orb.s_multiplier = sm;
            return true;
        };

        if (std::abs(slope - 1.0) > 1e-9) {
            double s_fix = (*g0 - slope * (base + 0.25 * len)) / (1.0 - slope);
            if (s_fix <= base + kVertexTol || s_fix >= base + len - kVertexTol) return;
            if (validate(s_fix)) found.push_back(orb);
        } else {
            if (std::abs(*g0 - (base + 0.25 * len)) > 1e-7) return; // slope 1, no fixed point
            // Parabolic family: every point of a feasible sub-interval is
            // periodic. Report the midpoint of the feasible run.
            const int scan = 64;
            int best_lo = -1, best_hi = -1, run_lo = -1;
            for (int i = 0; i <= scan; ++i) {
                double s = base + len * (i + 0.5) / (scan + 1);
                PhasePoint x{s, tht[0]};
                Orbit o = orbit(P, f, x, p);
                bool good = !o.terminated && phase_dist(o.points.back(), x) < 1e-9;
                if (good && run_lo < 0) run_lo = i;
                if ((!good || i == scan) && run_lo >= 0) {
                    int hi = good ? i : i - 1;
                    if (best_lo < 0 || hi - run_lo > best_hi - best_lo) {
                        best_lo = run_lo;
                        best_hi = hi;
                    }
                    run_lo = -1;
                }
            }
            if (best_lo < 0) return;
            double slo = base + len * (best_lo + 0.5) / (scan + 1);
            double shi = base + len * (best_hi + 0.5) / (scan + 1);
            // Refine the feasible edges by bisection.
            auto feasible = [&](double s) {
                PhasePoint x{s, tht[0]};
                Orbit o = orbit(P, f, x, p);
                return !o.terminated && phase_dist(o.points.back(), x) < 1e-9;
            };
            double lo_edge = base + kVertexTol, hi_edge = base + len - kVertexTol;
            double a = lo_edge, b = slo;
            if (!feasible(lo_edge))
                for (int k = 0; k < 45; ++k) { double mid = 0.5 * (a + b); (feasible(mid) ? b : a) = mid; }
            else b = lo_edge;
            double a2 = shi, b2 = hi_edge;
            if (!feasible(hi_edge))
                for (int k = 0; k < 45; ++k) { double mid = 0.5 * (a2 + b2); (feasible(mid) ? a2 : b2) = mid; }
            else a2 = hi_edge;
            orb.parabolic_family = true;
            if (validate(0.5 * (b + a2))) found.push_back(orb);
        }
    };

    // Enumerate primitive canonical cyclic sequences.
    for (int p = 2; p <= max_period; ++p) {
        Itinerary it(p, 0);
        auto rec = [&](auto&& self, int pos) -> void {
            if (pos == p) {
                if (detail::cyclic_ok(it) && detail::is_canonical_primitive(it))
                    solve_itinerary(it);
                return;
            }
            for (int s = 0; s < d; ++s) {
                if (pos > 0 && it[pos - 1] == s) continue;
                it[pos] = s;
                self(self, pos + 1);
            }
        };
        rec(rec, 0);
    }
    return found;
}

} // namespace billiards
