#pragma once

#include "billiards/geometry.hpp"

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace billiards {

/**
 * Reflection law f on [-pi/2, pi/2] with derivative access. The standing
 * assumptions (C^1 data, f(0) = 0, f' > 0, sup|f'| < 1) are enforced by
 * validate_law at load time rather than assumed. Immutable and pure.
 */
class ReflectionLaw {
public:
    static ReflectionLaw linear(double sigma) {
        ReflectionLaw law;
        law.kind_ = Kind::Linear;
        law.sigma_ = sigma;
        law.lambda_ = sigma;
        law.family_ = "linear(sigma=" + std::to_string(sigma) + ")";
        return law;
    }

    /// Custom law from closures. When no derivative is supplied, a central
    /// finite difference with step 1e-6 is used and a warning flag is set.
    static ReflectionLaw custom(std::string family_tag,
                                std::function<double(double)> eval,
                                std::function<double(double)> deriv = nullptr) {
        ReflectionLaw law;
        law.kind_ = Kind::Custom;
        law.eval_ = std::move(eval);
        law.family_ = std::move(family_tag);
        if (deriv) {
            law.deriv_ = std::move(deriv);
        } else {
            law.fd_deriv_ = true;
            auto f = law.eval_;
            law.deriv_ = [f](double th) {
                const double h = 1e-6;
                double lo = std::max(th - h, -kHalfPi), hi = std::min(th + h, kHalfPi);
                return (f(hi) - f(lo)) / (hi - lo);
            };
        }
        // Estimate the contraction factor by dense sampling.
        double lam = 0.0;
        const int n = 4096;
        for (int i = 0; i <= n; ++i) {
            double th = -kHalfPi + kPi * i / n;
            lam = std::max(lam, std::abs(law.deriv_(th)));
        }
        law.lambda_ = lam;
        return law;
    }

    double eval(double theta) const {
        return kind_ == Kind::Linear ? sigma_ * theta : eval_(theta);
    }
    double deriv(double theta) const {
        return kind_ == Kind::Linear ? sigma_ : deriv_(theta);
    }
    /// Contraction factor lambda(f) = sup |f'|.
    double lambda() const { return lambda_; }
    const std::string& family_tag() const { return family_; }
    bool derivative_is_finite_difference() const { return fd_deriv_; }
    bool is_linear() const { return kind_ == Kind::Linear; }
    double linear_sigma() const { return sigma_; }

    /// Inverse of the (monotone) law; nullopt when phi is outside the image.
    std::optional<double> try_inverse(double phi) const {
        if (kind_ == Kind::Linear) {
            double th = phi / sigma_;
            if (std::abs(th) > kHalfPi) return std::nullopt;
            return th;
        }
        double lo = -kHalfPi, hi = kHalfPi;
        double flo = eval_(lo), fhi = eval_(hi);
        if (phi < flo || phi > fhi) return std::nullopt;
        for (int it = 0; it < 200; ++it) {
            double mid = 0.5 * (lo + hi);
            double fm = eval_(mid);
            if (std::abs(fm - phi) < 1e-15) return mid;
            if (fm < phi) lo = mid; else hi = mid;
            if (hi - lo < 1e-16) break;
        }
        return 0.5 * (lo + hi);
    }

private:
    enum class Kind { Linear, Custom };
    Kind kind_ = Kind::Linear;
    double sigma_ = 0.5;
    double lambda_ = 0.5;
    bool fd_deriv_ = false;
    std::function<double(double)> eval_;
    std::function<double(double)> deriv_;
    std::string family_;
};

/// f(theta) = sigma * theta with sigma in (0,1).
inline ReflectionLaw linear_law(double sigma) {
    if (!(sigma > 0.0 && sigma < 1.0))
        throw std::out_of_range("linear_law: sigma must lie in (0,1)");
    return ReflectionLaw::linear(sigma);
}

inline ReflectionLaw custom_law(std::string family_tag,
                                std::function<double(double)> eval,
                                std::function<double(double)> deriv = nullptr) {
    return ReflectionLaw::custom(std::move(family_tag), std::move(eval), std::move(deriv));
}

struct LawViolation {
    std::string what;
    double theta = 0.0; // location of the first offending sample
};

struct LawValidation {
    bool ok = true;
    std::vector<LawViolation> violations;
};

/**
 * Samples f and f' on a uniform grid and checks the standing assumptions:
 * f(0) = 0, f' > 0 on the open interval, |f| < pi/2, estimated sup|f'| < 1.
 * Failures are reported, not thrown.
 */
inline LawValidation validate_law(const ReflectionLaw& f, int grid_size = 256) {
    if (grid_size < 16) throw std::invalid_argument("validate_law: grid_size must be >= 16");
    LawValidation rep;
    auto fail = [&rep](const std::string& what, double theta) {
        rep.ok = false;
        rep.violations.push_back({what, theta});
    };
    if (std::abs(f.eval(0.0)) > 1e-14) fail("f(0) != 0", 0.0);
    double sup = 0.0;
    bool range_bad = false, deriv_bad = false;
    for (int i = 0; i <= grid_size; ++i) {
        double th = -kHalfPi + kPi * i / grid_size;
        if (!range_bad && std::abs(f.eval(th)) >= kHalfPi) {
            fail("|f(theta)| >= pi/2", th);
            range_bad = true;
        }
        double dv = f.deriv(th);
        if (!deriv_bad && i > 0 && i < grid_size && dv <= 0.0) {
            fail("f'(theta) <= 0", th);
            deriv_bad = true;
        }
        sup = std::max(sup, std::abs(dv));
    }
    if (sup >= 1.0) fail("sup|f'| >= 1: law is not contracting", 0.0);
    return rep;
}

/// Solves f(theta) = phi; throws when phi is outside the image interval.
inline double inverse_eval(const ReflectionLaw& f, double phi) {
    auto th = f.try_inverse(phi);
    if (!th) throw std::out_of_range("inverse_eval: phi outside the image of f");
    return *th;
}

} // namespace billiards
