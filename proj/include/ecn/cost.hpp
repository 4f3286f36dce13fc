#pragma once

#include "ecn/error.hpp"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace ecn {

// Closed family of convex nondecreasing cost functions with f(0) = 0.
//   Zero        f(x) = 0                      (evaluation fixtures only)
//   Linear      f(x) = c x
//   Polynomial  f(x) = sum_m c_m x^m, m >= 1, c_m >= 0
//   Queueing    f(x) = x / (mu - x), x < mu
class CostFunction {
public:
    enum class Kind { Zero, Linear, Polynomial, Queueing };

    CostFunction() = default;

    static CostFunction zero() { return CostFunction(); }

    static CostFunction linear(double c) {
        check_nonnegative(c);
        CostFunction f;
        f.kind_ = Kind::Linear;
        f.coeffs_ = {c};
        return f;
    }

    // coeffs[m-1] multiplies x^m.
    static CostFunction polynomial(std::vector<double> coeffs) {
        for (double c : coeffs) {
            check_nonnegative(c);
        }
        CostFunction f;
        f.kind_ = Kind::Polynomial;
        f.coeffs_ = std::move(coeffs);
        return f;
    }

    // d x + d^2 x^2 + d^3 x^3, the third-order expansion of x / (1/d - x).
    static CostFunction cubic_expansion(double d) { return polynomial({d, d * d, d * d * d}); }

    static CostFunction queueing(double service_rate) {
        if (!(service_rate > 0.0)) {
            throw ConfigError("queueing cost needs a positive service rate");
        }
        CostFunction f;
        f.kind_ = Kind::Queueing;
        f.mu_ = service_rate;
        return f;
    }

    Kind kind() const noexcept { return kind_; }
    const std::vector<double>& coefficients() const noexcept { return coeffs_; }
    double service_rate() const noexcept { return mu_; }

    double value(double x) const {
        switch (kind_) {
        case Kind::Zero:
            return 0.0;
        case Kind::Linear:
            return coeffs_[0] * x;
        case Kind::Polynomial: {
            double acc = 0.0;
            for (std::size_t m = coeffs_.size(); m-- > 0;) {
                acc = (acc + coeffs_[m]) * x;
            }
            return acc;
        }
        case Kind::Queueing:
            check_capacity(x);
            return x / (mu_ - x);
        }
        return 0.0;
    }

    double derivative(double x) const {
        switch (kind_) {
        case Kind::Zero:
            return 0.0;
        case Kind::Linear:
            return coeffs_[0];
        case Kind::Polynomial: {
            double acc = 0.0;
            for (std::size_t m = coeffs_.size(); m-- > 0;) {
                acc = acc * x + static_cast<double>(m + 1) * coeffs_[m];
            }
            return acc;
        }
        case Kind::Queueing:
            check_capacity(x);
            return mu_ / ((mu_ - x) * (mu_ - x));
        }
        return 0.0;
    }

    bool identically_zero() const {
        if (kind_ == Kind::Zero) {
            return true;
        }
        if (kind_ == Kind::Queueing) {
            return false;
        }
        for (double c : coeffs_) {
            if (c != 0.0) {
                return false;
            }
        }
        return true;
    }

private:
    static void check_nonnegative(double c) {
        if (!(c >= 0.0) || !std::isfinite(c)) {
            throw ConfigError("cost coefficients must be finite and nonnegative");
        }
    }

    void check_capacity(double x) const {
        if (x >= mu_) {
            throw CapacityExceeded("flow " + std::to_string(x) + " reaches service rate " +
                                   std::to_string(mu_));
        }
    }

    Kind kind_ = Kind::Zero;
    std::vector<double> coeffs_;
    double mu_ = 0.0;
};

// Routing cost D_ij per directed link and cache deployment cost B_i per node.
struct CostModel {
    std::vector<CostFunction> link;
    std::vector<CostFunction> cache;
};

} // namespace ecn
