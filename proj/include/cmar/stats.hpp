#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "cmar/error.hpp"

// F-distribution CDF and quantile built on the regularized incomplete beta
// function. Self-contained; no external numerics dependency.

namespace cmar {

namespace detail {

// Continued fraction for the incomplete beta function, evaluated with the
// modified Lentz method.
inline double beta_cf(double a, double b, double x) {
    constexpr int max_iter = 400;
    const double eps = std::numeric_limits<double>::epsilon();
    constexpr double tiny = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 8.0 * eps) return h;
    }
    throw computation_error("incomplete beta continued fraction failed to converge");
}

}  // namespace detail

// Regularized incomplete beta I_x(a, b).
inline double ibeta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0))
        throw input_error("ibeta: shape parameters must be positive");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0))
        return front * detail::beta_cf(a, b, x) / a;
    return 1.0 - front * detail::beta_cf(b, a, 1.0 - x) / b;
}

inline void check_f_dofs(double d1, double d2) {
    if (!(d1 >= 1.0) || !(d2 >= 1.0))
        throw input_error("F distribution requires d1 >= 1 and d2 >= 1");
}

inline double f_cdf(double x, double d1, double d2) {
    check_f_dofs(d1, d2);
    if (!(x > 0.0)) return 0.0;
    return ibeta(0.5 * d1, 0.5 * d2, d1 * x / (d1 * x + d2));
}

inline double f_pdf(double x, double d1, double d2) {
    check_f_dofs(d1, d2);
    if (!(x > 0.0)) return 0.0;
    const double ln_b = std::lgamma(0.5 * d1) + std::lgamma(0.5 * d2) - std::lgamma(0.5 * (d1 + d2));
    const double ln_f = 0.5 * d1 * std::log(d1 / d2) + (0.5 * d1 - 1.0) * std::log(x) -
                        0.5 * (d1 + d2) * std::log1p(d1 * x / d2) - ln_b;
    return std::exp(ln_f);
}

// Quantile of the F(d1, d2) distribution: the x with CDF(x) = prob.
// Bracketing plus bisection, finished with a Newton polish; the result is
// checked to satisfy |CDF(x) - prob| <= 1e-10.
inline double f_quantile(double prob, double d1, double d2) {
    check_f_dofs(d1, d2);
    if (!(prob > 0.0) || !(prob < 1.0))
        throw input_error("f_quantile: probability must lie strictly in (0, 1)");

    double lo = 0.0;
    double hi = 1.0;
    while (f_cdf(hi, d1, d2) < prob) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e300)
            throw computation_error("f_quantile: failed to bracket the quantile");
    }
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;  // interval collapsed to adjacent doubles
        if (f_cdf(mid, d1, d2) < prob)
            lo = mid;
        else
            hi = mid;
    }
    double x = 0.5 * (lo + hi);
    for (int i = 0; i < 3; ++i) {
        const double pdf = f_pdf(x, d1, d2);
        if (pdf <= 0.0) break;
        const double step = (f_cdf(x, d1, d2) - prob) / pdf;
        const double next = x - step;
        if (!(next > lo) || !(next < hi)) break;
        x = next;
    }
    if (std::fabs(f_cdf(x, d1, d2) - prob) > 1e-10)
        throw computation_error("f_quantile: did not converge to requested probability");
    return x;
}

}  // namespace cmar
