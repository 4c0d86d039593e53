#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "modekacz/errors.hpp"

namespace modekacz {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline BigInt binomial(std::int64_t n, std::int64_t k) {
    if (k < 0 || n < 0 || k > n) return 0;
    k = std::min(k, n - k);
    BigInt r = 1;
    for (std::int64_t i = 1; i <= k; ++i) {
        r *= n - k + i;
        r /= i;
    }
    return r;
}

[[nodiscard]] inline bool is_integer(const Rational& x) { return denominator(x) == 1; }

/// C(x, j) for rational x: the falling factorial x(x-1)...(x-j+1)/j!.
/// Agrees with the integer binomial (including 0 when x < j) for integral x >= 0.
inline Rational binomial(const Rational& x, std::int64_t j) {
    if (j < 0) return 0;
    if (is_integer(x) && x >= 0) return Rational(binomial(static_cast<std::int64_t>(numerator(x)), j));
    Rational r = 1;
    for (std::int64_t i = 0; i < j; ++i) r *= (x - i) / Rational(i + 1);
    return r;
}

using Polynomial = std::vector<Rational>;

/// Product of the two polynomials, dropping terms above `max_degree`.
inline Polynomial multiply_truncated(const Polynomial& a, const Polynomial& b, std::size_t max_degree) {
    Polynomial out(std::min(max_degree + 1, a.size() + b.size() - 1), Rational(0));
    for (std::size_t i = 0; i < a.size() && i <= max_degree; ++i) {
        if (a[i] == 0) continue;
        for (std::size_t j = 0; j < b.size() && i + j <= max_degree; ++j) out[i + j] += a[i] * b[j];
    }
    return out;
}

inline double to_double(const Rational& q) { return q.convert_to<double>(); }

/// Scientific decimal rendering of an exact rational, correctly rounded
/// (half away from zero) to `significant` digits.
inline std::string to_decimal(const Rational& q, int significant = 6) {
    if (significant < 1) throw InvalidArgument("to_decimal: need at least one significant digit");
    if (q == 0) return "0";
    const bool negative = q < 0;
    const Rational mag = negative ? Rational(-q) : q;
    auto pow10 = [](int e) {
        BigInt p = 1;
        for (int i = 0; i < std::abs(e); ++i) p *= 10;
        return e >= 0 ? Rational(p) : Rational(BigInt(1), p);
    };
    const double approx = mag.convert_to<double>();
    int exponent = approx > 0 && std::isfinite(approx) ? static_cast<int>(std::floor(std::log10(approx))) : 0;
    while (mag >= pow10(exponent + 1)) ++exponent;
    while (mag < pow10(exponent)) --exponent;
    const Rational scaled = mag * pow10(significant - 1 - exponent);
    BigInt digits = (numerator(scaled) * 2 + denominator(scaled)) / (denominator(scaled) * 2);
    if (digits == BigInt(numerator(pow10(significant)))) {
        digits /= 10;
        ++exponent;
    }
    std::string d = digits.str();
    std::string out = negative ? "-" : "";
    out += d.substr(0, 1);
    if (d.size() > 1) out += "." + d.substr(1);
    char exp_buf[16];
    std::snprintf(exp_buf, sizeof exp_buf, "e%c%02d", exponent < 0 ? '-' : '+', std::abs(exponent));
    return out + exp_buf;
}

}  // namespace modekacz
