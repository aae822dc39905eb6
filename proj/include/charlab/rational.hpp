#pragma once

#include <cmath>

#include <boost/multiprecision/cpp_int.hpp>
#include <boost/rational.hpp>

#include "charlab/polynomial.hpp"

namespace charlab {

using BigInt = boost::multiprecision::cpp_int;
using BigRat = boost::rational<BigInt>;

inline double to_double(const BigRat& r) {
    return r.numerator().convert_to<double>() / r.denominator().convert_to<double>();
}

/// Exact complex rational scalar for the symbolic-proof mode of the polynomial
/// algebra. Arithmetic never rounds; is_zero is literal equality.
struct RationalComplex {
    BigRat re{0};
    BigRat im{0};

    RationalComplex() = default;
    RationalComplex(long long n) : re(n), im(0) {} // NOLINT(google-explicit-constructor)
    RationalComplex(BigRat r, BigRat i = BigRat(0)) : re(std::move(r)), im(std::move(i)) {}

    static RationalComplex ratio(long long num, long long den) {
        return RationalComplex(BigRat(BigInt(num), BigInt(den)));
    }

    RationalComplex operator+(const RationalComplex& o) const {
        return {re + o.re, im + o.im};
    }
    RationalComplex operator-(const RationalComplex& o) const {
        return {re - o.re, im - o.im};
    }
    RationalComplex operator*(const RationalComplex& o) const {
        return {re * o.re - im * o.im, re * o.im + im * o.re};
    }
    RationalComplex operator/(const RationalComplex& o) const {
        BigRat n2 = o.re * o.re + o.im * o.im;
        if (n2 == BigRat(0)) throw Error("RationalComplex: division by zero");
        return {(re * o.re + im * o.im) / n2, (im * o.re - re * o.im) / n2};
    }
    bool operator==(const RationalComplex& o) const {
        return re == o.re && im == o.im;
    }
};

template <>
struct FieldTraits<RationalComplex> {
    static constexpr bool exact = true;
    static constexpr double default_tol = 0.0;
    static double abs(const RationalComplex& v) {
        return std::hypot(to_double(v.re), to_double(v.im));
    }
    static bool is_zero(const RationalComplex& v, double) {
        return v.re == BigRat(0) && v.im == BigRat(0);
    }
};

using PolyQ = BlockPolynomial<RationalComplex>;

} // namespace charlab
