#pragma once

#include <cmath>

namespace ropeid {

// Scalar carrying two tangent directions alongside its value.  Running the
// simulator on Dual2 with seeds d_dE=1 / d_dNu=1 on the material parameters
// propagates exact directional derivatives with respect to Young's modulus
// and Poisson's ratio through every substep.
//
// The value component is computed with exactly the same double operations as
// a plain-double run, so the primal path of a tangent rollout is bit-identical
// to the untracked one.  Comparisons look at the value only; branches taken by
// the tangent run therefore match the primal run.
struct Dual2 {
    double v = 0.0;   // value
    double dE = 0.0;  // d/d(Young's modulus)
    double dN = 0.0;  // d/d(Poisson's ratio)

    constexpr Dual2() = default;
    constexpr Dual2(double value) : v(value) {}
    constexpr Dual2(double value, double de, double dn) : v(value), dE(de), dN(dn) {}

    Dual2& operator+=(const Dual2& o) { v += o.v; dE += o.dE; dN += o.dN; return *this; }
    Dual2& operator-=(const Dual2& o) { v -= o.v; dE -= o.dE; dN -= o.dN; return *this; }
    Dual2& operator*=(const Dual2& o) {
        dE = dE * o.v + v * o.dE;
        dN = dN * o.v + v * o.dN;
        v *= o.v;
        return *this;
    }
    Dual2& operator/=(const Dual2& o) {
        // v / o.v is evaluated exactly as the plain-double path would.
        const double q = v / o.v;
        dE = (dE - q * o.dE) / o.v;
        dN = (dN - q * o.dN) / o.v;
        v = q;
        return *this;
    }
    Dual2 operator-() const { return {-v, -dE, -dN}; }
};

inline Dual2 operator+(Dual2 a, const Dual2& b) { return a += b; }
inline Dual2 operator-(Dual2 a, const Dual2& b) { return a -= b; }
inline Dual2 operator*(Dual2 a, const Dual2& b) { return a *= b; }
inline Dual2 operator/(Dual2 a, const Dual2& b) { return a /= b; }

inline bool operator<(const Dual2& a, const Dual2& b) { return a.v < b.v; }
inline bool operator>(const Dual2& a, const Dual2& b) { return a.v > b.v; }
inline bool operator<=(const Dual2& a, const Dual2& b) { return a.v <= b.v; }
inline bool operator>=(const Dual2& a, const Dual2& b) { return a.v >= b.v; }
inline bool operator==(const Dual2& a, const Dual2& b) { return a.v == b.v; }
inline bool operator!=(const Dual2& a, const Dual2& b) { return a.v != b.v; }

inline Dual2 sqrt(const Dual2& a) {
    const double r = std::sqrt(a.v);
    const double g = 0.5 / r;
    return {r, g * a.dE, g * a.dN};
}

// Subgradient convention at 0: derivative taken as 0.
inline Dual2 abs(const Dual2& a) {
    if (a.v > 0.0) return a;
    if (a.v < 0.0) return -a;
    return {0.0, 0.0, 0.0};
}

inline Dual2 min(const Dual2& a, const Dual2& b) { return a.v <= b.v ? a : b; }
inline Dual2 max(const Dual2& a, const Dual2& b) { return a.v >= b.v ? a : b; }

// Uniform accessors so templated code can read the value of either scalar.
inline double primal(double x) { return x; }
inline double primal(const Dual2& x) { return x.v; }

using std::abs;
using std::max;
using std::min;
using std::sqrt;

}  // namespace ropeid
