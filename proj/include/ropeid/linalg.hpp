#pragma once

#include <array>
#include <cmath>

#include "ropeid/dual.hpp"
#include "ropeid/errors.hpp"

namespace ropeid {

// Minimal fixed-size linear algebra, templated on the scalar so the same
// kernels run on double and on Dual2.

template <class T>
struct Vec3 {
    T x{}, y{}, z{};

    constexpr Vec3() = default;
    constexpr Vec3(T x_, T y_, T z_) : x(x_), y(y_), z(z_) {}

    T& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
    const T& operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    Vec3& operator*=(const T& s) { x *= s; y *= s; z *= s; return *this; }
};

template <class T> Vec3<T> operator+(Vec3<T> a, const Vec3<T>& b) { return a += b; }
template <class T> Vec3<T> operator-(Vec3<T> a, const Vec3<T>& b) { return a -= b; }
template <class T> Vec3<T> operator*(Vec3<T> a, const T& s) { return a *= s; }
template <class T> Vec3<T> operator*(const T& s, Vec3<T> a) { return a *= s; }

template <class T> T dot(const Vec3<T>& a, const Vec3<T>& b) {
    return a.x * b.x + a.y * b.y + a.z * b.z;
}
template <class T> T norm(const Vec3<T>& a) { return sqrt(dot(a, a)); }

using Vec3d = Vec3<double>;

inline double distance(const Vec3d& a, const Vec3d& b) { return norm(a - b); }

// Row-major 3x3 matrix.
template <class T>
struct Mat3 {
    std::array<T, 9> m{};

    constexpr Mat3() = default;

    static Mat3 identity() {
        Mat3 r;
        r(0, 0) = T(1); r(1, 1) = T(1); r(2, 2) = T(1);
        return r;
    }
    static Mat3 zero() { return Mat3{}; }

    T& operator()(int r, int c) { return m[3 * r + c]; }
    const T& operator()(int r, int c) const { return m[3 * r + c]; }

    Mat3& operator+=(const Mat3& o) {
        for (int i = 0; i < 9; ++i) m[i] += o.m[i];
        return *this;
    }
    Mat3& operator-=(const Mat3& o) {
        for (int i = 0; i < 9; ++i) m[i] -= o.m[i];
        return *this;
    }
    Mat3& operator*=(const T& s) {
        for (int i = 0; i < 9; ++i) m[i] *= s;
        return *this;
    }
};

template <class T> Mat3<T> operator+(Mat3<T> a, const Mat3<T>& b) { return a += b; }
template <class T> Mat3<T> operator-(Mat3<T> a, const Mat3<T>& b) { return a -= b; }
template <class T> Mat3<T> operator*(Mat3<T> a, const T& s) { return a *= s; }
template <class T> Mat3<T> operator*(const T& s, Mat3<T> a) { return a *= s; }

template <class T>
Mat3<T> operator*(const Mat3<T>& a, const Mat3<T>& b) {
    Mat3<T> r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            r(i, j) = a(i, 0) * b(0, j) + a(i, 1) * b(1, j) + a(i, 2) * b(2, j);
    return r;
}

template <class T>
Vec3<T> operator*(const Mat3<T>& a, const Vec3<T>& v) {
    return {a(0, 0) * v.x + a(0, 1) * v.y + a(0, 2) * v.z,
            a(1, 0) * v.x + a(1, 1) * v.y + a(1, 2) * v.z,
            a(2, 0) * v.x + a(2, 1) * v.y + a(2, 2) * v.z};
}

template <class T>
Mat3<T> transpose(const Mat3<T>& a) {
    Mat3<T> r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r(i, j) = a(j, i);
    return r;
}

template <class T>
Mat3<T> outer(const Vec3<T>& a, const Vec3<T>& b) {
    Mat3<T> r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r(i, j) = a[i] * b[j];
    return r;
}

template <class T>
T determinant(const Mat3<T>& a) {
    return a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) -
           a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0)) +
           a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
}

template <class T>
Mat3<T> inverse(const Mat3<T>& a) {
    Mat3<T> c;  // cofactor transpose
    c(0, 0) = a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1);
    c(0, 1) = a(0, 2) * a(2, 1) - a(0, 1) * a(2, 2);
    c(0, 2) = a(0, 1) * a(1, 2) - a(0, 2) * a(1, 1);
    c(1, 0) = a(1, 2) * a(2, 0) - a(1, 0) * a(2, 2);
    c(1, 1) = a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0);
    c(1, 2) = a(0, 2) * a(1, 0) - a(0, 0) * a(1, 2);
    c(2, 0) = a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0);
    c(2, 1) = a(0, 1) * a(2, 0) - a(0, 0) * a(2, 1);
    c(2, 2) = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
    const T det = a(0, 0) * c(0, 0) + a(0, 1) * c(1, 0) + a(0, 2) * c(2, 0);
    Mat3<T> r;
    for (int i = 0; i < 9; ++i) r.m[i] = c.m[i] / det;
    return r;
}

template <class T>
double frobenius_diff(const Mat3<T>& a, const Mat3<T>& b) {
    double s = 0.0;
    for (int i = 0; i < 9; ++i) {
        const double d = primal(a.m[i]) - primal(b.m[i]);
        s += d * d;
    }
    return std::sqrt(s);
}

// Rotation factor of the polar decomposition F = R S, via the Newton
// iteration R <- (R + R^-T)/2.  Converges quadratically for any invertible F;
// the tangent of the converged iterate is the exact derivative of R.
// Convergence is judged on primal values only, so double and Dual2 runs take
// identical branches.
template <class T>
Mat3<T> polar_rotation(const Mat3<T>& f) {
    const double det = primal(determinant(f));
    if (std::abs(det) < 1e-12)
        throw numeric_error("polar_rotation: deformation gradient is singular");
    Mat3<T> r = f;
    for (int iter = 0; iter < 40; ++iter) {
        Mat3<T> next = (r + transpose(inverse(r))) * T(0.5);
        const double delta = frobenius_diff(next, r);
        r = next;
        if (delta < 1e-13) break;
    }
    return r;
}

}  // namespace ropeid
