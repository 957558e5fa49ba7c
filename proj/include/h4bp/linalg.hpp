#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>

namespace h4bp {

/// Row-major fixed-size square matrix, sized for the variational systems used
/// here (2x2 vertical blocks, 4x4 state-transition matrices).
template <int N>
struct Mat {
    std::array<double, N * N> m{};

    double& operator()(int i, int j) { return m[i * N + j]; }
    double operator()(int i, int j) const { return m[i * N + j]; }

    static Mat identity() {
        Mat out;
        for (int i = 0; i < N; ++i) out(i, i) = 1.0;
        return out;
    }

    Mat operator*(const Mat& rhs) const {
        Mat out;
        for (int i = 0; i < N; ++i)
            for (int k = 0; k < N; ++k) {
                double a = (*this)(i, k);
                if (a == 0.0) continue;
                for (int j = 0; j < N; ++j) out(i, j) += a * rhs(k, j);
            }
        return out;
    }

    std::array<double, N> operator*(const std::array<double, N>& v) const {
        std::array<double, N> out{};
        for (int i = 0; i < N; ++i) {
            double acc = 0.0;
            for (int j = 0; j < N; ++j) acc += (*this)(i, j) * v[j];
            out[i] = acc;
        }
        return out;
    }

    double trace() const {
        double t = 0.0;
        for (int i = 0; i < N; ++i) t += (*this)(i, i);
        return t;
    }
};

using Mat2 = Mat<2>;
using Mat4 = Mat<4>;

inline double det(const Mat2& m) { return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0); }

inline double det(const Mat4& a) {
    // Laplace expansion via 2x2 complements
    auto m2 = [&](int r0, int r1, int c0, int c1) {
        return a(r0, c0) * a(r1, c1) - a(r0, c1) * a(r1, c0);
    };
    return m2(0, 1, 0, 1) * m2(2, 3, 2, 3) - m2(0, 1, 0, 2) * m2(2, 3, 1, 3) +
           m2(0, 1, 0, 3) * m2(2, 3, 1, 2) + m2(0, 1, 1, 2) * m2(2, 3, 0, 3) -
           m2(0, 1, 1, 3) * m2(2, 3, 0, 2) + m2(0, 1, 2, 3) * m2(2, 3, 0, 1);
}

/// Solves A x = b in place by Gaussian elimination with partial pivoting.
/// Sized for the tiny Newton systems of the correctors.
template <int N>
std::array<double, N> solve(Mat<N> a, std::array<double, N> b) {
    for (int col = 0; col < N; ++col) {
        int piv = col;
        for (int r = col + 1; r < N; ++r)
            if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
        if (std::abs(a(piv, col)) < 1e-300) throw std::runtime_error("solve: singular matrix");
        if (piv != col) {
            for (int j = 0; j < N; ++j) std::swap(a(col, j), a(piv, j));
            std::swap(b[col], b[piv]);
        }
        double inv = 1.0 / a(col, col);
        for (int r = col + 1; r < N; ++r) {
            double f = a(r, col) * inv;
            if (f == 0.0) continue;
            for (int j = col; j < N; ++j) a(r, j) -= f * a(col, j);
            b[r] -= f * b[col];
        }
    }
    std::array<double, N> x{};
    for (int r = N - 1; r >= 0; --r) {
        double acc = b[r];
        for (int j = r + 1; j < N; ++j) acc -= a(r, j) * x[j];
        x[r] = acc / a(r, r);
    }
    return x;
}

/// Eigenvalues of the 4x4 monodromy matrix of a planar periodic orbit.
/// Symplecticity makes the characteristic polynomial palindromic,
///   l^4 - t1 l^3 + c2 l^2 - t1 l + 1,
/// so the substitution rho = l + 1/l reduces it to a quadratic.
inline std::array<std::complex<double>, 4> monodromy_multipliers(const Mat4& m) {
    double t1 = m.trace();
    double t2 = (m * m).trace();
    double c2 = 0.5 * (t1 * t1 - t2);
    // rho^2 - t1 rho + (c2 - 2) = 0
    std::complex<double> disc = std::complex<double>(t1 * t1 - 4.0 * (c2 - 2.0), 0.0);
    std::complex<double> sq = std::sqrt(disc);
    std::array<std::complex<double>, 4> out;
    int k = 0;
    for (int sgn : {-1, +1}) {
        std::complex<double> rho = 0.5 * (t1 + double(sgn) * sq);
        // l^2 - rho l + 1 = 0
        std::complex<double> s2 = std::sqrt(rho * rho - 4.0);
        out[k++] = 0.5 * (rho + s2);
        out[k++] = 0.5 * (rho - s2);
    }
    return out;
}

/// Roots of l^4 + p l^2 + q = 0, the characteristic polynomial of the
/// linearization matrix [[0, I], [Hess, 2K]] of the rotating-frame equations.
inline std::array<std::complex<double>, 4> biquadratic_roots(double p, double q) {
    std::complex<double> disc = std::complex<double>(p * p - 4.0 * q, 0.0);
    std::complex<double> sq = std::sqrt(disc);
    std::array<std::complex<double>, 4> out;
    int k = 0;
    for (int sgn : {+1, -1}) {
        std::complex<double> l2 = 0.5 * (-p + double(sgn) * sq);
        std::complex<double> l = std::sqrt(l2);
        out[k++] = l;
        out[k++] = -l;
    }
    return out;
}

}  // namespace h4bp
