#pragma once

// Test-only reference implementations kept independent of the library's
// propagation path: a full 6x6 spatial variational integration (for the
// vertical-decoupling cross-check) and a dense matrix exponential (for the
// constant-coefficient STM oracle).

#include <array>

#include "h4bp/dop853.hpp"
#include "h4bp/dynamics.hpp"
#include "h4bp/linalg.hpp"

namespace h4bp::testref {

/// Spatial flow + full 6x6 STM, state order (x, y, z, vx, vy, vz).
/// Layout: [state 6 | Phi 36 row-major] = 42.
struct SpatialVarRhs {
    SystemParams p;
    void operator()(double, const Vec<42>& s, Vec<42>& ds) const {
        double x = s[0], y = s[1], z = s[2];
        double r2 = x * x + y * y + z * z;
        double r = std::sqrt(r2);
        double ir3 = 1.0 / (r2 * r);
        double ir5 = ir3 / r2;
        ds[0] = s[3];
        ds[1] = s[4];
        ds[2] = s[5];
        ds[3] = 2.0 * s[4] + p.lambda2 * x - x * ir3;
        ds[4] = -2.0 * s[3] + p.lambda1 * y - y * ir3;
        ds[5] = -z - z * ir3;

        double h[3][3];
        h[0][0] = p.lambda2 - ir3 + 3.0 * x * x * ir5;
        h[0][1] = 3.0 * x * y * ir5;
        h[0][2] = 3.0 * x * z * ir5;
        h[1][0] = h[0][1];
        h[1][1] = p.lambda1 - ir3 + 3.0 * y * y * ir5;
        h[1][2] = 3.0 * y * z * ir5;
        h[2][0] = h[0][2];
        h[2][1] = h[1][2];
        h[2][2] = -1.0 - ir3 + 3.0 * z * z * ir5;

        // A = [[0, I], [H, G]], G = [[0,2,0],[-2,0,0],[0,0,0]]
        auto phi = [&](int i, int j) { return s[6 + i * 6 + j]; };
        for (int j = 0; j < 6; ++j) {
            for (int i = 0; i < 3; ++i) ds[6 + i * 6 + j] = phi(i + 3, j);
            for (int i = 0; i < 3; ++i) {
                double acc = 0.0;
                for (int k = 0; k < 3; ++k) acc += h[i][k] * phi(k, j);
                if (i == 0) acc += 2.0 * phi(4, j);
                if (i == 1) acc += -2.0 * phi(3, j);
                ds[6 + (i + 3) * 6 + j] = acc;
            }
        }
    }
};

struct Spatial66 {
    std::array<double, 6> state;
    std::array<double, 36> stm;
};

inline Spatial66 propagate_spatial_reference(const SystemParams& p, const IntegratorConfig& cfg,
                                             const std::array<double, 6>& s0, double tFinal) {
    Vec<42> y{};
    for (int i = 0; i < 6; ++i) y[i] = s0[i];
    for (int i = 0; i < 6; ++i) y[6 + i * 6 + i] = 1.0;
    Dop853<42, SpatialVarRhs> integ(SpatialVarRhs{p}, cfg);
    if (integ.integrate(y, 0.0, tFinal) != IntegrateStatus::Done)
        throw std::runtime_error("spatial reference integration failed");
    Spatial66 out;
    for (int i = 0; i < 6; ++i) out.state[i] = y[i];
    for (int i = 0; i < 36; ++i) out.stm[i] = y[6 + i];
    return out;
}

/// exp(t A) by scaling-and-squaring on a Taylor series; oracle only.
inline Mat4 expm(Mat4 a, double t) {
    for (auto& v : a.m) v *= t;
    double norm = 0.0;
    for (auto& v : a.m) norm = std::max(norm, std::abs(v));
    int squarings = 0;
    while (norm > 0.5) {
        norm *= 0.5;
        ++squarings;
    }
    double scale = std::pow(0.5, squarings);
    for (auto& v : a.m) v *= scale;
    Mat4 out = Mat4::identity();
    Mat4 term = Mat4::identity();
    for (int k = 1; k <= 24; ++k) {
        term = term * a;
        for (auto& v : term.m) v /= double(k);
        for (int i = 0; i < 16; ++i) out.m[i] += term.m[i];
    }
    for (int k = 0; k < squarings; ++k) out = out * out;
    return out;
}

}  // namespace h4bp::testref
