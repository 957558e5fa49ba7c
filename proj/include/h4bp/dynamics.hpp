#pragma once

#include "h4bp/params.hpp"
#include "h4bp/state.hpp"

namespace h4bp {

namespace detail {
inline double guarded_r(double x, double y, double z) {
    double r = std::sqrt(x * x + y * y + z * z);
    if (r < kCollisionFloor) throw CollisionError(r);
    return r;
}
}  // namespace detail

/// Effective potential Omega = (lambda2 x^2 + lambda1 y^2 - z^2)/2 + 1/r.
inline double effective_potential(const SystemParams& p, const PhaseState& s) {
    double r = detail::guarded_r(s.x, s.y, s.z);
    return 0.5 * (p.lambda2 * s.x * s.x + p.lambda1 * s.y * s.y - s.z * s.z) + 1.0 / r;
}

struct PotentialGradient {
    double ox, oy, oz;
};

inline PotentialGradient potential_gradient(const SystemParams& p, const PhaseState& s) {
    double r = detail::guarded_r(s.x, s.y, s.z);
    double ir3 = 1.0 / (r * r * r);
    return {p.lambda2 * s.x - s.x * ir3, p.lambda1 * s.y - s.y * ir3, -s.z - s.z * ir3};
}

/// Second partials of Omega. At z = 0 the vertical part decouples:
/// Omega_zz = -1 - 1/r^3, Omega_xz = Omega_yz = 0.
struct PotentialHessian {
    double oxx, oxy, oyy, ozz;
};

inline PotentialHessian potential_hessian(const SystemParams& p, const PhaseState& s) {
    double r = detail::guarded_r(s.x, s.y, s.z);
    double ir3 = 1.0 / (r * r * r);
    double ir5 = ir3 / (r * r);
    PotentialHessian h;
    h.oxx = p.lambda2 - ir3 + 3.0 * s.x * s.x * ir5;
    h.oxy = 3.0 * s.x * s.y * ir5;
    h.oyy = p.lambda1 - ir3 + 3.0 * s.y * s.y * ir5;
    h.ozz = -1.0 - ir3 + 3.0 * s.z * s.z * ir5;
    return h;
}

/// Equations of motion in the rotated frame:
///   x'' - 2 y' = Omega_x,  y'' + 2 x' = Omega_y,  z'' = Omega_z.
inline PhaseState eom(const SystemParams& p, const PhaseState& s) {
    PotentialGradient g = potential_gradient(p, s);
    PhaseState ds;
    ds.x = s.vx;
    ds.y = s.vy;
    ds.z = s.vz;
    ds.vx = 2.0 * s.vy + g.ox;
    ds.vy = -2.0 * s.vx + g.oy;
    ds.vz = g.oz;
    return ds;
}

/// Jacobi integral C = 2 Omega - v^2. Related to the rotated Hamiltonian by
/// H = -C/2.
inline double jacobi_constant(const SystemParams& p, const PhaseState& s) {
    return 2.0 * effective_potential(p, s) - s.speed2();
}

/// Value of the rotated Hamiltonian at canonical coordinates.
inline double hamiltonian(const SystemParams& p, const HamiltonianState& h) {
    double r = detail::guarded_r(h.x, h.y, h.z);
    return 0.5 * (h.px * h.px + h.py * h.py + h.pz * h.pz) + h.y * h.px - h.x * h.py +
           p.a * h.x * h.x + p.b * h.y * h.y + p.c * h.z * h.z - 1.0 / r;
}

/// Splits the planar Hamiltonian as H(mu) = H_Hill + mu P + residual with
/// P = (9/8)(x^2 - y^2); the residual is O(mu^2).
struct HillSplit {
    double hHill;     ///< classical Hill Hamiltonian at the same canonical point
    double p;         ///< perturbation term (9/8)(x^2 - y^2)
    double residual;  ///< H(mu) - H_Hill - mu P
};

inline HillSplit hill_perturbation_split(const SystemParams& p, const HamiltonianState& h) {
    static const SystemParams hill = make_params(0.0);
    HillSplit out;
    out.hHill = hamiltonian(hill, h);
    out.p = 1.125 * (h.x * h.x - h.y * h.y);
    out.residual = hamiltonian(p, h) - out.hHill - p.mu * out.p;
    return out;
}

/// Reconstructs the transverse velocity on a perpendicular section crossing
/// from the Jacobi constant. Sign chosen by the caller.
inline double speed_from_jacobi(const SystemParams& p, const PhaseState& position, double C) {
    double v2 = 2.0 * effective_potential(p, position) - C;
    if (v2 < 0.0)
        throw std::domain_error("speed_from_jacobi: 2*Omega - C negative (forbidden region)");
    return std::sqrt(v2);
}

}  // namespace h4bp
