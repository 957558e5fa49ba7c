#pragma once

#include "h4bp/dynamics.hpp"
#include "h4bp/params.hpp"
#include "h4bp/state.hpp"

namespace h4bp {

/// Levi-Civita variables: quadratic map x = Q1^2 - Q2^2, y = 2 Q1 Q2 with
/// momenta P = 2 A0^T p and fictitious time dt = 4 |Q|^2 dtau. The flow of
/// the regularized Hamiltonian
///   Hbar = |P|^2/2 - 2|Q|^2 (P2 Q1 - Q2 P1) + 2|Q|^2 Q^T M2 Q + 2 C |Q|^2 - 4
/// is regular at the collision |Q| = 0, where |P|^2 = 8 on the Hbar = 0 level.
struct RegState {
    double q1 = 0, q2 = 0;
    double p1 = 0, p2 = 0;
    double tPhys = 0;  ///< accumulated physical time
    double c = 0;      ///< Jacobi constant of the embedding level set

    double normQ2() const { return q1 * q1 + q2 * q2; }
};

enum class RegBranch { Plus, Minus };

/// Quadratic-map preimage of a planar position; Plus selects Q1 >= 0.
inline void lc_position(double x, double y, RegBranch branch, double& q1, double& q2) {
    double r = std::sqrt(x * x + y * y);
    if (r + x > r * 1e-14) {
        q1 = std::sqrt(0.5 * (r + x));
        q2 = 0.5 * y / q1;
    } else {
        // x near -r: the other half-angle form stays well conditioned
        q2 = std::sqrt(0.5 * (r - x));
        q1 = q2 == 0.0 ? 0.0 : 0.5 * y / q2;
        if (q1 < 0.0) {  // normalize to Q1 >= 0, flipping the whole point
            q1 = -q1;
            q2 = -q2;
        }
    }
    if (branch == RegBranch::Minus) {
        q1 = -q1;
        q2 = -q2;
    }
}

inline RegState to_regularized(const SystemParams& p, const PhaseState& s,
                               RegBranch branch = RegBranch::Plus) {
    double r = std::sqrt(s.x * s.x + s.y * s.y);
    if (r < kCollisionFloor) throw CollisionError(r);
    RegState out;
    lc_position(s.x, s.y, branch, out.q1, out.q2);
    // P = 2 A0^T p with A0 = [[Q1, -Q2], [Q2, Q1]]
    double px = s.vx - s.y, py = s.vy + s.x;
    out.p1 = 2.0 * (out.q1 * px + out.q2 * py);
    out.p2 = 2.0 * (-out.q2 * px + out.q1 * py);
    out.tPhys = 0.0;
    out.c = jacobi_constant(p, s);
    return out;
}

/// Physical image of a regularized point. At |Q| = 0 there is no physical
/// velocity; callers sampling collision orbits must test normQ2() first.
inline PhaseState from_regularized(const SystemParams& p, const RegState& r) {
    double n2 = r.normQ2();
    if (n2 < kCollisionFloor) throw CollisionError(std::sqrt(n2));
    PhaseState s;
    s.x = r.q1 * r.q1 - r.q2 * r.q2;
    s.y = 2.0 * r.q1 * r.q2;
    double inv = 0.5 / n2;
    double px = (r.q1 * r.p1 - r.q2 * r.p2) * inv;
    double py = (r.q2 * r.p1 + r.q1 * r.p2) * inv;
    s.vx = px + s.y;
    s.vy = py - s.x;
    (void)p;
    return s;
}

/// Hbar including the constant -4; zero along physical trajectories at Jacobi
/// constant C, and the source of the collision condition |P|^2 = 8.
inline double reg_hamiltonian(const SystemParams& p, const RegState& r) {
    double n2 = r.normQ2();
    double x = r.q1 * r.q1 - r.q2 * r.q2;
    double y = 2.0 * r.q1 * r.q2;
    // Q^T M2 Q = (A0 Q)^T D (A0 Q) with D = diag(1 - lambda2, 1 - lambda1)
    double qMq = (1.0 - p.lambda2) * x * x + (1.0 - p.lambda1) * y * y;
    return 0.5 * (r.p1 * r.p1 + r.p2 * r.p2) - 2.0 * n2 * (r.p2 * r.q1 - r.q2 * r.p1) +
           2.0 * n2 * qMq + 2.0 * r.c * n2 - 4.0;
}

/// tau-derivative of (Q, P, tPhys): the canonical equations of Hbar plus the
/// time rescaling dt = 4 |Q|^2 dtau. Regular everywhere including |Q| = 0.
struct RegDerivative {
    double dq1, dq2, dp1, dp2, dtPhys;
};

inline RegDerivative reg_eom(const SystemParams& p, const RegState& r) {
    double q1 = r.q1, q2 = r.q2, p1 = r.p1, p2 = r.p2;
    double n2 = q1 * q1 + q2 * q2;
    double x = q1 * q1 - q2 * q2;
    double y = 2.0 * q1 * q2;
    double ca = 1.0 - p.lambda2;
    double cb = 1.0 - p.lambda1;
    double qMq = ca * x * x + cb * y * y;
    double cross = p2 * q1 - q2 * p1;

    RegDerivative d;
    d.dq1 = p1 + 2.0 * n2 * q2;
    d.dq2 = p2 - 2.0 * n2 * q1;
    // G(Q) = 2 n2 qMq; dG/dQ1 = 4 Q1 qMq + 2 n2 (4 ca x Q1 + 4 cb y Q2)
    double gq1 = 4.0 * q1 * qMq + 8.0 * n2 * (ca * x * q1 + cb * y * q2);
    double gq2 = 4.0 * q2 * qMq + 8.0 * n2 * (-ca * x * q2 + cb * y * q1);
    d.dp1 = -(-4.0 * q1 * cross - 2.0 * n2 * p2 + gq1 + 4.0 * r.c * q1);
    d.dp2 = -(-4.0 * q2 * cross + 2.0 * n2 * p1 + gq2 + 4.0 * r.c * q2);
    d.dtPhys = 4.0 * n2;
    return d;
}

/// Residual of the regularized Jacobi relation Qdot1^2 + Qdot2^2 = 2 Omega^r
/// with Omega^r = 4 |Q|^2 (Omega - C/2); zero on consistent states.
inline double reg_first_integral(const SystemParams& p, const RegState& r) {
    RegDerivative d = reg_eom(p, r);
    double n2 = r.normQ2();
    double x = r.q1 * r.q1 - r.q2 * r.q2;
    double y = 2.0 * r.q1 * r.q2;
    double rr = n2;  // physical radius = |Q|^2
    double omega;
    if (rr < kCollisionFloor) {
        // limit form: 4 |Q|^2 Omega -> 4 (quadratic terms vanish, 4 n2 / r = 4)
        return d.dq1 * d.dq1 + d.dq2 * d.dq2 - 2.0 * (4.0 - 2.0 * r.c * n2);
    }
    omega = 0.5 * (p.lambda2 * x * x + p.lambda1 * y * y) + 1.0 / rr;
    double omegaReg = 4.0 * n2 * (omega - 0.5 * r.c);
    return d.dq1 * d.dq1 + d.dq2 * d.dq2 - 2.0 * omegaReg;
}

/// Solves Hbar = 0 for P2 on a perpendicular x-axis section point
/// (Q = (q1, 0), P = (0, p2)); branch picks the sign of the radical.
inline double reg_p2_from_energy(const SystemParams& p, double q1, double c, int branchSign) {
    double q2sq = q1 * q1;
    double n2 = q2sq;
    double x = q2sq;
    double qMq = (1.0 - p.lambda2) * x * x;
    // 0.5 p2^2 - 2 n2 q1 p2 + (2 n2 qMq + 2 c n2 - 4) = 0
    double bq = -2.0 * n2 * q1;
    double cq = 2.0 * n2 * qMq + 2.0 * c * n2 - 4.0;
    double disc = bq * bq - 2.0 * cq;
    if (disc < 0.0) throw std::domain_error("reg_p2_from_energy: forbidden region");
    return -bq + double(branchSign) * std::sqrt(disc);
}

}  // namespace h4bp
