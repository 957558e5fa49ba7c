#pragma once

#include <optional>

#include "h4bp/dynamics.hpp"
#include "h4bp/equilibria.hpp"
#include "h4bp/levi_civita.hpp"
#include "h4bp/propagation.hpp"

namespace h4bp {

/// Which symmetry section a periodic orbit is anchored to.
///   X: section y = 0, section coordinate x, perpendicular crossing vx = 0
///   Y: section x = 0, section coordinate y, perpendicular crossing vy = 0
enum class SectionAxis { X, Y };

struct CorrectorOptions {
    double tol = 1e-12;   ///< residual tolerance on the section conditions
    int maxIter = 25;
    bool allowRegularized = true;  ///< escalate to the regularized corrector on collision
    double collisionGuard = 1e-2;  ///< escalation radius
};

struct StabilityIndices {
    double ah = 0;        ///< trace of the energy-reduced return map
    double av = 0;        ///< trace of the vertical monodromy
    double halfMapA = 0;  ///< diagonal element a of the return map
    double halfMapD = 0;  ///< diagonal element d
};

struct PeriodicOrbit {
    double C = 0;
    PhaseState ic;  ///< state at the reference section (perpendicular crossing)
    double T = 0;
    double ah = 0, av = 0;
    double halfA = 0, halfD = 0;
    double ahHalf = 0;  ///< trace of the half-period transfer map (the other
                        ///< a+d convention found in family papers)
    OrbitSymmetry symmetry = OrbitSymmetry::XSymmetric;
    bool collision = false;
    std::optional<RegState> regIc;
    SectionAxis section = SectionAxis::X;
    int halfCrossings = 1;  ///< section crossings within one half period
    double rMin = 0;
    double residual = 0;  ///< final corrector residual
};

namespace porbit_detail {

inline PhaseState section_state(SectionAxis axis, double xi0, double v0) {
    if (axis == SectionAxis::X) return {xi0, 0, 0, 0, v0, 0};
    return {0, xi0, 0, v0, 0, 0};
}

/// d(transverse velocity)/d(section coordinate) at fixed C.
inline double dv_dxi_fixedC(const SystemParams& p, SectionAxis axis, double xi0, double v0) {
    PhaseState pos = section_state(axis, xi0, 0.0);
    auto g = potential_gradient(p, pos);
    double grad = axis == SectionAxis::X ? g.ox : g.oy;
    return grad / v0;
}

struct SymResult {
    double xi0, v0, tHalf, C;
    VariationalState end;  ///< variational state at the half period
    double residual;
    int iterations;
};

/// Newton on the half-period perpendicularity conditions with the time as an
/// explicit unknown (no event location, so loops crossing the section extra
/// times stay tracked through continuation).
///
/// Unknowns: fixedC  -> (xi0, tHalf)
///           fixedXi -> (v0, tHalf)
///           arc     -> (xi0, v0, tHalf) with nu . ((xi0, C) - ref) = ds
enum class SymMode { FixedC, FixedXi, Arc };

struct ArcConstraint {
    double nuXi = 0, nuC = 0;  ///< unit direction in the (xi0, C) plane
    double refXi = 0, refC = 0;
    double ds = 0;
};

inline SymResult newton_symmetric(const SystemParams& p, const IntegratorConfig& cfg,
                                  SectionAxis axis, SymMode mode, double C, double xi0, double v0,
                                  double tHalf, const CorrectorOptions& opts,
                                  const ArcConstraint* arc = nullptr) {
    const int iSec = axis == SectionAxis::X ? 1 : 0;   // section coordinate index
    const int iPer = axis == SectionAxis::X ? 2 : 3;   // perpendicular velocity index
    double lastRes = std::numeric_limits<double>::infinity();
    int vSign = v0 >= 0 ? 1 : -1;

    for (int it = 0; it < opts.maxIter; ++it) {
        if (mode == SymMode::FixedC) {
            PhaseState pos = section_state(axis, xi0, 0.0);
            v0 = vSign * speed_from_jacobi(p, pos, C);
        }
        PhaseState ic = section_state(axis, xi0, v0);
        double cNow = jacobi_constant(p, ic);
        VariationalState vs;
        vs.base = ic;
        VariationalState end = propagate_variational(p, cfg, vs, tHalf);
        auto sf = end.base.planar();
        auto f = eom(p, end.base).planar();

        double F0 = sf[iSec];
        double F1 = sf[iPer];
        double res = std::max(std::abs(F0), std::abs(F1));
        double arcRes = 0.0;
        if (mode == SymMode::Arc && arc) {
            arcRes = arc->nuXi * (xi0 - arc->refXi) + arc->nuC * (cNow - arc->refC) - arc->ds;
        }
        if (res < opts.tol && std::abs(arcRes) < 1e-10 && it > 0) {
            return {xi0, v0, tHalf, cNow, end, res, it};
        }
        lastRes = res;

        // variation of the initial state per unknown
        std::array<double, 4> dicXi{}, dicV{};
        dicXi[axis == SectionAxis::X ? 0 : 1] = 1.0;
        if (mode == SymMode::FixedC) {
            dicXi[axis == SectionAxis::X ? 3 : 2] = dv_dxi_fixedC(p, axis, xi0, v0);
        }
        dicV[axis == SectionAxis::X ? 3 : 2] = 1.0;

        auto colXi = end.stm * dicXi;
        auto colV = end.stm * dicV;

        if (mode == SymMode::Arc && arc) {
            PhaseState pos = section_state(axis, xi0, 0.0);
            auto g = potential_gradient(p, pos);
            double dCdXi = 2.0 * (axis == SectionAxis::X ? g.ox : g.oy);
            double dCdV = -2.0 * v0;
            Mat<3> J;
            J(0, 0) = colXi[iSec];
            J(0, 1) = colV[iSec];
            J(0, 2) = f[iSec];
            J(1, 0) = colXi[iPer];
            J(1, 1) = colV[iPer];
            J(1, 2) = f[iPer];
            J(2, 0) = arc->nuXi + arc->nuC * dCdXi;
            J(2, 1) = arc->nuC * dCdV;
            J(2, 2) = 0.0;
            auto d = solve<3>(J, {-F0, -F1, -arcRes});
            if (!std::isfinite(d[0]) || !std::isfinite(d[1]) || !std::isfinite(d[2]))
                throw ConvergenceError("symmetric corrector produced non-finite step", res);
            xi0 += d[0];
            v0 += d[1];
            tHalf += d[2];
        } else {
            Mat<2> J;
            if (mode == SymMode::FixedC) {
                J(0, 0) = colXi[iSec];
                J(1, 0) = colXi[iPer];
            } else {
                J(0, 0) = colV[iSec];
                J(1, 0) = colV[iPer];
            }
            J(0, 1) = f[iSec];
            J(1, 1) = f[iPer];
            auto d = solve<2>(J, {-F0, -F1});
            if (!std::isfinite(d[0]) || !std::isfinite(d[1]))
                throw ConvergenceError("symmetric corrector produced non-finite step", res);
            if (mode == SymMode::FixedC) xi0 += d[0];
            else v0 += d[0];
            tHalf += d[1];
        }
        if (tHalf <= 0)
            throw ConvergenceError("symmetric corrector drove the half period negative", res);
    }
    throw ConvergenceError("symmetric corrector did not converge", lastRes);
}

// --- regularized symmetric corrector (x-axis families through collision) ---

struct RegSymResult {
    double q10, p20, tauHalf, C;
    Vec<29> end;  ///< regularized variational state at the half period
    double residual;
    int iterations;
};

inline Vec<29> pack_reg_var(const RegState& r) {
    Vec<29> y{};
    y[0] = r.q1;
    y[1] = r.q2;
    y[2] = r.p1;
    y[3] = r.p2;
    for (int i = 0; i < 4; ++i) y[4 + i * 4 + i] = 1.0;
    y[24 + 0] = 1.0;  // vertical identity
    y[27] = 1.0;
    y[28] = r.tPhys;
    return y;
}

inline Vec<29> propagate_reg_var(const SystemParams& p, const IntegratorConfig& cfg, double c,
                                 const Vec<29>& y0, double tau) {
    Dop853<29, RegVarRhs> integ(RegVarRhs{p, c}, cfg);
    Vec<29> y = y0;
    if (integ.integrate(y, 0.0, tau) != IntegrateStatus::Done)
        throw std::runtime_error("regularized variational integration failed");
    return y;
}

/// Newton on the regularized half-period conditions
///   F0 = (Q1 Q2)(tauH)          (the section y = 0 is the union of both axes)
///   F1 = (Q1 P1 - Q2 P2)(tauH)  (perpendicularity, regular at collision)
/// Unknowns (q10, tauH) at fixed C, or (q10, C, tauH) with an arc constraint
/// in the (q10, C) plane. The initial P2 is pinned to the Hbar = 0 level.
inline RegSymResult newton_reg_symmetric(const SystemParams& p, const IntegratorConfig& cfg,
                                         SymMode mode, double C, double q10, double tauH,
                                         int p2Branch, const CorrectorOptions& opts,
                                         const ArcConstraint* arc = nullptr) {
    double lastRes = std::numeric_limits<double>::infinity();
    for (int it = 0; it < opts.maxIter; ++it) {
        double p20 = reg_p2_from_energy(p, q10, C, p2Branch);
        RegState r0{q10, 0.0, 0.0, p20, 0.0, C};
        Vec<29> y = propagate_reg_var(p, cfg, C, pack_reg_var(r0), tauH);
        double q1 = y[0], q2 = y[1], p1 = y[2], p2 = y[3];
        double F0 = q1 * q2;
        double F1 = q1 * p1 - q2 * p2;
        double res = std::max(std::abs(F0), std::abs(F1));

        double arcRes = 0.0;
        if (mode == SymMode::Arc && arc)
            arcRes = arc->nuXi * (q10 - arc->refXi) + arc->nuC * (C - arc->refC) - arc->ds;
        if (res < opts.tol && std::abs(arcRes) < 1e-10 && it > 0) {
            return {q10, p20, tauH, C, y, res, it};
        }
        lastRes = res;

        // implicit dP2/d(q10, C) on the Hbar = 0 level, via the canonical
        // identities Hq1 = -p1', Hp2 = q2'
        RegDerivative d0 = reg_eom(p, r0);
        double hQ1 = -d0.dp1, hP2 = d0.dq2;
        double hC = 2.0 * q10 * q10;
        double dp2_dq1 = -hQ1 / hP2;
        double dp2_dC = -hC / hP2;

        auto flowCol = [&](const std::array<double, 4>& dic) {
            std::array<double, 4> out{};
            for (int i = 0; i < 4; ++i)
                for (int k = 0; k < 4; ++k) out[i] += y[4 + i * 4 + k] * dic[k];
            return out;
        };
        std::array<double, 4> colQ = flowCol({1.0, 0.0, 0.0, dp2_dq1});
        std::array<double, 4> colC = flowCol({0.0, 0.0, 0.0, dp2_dC});
        for (int i = 0; i < 4; ++i) colC[i] += y[20 + i];  // parameter sensitivity

        RegState rEnd{q1, q2, p1, p2, 0.0, C};
        RegDerivative fe = reg_eom(p, rEnd);
        auto dF = [&](const std::array<double, 4>& col) {
            double d_F0 = q2 * col[0] + q1 * col[1];
            double d_F1 = p1 * col[0] - p2 * col[1] + q1 * col[2] - q2 * col[3];
            return std::array<double, 2>{d_F0, d_F1};
        };
        auto dFq = dF(colQ);
        auto dFc = dF(colC);
        std::array<double, 4> fEnd{fe.dq1, fe.dq2, fe.dp1, fe.dp2};
        auto dFt = dF(fEnd);

        if (mode == SymMode::Arc && arc) {
            Mat<3> J;
            J(0, 0) = dFq[0];
            J(0, 1) = dFc[0];
            J(0, 2) = dFt[0];
            J(1, 0) = dFq[1];
            J(1, 1) = dFc[1];
            J(1, 2) = dFt[1];
            J(2, 0) = arc->nuXi;
            J(2, 1) = arc->nuC;
            J(2, 2) = 0.0;
            auto d = solve<3>(J, {-F0, -F1, -arcRes});
            if (!std::isfinite(d[0]) || !std::isfinite(d[1]) || !std::isfinite(d[2]))
                throw ConvergenceError("regularized corrector produced non-finite step", res);
            q10 += d[0];
            C += d[1];
            tauH += d[2];
        } else {
            Mat<2> J;
            J(0, 0) = dFq[0];
            J(0, 1) = dFt[0];
            J(1, 0) = dFq[1];
            J(1, 1) = dFt[1];
            auto d = solve<2>(J, {-F0, -F1});
            if (!std::isfinite(d[0]) || !std::isfinite(d[1]))
                throw ConvergenceError("regularized corrector produced non-finite step", res);
            q10 += d[0];
            tauH += d[1];
        }
        if (tauH <= 0)
            throw ConvergenceError("regularized corrector drove the half period negative", res);
    }
    throw ConvergenceError("regularized corrector did not converge", lastRes);
}

/// Energy-and-phase-reduced return-map Jacobian over one full period,
/// computed from the 4x4 STM by lifting section variations onto the C level
/// and projecting the return through the flow direction.
inline Mat2 reduced_return_map(const SystemParams& p, const VariationalState& end,
                               const PhaseState& ic, SectionAxis axis) {
    auto g = potential_gradient(p, ic);
    auto f = eom(p, end.base).planar();
    Mat2 out;
    if (axis == SectionAxis::X) {
        // coords (x, vx); lift dvy = (Ox dx - vx dvx)/vy ; project through y'
        for (int c = 0; c < 2; ++c) {
            double dx = c == 0 ? 1.0 : 0.0;
            double dvx = c == 1 ? 1.0 : 0.0;
            double dvy = (g.ox * dx - ic.vx * dvx) / ic.vy;
            auto ds = end.stm * std::array<double, 4>{dx, 0.0, dvx, dvy};
            out(0, c) = ds[0] - f[0] * ds[1] / f[1];
            out(1, c) = ds[2] - f[2] * ds[1] / f[1];
        }
    } else {
        // coords (y, vy); lift dvx = (Oy dy - vy dvy)/vx ; project through x'
        for (int c = 0; c < 2; ++c) {
            double dy = c == 0 ? 1.0 : 0.0;
            double dvy = c == 1 ? 1.0 : 0.0;
            double dvx = (g.oy * dy - ic.vy * dvy) / ic.vx;
            auto ds = end.stm * std::array<double, 4>{0.0, dy, dvx, dvy};
            out(0, c) = ds[1] - f[1] * ds[0] / f[0];
            out(1, c) = ds[3] - f[3] * ds[0] / f[0];
        }
    }
    return out;
}

/// d(x, vx)/d(section coords) of the cover projection at a y = 0 point of
/// the double cover: coordinates (Q1, P1) on the Q2 = 0 axis, (Q2, P2) on
/// the Q1 = 0 axis.
inline Mat2 cover_jacobian(const RegState& r) {
    Mat2 d;
    if (std::abs(r.q1) >= std::abs(r.q2)) {
        d(0, 0) = 2.0 * r.q1;
        d(0, 1) = 0.0;
        d(1, 0) = -r.p1 / (2.0 * r.q1 * r.q1);
        d(1, 1) = 1.0 / (2.0 * r.q1);
    } else {
        d(0, 0) = -2.0 * r.q2;
        d(0, 1) = 0.0;
        d(1, 0) = r.p2 / (2.0 * r.q2 * r.q2);
        d(1, 1) = -1.0 / (2.0 * r.q2);
    }
    return d;
}

/// Energy-reduced transfer map between axis crossings of the regularized
/// flow, expressed in physical section coordinates (x, vx) at both ends.
/// The end may sit on either axis of the cover of y = 0.
inline Mat2 reg_transfer_map_physical(const SystemParams& p, const Vec<29>& end,
                                      const RegState& r0) {
    RegDerivative d0 = reg_eom(p, r0);
    double hQ1 = -d0.dp1, hP1 = d0.dq1, hP2 = d0.dq2;
    RegState rEnd{end[0], end[1], end[2], end[3], 0.0, r0.c};
    RegDerivative fe = reg_eom(p, rEnd);
    bool endOnQ2Axis = std::abs(rEnd.q1) >= std::abs(rEnd.q2);
    Mat2 regMap;
    for (int c = 0; c < 2; ++c) {
        double dq1 = c == 0 ? 1.0 : 0.0;
        double dp1 = c == 1 ? 1.0 : 0.0;
        double dp2 = -(hQ1 * dq1 + hP1 * dp1) / hP2;
        std::array<double, 4> dic{dq1, 0.0, dp1, dp2};
        std::array<double, 4> ds{};
        for (int i = 0; i < 4; ++i)
            for (int k = 0; k < 4; ++k) ds[i] += end[4 + i * 4 + k] * dic[k];
        if (endOnQ2Axis) {
            regMap(0, c) = ds[0] - fe.dq1 * ds[1] / fe.dq2;
            regMap(1, c) = ds[2] - fe.dp1 * ds[1] / fe.dq2;
        } else {
            regMap(0, c) = ds[1] - fe.dq2 * ds[0] / fe.dq1;
            regMap(1, c) = ds[3] - fe.dp2 * ds[0] / fe.dq1;
        }
    }
    Mat2 dIn = cover_jacobian(r0);
    Mat2 dOut = cover_jacobian(rEnd);
    // conjugate: M_phys = dOut * regMap * dIn^{-1}
    double det = dIn(0, 0) * dIn(1, 1) - dIn(0, 1) * dIn(1, 0);
    Mat2 inv;
    inv(0, 0) = dIn(1, 1) / det;
    inv(0, 1) = -dIn(0, 1) / det;
    inv(1, 0) = -dIn(1, 0) / det;
    inv(1, 1) = dIn(0, 0) / det;
    return dOut * (regMap * inv);
}

/// Same reduction in regularized variables on the section Q2 = 0 with
/// coordinates (Q1, P1). The double cover contributes a sign when the lifted
/// period ends at the antipodal point.
inline Mat2 reduced_return_map_reg(const SystemParams& p, const Vec<29>& end, const RegState& r0) {
    RegDerivative d0 = reg_eom(p, r0);
    double hQ1 = -d0.dp1, hQ2 = -d0.dp2, hP1 = d0.dq1, hP2 = d0.dq2;
    RegState rEnd{end[0], end[1], end[2], end[3], 0.0, r0.c};
    RegDerivative fe = reg_eom(p, rEnd);
    double sign = (end[0] * r0.q1 + end[3] * r0.p2) >= 0 ? 1.0 : -1.0;
    Mat2 out;
    for (int c = 0; c < 2; ++c) {
        double dq1 = c == 0 ? 1.0 : 0.0;
        double dp1 = c == 1 ? 1.0 : 0.0;
        double dp2 = -(hQ1 * dq1 + hP1 * dp1) / hP2;
        (void)hQ2;
        std::array<double, 4> dic{dq1, 0.0, dp1, dp2};
        std::array<double, 4> ds{};
        for (int i = 0; i < 4; ++i)
            for (int k = 0; k < 4; ++k) ds[i] += end[4 + i * 4 + k] * dic[k];
        out(0, c) = sign * (ds[0] - fe.dq1 * ds[1] / fe.dq2);
        out(1, c) = sign * (ds[2] - fe.dp1 * ds[1] / fe.dq2);
    }
    return out;
}

}  // namespace porbit_detail

/// Full-period monodromy (4x4 STM plus vertical block) of a converged orbit.
inline VariationalState monodromy(const SystemParams& p, const IntegratorConfig& cfg,
                                  const PeriodicOrbit& orbit) {
    VariationalState v0;
    v0.base = orbit.ic;
    return propagate_variational(p, cfg, v0, orbit.T);
}

namespace porbit_detail {

inline OrbitSymmetry classify_symmetry(const SystemParams& p, const IntegratorConfig& cfg,
                                       const PeriodicOrbit& orbit, double* rMinOut) {
    IntegratorConfig c = cfg;
    c.collisionGuard = 0.0;
    bool perpX = false, perpY = false;
    double rMin = std::numeric_limits<double>::infinity();
    try {
        Trajectory traj = propagate(p, c, orbit.ic, orbit.T);
        rMin = traj.minRadius;
        double t = 0.0;
        for (int k = 0; k < 12; ++k) {
            auto hx = next_event(traj, EventDef::y_cross(0), t);
            if (!hx) break;
            if (std::abs(hx->state.vx) < 1e-7) perpX = true;
            t = hx->t;
        }
        t = 0.0;
        for (int k = 0; k < 12; ++k) {
            auto hy = next_event(traj, EventDef::x_cross(0), t);
            if (!hy) break;
            if (std::abs(hy->state.vy) < 1e-7) perpY = true;
            t = hy->t;
        }
        if (std::abs(orbit.ic.y) < 1e-12 && std::abs(orbit.ic.vx) < 1e-9) perpX = true;
        if (std::abs(orbit.ic.x) < 1e-12 && std::abs(orbit.ic.vy) < 1e-9) perpY = true;
    } catch (const CollisionError&) {
        // collision members keep the symmetry of their section
        perpX = orbit.section == SectionAxis::X;
        perpY = orbit.section == SectionAxis::Y;
        rMin = 0.0;
    }
    if (rMinOut) *rMinOut = rMin;
    if (perpX && perpY) return OrbitSymmetry::DoublySymmetric;
    if (perpX) return OrbitSymmetry::XSymmetric;
    if (perpY) return OrbitSymmetry::YSymmetric;
    return OrbitSymmetry::Asymmetric;
}

inline void fill_stability_physical(const SystemParams& p, const IntegratorConfig& cfg,
                                    PeriodicOrbit& o) {
    // two half-period legs: the composition gives the monodromy, the first
    // leg the half-period transfer map
    VariationalState leg1;
    leg1.base = o.ic;
    VariationalState m1 = propagate_variational(p, cfg, leg1, o.T / 2.0);
    VariationalState leg2;
    leg2.base = m1.base;
    VariationalState m2 = propagate_variational(p, cfg, leg2, o.T / 2.0);
    VariationalState full;
    full.base = m2.base;
    full.stm = m2.stm * m1.stm;
    full.vstm = m2.vstm * m1.vstm;
    Mat2 dp = reduced_return_map(p, full, o.ic, o.section);
    o.halfA = dp(0, 0);
    o.halfD = dp(1, 1);
    o.ah = dp(0, 0) + dp(1, 1);
    o.av = full.vstm.trace();
    o.ahHalf = reduced_return_map(p, m1, o.ic, o.section).trace();
}

inline void fill_stability_reg(const SystemParams& p, const IntegratorConfig& cfg,
                               PeriodicOrbit& o, double tauHalf) {
    RegState r0 = *o.regIc;
    Vec<29> yh = propagate_reg_var(p, cfg, r0.c, pack_reg_var(r0), tauHalf);
    o.ahHalf = reg_transfer_map_physical(p, yh, r0).trace();
    // second leg from the half state, then compose the variational blocks
    RegState rm{yh[0], yh[1], yh[2], yh[3], yh[28], r0.c};
    Vec<29> y2 = propagate_reg_var(p, cfg, r0.c, pack_reg_var(rm), tauHalf);
    Vec<29> y{};
    for (int i = 0; i < 4; ++i) y[i] = y2[i];
    Mat4 f1, f2;
    std::copy(yh.begin() + 4, yh.begin() + 20, f1.m.begin());
    std::copy(y2.begin() + 4, y2.begin() + 20, f2.m.begin());
    Mat4 ff = f2 * f1;
    std::copy(ff.m.begin(), ff.m.end(), y.begin() + 4);
    // C-sensitivity composes as xi = Phi2 xi1 + xi2
    for (int i = 0; i < 4; ++i) {
        double acc = y2[20 + i];
        for (int k = 0; k < 4; ++k) acc += f2(i, k) * yh[20 + k];
        y[20 + i] = acc;
    }
    Mat2 v1, v2;
    v1.m = {yh[24], yh[25], yh[26], yh[27]};
    v2.m = {y2[24], y2[25], y2[26], y2[27]};
    Mat2 vv = v2 * v1;
    std::copy(vv.m.begin(), vv.m.end(), y.begin() + 24);
    y[28] = y2[28];
    Mat2 dp = reduced_return_map_reg(p, y, r0);
    o.halfA = dp(0, 0);
    o.halfD = dp(1, 1);
    o.ah = dp(0, 0) + dp(1, 1);
    o.av = vv.trace();
    o.T = y2[28] - r0.tPhys;  // physical period accumulated over 2 tauHalf
}

/// Fictitious time of the k-th crossing of the section y = 0 (the zero set of
/// Q1 Q2) along the regularized flow; used to initialize the reg corrector.
inline double reg_section_time(const SystemParams& p, const IntegratorConfig& cfg,
                               const RegState& r0, int k) {
    double horizon = 2.0;
    for (int attempt = 0; attempt < 8; ++attempt, horizon *= 2.0) {
        RegTrajectory reg = propagate_regularized(p, cfg, r0, horizon);
        int found = 0;
        const int sub = 2000;
        double prevTau = 0.0;
        double prevVal = r0.q1 * r0.q2;
        for (int i = 1; i <= sub; ++i) {
            double tau = horizon * double(i) / sub;
            RegState r = reg.state_at(tau);
            double val = r.q1 * r.q2;
            if (tau > 1e-9 && ((prevVal < 0 && val >= 0) || (prevVal > 0 && val <= 0))) {
                double lo = prevTau, hi = tau, flo = prevVal;
                for (int it = 0; it < 80; ++it) {
                    double mid = 0.5 * (lo + hi);
                    RegState rm = reg.state_at(mid);
                    double vm = rm.q1 * rm.q2;
                    if ((flo < 0) == (vm < 0)) {
                        lo = mid;
                        flo = vm;
                    } else
                        hi = mid;
                }
                if (++found == k) return 0.5 * (lo + hi);
            }
            prevTau = tau;
            prevVal = val;
        }
    }
    throw ConvergenceError("reg_section_time: no section crossing found", 0.0);
}

/// Minimum physical radius (= min |Q|^2) along a regularized arc.
inline double reg_min_radius(const SystemParams& p, const IntegratorConfig& cfg,
                             const RegState& r0, double tauSpan) {
    RegTrajectory reg = propagate_regularized(p, cfg, r0, tauSpan);
    double best = r0.normQ2();
    for (int i = 0; i <= 2000; ++i) {
        double tau = tauSpan * double(i) / 2000.0;
        best = std::min(best, reg.state_at(tau).normQ2());
    }
    return best;
}

}  // namespace porbit_detail

/// Initial guess for the symmetric corrector: a perpendicular section
/// crossing plus an estimate of the half period (the time to the
/// halfCrossings-th return to the section).
struct SymmetricGuess {
    SectionAxis axis = SectionAxis::X;
    double xi0 = 0;     ///< x0 (X section) or y0 (Y section)
    double v0 = 0;      ///< vy0 (X section) or vx0 (Y section)
    double tHalf = 0;   ///< half-period estimate; must be positive
    int halfCrossings = 1;
};

enum class HoldFixed { C, Xi };

/// Differential correction of a symmetric periodic orbit. Newton iterates the
/// half-period perpendicularity conditions using STM sensitivities; on
/// collision-guard violation the correction restarts in regularized
/// coordinates and the returned orbit carries the collision flag and regIc.
inline PeriodicOrbit correct_symmetric(const SystemParams& p, const SymmetricGuess& guess,
                                       HoldFixed hold = HoldFixed::C,
                                       const IntegratorConfig& cfgIn = {},
                                       const CorrectorOptions& opts = {}) {
    using namespace porbit_detail;
    if (!(guess.tHalf > 0)) throw std::domain_error("correct_symmetric: tHalf guess must be > 0");
    IntegratorConfig cfg = cfgIn;
    cfg.collisionGuard = 0.0;

    double C = jacobi_constant(p, section_state(guess.axis, guess.xi0, guess.v0));
    auto tryPhysical = [&]() {
        SymResult r = newton_symmetric(p, cfg, guess.axis,
                                       hold == HoldFixed::C ? SymMode::FixedC : SymMode::FixedXi,
                                       C, guess.xi0, guess.v0, guess.tHalf, opts);
        PeriodicOrbit o;
        o.section = guess.axis;
        o.halfCrossings = guess.halfCrossings;
        o.ic = section_state(guess.axis, r.xi0, r.v0);
        o.C = r.C;
        o.T = 2.0 * r.tHalf;
        o.residual = r.residual;
        fill_stability_physical(p, cfg, o);
        o.symmetry = classify_symmetry(p, cfg, o, &o.rMin);
        return o;
    };

    try {
        PeriodicOrbit o = tryPhysical();
        if (o.rMin >= opts.collisionGuard || !opts.allowRegularized || guess.axis != SectionAxis::X)
            return o;
        // close approach with a still-convergent physical corrector: keep the
        // physical solution, flag it and attach the regularized anchor
        PeriodicOrbit ro = o;
        ro.collision = true;
        ro.regIc = to_regularized(p, o.ic);
        return ro;
    } catch (const CollisionError&) {
        if (!opts.allowRegularized || guess.axis != SectionAxis::X) throw;
    }

    // regularized route: map the guess and redo the Newton in (Q, P)
    RegState r0 = to_regularized(p, section_state(guess.axis, guess.xi0, guess.v0));
    int branch = r0.p2 >= 0 ? 1 : -1;
    double tauH = reg_section_time(p, cfg, r0, guess.halfCrossings);
    RegSymResult rr = newton_reg_symmetric(p, cfg, SymMode::FixedC, C, r0.q1, tauH, branch, opts);
    PeriodicOrbit o;
    o.section = guess.axis;
    o.halfCrossings = guess.halfCrossings;
    o.collision = true;
    RegState anchor{rr.q10, 0.0, 0.0, rr.p20, 0.0, rr.C};
    o.regIc = anchor;
    o.ic = from_regularized(p, anchor);
    o.C = rr.C;
    o.residual = rr.residual;
    fill_stability_reg(p, cfg, o, rr.tauHalf);
    o.rMin = reg_min_radius(p, cfg, anchor, 2.0 * rr.tauHalf);
    o.symmetry = OrbitSymmetry::XSymmetric;
    return o;
}

/// Full-period correction of an asymmetric orbit anchored to the y = 0
/// section at fixed Jacobi constant. Unknowns (x0, vx0, T); the remaining
/// periodicity condition follows from energy conservation.
inline PeriodicOrbit correct_asymmetric(const SystemParams& p, const PhaseState& guess,
                                        double tGuess, const IntegratorConfig& cfgIn = {},
                                        const CorrectorOptions& opts = {}) {
    using namespace porbit_detail;
    if (std::abs(guess.y) > 1e-12)
        throw std::domain_error("correct_asymmetric: guess must sit on the y = 0 section");
    IntegratorConfig cfg = cfgIn;
    cfg.collisionGuard = 0.0;

    double C = jacobi_constant(p, guess);
    double x0 = guess.x, vx0 = guess.vx, T = tGuess;
    int vySign = guess.vy >= 0 ? 1 : -1;
    double lastRes = std::numeric_limits<double>::infinity();

    for (int it = 0; it < opts.maxIter; ++it) {
        PhaseState pos{x0, 0, 0, 0, 0, 0};
        double v2 = 2.0 * effective_potential(p, pos) - C - vx0 * vx0;
        if (v2 <= 0)
            throw ConvergenceError("asymmetric corrector left the energy surface", lastRes);
        double vy0 = vySign * std::sqrt(v2);
        PhaseState ic{x0, 0, 0, vx0, vy0, 0};
        VariationalState vs;
        vs.base = ic;
        VariationalState end = propagate_variational(p, cfg, vs, T);
        auto sf = end.base.planar();
        auto f = eom(p, end.base).planar();

        double F0 = sf[0] - x0, F1 = sf[1], F2 = sf[2] - vx0;
        double res = std::max({std::abs(F0), std::abs(F1), std::abs(F2)});
        if (res < opts.tol && it > 0) {
            PeriodicOrbit o;
            o.section = SectionAxis::X;
            o.ic = ic;
            o.C = C;
            o.T = T;
            o.residual = res;
            fill_stability_physical(p, cfg, o);
            o.symmetry = classify_symmetry(p, cfg, o, &o.rMin);
            return o;
        }
        lastRes = res;

        auto g = potential_gradient(p, pos);
        std::array<double, 4> dicX{1.0, 0.0, 0.0, g.ox / vy0};
        std::array<double, 4> dicVx{0.0, 0.0, 1.0, -vx0 / vy0};
        auto colX = end.stm * dicX;
        auto colVx = end.stm * dicVx;
        Mat<3> J;
        J(0, 0) = colX[0] - 1.0;
        J(0, 1) = colVx[0];
        J(0, 2) = f[0];
        J(1, 0) = colX[1];
        J(1, 1) = colVx[1];
        J(1, 2) = f[1];
        J(2, 0) = colX[2];
        J(2, 1) = colVx[2] - 1.0;
        J(2, 2) = f[2];
        auto d = solve<3>(J, {-F0, -F1, -F2});
        if (!std::isfinite(d[0]) || !std::isfinite(d[1]) || !std::isfinite(d[2]))
            throw ConvergenceError("asymmetric corrector produced non-finite step", res);
        // keep the phase anchored: damp wild steps near bifurcations
        double lim = 0.05;
        double mag = std::max(std::abs(d[0]), std::abs(d[1]));
        double sc = mag > lim ? lim / mag : 1.0;
        x0 += sc * d[0];
        vx0 += sc * d[1];
        T += sc * d[2];
        if (T <= 0) throw ConvergenceError("asymmetric corrector drove the period negative", res);
    }
    throw ConvergenceError("asymmetric corrector did not converge", lastRes);
}

/// Stability indices of a converged orbit (recomputed from its record).
inline StabilityIndices stability(const SystemParams& p, const IntegratorConfig& cfg,
                                  const PeriodicOrbit& orbit) {
    using namespace porbit_detail;
    PeriodicOrbit tmp = orbit;
    if (orbit.collision && orbit.regIc) {
        // recover tauHalf by integrating to half the physical period
        // (bisection on tPhys over a dense reg trajectory)
        RegState r0 = *orbit.regIc;
        IntegratorConfig c = cfg;
        RegTrajectory reg = propagate_regularized(p, c, r0, 1.0);
        double tauH = reg.tau1;
        while (reg.finalState.tPhys - r0.tPhys < orbit.T / 2.0) {
            tauH *= 2.0;
            reg = propagate_regularized(p, c, r0, tauH);
        }
        double lo = 0, hi = tauH;
        for (int i = 0; i < 200 && hi - lo > 1e-14 * tauH; ++i) {
            double mid = 0.5 * (lo + hi);
            (reg.state_at(mid).tPhys - r0.tPhys < orbit.T / 2.0 ? lo : hi) = mid;
        }
        fill_stability_reg(p, cfg, tmp, 0.5 * (lo + hi));
    } else {
        fill_stability_physical(p, cfg, tmp);
    }
    return {tmp.ah, tmp.av, tmp.halfA, tmp.halfD};
}

}  // namespace h4bp
