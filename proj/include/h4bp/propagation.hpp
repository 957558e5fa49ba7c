#pragma once

#include <algorithm>
#include <optional>
#include <vector>

#include "h4bp/dop853.hpp"
#include "h4bp/dynamics.hpp"
#include "h4bp/levi_civita.hpp"
#include "h4bp/linalg.hpp"
#include "h4bp/params.hpp"
#include "h4bp/state.hpp"

namespace h4bp {

// ---------------------------------------------------------------------------
// Right-hand sides
// ---------------------------------------------------------------------------

/// Planar flow, state (x, y, vx, vy).
struct PlanarRhs {
    SystemParams p;
    void operator()(double, const Vec<4>& s, Vec<4>& ds) const {
        double x = s[0], y = s[1];
        double r2 = x * x + y * y;
        double r = std::sqrt(r2);
        if (r < kCollisionFloor) throw CollisionError(r);
        double ir3 = 1.0 / (r2 * r);
        ds[0] = s[2];
        ds[1] = s[3];
        ds[2] = 2.0 * s[3] + p.lambda2 * x - x * ir3;
        ds[3] = -2.0 * s[2] + p.lambda1 * y - y * ir3;
    }
};

/// Planar flow + 4x4 state-transition matrix + decoupled vertical 2x2 system.
/// Layout: [state 4 | Phi 16 row-major | V 4 row-major].
struct PlanarVarRhs {
    SystemParams p;
    static constexpr int kDim = 24;
    void operator()(double, const Vec<24>& s, Vec<24>& ds) const {
        double x = s[0], y = s[1];
        double r2 = x * x + y * y;
        double r = std::sqrt(r2);
        if (r < kCollisionFloor) throw CollisionError(r);
        double ir3 = 1.0 / (r2 * r);
        double ir5 = ir3 / r2;
        ds[0] = s[2];
        ds[1] = s[3];
        ds[2] = 2.0 * s[3] + p.lambda2 * x - x * ir3;
        ds[3] = -2.0 * s[2] + p.lambda1 * y - y * ir3;
        double oxx = p.lambda2 - ir3 + 3.0 * x * x * ir5;
        double oxy = 3.0 * x * y * ir5;
        double oyy = p.lambda1 - ir3 + 3.0 * y * y * ir5;
        // dPhi = A Phi with A = [[0,0,1,0],[0,0,0,1],[oxx,oxy,0,2],[oxy,oyy,-2,0]]
        for (int j = 0; j < 4; ++j) {
            double p0 = s[4 + 0 * 4 + j], p1 = s[4 + 1 * 4 + j];
            double p2 = s[4 + 2 * 4 + j], p3 = s[4 + 3 * 4 + j];
            ds[4 + 0 * 4 + j] = p2;
            ds[4 + 1 * 4 + j] = p3;
            ds[4 + 2 * 4 + j] = oxx * p0 + oxy * p1 + 2.0 * p3;
            ds[4 + 3 * 4 + j] = oxy * p0 + oyy * p1 - 2.0 * p2;
        }
        double ozz = -1.0 - ir3;
        for (int j = 0; j < 2; ++j) {
            double v0 = s[20 + 0 * 2 + j], v1 = s[20 + 1 * 2 + j];
            ds[20 + 0 * 2 + j] = v1;
            ds[20 + 1 * 2 + j] = ozz * v0;
        }
    }
};

/// Regularized flow, state (Q1, Q2, P1, P2, tPhys); C enters as a parameter.
struct RegRhs {
    SystemParams p;
    double c;
    void operator()(double, const Vec<5>& s, Vec<5>& ds) const {
        RegState r{s[0], s[1], s[2], s[3], s[4], c};
        RegDerivative d = reg_eom(p, r);
        ds = {d.dq1, d.dq2, d.dp1, d.dp2, d.dtPhys};
    }
};

/// Regularized flow + 4x4 STM + dstate/dC sensitivity + vertical 2x2 system
/// in fictitious time + physical time.
/// Layout: [Q,P 4 | Phi 16 | dC 4 | V 4 | tPhys 1] = 29.
struct RegVarRhs {
    SystemParams p;
    double c;
    static constexpr int kDim = 29;

    void jacobian(const RegState& r, Mat4& a, std::array<double, 4>& fc) const {
        double q1 = r.q1, q2 = r.q2, p1 = r.p1, p2 = r.p2;
        double n2 = q1 * q1 + q2 * q2;
        double x = q1 * q1 - q2 * q2, y = 2.0 * q1 * q2;
        double ca = 1.0 - p.lambda2, cb = 1.0 - p.lambda1;
        double qMq = ca * x * x + cb * y * y;
        double cross = p2 * q1 - q2 * p1;

        // Q rows: dq1' = p1 + 2 n2 q2 ; dq2' = p2 - 2 n2 q1
        a(0, 0) = 4.0 * q1 * q2;
        a(0, 1) = 2.0 * n2 + 4.0 * q2 * q2;
        a(0, 2) = 1.0;
        a(0, 3) = 0.0;
        a(1, 0) = -2.0 * n2 - 4.0 * q1 * q1;
        a(1, 1) = -4.0 * q1 * q2;
        a(1, 2) = 0.0;
        a(1, 3) = 1.0;

        // G-part second derivatives; u = (1/4) grad qMq
        double u1 = ca * x * q1 + cb * y * q2;
        double u2 = -ca * x * q2 + cb * y * q1;
        double du1_1 = ca * (2.0 * q1 * q1 + x) + 2.0 * cb * q2 * q2;
        double du1_2 = -2.0 * ca * q1 * q2 + cb * (2.0 * q1 * q2 + y);
        double du2_1 = -2.0 * ca * q1 * q2 + cb * (2.0 * q1 * q2 + y);
        double du2_2 = -ca * (x - 2.0 * q2 * q2) + 2.0 * cb * q1 * q1;
        double dgq1_1 = 4.0 * qMq + 32.0 * q1 * u1 + 8.0 * n2 * du1_1;
        double dgq1_2 = 16.0 * q1 * u2 + 16.0 * q2 * u1 + 8.0 * n2 * du1_2;
        double dgq2_1 = 16.0 * q2 * u1 + 16.0 * q1 * u2 + 8.0 * n2 * du2_1;
        double dgq2_2 = 4.0 * qMq + 32.0 * q2 * u2 + 8.0 * n2 * du2_2;

        // p1' = 4 q1 cross + 2 n2 p2 - gq1 - 4 c q1
        a(2, 0) = 4.0 * cross + 8.0 * q1 * p2 - dgq1_1 - 4.0 * c;
        a(2, 1) = -4.0 * q1 * p1 + 4.0 * q2 * p2 - dgq1_2;
        a(2, 2) = -4.0 * q1 * q2;
        a(2, 3) = 4.0 * q1 * q1 + 2.0 * n2;
        // p2' = 4 q2 cross - 2 n2 p1 - gq2 - 4 c q2
        a(3, 0) = 4.0 * q2 * p2 - 4.0 * q1 * p1 - dgq2_1;
        a(3, 1) = 4.0 * cross - 8.0 * q2 * p1 - dgq2_2 - 4.0 * c;
        a(3, 2) = -4.0 * q2 * q2 - 2.0 * n2;
        a(3, 3) = 4.0 * q2 * q1;

        // explicit dC column of the vector field
        fc = {0.0, 0.0, -4.0 * q1, -4.0 * q2};
    }

    void operator()(double, const Vec<29>& s, Vec<29>& ds) const {
        RegState r{s[0], s[1], s[2], s[3], s[28], c};
        RegDerivative d = reg_eom(p, r);
        ds[0] = d.dq1;
        ds[1] = d.dq2;
        ds[2] = d.dp1;
        ds[3] = d.dp2;
        ds[28] = d.dtPhys;

        Mat4 a;
        std::array<double, 4> fc;
        jacobian(r, a, fc);
        for (int j = 0; j < 4; ++j) {
            for (int i = 0; i < 4; ++i) {
                double acc = 0.0;
                for (int k = 0; k < 4; ++k) acc += a(i, k) * s[4 + k * 4 + j];
                ds[4 + i * 4 + j] = acc;
            }
        }
        // dC sensitivity: xi' = A xi + f_C
        for (int i = 0; i < 4; ++i) {
            double acc = fc[i];
            for (int k = 0; k < 4; ++k) acc += a(i, k) * s[20 + k];
            ds[20 + i] = acc;
        }
        // vertical system in fictitious time: dz/dtau = 4 n2 w, dw/dtau = 4 n2 ozz z
        double n2 = r.normQ2();
        double rr = n2;
        double ozz = -1.0 - 1.0 / std::max(rr * rr * rr, 1e-300);
        double f4 = 4.0 * n2;
        for (int j = 0; j < 2; ++j) {
            double z = s[24 + 0 * 2 + j], w = s[24 + 1 * 2 + j];
            ds[24 + 0 * 2 + j] = f4 * w;
            ds[24 + 1 * 2 + j] = f4 * ozz * z;
        }
    }
};

// ---------------------------------------------------------------------------
// Trajectories with dense output
// ---------------------------------------------------------------------------

enum class PropagationStatus { Complete, CollisionEscape, Failed };

/// Dense planar trajectory: stores the interpolation segment of every
/// accepted step, so states and events can be sampled anywhere in [t0, t1].
class Trajectory {
public:
    PropagationStatus status = PropagationStatus::Complete;
    double t0 = 0, t1 = 0;
    SystemParams params{};
    std::vector<DenseSeg<4>> segs;
    PhaseState finalState;
    double minRadius = std::numeric_limits<double>::infinity();
    double minRadiusTime = 0;

    PhaseState state_at(double t) const {
        const DenseSeg<4>* seg = find_seg(t);
        if (!seg) throw std::out_of_range("Trajectory::state_at: t outside range");
        return PhaseState::from_planar(seg->eval(t));
    }

    const DenseSeg<4>* find_seg(double t) const {
        if (segs.empty()) return nullptr;
        // segments ordered in time (monotone t); binary search on tLeft
        auto fwd = segs.front().h >= 0;
        std::size_t lo = 0, hi = segs.size();
        while (hi - lo > 1) {
            std::size_t mid = (lo + hi) / 2;
            bool before = fwd ? (t >= segs[mid].tLeft) : (t <= segs[mid].tLeft);
            if (before) lo = mid;
            else hi = mid;
        }
        return segs[lo].contains(t) ? &segs[lo] : nullptr;
    }
};

/// Section/event definition over a planar trajectory.
struct EventDef {
    std::function<double(double, const PhaseState&)> fn;
    int direction = 0;         ///< +1 rising zero, -1 falling, 0 either
    double minAdvance = 1e-10; ///< events closer than this to the start are skipped

    static EventDef y_cross(int dir = 0) {
        return {[](double, const PhaseState& s) { return s.y; }, dir, 1e-10};
    }
    static EventDef x_cross(int dir = 0) {
        return {[](double, const PhaseState& s) { return s.x; }, dir, 1e-10};
    }
    /// Fires when r drops below the threshold.
    static EventDef r_below(double threshold) {
        return {[threshold](double, const PhaseState& s) { return s.r() - threshold; }, -1, 1e-10};
    }
};

struct EventHit {
    double t;
    PhaseState state;
};

namespace detail {
/// Bisection on the dense interpolant; the bracket [ta, tb] must hold a sign
/// change. Refines to |dt| ~ 1e-13 relative to the segment scale.
template <class Eval>
double bisect_root(const Eval& f, double ta, double tb, double fa) {
    for (int it = 0; it < 200; ++it) {
        double tm = 0.5 * (ta + tb);
        if (tm == ta || tm == tb) break;
        double fm = f(tm);
        if (fm == 0.0) return tm;
        if ((fa < 0) == (fm < 0)) {
            ta = tm;
            fa = fm;
        } else {
            tb = tm;
        }
        if (std::abs(tb - ta) < 1e-13 * (1.0 + std::abs(tm))) break;
    }
    return 0.5 * (ta + tb);
}
}  // namespace detail

/// First event after tAfter (plus the event's own minimum-advance guard).
/// Scans each stored segment at a fixed subdivision to bracket sign changes,
/// then polishes the root on the dense interpolant.
inline std::optional<EventHit> next_event(const Trajectory& traj, const EventDef& ev,
                                          double tAfter) {
    if (traj.segs.empty()) return std::nullopt;
    const int kSub = 8;
    double tMin = tAfter + ev.minAdvance;
    auto val = [&](double t) { return ev.fn(t, PhaseState::from_planar(traj.find_seg(t)->eval(t))); };
    for (const auto& seg : traj.segs) {
        double a = seg.tLeft, b = seg.tRight();
        if (b <= tMin) continue;
        double lo = std::max(a, tMin);
        double prevT = lo;
        double prevV = ev.fn(prevT, PhaseState::from_planar(seg.eval(prevT)));
        for (int k = 1; k <= kSub; ++k) {
            double t = lo + (b - lo) * double(k) / kSub;
            double v = ev.fn(t, PhaseState::from_planar(seg.eval(t)));
            bool crossed = (prevV < 0 && v >= 0) || (prevV > 0 && v <= 0) || prevV == 0.0;
            bool dirOk = ev.direction == 0 || (ev.direction > 0 ? prevV < v : prevV > v);
            if (crossed && dirOk && prevV != 0.0) {
                auto f = [&](double tt) {
                    return ev.fn(tt, PhaseState::from_planar(seg.eval(tt)));
                };
                double tr = detail::bisect_root(f, prevT, t, prevV);
                if (tr >= tMin)
                    return EventHit{tr, PhaseState::from_planar(seg.eval(tr))};
            }
            prevT = t;
            prevV = v;
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Propagation front ends
// ---------------------------------------------------------------------------

/// Dense propagation of the planar flow. With cfg.collisionGuard > 0 the run
/// halts with CollisionEscape as soon as r crosses the guard radius, carrying
/// the state at the crossing so callers can hand off to the regularized flow.
inline Trajectory propagate(const SystemParams& p, const IntegratorConfig& cfg,
                            const PhaseState& s0, double tFinal) {
    if (!s0.is_planar(1e-30))
        throw std::domain_error("propagate: planar propagation requires z = vz = 0");
    Trajectory traj;
    traj.params = p;
    traj.t0 = 0.0;
    traj.t1 = tFinal;
    traj.finalState = s0;
    if (tFinal == 0.0) return traj;

    Dop853<4, PlanarRhs> integ(PlanarRhs{p}, cfg);
    Vec<4> y = s0.planar();
    double guard = cfg.collisionGuard;
    bool escaped = false;
    double tEsc = 0;

    auto obs = [&](double, double tNew, const Vec<4>&, const DenseSeg<4>* seg) {
        traj.segs.push_back(*seg);
        // coarse min-radius tracking over the step
        for (int k = 0; k <= 6; ++k) {
            double t = seg->tLeft + seg->h * k / 6.0;
            auto ys = seg->eval(t);
            double r = std::hypot(ys[0], ys[1]);
            if (r < traj.minRadius) {
                traj.minRadius = r;
                traj.minRadiusTime = t;
            }
        }
        if (guard > 0.0 && traj.minRadius < guard) {
            auto f = [&](double t) {
                auto ys = seg->eval(t);
                return std::hypot(ys[0], ys[1]) - guard;
            };
            double fa = f(seg->tLeft);
            if (fa > 0.0) {
                tEsc = detail::bisect_root(f, seg->tLeft, traj.minRadiusTime, fa);
            } else {
                tEsc = seg->tLeft;
            }
            escaped = true;
            return StepAction::Stop;
        }
        (void)tNew;
        return StepAction::Continue;
    };
    auto st = integ.integrate(y, 0.0, tFinal, obs, true);
    if (escaped) {
        traj.status = PropagationStatus::CollisionEscape;
        traj.t1 = tEsc;
        traj.finalState = traj.state_at(tEsc);
        return traj;
    }
    traj.status = st == IntegrateStatus::Done ? PropagationStatus::Complete
                                              : PropagationStatus::Failed;
    traj.finalState = PhaseState::from_planar(y);
    return traj;
}

/// Endpoint-only propagation (no dense storage).
inline PhaseState propagate_to(const SystemParams& p, const IntegratorConfig& cfg,
                               const PhaseState& s0, double tFinal) {
    if (tFinal == 0.0) return s0;
    Dop853<4, PlanarRhs> integ(PlanarRhs{p}, cfg);
    Vec<4> y = s0.planar();
    auto st = integ.integrate(y, 0.0, tFinal);
    if (st != IntegrateStatus::Done) throw std::runtime_error("propagate_to: integration failed");
    return PhaseState::from_planar(y);
}

/// Base state + planar STM + vertical 2x2 transition matrix.
struct VariationalState {
    PhaseState base;
    Mat4 stm = Mat4::identity();
    Mat2 vstm = Mat2::identity();

    Vec<24> pack() const {
        Vec<24> y{};
        auto b = base.planar();
        std::copy(b.begin(), b.end(), y.begin());
        std::copy(stm.m.begin(), stm.m.end(), y.begin() + 4);
        std::copy(vstm.m.begin(), vstm.m.end(), y.begin() + 20);
        return y;
    }
    static VariationalState unpack(const Vec<24>& y) {
        VariationalState v;
        v.base = PhaseState::from_planar({y[0], y[1], y[2], y[3]});
        std::copy(y.begin() + 4, y.begin() + 20, v.stm.m.begin());
        std::copy(y.begin() + 20, y.end(), v.vstm.m.begin());
        return v;
    }
};

inline VariationalState propagate_variational(const SystemParams& p, const IntegratorConfig& cfg,
                                              const VariationalState& v0, double tFinal) {
    if (tFinal == 0.0) return v0;
    Dop853<24, PlanarVarRhs> integ(PlanarVarRhs{p}, cfg);
    Vec<24> y = v0.pack();
    auto st = integ.integrate(y, 0.0, tFinal);
    if (st != IntegrateStatus::Done)
        throw std::runtime_error("propagate_variational: integration failed");
    return VariationalState::unpack(y);
}

/// Dense regularized trajectory in fictitious time.
class RegTrajectory {
public:
    PropagationStatus status = PropagationStatus::Complete;
    double tau0 = 0, tau1 = 0;
    double c = 0;
    SystemParams params{};
    std::vector<DenseSeg<5>> segs;
    RegState finalState;

    RegState state_at(double tau) const {
        const DenseSeg<5>* seg = find_seg(tau);
        if (!seg) throw std::out_of_range("RegTrajectory::state_at: tau outside range");
        auto y = seg->eval(tau);
        return RegState{y[0], y[1], y[2], y[3], y[4], c};
    }
    const DenseSeg<5>* find_seg(double tau) const {
        if (segs.empty()) return nullptr;
        bool fwd = segs.front().h >= 0;
        std::size_t lo = 0, hi = segs.size();
        while (hi - lo > 1) {
            std::size_t mid = (lo + hi) / 2;
            bool before = fwd ? (tau >= segs[mid].tLeft) : (tau <= segs[mid].tLeft);
            if (before) lo = mid;
            else hi = mid;
        }
        return segs[lo].contains(tau) ? &segs[lo] : nullptr;
    }
};

inline RegTrajectory propagate_regularized(const SystemParams& p, const IntegratorConfig& cfg,
                                           const RegState& r0, double tauFinal) {
    RegTrajectory traj;
    traj.params = p;
    traj.c = r0.c;
    traj.tau1 = tauFinal;
    traj.finalState = r0;
    if (tauFinal == 0.0) return traj;
    Dop853<5, RegRhs> integ(RegRhs{p, r0.c}, cfg);
    Vec<5> y{r0.q1, r0.q2, r0.p1, r0.p2, r0.tPhys};
    auto obs = [&](double, double, const Vec<5>&, const DenseSeg<5>* seg) {
        traj.segs.push_back(*seg);
        return StepAction::Continue;
    };
    auto st = integ.integrate(y, 0.0, tauFinal, obs, true);
    traj.status = st == IntegrateStatus::Done ? PropagationStatus::Complete
                                              : PropagationStatus::Failed;
    traj.finalState = RegState{y[0], y[1], y[2], y[3], y[4], r0.c};
    return traj;
}

inline RegState propagate_regularized_to(const SystemParams& p, const IntegratorConfig& cfg,
                                         const RegState& r0, double tauFinal) {
    if (tauFinal == 0.0) return r0;
    Dop853<5, RegRhs> integ(RegRhs{p, r0.c}, cfg);
    Vec<5> y{r0.q1, r0.q2, r0.p1, r0.p2, r0.tPhys};
    auto st = integ.integrate(y, 0.0, tauFinal);
    if (st != IntegrateStatus::Done)
        throw std::runtime_error("propagate_regularized_to: integration failed");
    return RegState{y[0], y[1], y[2], y[3], y[4], r0.c};
}

}  // namespace h4bp
