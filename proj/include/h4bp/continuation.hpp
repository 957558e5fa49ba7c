#pragma once

#include <functional>
#include <string>
#include <vector>

#include "h4bp/porbit.hpp"

namespace h4bp {

enum class EventKind {
    TurningPoint,
    AhCritical,
    AvCritical,
    Collision,
    Bifurcation,
    TerminationAsymptote,
    Truncation
};

inline const char* to_string(EventKind k) {
    switch (k) {
        case EventKind::TurningPoint: return "turningPoint";
        case EventKind::AhCritical: return "ahCritical";
        case EventKind::AvCritical: return "avCritical";
        case EventKind::Collision: return "collision";
        case EventKind::Bifurcation: return "bifurcation";
        case EventKind::TerminationAsymptote: return "terminationAsymptote";
        default: return "truncation";
    }
}

struct Event {
    EventKind kind;
    int level = 0;  ///< critical level (+-1, +-2) where applicable
    double C = 0;
    std::string detail;
};

struct FamilyRecord {
    std::string name;
    double mu = 0;
    std::vector<PeriodicOrbit> members;
    std::vector<Event> events;
    bool truncated = false;
};

struct ContinuationLimits {
    double cMin = -std::numeric_limits<double>::infinity();
    double cMax = std::numeric_limits<double>::infinity();
    int maxMembers = 400;
};

struct StepPolicy {
    double ds0 = 1e-3;
    double dsMin = 1e-7;
    double dsMax = 0.05;
    int newtonBudget = 12;
    double regSwitchRadius = 1e-2;  ///< min-radius threshold for reg-mode correction
};

enum class FamilyName { G, F, A, A2, Hb, Ha, Short, Long };

inline const char* to_string(FamilyName f) {
    switch (f) {
        case FamilyName::G: return "g";
        case FamilyName::F: return "f";
        case FamilyName::A: return "a";
        case FamilyName::A2: return "a2";
        case FamilyName::Hb: return "Hb";
        case FamilyName::Ha: return "Ha";
        case FamilyName::Short: return "short";
        default: return "long";
    }
}

inline std::optional<FamilyName> parse_family(const std::string& s) {
    if (s == "g") return FamilyName::G;
    if (s == "f") return FamilyName::F;
    if (s == "a") return FamilyName::A;
    if (s == "a2") return FamilyName::A2;
    if (s == "Hb" || s == "hb") return FamilyName::Hb;
    if (s == "Ha" || s == "ha") return FamilyName::Ha;
    if (s == "short") return FamilyName::Short;
    if (s == "long") return FamilyName::Long;
    return std::nullopt;
}

namespace continuation_detail {

using porbit_detail::ArcConstraint;
using porbit_detail::newton_reg_symmetric;
using porbit_detail::newton_symmetric;
using porbit_detail::section_state;
using porbit_detail::SymMode;

/// Corrector-side description of one family member, rich enough to restart
/// the Newton from it in either chart.
struct MemberState {
    bool reg = false;
    SectionAxis axis = SectionAxis::X;
    int halfCrossings = 1;
    double xi0 = 0, v0 = 0, tHalf = 0;  // physical chart
    double q10 = 0, tauHalf = 0;        // regularized chart
    int p2sign = 1;
    double C = 0;
    PeriodicOrbit orbit;

    double charCoord() const { return reg ? q10 : xi0; }
};

/// Full-period monodromy quantities plus min radius, evaluated from a
/// member's anchor in whichever chart it lives in.
inline void fill_member_orbit(const SystemParams& p, const IntegratorConfig& cfg, MemberState& m,
                              double residual) {
    PeriodicOrbit o;
    o.section = m.axis;
    o.halfCrossings = m.halfCrossings;
    o.residual = residual;
    if (!m.reg) {
        o.ic = section_state(m.axis, m.xi0, m.v0);
        o.C = m.C;
        o.T = 2.0 * m.tHalf;
        // two half-period variational legs with min-radius tracking; the
        // composition gives the monodromy, leg one the half transfer map
        double rMin = o.ic.r();
        auto runLeg = [&](const PhaseState& from) {
            Dop853<24, PlanarVarRhs> integ(PlanarVarRhs{p}, cfg);
            VariationalState vs;
            vs.base = from;
            Vec<24> y = vs.pack();
            auto obs = [&](double, double, const Vec<24>& yy, const DenseSeg<24>*) {
                rMin = std::min(rMin, std::hypot(yy[0], yy[1]));
                return StepAction::Continue;
            };
            if (integ.integrate(y, 0.0, m.tHalf, obs) != IntegrateStatus::Done)
                throw std::runtime_error("member monodromy integration failed");
            return VariationalState::unpack(y);
        };
        VariationalState m1 = runLeg(o.ic);
        VariationalState m2 = runLeg(m1.base);
        VariationalState full;
        full.base = m2.base;
        full.stm = m2.stm * m1.stm;
        full.vstm = m2.vstm * m1.vstm;
        Mat2 dp = porbit_detail::reduced_return_map(p, full, o.ic, o.section);
        o.halfA = dp(0, 0);
        o.halfD = dp(1, 1);
        o.ah = dp(0, 0) + dp(1, 1);
        o.av = full.vstm.trace();
        o.ahHalf = porbit_detail::reduced_return_map(p, m1, o.ic, o.section).trace();
        o.rMin = rMin;
    } else {
        RegState anchor{m.q10, 0, 0, reg_p2_from_energy(p, m.q10, m.C, m.p2sign), 0, m.C};
        o.regIc = anchor;
        o.collision = true;
        o.ic = from_regularized(p, anchor);
        o.C = m.C;
        double rMin = anchor.normQ2();
        auto runLeg = [&](const RegState& from) {
            Dop853<29, RegVarRhs> integ(RegVarRhs{p, m.C}, cfg);
            Vec<29> y = porbit_detail::pack_reg_var(from);
            auto obs = [&](double, double, const Vec<29>& yy, const DenseSeg<29>*) {
                rMin = std::min(rMin, yy[0] * yy[0] + yy[1] * yy[1]);
                return StepAction::Continue;
            };
            if (integ.integrate(y, 0.0, m.tauHalf, obs) != IntegrateStatus::Done)
                throw std::runtime_error("member reg monodromy integration failed");
            return y;
        };
        Vec<29> yh = runLeg(anchor);
        o.ahHalf = porbit_detail::reg_transfer_map_physical(p, yh, anchor).trace();
        RegState rm{yh[0], yh[1], yh[2], yh[3], yh[28], m.C};
        Vec<29> y2 = runLeg(rm);
        Vec<29> y{};
        for (int i = 0; i < 4; ++i) y[i] = y2[i];
        Mat4 f1, f2;
        std::copy(yh.begin() + 4, yh.begin() + 20, f1.m.begin());
        std::copy(y2.begin() + 4, y2.begin() + 20, f2.m.begin());
        Mat4 ff = f2 * f1;
        std::copy(ff.m.begin(), ff.m.end(), y.begin() + 4);
        Mat2 v1, v2;
        v1.m = {yh[24], yh[25], yh[26], yh[27]};
        v2.m = {y2[24], y2[25], y2[26], y2[27]};
        Mat2 vv = v2 * v1;
        Mat2 dp = porbit_detail::reduced_return_map_reg(p, y, anchor);
        o.halfA = dp(0, 0);
        o.halfD = dp(1, 1);
        o.ah = dp(0, 0) + dp(1, 1);
        o.av = vv.trace();
        o.T = y2[28];
        m.tHalf = o.T / 2.0;
        o.rMin = rMin;
    }
    m.orbit = o;
}

inline MemberState member_from_orbit(const SystemParams& p, const IntegratorConfig& cfg,
                                     const PeriodicOrbit& o) {
    MemberState m;
    m.axis = o.section;
    m.halfCrossings = o.halfCrossings;
    m.C = o.C;
    if (o.collision && o.regIc) {
        m.reg = true;
        m.q10 = o.regIc->q1;
        m.p2sign = o.regIc->p2 >= 0 ? 1 : -1;
        m.tauHalf = porbit_detail::reg_section_time(p, cfg, *o.regIc, o.halfCrossings);
        m.tHalf = o.T / 2.0;
    } else {
        m.xi0 = o.section == SectionAxis::X ? o.ic.x : o.ic.y;
        m.v0 = o.section == SectionAxis::X ? o.ic.vy : o.ic.vx;
        m.tHalf = o.T / 2.0;
    }
    fill_member_orbit(p, cfg, m, o.residual);
    return m;
}

/// Arc-constrained correction at a prediction in the (charCoord, C) plane.
inline MemberState correct_arc_step(const SystemParams& p, const IntegratorConfig& cfg,
                                    const MemberState& base, double nuXi, double nuC, double ds,
                                    double guessXi, double guessV, double guessT, double guessC,
                                    const CorrectorOptions& opts) {
    MemberState m = base;
    ArcConstraint arc{nuXi, nuC, base.charCoord(), base.C, ds};
    if (!base.reg) {
        auto r = newton_symmetric(p, cfg, base.axis, SymMode::Arc, 0.0, guessXi, guessV, guessT,
                                  opts, &arc);
        m.xi0 = r.xi0;
        m.v0 = r.v0;
        m.tHalf = r.tHalf;
        m.C = r.C;
        fill_member_orbit(p, cfg, m, r.residual);
    } else {
        auto r = newton_reg_symmetric(p, cfg, SymMode::Arc, guessC, guessXi, guessT, base.p2sign,
                                      opts, &arc);
        m.q10 = r.q10;
        m.tauHalf = r.tauHalf;
        m.C = r.C;
        fill_member_orbit(p, cfg, m, r.residual);
    }
    return m;
}

/// Chart switches between the physical and regularized correctors.
inline MemberState to_reg_chart(const SystemParams& p, const IntegratorConfig& cfg,
                                const MemberState& m) {
    MemberState r = m;
    r.reg = true;
    RegState r0 = to_regularized(p, section_state(m.axis, m.xi0, m.v0));
    r.q10 = r0.q1;
    r.p2sign = r0.p2 >= 0 ? 1 : -1;
    r.tauHalf = porbit_detail::reg_section_time(p, cfg, r0, m.halfCrossings);
    fill_member_orbit(p, cfg, r, m.orbit.residual);
    return r;
}

inline MemberState to_phys_chart(const SystemParams& p, const IntegratorConfig& cfg,
                                 const MemberState& m) {
    MemberState r = m;
    r.reg = false;
    RegState anchor{m.q10, 0, 0, reg_p2_from_energy(p, m.q10, m.C, m.p2sign), 0, m.C};
    PhaseState ic = from_regularized(p, anchor);
    r.xi0 = m.axis == SectionAxis::X ? ic.x : ic.y;
    r.v0 = m.axis == SectionAxis::X ? ic.vy : ic.vx;
    r.tHalf = m.orbit.T / 2.0;
    fill_member_orbit(p, cfg, r, m.orbit.residual);
    return r;
}

struct Monitor {
    EventKind kind;
    int level;
    const char* detail;
    std::function<double(const PeriodicOrbit&)> value;
};

inline std::vector<Monitor> standard_monitors() {
    std::vector<Monitor> ms;
    for (int lev : {+1, -1}) {
        ms.push_back({EventKind::AhCritical, lev, "half-map a",
                      [lev](const PeriodicOrbit& o) { return o.halfA - lev; }});
        ms.push_back({EventKind::AhCritical, lev, "half-map d",
                      [lev](const PeriodicOrbit& o) { return o.halfD - lev; }});
    }
    for (int lev : {+2, -2})
        ms.push_back({EventKind::AhCritical, lev, "trace",
                      [lev](const PeriodicOrbit& o) { return o.ah - lev; }});
    for (int lev : {+2, +1, -1, -2})
        ms.push_back({EventKind::AvCritical, lev, "vertical trace",
                      [lev](const PeriodicOrbit& o) { return o.av - lev; }});
    return ms;
}

}  // namespace continuation_detail

/// Extended continuation output: the record plus restartable corrector states.
struct FamilyTrace {
    FamilyRecord record;
    std::vector<continuation_detail::MemberState> states;
};

/// Traces a one-parameter family by pseudo-arclength continuation in the
/// (x0, C) characteristic plane (regularized chart: (Q1, C)).
///
/// Events recorded: half-map elements crossing +-1 and traces crossing +-2
/// (both conventions, with the triggering quantity named), vertical-trace
/// crossings of +-1/+-2, turning points of C, collision-guard crossings and
/// through-collisions, bifurcation markers at trace crossings of +-2, family
/// termination.
inline FamilyTrace continue_family_ex(const SystemParams& p, const PeriodicOrbit& seed,
                                      int direction, const ContinuationLimits& limits,
                                      const StepPolicy& policy = {},
                                      const IntegratorConfig& cfgIn = {}) {
    using namespace continuation_detail;
    IntegratorConfig cfg = cfgIn;
    cfg.collisionGuard = 0.0;
    CorrectorOptions opts;
    opts.maxIter = policy.newtonBudget;

    FamilyTrace out;
    out.record.mu = p.mu;

    MemberState first = member_from_orbit(p, cfg, seed);
    out.states.push_back(first);
    out.record.members.push_back(first.orbit);

    // second member: small step in C (fall back to a section-coordinate step
    // if the characteristic is locally vertical in C)
    MemberState second = first;
    {
        bool ok = false;
        for (double dC : {policy.ds0, 4.0 * policy.ds0, 0.2 * policy.ds0}) {
            try {
                second = correct_arc_step(p, cfg, first, 0.0, 1.0, direction * dC, first.reg
                                          ? first.q10 : first.xi0,
                                          first.v0, first.reg ? first.tauHalf : first.tHalf,
                                          first.C + direction * dC, opts);
                ok = true;
                break;
            } catch (const std::exception&) {
            }
        }
        if (!ok) {
            for (double dXi : {policy.ds0, -policy.ds0, 4.0 * policy.ds0, -4.0 * policy.ds0}) {
                try {
                    second = correct_arc_step(p, cfg, first, 1.0, 0.0, dXi,
                                              (first.reg ? first.q10 : first.xi0) + dXi, first.v0,
                                              first.reg ? first.tauHalf : first.tHalf, first.C,
                                              opts);
                    ok = direction * (second.C - first.C) >= 0 || second.C == first.C;
                    if (ok) break;
                } catch (const std::exception&) {
                }
            }
        }
        if (!ok) {
            out.record.truncated = true;
            out.record.events.push_back(
                {EventKind::Truncation, 0, first.C, "no step away from the seed converged"});
            out.record.name = "?";
            return out;
        }
    }
    out.states.push_back(second);
    out.record.members.push_back(second.orbit);

    auto monitors = standard_monitors();

    // refined bisection between two member states on a monitor's zero
    auto refine_crossing = [&](const MemberState& A, const MemberState& B, const Monitor& mon) {
        if (A.reg != B.reg) {
            // chart switch inside the bracket: fall back to interpolation
            double fa = mon.value(A.orbit), fb = mon.value(B.orbit);
            return A.C + fa / (fa - fb) * (B.C - A.C);
        }
        MemberState lo = A, hi = B;
        double flo = mon.value(lo.orbit);
        for (int it = 0; it < 40; ++it) {
            double dXi = hi.charCoord() - lo.charCoord();
            double dC = hi.C - lo.C;
            double len = std::hypot(dXi, dC);
            if (len < 1e-11) break;
            double nuXi = dXi / len, nuC = dC / len;
            MemberState mid;
            try {
                mid = correct_arc_step(p, cfg, lo, nuXi, nuC, 0.5 * len,
                                       0.5 * (lo.charCoord() + hi.charCoord()),
                                       0.5 * (lo.v0 + hi.v0),
                                       0.5 * ((lo.reg ? lo.tauHalf : lo.tHalf) +
                                              (hi.reg ? hi.tauHalf : hi.tHalf)),
                                       0.5 * (lo.C + hi.C), opts);
            } catch (const std::exception&) {
                break;
            }
            double fm = mon.value(mid.orbit);
            if ((flo < 0) == (fm < 0)) {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        return 0.5 * (lo.C + hi.C);
    };

    // turning-point refinement: shrink the bracket around the C-extremum
    auto refine_turning = [&](MemberState m0, MemberState m1, MemberState m2) {
        if (m0.reg != m1.reg || m1.reg != m2.reg) return m1.C;
        for (int it = 0; it < 30; ++it) {
            // subdivide the larger of the two arcs
            auto mid_of = [&](const MemberState& A, const MemberState& B) {
                double dXi = B.charCoord() - A.charCoord();
                double dC = B.C - A.C;
                double len = std::hypot(dXi, dC);
                double nuXi = dXi / len, nuC = dC / len;
                return correct_arc_step(p, cfg, A, nuXi, nuC, 0.5 * len,
                                        0.5 * (A.charCoord() + B.charCoord()),
                                        0.5 * (A.v0 + B.v0),
                                        0.5 * ((A.reg ? A.tauHalf : A.tHalf) +
                                               (B.reg ? B.tauHalf : B.tHalf)),
                                        0.5 * (A.C + B.C), opts);
            };
            double len01 = std::hypot(m1.charCoord() - m0.charCoord(), m1.C - m0.C);
            double len12 = std::hypot(m2.charCoord() - m1.charCoord(), m2.C - m1.C);
            if (len01 + len12 < 1e-10) break;
            try {
                if (len01 >= len12) {
                    MemberState mm = mid_of(m0, m1);
                    // keep the triple bracketing the extremum of C
                    bool maxMode = m1.C >= m0.C && m1.C >= m2.C;
                    if (maxMode ? mm.C > m1.C : mm.C < m1.C) {
                        m2 = m1;
                        m1 = mm;
                    } else {
                        m0 = mm;
                    }
                } else {
                    MemberState mm = mid_of(m1, m2);
                    bool maxMode = m1.C >= m0.C && m1.C >= m2.C;
                    if (maxMode ? mm.C > m1.C : mm.C < m1.C) {
                        m0 = m1;
                        m1 = mm;
                    } else {
                        m2 = mm;
                    }
                }
            } catch (const std::exception&) {
                break;
            }
        }
        return m1.C;
    };

    double ds = policy.ds0;
    bool sawTurnPending = false;
    // secant pair kept chart-coherent across phys/reg switches
    MemberState secPrev = first, secCur = second;
    while (int(out.record.members.size()) < limits.maxMembers) {
        const MemberState& prev = secPrev;
        const MemberState& cur = secCur;

        double dXi = cur.charCoord() - prev.charCoord();
        double dC = cur.C - prev.C;
        double len = std::hypot(dXi, dC);
        if (len == 0.0) break;
        double nuXi = dXi / len, nuC = dC / len;

        MemberState next;
        bool stepped = false;
        while (!stepped) {
            double w = ds / len;
            double gXi = cur.charCoord() + nuXi * ds;
            double gV = cur.v0 + w * (cur.v0 - prev.v0);
            double gT = (cur.reg ? cur.tauHalf : cur.tHalf) +
                        w * ((cur.reg ? cur.tauHalf : cur.tHalf) -
                             (prev.reg == cur.reg ? (prev.reg ? prev.tauHalf : prev.tHalf)
                                                  : (cur.reg ? cur.tauHalf : cur.tHalf)));
            double gC = cur.C + nuC * ds;
            try {
                next = correct_arc_step(p, cfg, cur, nuXi, nuC, ds, gXi, gV, gT, gC, opts);
                double jump = std::hypot(next.charCoord() - cur.charCoord(), next.C - cur.C);
                if (jump > std::max(4.0 * ds, policy.dsMax * 1.5))
                    throw ConvergenceError("step jumped off the local branch", jump);
                stepped = true;
            } catch (const std::exception& e) {
                ds *= 0.5;
                if (ds < policy.dsMin) {
                    out.record.truncated = true;
                    out.record.events.push_back({EventKind::Truncation, 0, cur.C,
                                                 std::string("corrector diverged: ") + e.what()});
                    break;
                }
            }
        }
        if (!stepped) break;
        ds = std::min(ds * 1.3, policy.dsMax);

        // chart management (the secant pair must stay chart-coherent, so the
        // predecessor is converted alongside)
        MemberState newSecPrev = secCur;
        if (!next.reg && next.orbit.rMin < policy.regSwitchRadius &&
            next.axis == SectionAxis::X) {
            try {
                MemberState sw = to_reg_chart(p, cfg, next);
                newSecPrev = to_reg_chart(p, cfg, secCur);
                next = sw;
            } catch (const std::exception&) {
                // stay physical if the switch fails; the corrector will decide
            }
        } else if (next.reg && next.orbit.rMin > 1.44 * policy.regSwitchRadius) {
            try {
                MemberState sw = to_phys_chart(p, cfg, next);
                newSecPrev = to_phys_chart(p, cfg, secCur);
                next = sw;
            } catch (const std::exception&) {
            }
        }

        const MemberState& last = out.states.back();

        // monitor crossings between last and next
        for (auto& mon : monitors) {
            double fa = mon.value(last.orbit);
            double fb = mon.value(next.orbit);
            if (fa == 0.0 || (fa < 0) != (fb < 0)) {
                double cAt = refine_crossing(last, next, mon);
                out.record.events.push_back({mon.kind, mon.level, cAt, mon.detail});
                if (mon.kind == EventKind::AhCritical && std::abs(mon.level) == 2 &&
                    std::string(mon.detail) == "trace") {
                    out.record.events.push_back(
                        {EventKind::Bifurcation, mon.level, cAt,
                         mon.level == 2 ? "trace +2 (tangent/pitchfork)"
                                        : "trace -2 (period doubling)"});
                }
            }
        }
        // collision monitors
        if ((last.orbit.rMin - policy.regSwitchRadius) *
                (next.orbit.rMin - policy.regSwitchRadius) < 0) {
            double w = (policy.regSwitchRadius - last.orbit.rMin) /
                       (next.orbit.rMin - last.orbit.rMin);
            out.record.events.push_back({EventKind::Collision, 0,
                                         last.C + w * (next.C - last.C),
                                         next.orbit.rMin < last.orbit.rMin
                                             ? "min radius fell below guard"
                                             : "min radius rose above guard"});
        }
        if (last.reg && next.reg && (last.q10 == 0.0 || (last.q10 < 0) != (next.q10 < 0))) {
            double w = -last.q10 / (next.q10 - last.q10);
            out.record.events.push_back({EventKind::Collision, 0, last.C + w * (next.C - last.C),
                                         "through-collision (Q1 sign change)"});
        }

        // turning points of C along arclength
        if (out.states.size() >= 2) {
            const MemberState& a = out.states[out.states.size() - 2];
            const MemberState& b = out.states.back();
            if ((b.C - a.C) * (next.C - b.C) < 0.0 && !sawTurnPending) {
                double cTurn = refine_turning(a, b, next);
                out.record.events.push_back({EventKind::TurningPoint, 0, cTurn, "dC/ds = 0"});
                sawTurnPending = true;
            } else {
                sawTurnPending = false;
            }
        }

        out.states.push_back(next);
        out.record.members.push_back(next.orbit);
        secPrev = newSecPrev;
        secCur = next;

        // termination conditions
        double x0abs = std::abs(next.reg ? next.q10 * next.q10 : next.xi0);
        if (x0abs < 1e-4 && next.C < cur.C) {
            out.record.events.push_back({EventKind::TerminationAsymptote, 0, next.C,
                                         "x0 -> 0 with C decreasing"});
            break;
        }
        if (next.C < limits.cMin || next.C > limits.cMax) break;
    }
    out.record.name = "?";
    return out;
}

inline FamilyRecord continue_family(const SystemParams& p, const PeriodicOrbit& seed,
                                    int direction, const ContinuationLimits& limits,
                                    const StepPolicy& policy = {},
                                    const IntegratorConfig& cfg = {}) {
    return continue_family_ex(p, seed, direction, limits, policy, cfg).record;
}

/// Walks a family from a converged member to the target Jacobi constant and
/// returns the fixed-C corrected member there.
inline PeriodicOrbit member_at_c(const SystemParams& p, const PeriodicOrbit& from, double targetC,
                                 const StepPolicy& policy = {}, const IntegratorConfig& cfgIn = {},
                                 int maxSteps = 100000) {
    using namespace continuation_detail;
    IntegratorConfig cfg = cfgIn;
    CorrectorOptions opts;
    MemberState cur = member_from_orbit(p, cfg, from);
    int dir = targetC > cur.C ? 1 : -1;

    // march in C with adaptive natural-parameter steps, secant prediction
    double dC = dir * std::max(policy.ds0, 1e-4);
    MemberState prev = cur;
    int steps = 0;
    while (dir * (targetC - cur.C) > 0 && steps++ < maxSteps) {
        double target = cur.C + dC;
        if (dir * (target - targetC) > 0) target = targetC;
        try {
            double w = (prev.C == cur.C || prev.reg != cur.reg)
                           ? 0.0
                           : (target - cur.C) / (cur.C - prev.C);
            double gXi = cur.charCoord() + w * (cur.charCoord() - prev.charCoord());
            double gV = cur.v0 + w * (cur.v0 - prev.v0);
            double gT = (cur.reg ? cur.tauHalf : cur.tHalf) +
                        w * ((cur.reg ? cur.tauHalf : cur.tHalf) -
                             (prev.reg ? prev.tauHalf : prev.tHalf));
            MemberState next = cur;
            if (!cur.reg) {
                auto r = newton_symmetric(p, cfg, cur.axis, SymMode::FixedC, target, gXi, gV, gT,
                                          opts);
                next.xi0 = r.xi0;
                next.v0 = r.v0;
                next.tHalf = r.tHalf;
                next.C = r.C;
            } else {
                auto r = newton_reg_symmetric(p, cfg, SymMode::FixedC, target, gXi, gT,
                                              cur.p2sign, opts);
                next.q10 = r.q10;
                next.tauHalf = r.tauHalf;
                next.C = r.C;
            }
            fill_member_orbit(p, cfg, next, 0.0);
            prev = cur;
            cur = next;
            dC = (std::abs(dC) < 1.0 ? dC * 1.5 : dC);
            // chart switches as in the main loop
            if (!cur.reg && cur.orbit.rMin < policy.regSwitchRadius &&
                cur.axis == SectionAxis::X)
                cur = to_reg_chart(p, cfg, cur);
            else if (cur.reg && cur.orbit.rMin > 1.44 * policy.regSwitchRadius)
                cur = to_phys_chart(p, cfg, cur);
        } catch (const std::exception&) {
            dC *= 0.5;
            if (std::abs(dC) < 1e-9)
                throw ConvergenceError("member_at_c stalled (turning point in C?)", 0.0);
        }
    }
    return cur.orbit;
}

/// Corrected members on the branches created at a bifurcation event: scans
/// the section coordinate near the critical orbit at C just off the event and
/// Newton-corrects every distinct solution. Tangent/pitchfork events
/// (trace +2) yield same-period branches; period-doubling events (trace -2)
/// yield double-period branches.
inline std::vector<PeriodicOrbit> branch_switch_all(const SystemParams& p,
                                                    const FamilyRecord& record, const Event& ev,
                                                    const IntegratorConfig& cfg = {},
                                                    const StepPolicy& policy = {}) {
    using namespace continuation_detail;
    if (ev.kind != EventKind::Bifurcation)
        throw std::domain_error("branch_switch: event is not a bifurcation");
    // locate the member closest to the event
    const PeriodicOrbit* best = nullptr;
    for (auto& m : record.members)
        if (!best || std::abs(m.C - ev.C) < std::abs(best->C - ev.C)) best = &m;
    if (!best) throw std::domain_error("branch_switch: empty record");
    if (best->section != SectionAxis::X)
        throw std::domain_error("branch_switch: only x-axis sections are supported");

    CorrectorOptions opts;
    std::vector<PeriodicOrbit> found;
    bool doubling = ev.level == -2;
    int crossings = doubling ? 2 * best->halfCrossings : best->halfCrossings;
    double tHalfNew = doubling ? best->T : best->T / 2.0;

    for (double dCs : {-1.0, 1.0}) {
        for (double dCmag : {0.003, 0.01, 0.03}) {
            double C = ev.C + dCs * dCmag;
            // the parent member at this C, for exclusion
            PeriodicOrbit parent;
            try {
                parent = member_at_c(p, *best, C, policy, cfg);
            } catch (const std::exception&) {
                continue;
            }
            double x0p = parent.ic.x;
            // the new branch's perpendicular crossings may sit near either of
            // the parent's two perpendicular crossings; scan around both
            std::vector<double> anchors{x0p};
            try {
                PhaseState halfEnd = propagate_to(p, cfg, parent.ic, parent.T / 2.0);
                if (std::abs(halfEnd.x - x0p) > 1e-6) anchors.push_back(halfEnd.x);
            } catch (const std::exception&) {
            }
            for (double anchor : anchors) {
                for (double eps : {2e-3, 5e-3, 1e-2, 2e-2, 4e-2}) {
                    for (int sgn : {+1, -1}) {
                        SymmetricGuess g;
                        g.axis = SectionAxis::X;
                        g.xi0 = anchor + sgn * eps;
                        g.tHalf = tHalfNew;
                        g.halfCrossings = crossings;
                        PhaseState pos{g.xi0, 0, 0, 0, 0, 0};
                        double v2 = 2.0 * effective_potential(p, pos) - C;
                        if (v2 <= 0) continue;
                        g.v0 = std::copysign(std::sqrt(v2), parent.ic.vy);
                        PeriodicOrbit cand;
                        try {
                            cand = correct_symmetric(p, g, HoldFixed::C, cfg, opts);
                        } catch (const std::exception&) {
                            continue;
                        }
                        if (std::abs(cand.C - C) > 1e-8) continue;
                        // reject the parent itself and its double cover
                        bool onParent = false;
                        for (double ax : anchors)
                            if (std::abs(cand.ic.x - ax) < 1e-5 &&
                                std::abs(cand.T - (doubling ? 2.0 : 1.0) * parent.T) < 1e-6)
                                onParent = true;
                        if (onParent) continue;
                        if (doubling && std::abs(cand.T - 2.0 * parent.T) > 0.5 * parent.T)
                            continue;
                        if (!doubling && std::abs(cand.T - parent.T) > 0.5 * parent.T) continue;
                        // branches are distinct characteristic anchors; the
                        // same orbit re-anchored at its other perpendicular
                        // crossing counts as its own branch curve
                        bool dup = false;
                        for (auto& f : found)
                            if (std::abs(f.C - cand.C) < 1e-9 &&
                                std::abs(f.ic.x - cand.ic.x) < 1e-7)
                                dup = true;
                        if (!dup) found.push_back(cand);
                    }
                }
            }
            if (!found.empty()) return found;
        }
    }
    if (found.empty())
        throw ConvergenceError("branch_switch: no branch found within the perturbation budget",
                               0.0);
    return found;
}

inline PeriodicOrbit branch_switch(const SystemParams& p, const FamilyRecord& record,
                                   const Event& ev, const IntegratorConfig& cfg = {},
                                   const StepPolicy& policy = {}) {
    return branch_switch_all(p, record, ev, cfg, policy).front();
}

// ---------------------------------------------------------------------------
// Family seeding
// ---------------------------------------------------------------------------

namespace continuation_detail {

inline PeriodicOrbit seed_circle(const SystemParams& p, double radius, bool direct,
                                 const IntegratorConfig& cfg) {
    double n = std::pow(radius, -1.5);
    SymmetricGuess g;
    g.axis = SectionAxis::X;
    g.xi0 = radius;
    g.v0 = direct ? radius * (n - 1.0) : -radius * (n + 1.0);
    g.tHalf = M_PI / (direct ? (n - 1.0) : (n + 1.0));
    return correct_symmetric(p, g, HoldFixed::C, cfg);
}

inline PeriodicOrbit seed_lyapunov_l1(const SystemParams& p, double amplitude, bool mirror,
                                      const IntegratorConfig& cfg) {
    double xL1 = std::pow(p.lambda2, -1.0 / 3.0);
    auto h = potential_hessian(p, {xL1, 0, 0, 0, 0, 0});
    double b2 = 4.0 - h.oxx - h.oyy;
    double z = 0.5 * (b2 + std::sqrt(b2 * b2 - 4.0 * h.oxx * h.oyy));
    double w = std::sqrt(z);
    double kappa = -(w * w + h.oxx) / (2.0 * w);
    SymmetricGuess g;
    g.axis = SectionAxis::X;
    g.xi0 = xL1 + amplitude;
    g.v0 = w * kappa * amplitude;
    g.tHalf = M_PI / w;
    if (mirror) {
        g.xi0 = -g.xi0;
        g.v0 = -g.v0;
    }
    return correct_symmetric(p, g, HoldFixed::C, cfg);
}

inline PeriodicOrbit seed_lyapunov_l3(const SystemParams& p, LinearSeed::Kind kind,
                                      double amplitude, const IntegratorConfig& cfg) {
    LinearSeed s = linear_seed(p, kind, amplitude);
    SymmetricGuess g;
    g.axis = SectionAxis::Y;
    g.xi0 = s.state.y;
    g.v0 = s.state.vx;
    g.tHalf = s.period / 2.0;
    return correct_symmetric(p, g, HoldFixed::C, cfg);
}

/// Documented H_b seeding: grid search over symmetric double-periodic guesses
/// at C = 4.2 (just below the family's maximum), keeping the distinct
/// double-periodic solutions and picking the one whose upward continuation
/// folds back in (4.20, 4.30).
inline PeriodicOrbit seed_hb(const SystemParams& p, const IntegratorConfig& cfg) {
    const double C = 4.2;
    std::vector<PeriodicOrbit> candidates;
    auto consider = [&](double x0, double t2) {
        SymmetricGuess g;
        g.axis = SectionAxis::X;
        g.xi0 = x0;
        g.halfCrossings = 2;
        PhaseState pos{x0, 0, 0, 0, 0, 0};
        double v2 = 2.0 * effective_potential(p, pos) - C;
        if (v2 <= 0) return;
        g.v0 = std::sqrt(v2);
        g.tHalf = t2;
        PeriodicOrbit o;
        try {
            o = correct_symmetric(p, g, HoldFixed::C, cfg);
        } catch (const std::exception&) {
            return;
        }
        for (auto& c : candidates)
            if (std::abs(c.ic.x - o.ic.x) < 1e-7 || std::abs(c.T - o.T) < 1e-9) return;
        candidates.push_back(o);
    };

    for (double sgn : {1.0, -1.0}) {
        double prevX = 0, prevVal = 0, prevT = 0;
        bool have = false;
        for (double x0m = 0.03; x0m < 0.65; x0m += 0.002) {
            double x0 = sgn * x0m;
            PhaseState pos{x0, 0, 0, 0, 0, 0};
            double v2 = 2.0 * effective_potential(p, pos) - C;
            if (v2 <= 0) {
                have = false;
                continue;
            }
            PhaseState ic{x0, 0, 0, 0, std::sqrt(v2), 0};
            IntegratorConfig scan = cfg;
            Trajectory traj;
            try {
                traj = propagate(p, scan, ic, 25.0);
            } catch (const CollisionError&) {
                have = false;
                continue;
            }
            auto h1 = next_event(traj, EventDef::y_cross(0), 0.0);
            if (!h1) {
                have = false;
                continue;
            }
            auto h2 = next_event(traj, EventDef::y_cross(0), h1->t);
            if (!h2) {
                have = false;
                continue;
            }
            double val = h2->state.vx;
            // double-periodic only: the first crossing must not be perpendicular
            bool genuine = std::abs(h1->state.vx) > 1e-6;
            if (have && prevVal * val < 0 && std::abs(val) < 0.5 && genuine)
                consider(0.5 * (prevX + x0), 0.5 * (prevT + h2->t));
            prevX = x0;
            prevVal = val;
            prevT = h2->t;
            have = true;
        }
    }
    if (candidates.empty())
        throw ConvergenceError("H_b grid search found no double-periodic orbit", 0.0);

    // identify H_b: its characteristic folds just above C = 4.2
    ContinuationLimits lim;
    lim.cMax = 4.32;
    lim.cMin = 4.1;
    lim.maxMembers = 120;
    for (auto& cand : candidates) {
        for (int dir : {+1, -1}) {
            FamilyRecord rec;
            try {
                rec = continue_family(p, cand, dir, lim);
            } catch (const std::exception&) {
                continue;
            }
            for (auto& e : rec.events)
                if (e.kind == EventKind::TurningPoint && e.C > 4.20 && e.C < 4.30) return cand;
        }
    }
    throw ConvergenceError("H_b grid search found no branch folding near C = 4.245", 0.0);
}

}  // namespace continuation_detail

/// Small-amplitude (or search-produced) first member of each named family.
/// H_a is produced by its parent chain: family g, the branch point at
/// C = 4.498, the outer branch, and the period-doubling detected on it.
inline PeriodicOrbit seed_family(const SystemParams& p, FamilyName name,
                                 const IntegratorConfig& cfg = {}) {
    using namespace continuation_detail;
    switch (name) {
        case FamilyName::G: return seed_circle(p, 0.01, true, cfg);
        case FamilyName::F: return seed_circle(p, 0.01, false, cfg);
        case FamilyName::A: return seed_lyapunov_l1(p, 1e-3, false, cfg);
        case FamilyName::A2: return seed_lyapunov_l1(p, 1e-3, true, cfg);
        case FamilyName::Short: return seed_lyapunov_l3(p, LinearSeed::Kind::Short, 1e-3, cfg);
        case FamilyName::Long: return seed_lyapunov_l3(p, LinearSeed::Kind::Long, 1e-3, cfg);
        case FamilyName::Hb: return seed_hb(p, cfg);
        case FamilyName::Ha: {
            // parent chain: g down to its pitchfork, outer branch down to the
            // period-doubling, then the doubled branch
            PeriodicOrbit g0 = seed_circle(p, 0.25, true, cfg);
            ContinuationLimits lim;
            lim.cMin = 4.45;
            lim.maxMembers = 4000;
            FamilyRecord g = continue_family(p, g0, -1, lim, {}, cfg);
            const Event* pitch = nullptr;
            for (auto& e : g.events)
                if (e.kind == EventKind::Bifurcation && e.level == 2) pitch = &e;
            if (!pitch) throw ConvergenceError("Ha seed: g pitchfork not found", 0.0);
            auto branches = branch_switch_all(p, g, *pitch, cfg);
            const PeriodicOrbit* upper = nullptr;
            for (auto& b : branches)
                if (!upper || b.ic.x > upper->ic.x) upper = &b;
            ContinuationLimits lim2;
            lim2.cMin = 4.25;
            lim2.maxMembers = 4000;
            FamilyRecord gu = continue_family(p, *upper, -1, lim2, {}, cfg);
            const Event* doubling = nullptr;
            for (auto& e : gu.events)
                if (e.kind == EventKind::Bifurcation && e.level == -2 &&
                    (!doubling || e.C > doubling->C))
                    doubling = &e;
            if (!doubling) throw ConvergenceError("Ha seed: g-upper doubling not found", 0.0);
            return branch_switch(p, gu, *doubling, cfg);
        }
    }
    throw std::domain_error("seed_family: unknown family");
}

}  // namespace h4bp
