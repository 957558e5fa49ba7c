#pragma once

#include <array>
#include <cmath>

namespace h4bp {

/// Position + velocity in the rotated synodic frame. Planar states carry
/// z = vz = 0; the spatial components exist because the vertical variational
/// equation needs Omega_zz along planar orbits.
struct PhaseState {
    double x = 0, y = 0, z = 0;
    double vx = 0, vy = 0, vz = 0;

    std::array<double, 4> planar() const { return {x, y, vx, vy}; }
    static PhaseState from_planar(const std::array<double, 4>& s) {
        return {s[0], s[1], 0.0, s[2], s[3], 0.0};
    }
    double r() const { return std::sqrt(x * x + y * y + z * z); }
    double speed2() const { return vx * vx + vy * vy + vz * vz; }
    bool is_planar(double tol = 0.0) const { return std::abs(z) <= tol && std::abs(vz) <= tol; }
};

/// Canonical coordinates of the rotated Hamiltonian: px = vx - y, py = vy + x,
/// pz = vz. Used for energy bookkeeping; the public flow representation is
/// PhaseState.
struct HamiltonianState {
    double x = 0, y = 0, z = 0;
    double px = 0, py = 0, pz = 0;
};

inline HamiltonianState to_hamiltonian(const PhaseState& s) {
    return {s.x, s.y, s.z, s.vx - s.y, s.vy + s.x, s.vz};
}

inline PhaseState from_hamiltonian(const HamiltonianState& h) {
    return {h.x, h.y, h.z, h.px + h.y, h.py - h.x, h.pz};
}

/// The discrete symmetries of the planar problem.
///   S     : (x, y, vx, vy, t) -> (x, -y, -vx, vy, -t)    x-axis, reverses time
///   Sp    : (x, y, vx, vy, t) -> (-x, y, vx, -vy, -t)    y-axis, reverses time
///   SSp   : composition, (x, y, vx, vy, t) -> (-x, -y, -vx, -vy, t)
enum class Symmetry2D { S, Sp, SSp };

struct SymmetryResult {
    PhaseState state;
    bool reversesTime;
};

inline SymmetryResult apply_symmetry(Symmetry2D which, const PhaseState& s) {
    switch (which) {
        case Symmetry2D::S:
            return {{s.x, -s.y, s.z, -s.vx, s.vy, s.vz}, true};
        case Symmetry2D::Sp:
            return {{-s.x, s.y, s.z, s.vx, -s.vy, s.vz}, true};
        default:
            return {{-s.x, -s.y, s.z, -s.vx, -s.vy, s.vz}, false};
    }
}

/// How a periodic orbit sits relative to the two reflection symmetries.
enum class OrbitSymmetry { XSymmetric, YSymmetric, DoublySymmetric, Asymmetric };

inline const char* to_string(OrbitSymmetry s) {
    switch (s) {
        case OrbitSymmetry::XSymmetric: return "x-symmetric";
        case OrbitSymmetry::YSymmetric: return "y-symmetric";
        case OrbitSymmetry::DoublySymmetric: return "doubly-symmetric";
        default: return "asymmetric";
    }
}

}  // namespace h4bp
