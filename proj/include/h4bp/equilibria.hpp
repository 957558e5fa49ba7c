#pragma once

#include <complex>
#include <optional>
#include <vector>

#include "h4bp/dynamics.hpp"
#include "h4bp/linalg.hpp"
#include "h4bp/params.hpp"
#include "h4bp/state.hpp"

namespace h4bp {

/// Thrown by frequencies() for mu above the critical mass, where the L3/L4
/// spectrum leaves the imaginary axis.
class ComplexSpectrumError : public std::domain_error {
public:
    explicit ComplexSpectrumError(double mu)
        : std::domain_error("frequencies: complex spectrum for mu = " + std::to_string(mu) +
                            " > mu0") {}
};

enum class EquilibriumLabel { L1, L2, L3, L4 };

enum class SpectrumClass { SaddleCenter, CenterCenter, ComplexSaddle, Degenerate };

struct EquilibriumInfo {
    EquilibriumLabel label;
    double x, y;
    std::array<std::complex<double>, 4> eigenvalues;
    SpectrumClass classification;
};

inline const char* to_string(EquilibriumLabel l) {
    switch (l) {
        case EquilibriumLabel::L1: return "L1";
        case EquilibriumLabel::L2: return "L2";
        case EquilibriumLabel::L3: return "L3";
        default: return "L4";
    }
}

inline const char* to_string(SpectrumClass c) {
    switch (c) {
        case SpectrumClass::SaddleCenter: return "saddle-center";
        case SpectrumClass::CenterCenter: return "center-center";
        case SpectrumClass::ComplexSaddle: return "complex-saddle";
        default: return "degenerate";
    }
}

/// Critical mass at which L3/L4 change from center-center to complex-saddle.
/// Closed form; the defining property is D(mu0) = 0.
inline double mu_critical() {
    return (225.0 - std::sqrt(3.0 * (5227.0 + 2368.0 * std::sqrt(21.0)))) / 450.0;
}

/// A = (3d - 1)/2 and D = (225 d^2 - 222 d + 1)/4, the combinations that
/// control the L3/L4 spectrum.
inline double coefficient_A(const SystemParams& p) { return 0.5 * (3.0 * p.d - 1.0); }
inline double coefficient_D(const SystemParams& p) {
    return 0.25 * (225.0 * p.d * p.d - 222.0 * p.d + 1.0);
}

/// Linearization matrix of the planar flow about an arbitrary point,
/// in coordinates (xi, eta, xi', eta'):
///   [ 0      0      1  0 ]
///   [ 0      0      0  1 ]
///   [ Oxx    Oxy    0  2 ]
///   [ Oxy    Oyy   -2  0 ]
inline Mat4 linearization(const SystemParams& p, double x, double y) {
    PotentialHessian h = potential_hessian(p, {x, y, 0, 0, 0, 0});
    Mat4 a;
    a(0, 2) = 1.0;
    a(1, 3) = 1.0;
    a(2, 0) = h.oxx;
    a(2, 1) = h.oxy;
    a(2, 3) = 2.0;
    a(3, 0) = h.oxy;
    a(3, 1) = h.oyy;
    a(3, 2) = -2.0;
    return a;
}

namespace detail {
inline std::array<std::complex<double>, 4> point_spectrum(const SystemParams& p, double x,
                                                          double y) {
    PotentialHessian h = potential_hessian(p, {x, y, 0, 0, 0, 0});
    // char poly l^4 + (4 - Oxx - Oyy) l^2 + (Oxx Oyy - Oxy^2)
    return biquadratic_roots(4.0 - h.oxx - h.oyy, h.oxx * h.oyy - h.oxy * h.oxy);
}

inline SpectrumClass classify(const std::array<std::complex<double>, 4>& ev) {
    const double tol = 1e-9;
    bool anyMixed = false, anyReal = false, anyImag = false, anyZeroish = false;
    for (auto& l : ev) {
        bool re = std::abs(l.real()) > tol;
        bool im = std::abs(l.imag()) > tol;
        if (re && im) anyMixed = true;
        else if (re) anyReal = true;
        else if (im) anyImag = true;
        else anyZeroish = true;
    }
    if (anyZeroish) return SpectrumClass::Degenerate;
    if (anyMixed) return SpectrumClass::ComplexSaddle;
    if (anyReal && anyImag) return SpectrumClass::SaddleCenter;
    if (anyReal) return SpectrumClass::ComplexSaddle;
    return SpectrumClass::CenterCenter;
}
}  // namespace detail

/// The four planar equilibria. L1/L2 sit on the x-axis at lambda2^{-1/3};
/// L3/L4 on the y-axis at lambda1^{-1/3} and exist only for mu > 0 (they
/// escape to infinity in the classical Hill limit), so the returned list has
/// two entries at mu = 0.
inline std::vector<EquilibriumInfo> equilibria(const SystemParams& p) {
    std::vector<EquilibriumInfo> out;
    double x1 = std::pow(p.lambda2, -1.0 / 3.0);
    for (auto [label, sgn] :
         {std::pair{EquilibriumLabel::L1, 1.0}, std::pair{EquilibriumLabel::L2, -1.0}}) {
        EquilibriumInfo e;
        e.label = label;
        e.x = sgn * x1;
        e.y = 0.0;
        e.eigenvalues = detail::point_spectrum(p, e.x, e.y);
        e.classification = detail::classify(e.eigenvalues);
        out.push_back(e);
    }
    if (p.lambda1 > 0.0) {
        double y3 = std::pow(p.lambda1, -1.0 / 3.0);
        double d0 = mu_critical();
        for (auto [label, sgn] :
             {std::pair{EquilibriumLabel::L3, 1.0}, std::pair{EquilibriumLabel::L4, -1.0}}) {
            EquilibriumInfo e;
            e.label = label;
            e.x = 0.0;
            e.y = sgn * y3;
            e.eigenvalues = detail::point_spectrum(p, e.x, e.y);
            if (std::abs(p.mu - d0) < 1e-12)
                e.classification = SpectrumClass::Degenerate;
            else
                e.classification = p.mu < d0 ? SpectrumClass::CenterCenter
                                             : SpectrumClass::ComplexSaddle;
            out.push_back(e);
        }
    }
    return out;
}

inline std::optional<EquilibriumInfo> equilibrium(const SystemParams& p, EquilibriumLabel l) {
    for (auto& e : equilibria(p))
        if (e.label == l) return e;
    return std::nullopt;
}

/// Linear analysis at L3 (equivalently L4): frequencies, coupling ratios and
/// the second partials entering the linearized system.
struct LinearAnalysis {
    double A, D;
    double omega1, omega2;  ///< omega1 <= omega2, both positive for 0 < mu < mu0
    double alpha1, alpha2;  ///< 2 w / (lambda2 - lambda1 + w^2)
    double omegaXX, omegaYY, omegaXY;
    bool degenerate;  ///< mu = 0: omega1 = 0, the long-period motion disappears
};

inline LinearAnalysis frequencies(const SystemParams& p) {
    double A = coefficient_A(p);
    double D = coefficient_D(p);
    if (D < 0.0 && D > -1e-12) D = 0.0;  // roundoff at mu0 itself
    if (D < 0.0) throw ComplexSpectrumError(p.mu);
    LinearAnalysis f;
    f.A = A;
    f.D = D;
    double sd = std::sqrt(D);
    f.omega1 = std::sqrt(std::max(0.0, 0.5 * (A - sd)));
    f.omega2 = std::sqrt(0.5 * (A + sd));
    double dl = p.lambda2 - p.lambda1;  // = 3 d
    f.alpha1 = 2.0 * f.omega1 / (dl + f.omega1 * f.omega1);
    f.alpha2 = 2.0 * f.omega2 / (dl + f.omega2 * f.omega2);
    f.omegaXX = dl;
    f.omegaYY = 3.0 * p.lambda1;
    f.omegaXY = 0.0;
    f.degenerate = (p.mu == 0.0);
    return f;
}

/// Mass at which the two L3 frequencies are in k : 1 resonance.
///
/// Solves (225 - 9K) d^2 + (6K - 222) d + (1 - K) = 0 with
/// K = ((k^2-1)/(k^2+1))^2 for the root d in [1/2, 1], then inverts
/// d^2 = 1 - 3 mu + 3 mu^2 on mu in [0, 1/2]. k = 1 gives mu0 exactly.
inline double resonant_mu(int k) {
    if (k == 0) throw std::domain_error("resonant_mu: |k| must be >= 1");
    double k2 = double(k) * double(k);
    double K = (k2 - 1.0) / (k2 + 1.0);
    K *= K;
    double d = (37.0 - K + 4.0 * std::sqrt(84.0 - 3.0 * K)) / (3.0 * (25.0 - K));
    return 0.5 - std::sqrt(12.0 * d * d - 3.0) / 6.0;
}

/// Linear periodic solution about L3, emitted in global synodic coordinates
/// at the perpendicular y-axis crossing (xi0 = 0 phase convention):
/// position (0, yL3 + eta0), velocity (w alpha eta0, 0).
struct LinearSeed {
    enum class Kind { Short, Long };
    Kind kind;
    double xi0, eta0;        ///< section offsets from L3
    double xidot0, etadot0;  ///< velocity offsets
    double period;           ///< 2 pi / omega
    double semiAxisA;        ///< xi-axis semi-axis, |alpha| * semiAxisB
    double semiAxisB;        ///< eta-axis semi-axis (major: alpha < 1)
    double phase;            ///< ellipse phase; pi/2 under the xi0 = 0 convention
    double eccentricity;     ///< sqrt(1 - alpha^2)
    PhaseState state;        ///< seed in global coordinates
};

inline LinearSeed linear_seed(const SystemParams& p, LinearSeed::Kind kind, double amplitude) {
    if (!(p.mu > 0.0)) throw std::domain_error("linear_seed: needs mu > 0 (L3 absent at mu = 0)");
    if (!(amplitude > 0.0)) throw std::domain_error("linear_seed: amplitude must be positive");
    LinearAnalysis f = frequencies(p);
    double w, alpha;
    if (kind == LinearSeed::Kind::Short) {
        w = f.omega2;
        alpha = f.alpha2;
    } else {
        if (f.degenerate || f.omega1 == 0.0)
            throw std::domain_error("linear_seed: long-period motion degenerate (omega1 = 0)");
        w = f.omega1;
        alpha = f.alpha1;
    }
    double yL3 = std::pow(p.lambda1, -1.0 / 3.0);
    LinearSeed s;
    s.kind = kind;
    s.xi0 = 0.0;
    s.eta0 = amplitude;
    s.xidot0 = w * alpha * amplitude;
    s.etadot0 = 0.0;
    s.period = 2.0 * M_PI / w;
    s.semiAxisB = amplitude;
    s.semiAxisA = std::abs(alpha) * amplitude;
    s.phase = M_PI / 2.0;
    s.eccentricity = std::sqrt(1.0 - alpha * alpha);
    s.state = {0.0, yL3 + amplitude, 0.0, s.xidot0, 0.0, 0.0};
    return s;
}

}  // namespace h4bp
