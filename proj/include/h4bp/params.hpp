#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace h4bp {

/// Thrown when a state reaches the singularity at the origin (r below the
/// hard guard radius) in unregularized coordinates.
class CollisionError : public std::runtime_error {
public:
    explicit CollisionError(double r)
        : std::runtime_error("collision: r = " + std::to_string(r)), radius(r) {}
    double radius;
};

/// Thrown by correctors that fail to converge within their iteration budget.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double residual)
        : std::runtime_error(what + " (last residual " + std::to_string(residual) + ")"),
          lastResidual(residual) {}
    double lastResidual;
};

// Hard floor below which potential/vector-field evaluation refuses to work.
// Collision neighborhoods belong to the regularized module.
inline constexpr double kCollisionFloor = 1e-12;

/// Mass parameter and every coefficient derived from it.
///
/// mu is the mass of the second primary in normalized units; d controls the
/// eigenvalues lambda1, lambda2 of the rotation that brings the Hamiltonian
/// to its diagonal quadratic form. All values are computed once, eagerly.
struct SystemParams {
    double mu;       ///< mass ratio in [0, 1/2]
    double d;        ///< sqrt(1 - 3 mu + 3 mu^2), in [1/2, 1]
    double lambda1;  ///< (3/2)(1 - d); 0 at mu = 0
    double lambda2;  ///< (3/2)(1 + d); lambda1 + lambda2 = 3
    double a;        ///< (1 - lambda2)/2, quadratic Hamiltonian coefficient of x^2
    double b;        ///< (1 - lambda1)/2, coefficient of y^2
    double c;        ///< 1/2, coefficient of z^2
};

inline SystemParams make_params(double mu) {
    if (!(mu >= 0.0 && mu <= 0.5))
        throw std::domain_error("make_params: mu must lie in [0, 1/2], got " + std::to_string(mu));
    SystemParams p;
    p.mu = mu;
    p.d = std::sqrt(1.0 - 3.0 * mu + 3.0 * mu * mu);
    p.lambda1 = 1.5 * (1.0 - p.d);
    p.lambda2 = 1.5 * (1.0 + p.d);
    p.a = 0.5 * (1.0 - p.lambda2);
    p.b = 0.5 * (1.0 - p.lambda1);
    p.c = 0.5;
    return p;
}

}  // namespace h4bp
