#pragma once

// Two-potential elastoviscoplastic law: a fast potential with a von Mises
// threshold and Armstrong-Frederick kinematic hardening, plus a threshold-free
// slow potential. Both follow Norton-Hoff rate laws.

#include "glc/errors.hpp"
#include "glc/tensor.hpp"

#include <map>
#include <string>

namespace glc {

struct MaterialParams {
    double E = 154000.0;   // MPa
    double nu = 0.28;
    double C = 615000.0;   // MPa
    double D = 1870.0;
    double R = 80.0;       // MPa, saturated yield stress
    double n_f = 14.0;
    double K_f = 630.0;    // MPa
    double n_s = 17.2;
    double K_s = 1300.0;   // MPa

    /// Throws std::invalid_argument naming the first violated bound.
    void validate() const;

    double shear_modulus() const { return E / (2.0 * (1.0 + nu)); }
    double bulk_modulus() const { return E / (3.0 * (1.0 - 2.0 * nu)); }

    /// IN100 at 800 C.
    static MaterialParams in100_800c() { return {}; }

    /// Reads the keys E, nu, C, D, R, n_f, K_f, n_s, K_s. Missing keys keep
    /// their defaults; unknown keys are rejected.
    static MaterialParams from_key_values(const std::map<std::string, double>& kv);
    std::map<std::string, double> to_key_values() const;
};

struct MaterialState {
    Vec4 eps_p_f = Vec4::Zero();
    Vec4 eps_p_s = Vec4::Zero();
    Vec4 X_f = Vec4::Zero();
    double p_f = 0.0;
    double p_s = 0.0;

    Vec4 plastic_strain() const { return eps_p_f + eps_p_s; }
};

struct StressPoint {
    Vec4 sigma = Vec4::Zero();
    Vec4 sigma_D = Vec4::Zero();

    static StressPoint from_sigma(const Vec4& s) { return {s, deviator(s)}; }
    double von_mises() const { return glc::von_mises(sigma); }
};

struct FlowRates {
    double p_f_rate = 0.0;
    double p_s_rate = 0.0;
};

struct PointUpdate {
    MaterialState state;
    StressPoint stress;
    Mat4 tangent;
    double dp_f = 0.0;
    int iterations = 0;
};

struct IntegrationOptions {
    double tolerance = 1e-10;
    int max_iterations = 50;
    /// Norton bases above this value raise OverflowGuard.
    double base_cap = 10.0;
};

/// J2(sigma_D - X_f) - R.
double yield_function(const StressPoint& sigma, const Vec4& X_f, const MaterialParams& params);

/// Norton-Hoff rates of both potentials. Throws OverflowGuard when a base
/// exceeds `base_cap`.
FlowRates flow_rates(const StressPoint& sigma, const Vec4& X_f, const MaterialParams& params,
                     double base_cap = 10.0);

/// Isotropic Hooke tensor.
Mat4 elastic_tangent(const MaterialParams& params);

/// Backward-Euler update over [t, t + dt] with the total strain moving from
/// `strain_old` to `strain_new`. Returns the algorithmic tangent dsigma/deps.
/// Throws NoConvergence or OverflowGuard.
PointUpdate integrate_point(const MaterialState& state, const Vec4& strain_old, const Vec4& strain_new,
                            double dt, const MaterialParams& params,
                            const IntegrationOptions& options = {});

}  // namespace glc
