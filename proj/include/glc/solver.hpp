#pragma once

// Incremental Newton-Raphson over one model with adaptive time stepping:
// convergence cutbacks (divergence /4, slow convergence /2), growth x1.5
// after consecutive fast steps, and additional time steps whenever the fast
// cumulated plasticity increment exceeds dp_max at some Gauss point.

#include "glc/fem.hpp"

#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace glc {

enum class CutbackCause { none, divergence, slow_convergence, dp_exceeded };

std::string to_string(CutbackCause cause);
CutbackCause cutback_cause_from_string(const std::string& s);

struct SteppingPolicy {
    double dp_max = 1e-4;  // infinity disables the accuracy control
    double divergence_factor = 4.0;
    double slow_convergence_factor = 2.0;
    double growth_factor = 1.5;
    int fast_steps_before_growth = 2;
    int fast_iterations = 5;
    double newton_tol = 1e-8;
    int newton_max_iter = 25;
    int slow_check_iteration = 8;
    double slow_ratio = 0.9;
    double dt_min_fraction = 1e-6;
    double force_floor = 1e-9;  // N, absolute floor of the residual reference

    void validate() const;
    static double unlimited() { return std::numeric_limits<double>::infinity(); }
};

struct StepRecord {
    double t_start = 0.0;
    double t_end = 0.0;
    int newton_iters = 0;
    int cutbacks_divergence = 0;
    int cutbacks_slow = 0;
    int cutbacks_dp = 0;
    CutbackCause last_cause = CutbackCause::none;
    double dp_observed = 0.0;

    int cutbacks() const { return cutbacks_divergence + cutbacks_slow + cutbacks_dp; }
};

/// Increment-size bookkeeping of one adaptive solve, independent of the
/// mechanics so the policy can be exercised directly.
class StepController {
public:
    StepController(const SteppingPolicy& policy, double t_start, double t_target, double dt_initial = 0.0);

    double time() const { return t_; }
    bool done() const { return t_ >= t_target_; }
    /// Size of the next attempt, clamped to the remaining interval.
    double next_dt() const;
    /// Records a failed attempt of size `dt_attempted`. Throws StepFailure
    /// when the new size falls below the floor.
    void reject(CutbackCause cause, double dt_attempted, double dp_observed = 0.0);
    /// Advances by `dt_attempted` (snapping onto the target).
    void accept(double dt_attempted, int newton_iters);
    /// Cause of the most recent reduction, or none.
    CutbackCause last_reduction() const { return last_reduction_; }
    double dt_min() const { return dt_min_; }

private:
    SteppingPolicy policy_;
    double t_;
    double t_target_;
    double dt_;
    double dt_min_;
    int fast_count_ = 0;
    CutbackCause last_reduction_ = CutbackCause::none;
};

/// A model: mesh, material, external loads and an optional interface whose
/// nodes are either driven by prescribed displacements (local/auxiliary
/// models) or loaded by an extra nodal force (global model).
struct Model {
    enum class Interface { none, prescribed, loaded };

    std::string name;
    Mesh mesh;
    MaterialParams material;
    LoadCase load;
    std::vector<int> interface_nodes;
    Interface interface_kind = Interface::none;
};

/// Time-dependent data of one increment. Interface vectors (x, y per
/// interface node) vary linearly between t_start and t_target; empty means
/// zero.
struct IncrementData {
    std::function<double(double)> amplitude;
    Vector interface_start;
    Vector interface_end;
};

struct StepAttempt {
    enum class Status { converged, diverged, slow };
    Status status = Status::diverged;
    int newton_iters = 0;
    double dp_observed = 0.0;
    FieldState state;
    Vector residual;  // f_int - f_ext (reactions at constrained dofs)
    std::string message;
};

/// One Newton solve from `start` at t0 to t1. Does not apply the dp_max test.
StepAttempt attempt_step(const Model& model, const FieldState& start, double t0, double t1,
                         double t_start, double t_target, const IncrementData& data,
                         const SteppingPolicy& policy);

struct IncrementResult {
    FieldState state;
    std::vector<StepRecord> steps;
    Vector residual;
    double dp_max = 0.0;
};

using StepObserver = std::function<void(const StepRecord&, const FieldState&)>;

/// Adaptive solve from t_start to t_target. `observer` sees every accepted
/// step. Throws StepFailure.
IncrementResult solve_increment(const Model& model, const FieldState& start, double t_start, double t_target,
                                const SteppingPolicy& policy, const IncrementData& data,
                                double dt_initial = 0.0, const StepObserver& observer = {});

struct TensionCurve {
    std::vector<double> strain;
    std::vector<double> stress;  // axial Cauchy stress [MPa]
    std::vector<StepRecord> steps;
    int step_count() const { return static_cast<int>(steps.size()); }
};

/// Signed relative error of the final stress of `run` against `reference`.
inline double final_stress_error(const TensionCurve& run, const TensionCurve& reference)
{
    return (run.stress.back() - reference.stress.back()) / reference.stress.back();
}

/// Displacement-controlled uniaxial ramp on a single plane-strain element
/// with free lateral contraction.
TensionCurve tension_test(const MaterialParams& params, double strain_rate, double strain_final,
                          const SteppingPolicy& policy);

}  // namespace glc
