#include "glc/solver.hpp"

#include "glc/errors.hpp"

#include <Eigen/SparseLU>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace glc {

std::string to_string(CutbackCause cause)
{
    switch (cause) {
    case CutbackCause::none: return "none";
    case CutbackCause::divergence: return "divergence";
    case CutbackCause::slow_convergence: return "slow_convergence";
    case CutbackCause::dp_exceeded: return "dp_exceeded";
    }
    return "none";
}

CutbackCause cutback_cause_from_string(const std::string& s)
{
    if (s == "none") return CutbackCause::none;
    if (s == "divergence") return CutbackCause::divergence;
    if (s == "slow_convergence") return CutbackCause::slow_convergence;
    if (s == "dp_exceeded") return CutbackCause::dp_exceeded;
    throw std::invalid_argument(fmt::format("unknown cutback cause '{}'", s));
}

void SteppingPolicy::validate() const
{
    if (!(dp_max > 0.0)) throw std::invalid_argument("dp_max must be positive");
    if (!(divergence_factor > 1.0) || !(slow_convergence_factor > 1.0) || !(growth_factor > 1.0)) {
        throw std::invalid_argument("stepping factors must exceed 1");
    }
    if (fast_steps_before_growth < 1) throw std::invalid_argument("fast_steps_before_growth must be >= 1");
    if (!(newton_tol > 0.0) || newton_max_iter < 1) throw std::invalid_argument("invalid Newton settings");
    if (!(dt_min_fraction > 0.0 && dt_min_fraction < 1.0)) throw std::invalid_argument("invalid dt_min_fraction");
}

// --- StepController ---------------------------------------------------------

namespace {
constexpr double kMaxDpRatio = 0.999;
}

StepController::StepController(const SteppingPolicy& policy, double t_start, double t_target,
                               double dt_initial)
    : policy_(policy),
      t_(t_start),
      t_target_(t_target),
      dt_(dt_initial > 0.0 ? dt_initial : t_target - t_start),
      dt_min_((t_target - t_start) * policy.dt_min_fraction)
{
    if (!(t_target > t_start)) {
        throw std::invalid_argument(fmt::format("empty increment [{}, {}]", t_start, t_target));
    }
}

double StepController::next_dt() const { return std::min(dt_, t_target_ - t_); }

void StepController::reject(CutbackCause cause, double dt_attempted, double dp_observed)
{
    switch (cause) {
    case CutbackCause::divergence: dt_ = dt_attempted / policy_.divergence_factor; break;
    case CutbackCause::slow_convergence: dt_ = dt_attempted / policy_.slow_convergence_factor; break;
    case CutbackCause::dp_exceeded:
        // An observed dp within round-off of the threshold would otherwise
        // shrink the step by a few ulps per retry.
        dt_ = dt_attempted * std::min(policy_.dp_max / dp_observed, kMaxDpRatio);
        break;
    case CutbackCause::none: throw std::logic_error("reject without a cause");
    }
    fast_count_ = 0;
    last_reduction_ = cause;
    if (dt_ < dt_min_) {
        throw StepFailure("", fmt::format("time increment {:.3e} below floor {:.3e} at t = {:.9g} ({})", dt_,
                                          dt_min_, t_, to_string(cause)));
    }
}

void StepController::accept(double dt_attempted, int newton_iters)
{
    t_ += dt_attempted;
    if (t_target_ - t_ <= 1e-12 * std::max(1.0, std::abs(t_target_))) {
        t_ = t_target_;
    }
    if (newton_iters <= policy_.fast_iterations) {
        ++fast_count_;
        if (fast_count_ >= policy_.fast_steps_before_growth) {
            dt_ *= policy_.growth_factor;
            fast_count_ = 0;
        }
    } else {
        fast_count_ = 0;
    }
}

// --- Newton step --------------------------------------------------------------

namespace {

Vector interpolate(const Vector& a, const Vector& b, double s, Eigen::Index size)
{
    Vector va = a.size() == 0 ? Vector::Zero(size) : a;
    Vector vb = b.size() == 0 ? Vector::Zero(size) : b;
    return (1.0 - s) * va + s * vb;
}

struct Constraints {
    std::vector<int> dofs;
    Vector values;  // at t1
};

Constraints constraints_at(const Model& model, const DirichletDofs& fixed, double amplitude,
                           const Vector& interface_values)
{
    std::map<int, double> all;
    for (std::size_t i = 0; i < fixed.dofs.size(); ++i) {
        all[fixed.dofs[i]] = amplitude * fixed.values[i];
    }
    if (model.interface_kind == Model::Interface::prescribed) {
        for (std::size_t i = 0; i < model.interface_nodes.size(); ++i) {
            all[2 * model.interface_nodes[i]] = interface_values[2 * i];
            all[2 * model.interface_nodes[i] + 1] = interface_values[2 * i + 1];
        }
    }
    Constraints c;
    c.values.resize(static_cast<Eigen::Index>(all.size()));
    Eigen::Index k = 0;
    for (const auto& [dof, value] : all) {
        c.dofs.push_back(dof);
        c.values[k++] = value;
    }
    return c;
}

}  // namespace

StepAttempt attempt_step(const Model& model, const FieldState& start, double t0, double t1, double t_start,
                         double t_target, const IncrementData& data, const SteppingPolicy& policy)
{
    const Mesh& mesh = model.mesh;
    const int ndof = mesh.num_dofs();
    const double dt = t1 - t0;
    const double amp = data.amplitude ? data.amplitude(t1) : 1.0;
    const double s = (t_target > t_start) ? (t1 - t_start) / (t_target - t_start) : 1.0;
    const auto n_iface = static_cast<Eigen::Index>(2 * model.interface_nodes.size());
    const Vector iface = interpolate(data.interface_start, data.interface_end, s, n_iface);

    const Constraints cons = constraints_at(model, dirichlet_dofs(mesh, model.load), amp, iface);
    std::vector<int> free_index(ndof, 0);
    for (int dof : cons.dofs) {
        free_index[dof] = -1;
    }
    int nfree = 0;
    for (int i = 0; i < ndof; ++i) {
        if (free_index[i] == 0) {
            free_index[i] = nfree++;
        }
    }

    Vector f_ext = assemble_external(mesh, model.load, amp);
    if (model.interface_kind == Model::Interface::loaded && n_iface > 0) {
        scatter_add_nodes(f_ext, model.interface_nodes, iface);
    }

    StepAttempt out;
    Vector u = start.u;
    Vector du_c(static_cast<Eigen::Index>(cons.dofs.size()));
    for (std::size_t i = 0; i < cons.dofs.size(); ++i) {
        du_c[i] = cons.values[i] - u[cons.dofs[i]];
    }
    const bool constraints_move = du_c.size() > 0 && du_c.lpNorm<Eigen::Infinity>() > 0.0;

    auto free_norm = [&](const Vector& r) {
        double acc = 0.0;
        for (int i = 0; i < ndof; ++i) {
            if (free_index[i] >= 0) acc += r[i] * r[i];
        }
        return std::sqrt(acc);
    };
    auto constrained_norm = [&](const Vector& r) {
        double acc = 0.0;
        for (int dof : cons.dofs) acc += r[dof] * r[dof];
        return std::sqrt(acc);
    };

    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
    bool pattern_ready = false;
    std::vector<double> history;
    for (int iter = 0;; ++iter) {
        InternalAssembly a;
        try {
            a = assemble_internal(mesh, model.material, u, start, dt);
        } catch (const ElementFailure& ex) {
            out.status = StepAttempt::Status::diverged;
            out.newton_iters = iter;
            out.message = ex.what();
            return out;
        }
        const Vector r = a.f_int - f_ext;
        const double norm = free_norm(r);
        const double reference =
            std::max({f_ext.norm(), constrained_norm(r), policy.force_floor});
        if (!std::isfinite(norm)) {
            out.status = StepAttempt::Status::diverged;
            out.newton_iters = iter;
            out.message = "non-finite residual";
            return out;
        }
        const bool constraints_applied = iter > 0 || !constraints_move;
        if (constraints_applied && norm <= policy.newton_tol * reference) {
            out.status = StepAttempt::Status::converged;
            out.newton_iters = iter;
            out.dp_observed = a.dp_max;
            out.state.u = u;
            out.state.gp_states = std::move(a.states);
            out.state.gp_stresses = std::move(a.stresses);
            out.residual = r;
            return out;
        }
        if (constraints_applied) {
            history.push_back(norm);
            const std::size_t k = history.size();
            if (k >= 3 && history[k - 1] > history[k - 2] && history[k - 2] > history[k - 3]) {
                out.status = StepAttempt::Status::diverged;
                out.newton_iters = iter;
                out.message = "residual increased in two consecutive iterations";
                return out;
            }
            if (iter >= policy.slow_check_iteration && k >= 2 &&
                history[k - 1] > policy.slow_ratio * history[k - 2]) {
                out.status = StepAttempt::Status::slow;
                out.newton_iters = iter;
                out.message = "slow convergence";
                return out;
            }
            if (iter >= policy.newton_max_iter) {
                out.status = StepAttempt::Status::slow;
                out.newton_iters = iter;
                out.message = "Newton iteration limit";
                return out;
            }
        }

        // Reduced system K_ff du_f = -(r_f + K_fc du_c); du_c is non-zero only
        // on the first iteration.
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(static_cast<std::size_t>(a.stiffness.nonZeros()));
        Vector rhs(nfree);
        for (int i = 0; i < ndof; ++i) {
            if (free_index[i] >= 0) rhs[free_index[i]] = -r[i];
        }
        Vector du_c_full = Vector::Zero(ndof);
        if (!constraints_applied) {
            for (std::size_t i = 0; i < cons.dofs.size(); ++i) {
                du_c_full[cons.dofs[i]] = du_c[i];
            }
        }
        for (int col = 0; col < a.stiffness.outerSize(); ++col) {
            for (SparseMatrix::InnerIterator it(a.stiffness, col); it; ++it) {
                const int fr = free_index[it.row()];
                const int fc = free_index[it.col()];
                if (fr < 0) continue;
                if (fc >= 0) {
                    trip.emplace_back(fr, fc, it.value());
                } else if (!constraints_applied) {
                    rhs[fr] -= it.value() * du_c_full[it.col()];
                }
            }
        }
        SparseMatrix kff(nfree, nfree);
        kff.setFromTriplets(trip.begin(), trip.end());
        if (!pattern_ready) {
            lu.analyzePattern(kff);
            pattern_ready = true;
        }
        lu.factorize(kff);
        if (lu.info() != Eigen::Success) {
            out.status = StepAttempt::Status::diverged;
            out.newton_iters = iter;
            out.message = "singular tangent";
            return out;
        }
        const Vector du_f = lu.solve(rhs);
        for (int i = 0; i < ndof; ++i) {
            if (free_index[i] >= 0) u[i] += du_f[free_index[i]];
        }
        if (!constraints_applied) {
            for (std::size_t i = 0; i < cons.dofs.size(); ++i) {
                u[cons.dofs[i]] = cons.values[i];
            }
        }
    }
}

IncrementResult solve_increment(const Model& model, const FieldState& start, double t_start, double t_target,
                                const SteppingPolicy& policy, const IncrementData& data, double dt_initial,
                                const StepObserver& observer)
{
    StepController ctl(policy, t_start, t_target, dt_initial);
    IncrementResult out;
    out.state = start;
    StepRecord pending;
    while (!ctl.done()) {
        const double t0 = ctl.time();
        const double dt = ctl.next_dt();
        const double t1 = (t_target - (t0 + dt) <= 1e-12 * std::max(1.0, std::abs(t_target))) ? t_target : t0 + dt;
        StepAttempt att = attempt_step(model, out.state, t0, t1, t_start, t_target, data, policy);
        CutbackCause cause = CutbackCause::none;
        if (att.status == StepAttempt::Status::diverged) {
            cause = CutbackCause::divergence;
        } else if (att.status == StepAttempt::Status::slow) {
            cause = CutbackCause::slow_convergence;
        } else if (att.dp_observed > policy.dp_max) {
            cause = CutbackCause::dp_exceeded;
        }
        if (cause != CutbackCause::none) {
            switch (cause) {
            case CutbackCause::divergence: ++pending.cutbacks_divergence; break;
            case CutbackCause::slow_convergence: ++pending.cutbacks_slow; break;
            default: ++pending.cutbacks_dp; break;
            }
            pending.last_cause = cause;
            try {
                ctl.reject(cause, t1 - t0, att.dp_observed);
            } catch (const StepFailure& ex) {
                throw StepFailure(model.name, fmt::format("{}{}", ex.what(),
                                                          att.message.empty() ? "" : " [" + att.message + "]"));
            }
            continue;
        }
        ctl.accept(t1 - t0, att.newton_iters);
        pending.t_start = t0;
        pending.t_end = ctl.time();
        pending.newton_iters = att.newton_iters;
        pending.dp_observed = att.dp_observed;
        out.dp_max = std::max(out.dp_max, att.dp_observed);
        out.steps.push_back(pending);
        pending = StepRecord{};
        out.state = std::move(att.state);
        out.residual = std::move(att.residual);
        if (observer) {
            observer(out.steps.back(), out.state);
        }
    }
    return out;
}

TensionCurve tension_test(const MaterialParams& params, double strain_rate, double strain_final,
                          const SteppingPolicy& policy)
{
    if (!(strain_rate > 0.0)) {
        throw std::invalid_argument("tension_test: strain rate must be positive");
    }
    Model model;
    model.name = "tension";
    model.material = params;
    model.mesh.nodes = {{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}};
    model.mesh.elements = {{0, 1, 2, 3}};
    model.mesh.node_sets = {{"left", {0, 3}}, {"right", {1, 2}}, {"pin", {0}}};
    model.load.dirichlet = {{"left", true, false, 0.0}, {"pin", false, true, 0.0}, {"right", true, false, strain_final}};

    const double duration = strain_final / strain_rate;
    IncrementData data;
    data.amplitude = [duration](double t) { return t / duration; };

    TensionCurve curve;
    curve.strain.push_back(0.0);
    curve.stress.push_back(0.0);
    auto record = [&](const StepRecord& step, const FieldState& state) {
        double sxx = 0.0;
        for (const auto& sp : state.gp_stresses) sxx += 0.25 * sp.sigma[0];
        curve.strain.push_back(strain_final * step.t_end / duration);
        curve.stress.push_back(sxx);
    };
    curve.steps = solve_increment(model, FieldState::zero(model.mesh), 0.0, duration, policy, data, 0.0, record).steps;
    return curve;
}

}  // namespace glc
