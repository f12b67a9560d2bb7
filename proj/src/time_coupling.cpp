#include "glc/time_coupling.hpp"

#include "glc/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace glc {

// --- cycle and grids ------------------------------------------------------------

void LoadCycle::validate() const
{
    if (stations.size() < 2) throw std::invalid_argument("load cycle needs at least two stations");
    for (std::size_t i = 1; i < stations.size(); ++i) {
        if (!(stations[i].first > stations[i - 1].first)) {
            throw std::invalid_argument(fmt::format("load cycle times must increase (station {})", i));
        }
    }
    for (const auto& [t, a] : stations) {
        if (!std::isfinite(t) || !std::isfinite(a)) throw std::invalid_argument("load cycle values must be finite");
    }
}

double LoadCycle::amplitude(double t) const
{
    if (t <= stations.front().first) return stations.front().second;
    if (t >= stations.back().first) return stations.back().second;
    auto it = std::upper_bound(stations.begin(), stations.end(), t,
                               [](double v, const std::pair<double, double>& s) { return v < s.first; });
    const auto& [t1, a1] = *it;
    const auto& [t0, a0] = *(it - 1);
    const double s = (t - t0) / (t1 - t0);
    return a0 + s * (a1 - a0);
}

LoadCycle LoadCycle::desk() { return LoadCycle{{{0.0, 0.0}, {60.0, 1.0}, {540.0, 1.0}, {600.0, 0.0}}}; }

std::string to_string(Provenance p)
{
    switch (p) {
    case Provenance::cycle: return "cycle";
    case Provenance::prediscretization: return "prediscretization";
    case Provenance::global_ats: return "global_ATS";
    case Provenance::local_ats: return "local_ATS";
    case Provenance::cutback: return "cutback";
    }
    return "?";
}

Provenance provenance_from_string(const std::string& s)
{
    for (Provenance p : {Provenance::cycle, Provenance::prediscretization, Provenance::global_ats, Provenance::local_ats,
                         Provenance::cutback}) {
        if (to_string(p) == s) return p;
    }
    throw std::invalid_argument("unknown provenance '" + s + "'");
}

TimeGrid TimeGrid::from_cycle(const LoadCycle& cycle)
{
    TimeGrid g;
    for (const auto& [t, a] : cycle.stations) g.insert(t, Provenance::cycle);
    return g;
}

void TimeGrid::insert(double t, Provenance p)
{
    auto it = std::lower_bound(times_.begin(), times_.end(), t);
    if (it != times_.end() && *it == t) return;
    const auto k = it - times_.begin();
    times_.insert(it, t);
    provenance_.insert(provenance_.begin() + k, p);
}

bool TimeGrid::contains(double t) const { return std::binary_search(times_.begin(), times_.end(), t); }

double TimeGrid::next_after(double t) const
{
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    if (it == times_.end()) throw std::out_of_range(fmt::format("no grid station after t = {}", t));
    return *it;
}

double TimeGrid::at_or_before(double t) const
{
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    if (it == times_.begin()) throw std::out_of_range(fmt::format("no grid station before t = {}", t));
    return *(it - 1);
}

int TimeGrid::count(Provenance p) const
{
    return static_cast<int>(std::count(provenance_.begin(), provenance_.end(), p));
}

void TimeGrid::validate(const LoadCycle& cycle) const
{
    if (times_.empty() || times_.front() != cycle.start() || times_.back() != cycle.end()) {
        throw std::invalid_argument("time grid must span the load cycle");
    }
    for (std::size_t i = 1; i < times_.size(); ++i) {
        if (!(times_[i] > times_[i - 1])) throw std::invalid_argument("time grid must be strictly increasing");
    }
    for (const auto& [t, a] : cycle.stations) {
        if (!contains(t)) throw std::invalid_argument(fmt::format("time grid misses cycle station {}", t));
    }
}

std::string to_string(RunMode m)
{
    switch (m) {
    case RunMode::monolithic: return "monolithic";
    case RunMode::submodeling: return "submodel";
    case RunMode::weak: return "weak";
    case RunMode::full: return "full";
    }
    return "?";
}

RunMode run_mode_from_string(const std::string& s)
{
    if (s == "monolithic") return RunMode::monolithic;
    if (s == "submodel" || s == "submodeling") return RunMode::submodeling;
    if (s == "weak") return RunMode::weak;
    if (s == "full") return RunMode::full;
    throw std::invalid_argument("unknown run mode '" + s + "'");
}

// --- report helpers -------------------------------------------------------------------

namespace {
int nearest_point(const std::vector<Point>& pts, const Point& x)
{
    int best = -1;
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double di = (pts[i] - x).squaredNorm();
        if (di < d) {
            d = di;
            best = static_cast<int>(i);
        }
    }
    return best;
}
}  // namespace

FieldCloud FieldCloud::from_merged(const MergedField& m)
{
    FieldCloud c;
    c.gp_xy = m.gp_xy;
    for (std::size_t i = 0; i < m.gp_xy.size(); ++i) {
        c.p_f.push_back(m.gp_states[i].p_f);
        c.p_s.push_back(m.gp_states[i].p_s);
        c.von_mises.push_back(m.gp_stresses[i].von_mises());
    }
    c.node_xy = m.node_xy;
    for (std::size_t i = 0; i < m.node_xy.size(); ++i) {
        c.ux.push_back(m.u[2 * i]);
        c.uy.push_back(m.u[2 * i + 1]);
    }
    return c;
}

int FieldCloud::nearest_gp(const Point& x) const { return nearest_point(gp_xy, x); }
int FieldCloud::nearest_node(const Point& x) const { return nearest_point(node_xy, x); }

EndMetrics end_metrics(const FieldCloud& field)
{
    EndMetrics m;
    for (std::size_t i = 0; i < field.gp_xy.size(); ++i) {
        if (i == 0 || field.von_mises[i] > m.max_von_mises) {
            m.max_von_mises = field.von_mises[i];
            m.von_mises_location = field.gp_xy[i];
        }
        if (i == 0 || field.p_f[i] > m.max_p_f) {
            m.max_p_f = field.p_f[i];
            m.p_f_location = field.gp_xy[i];
        }
    }
    return m;
}

int RunReport::gl_iterations_total() const
{
    int n = 0;
    for (const auto& s : stations) n += s.gl_iterations + s.abandoned_iterations;
    return n;
}

int RunReport::ats_count(Provenance p) const
{
    std::set<double> times;
    for (const auto& m : models) {
        for (std::size_t i = 0; i < m.grid.size(); ++i) {
            if (m.grid.provenance()[i] == p) times.insert(m.grid.times()[i]);
        }
    }
    return static_cast<int>(times.size());
}

const ModelLog& RunReport::model(const std::string& name) const
{
    for (const auto& m : models) {
        if (m.model == name) return m;
    }
    throw std::out_of_range("run report has no model '" + name + "'");
}

// --- single-model marching ---------------------------------------------------------------

namespace {

double elapsed(std::chrono::steady_clock::time_point since)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

bool is_cycle_station(const LoadCycle& cycle, double t)
{
    return std::any_of(cycle.stations.begin(), cycle.stations.end(), [t](const auto& s) { return s.first == t; });
}

// Tag of the stations a solve_increment inserted inside one interval.
Provenance internal_tag(const std::vector<StepRecord>& steps, Provenance ats)
{
    for (const auto& s : steps) {
        if (s.cutbacks_dp > 0) return ats;
    }
    for (const auto& s : steps) {
        if (s.cutbacks() > 0) return Provenance::cutback;
    }
    return ats;
}

struct MarchResult {
    FieldState state;
    TimeGrid grid;
    std::vector<StepRecord> steps;
    std::vector<StationRecord> stations;
    std::vector<std::pair<double, FieldState>> cycle_states;
    std::vector<std::pair<double, Vector>> interface_history;  // at every accepted step
};

MarchResult march(const Model& model, const LoadCycle& cycle, const TimeGrid& grid, const SteppingPolicy& policy,
                  Provenance ats_tag)
{
    MarchResult out;
    out.grid = grid;
    out.state = FieldState::zero(model.mesh);
    out.cycle_states.push_back({grid.times().front(), out.state});
    out.interface_history.push_back({grid.times().front(), gather_nodes(out.state.u, model.interface_nodes)});
    IncrementData data;
    data.amplitude = [&cycle](double t) { return cycle.amplitude(t); };
    const auto& times = grid.times();
    for (std::size_t i = 0; i + 1 < times.size(); ++i) {
        const double t0 = times[i];
        const double t1 = times[i + 1];
        auto observer = [&](const StepRecord& rec, const FieldState& st) {
            out.interface_history.push_back({rec.t_end, gather_nodes(st.u, model.interface_nodes)});
        };
        IncrementResult res = solve_increment(model, out.state, t0, t1, policy, data, 0.0, observer);
        const Provenance tag = internal_tag(res.steps, ats_tag);
        for (const auto& s : res.steps) {
            if (s.t_end < t1) out.grid.insert(s.t_end, tag);
        }
        StationRecord st;
        st.t_start = t0;
        st.t_end = t1;
        st.provenance = grid.provenance()[i + 1];
        out.stations.push_back(st);
        out.steps.insert(out.steps.end(), res.steps.begin(), res.steps.end());
        out.state = std::move(res.state);
        if (is_cycle_station(cycle, t1)) out.cycle_states.push_back({t1, out.state});
    }
    return out;
}

void finish_report(RunReport& report, const MergedField& end, std::chrono::steady_clock::time_point t0)
{
    report.end_field = FieldCloud::from_merged(end);
    report.end = end_metrics(report.end_field);
    report.wall_time = elapsed(t0);
}

}  // namespace

TimeGrid prediscretize(const Model& global, const LoadCycle& cycle, const SteppingPolicy& policy,
                       std::vector<StepRecord>* steps)
{
    cycle.validate();
    MarchResult m = march(global, cycle, TimeGrid::from_cycle(cycle), policy, Provenance::prediscretization);
    if (steps) *steps = std::move(m.steps);
    return m.grid;
}

RunReport run_monolithic(const Model& reference, const LoadCycle& cycle, const TimeGrid& grid,
                         const SteppingPolicy& policy)
{
    const auto t0 = std::chrono::steady_clock::now();
    cycle.validate();
    grid.validate(cycle);
    RunReport report;
    report.mode = RunMode::monolithic;
    report.policy = policy;
    report.cycle = cycle;
    MarchResult m = march(reference, cycle, grid, policy, Provenance::global_ats);
    report.stations = std::move(m.stations);
    report.models.push_back({reference.name, std::move(m.grid), std::move(m.steps)});
    for (const auto& [t, st] : m.cycle_states) {
        report.snapshots.push_back({t, reference.name, MergedField::from_model(reference.mesh, st)});
    }
    finish_report(report, MergedField::from_model(reference.mesh, m.state), t0);
    return report;
}

RunReport run_submodeling(const CoupledProblem& problem, const LoadCycle& cycle, const TimeGrid& grid,
                          const SteppingPolicy& policy)
{
    const auto t0 = std::chrono::steady_clock::now();
    cycle.validate();
    grid.validate(cycle);
    RunReport report;
    report.mode = RunMode::submodeling;
    report.policy = policy;
    report.cycle = cycle;

    MarchResult g = march(problem.global, cycle, grid, policy, Provenance::global_ats);
    report.stations = g.stations;
    std::vector<std::pair<double, FieldState>> global_cycle_states = g.cycle_states;

    IncrementData data;
    data.amplitude = [&cycle](double t) { return cycle.amplitude(t); };
    const std::vector<int> offsets = problem.partition.interface_offsets();
    std::vector<FieldState> locals;
    std::vector<ModelLog> local_logs;
    std::vector<std::vector<std::pair<double, FieldState>>> local_cycle_states(problem.local.size());
    for (std::size_t z = 0; z < problem.local.size(); ++z) {
        const Model& lm = problem.local[z];
        const Zone& zone = problem.partition.zones[z];
        const auto n = static_cast<Eigen::Index>(2 * zone.gamma_global.size());
        FieldState state = FieldState::zero(lm.mesh);
        ModelLog log{lm.name, g.grid, {}};
        local_cycle_states[z].push_back({g.interface_history.front().first, state});
        for (std::size_t k = 0; k + 1 < g.interface_history.size(); ++k) {
            const double ta = g.interface_history[k].first;
            const double tb = g.interface_history[k + 1].first;
            data.interface_start = gather_nodes(state.u, lm.interface_nodes);
            data.interface_end = zone.transfer.to_local(g.interface_history[k + 1].second.segment(offsets[z], n));
            IncrementResult res = solve_increment(lm, state, ta, tb, policy, data);
            const Provenance tag = internal_tag(res.steps, Provenance::local_ats);
            for (const auto& s : res.steps) {
                if (s.t_end < tb) log.grid.insert(s.t_end, tag);
            }
            log.steps.insert(log.steps.end(), res.steps.begin(), res.steps.end());
            state = std::move(res.state);
            if (is_cycle_station(cycle, tb)) local_cycle_states[z].push_back({tb, state});
        }
        locals.push_back(std::move(state));
        local_logs.push_back(std::move(log));
    }
    report.models.push_back({problem.global.name, std::move(g.grid), std::move(g.steps)});
    for (auto& log : local_logs) report.models.push_back(std::move(log));
    for (std::size_t c = 0; c < global_cycle_states.size(); ++c) {
        const double t = global_cycle_states[c].first;
        std::vector<FieldState> lf;
        for (std::size_t z = 0; z < problem.local.size(); ++z) {
            report.snapshots.push_back({t, problem.local[z].name,
                                        MergedField::from_model(problem.local[z].mesh, local_cycle_states[z][c].second)});
            lf.push_back(local_cycle_states[z][c].second);
        }
        report.snapshots.push_back(
            {t, problem.global.name, MergedField::from_model(problem.global.mesh, global_cycle_states[c].second)});
        report.snapshots.push_back({t, "merged", assemble_gl_solution(problem.partition, global_cycle_states[c].second, lf)});
    }
    finish_report(report, assemble_gl_solution(problem.partition, g.state, locals), t0);
    return report;
}

// --- coupled runs ------------------------------------------------------------------------------

Vector warm_start_load(const Vector& P_c, double amp_c, double amp_a)
{
    if (amp_c == 0.0) return P_c;
    return P_c * (amp_a / amp_c);
}

StationOutcome converge_station(const CoupledProblem& problem, const CoupledFields& start, const SyncContext& ctx,
                                const SteppingPolicy& policy, const CouplingOptions& options, const Vector& P0)
{
    StationOutcome out;
    out.coupling.P = P0;
    out.coupling.omega = options.omega;
    for (;;) {
        GlIterationResult res = gl_iteration(problem, start, ctx, policy, out.coupling);
        if (res.reduction) {
            out.reduction = std::move(res.reduction);
            return out;
        }
        out.local_ats.push_back(res.local_ats);
        const bool below_floor = res.residual_norm <= options.absolute_floor * res.force_level;
        const bool relative = out.coupling.iter >= 2 && out.coupling.relative_residual() < options.tol;
        out.last = std::move(res);
        if (below_floor || relative || out.coupling.residual_history.front() == 0.0) {
            out.converged = true;
            return out;
        }
        if (out.coupling.iter >= options.max_iters) {
            if (options.accept_at_cap) return out;
            throw MaxIterations(fmt::format("coupling at t = {:.9g}: relative residual {:.3e} after {} iterations",
                                            ctx.t_a, out.coupling.relative_residual(), out.coupling.iter));
        }
        accelerate(out.coupling, options.acceleration, options.omega);
    }
}

namespace {

Provenance provenance_of(Reduction::Kind k)
{
    switch (k) {
    case Reduction::Kind::global_ats: return Provenance::global_ats;
    case Reduction::Kind::local_ats: return Provenance::local_ats;
    case Reduction::Kind::cutback: return Provenance::cutback;
    }
    return Provenance::cutback;
}

void snapshot_coupled(RunReport& report, const CoupledProblem& problem, double t, const CoupledFields& f)
{
    report.snapshots.push_back({t, problem.global.name, MergedField::from_model(problem.global.mesh, f.global)});
    for (std::size_t z = 0; z < problem.local.size(); ++z) {
        report.snapshots.push_back({t, problem.local[z].name, MergedField::from_model(problem.local[z].mesh, f.local[z])});
    }
    report.snapshots.push_back({t, "merged", assemble_gl_solution(problem.partition, f.global, f.local)});
}

}  // namespace

RunReport run_coupled(const CoupledProblem& problem, const LoadCycle& cycle, const TimeGrid& grid,
                      const SteppingPolicy& policy, const CouplingOptions& options, RunMode mode,
                      const CoupledRunState* resume, const CheckpointSink& sink)
{
    if (mode != RunMode::weak && mode != RunMode::full) {
        throw std::invalid_argument("run_coupled handles the weak and full modes only");
    }
    const auto wall0 = std::chrono::steady_clock::now();
    cycle.validate();
    grid.validate(cycle);
    options.validate();

    CoupledRunState st;
    if (resume) {
        st = *resume;
    } else {
        st.t_c = cycle.start();
        st.dt_c = grid.next_after(st.t_c) - st.t_c;
        st.fields = CoupledFields::zero(problem);
        st.P = Vector::Zero(problem.interface_size());
        st.report.mode = mode;
        st.report.policy = policy;
        st.report.coupling = options;
        st.report.cycle = cycle;
        st.report.models.push_back({problem.global.name, grid, {}});
        for (const auto& lm : problem.local) st.report.models.push_back({lm.name, grid, {}});
        snapshot_coupled(st.report, problem, st.t_c, st.fields);
    }
    const double wall_before = st.report.wall_time;
    const LocalStepping stepping = mode == RunMode::weak ? LocalStepping::internal_ats : LocalStepping::single_step;
    auto amplitude = [&cycle](double t) { return cycle.amplitude(t); };

    StationRecord pending;
    Provenance pending_tag = Provenance::cutback;
    while (st.t_c < cycle.end()) {
        TimeGrid& ggrid = st.report.models[0].grid;
        const double t_next = ggrid.next_after(st.t_c);
        double t_a = std::min(st.t_c + st.dt_c, t_next);
        if (t_next - t_a <= 1e-12 * std::max(1.0, std::abs(t_next))) t_a = t_next;

        SyncContext ctx;
        ctx.t_c = st.t_c;
        ctx.t_a = t_a;
        ctx.amplitude = amplitude;
        ctx.P_start = st.P;
        ctx.local_stepping = stepping;
        const Vector P0 = options.warm_start ? warm_start_load(st.P, cycle.amplitude(st.t_c), cycle.amplitude(t_a))
                                             : Vector::Zero(problem.interface_size());
        StationOutcome out = converge_station(problem, st.fields, ctx, policy, options, P0);

        if (out.reduction) {
            const double dt_new = (t_a - st.t_c) * out.reduction->factor;
            const double dt_min = policy.dt_min_fraction * (t_next - ggrid.at_or_before(st.t_c));
            if (dt_new < dt_min) {
                throw StepFailure(out.reduction->model,
                                  fmt::format("coupled increment {:.3e} below floor {:.3e} at t = {:.9g} ({})", dt_new,
                                              dt_min, st.t_c, out.reduction->message));
            }
            pending.abandoned_iterations += out.coupling.iter;
            ++pending.restarts;
            pending_tag = provenance_of(out.reduction->kind);
            st.dt_c = dt_new;
            continue;
        }

        // Accept the station.
        const bool reached = t_a == t_next;
        const Provenance tag = reached ? ggrid.provenance()[std::lower_bound(ggrid.times().begin(), ggrid.times().end(), t_a) -
                                                            ggrid.times().begin()]
                                       : pending_tag;
        if (!reached) {
            ggrid.insert(t_a, tag);
        }
        st.report.models[0].steps.push_back(out.last.global_step);
        for (std::size_t z = 0; z < problem.local.size(); ++z) {
            ModelLog& log = st.report.models[1 + z];
            log.grid.insert(t_a, tag);
            const auto& steps = out.last.local_steps[z];
            const Provenance ltag = internal_tag(steps, Provenance::local_ats);
            for (const auto& s : steps) {
                if (s.t_end < t_a) log.grid.insert(s.t_end, ltag);
            }
            log.steps.insert(log.steps.end(), steps.begin(), steps.end());
        }
        pending.t_start = st.t_c;
        pending.t_end = t_a;
        pending.provenance = tag;
        pending.gl_iterations = out.coupling.iter;
        pending.converged = out.converged;
        pending.residuals = out.coupling.residual_history;
        pending.omegas = out.coupling.omega_history;
        pending.local_ats = out.local_ats;
        st.report.stations.push_back(std::move(pending));
        pending = StationRecord{};
        pending_tag = Provenance::cutback;

        st.fields = std::move(out.last.fields);
        st.P = out.coupling.P;
        const double t_prev = st.t_c;
        st.t_c = t_a;
        if (reached) {
            st.dt_c = st.t_c < cycle.end() ? ggrid.next_after(st.t_c) - st.t_c : 0.0;
        } else {
            st.dt_c = (t_a - t_prev) * policy.growth_factor;
        }
        if (is_cycle_station(cycle, st.t_c)) snapshot_coupled(st.report, problem, st.t_c, st.fields);
        if (sink) {
            st.report.wall_time = wall_before + elapsed(wall0);
            sink(st);
        }
    }
    RunReport report = std::move(st.report);
    finish_report(report, assemble_gl_solution(problem.partition, st.fields.global, st.fields.local), wall0);
    report.wall_time += wall_before;
    return report;
}

RunReport run_weak(const CoupledProblem& problem, const LoadCycle& cycle, const TimeGrid& grid,
                   const SteppingPolicy& policy, const CouplingOptions& options)
{
    return run_coupled(problem, cycle, grid, policy, options, RunMode::weak);
}

RunReport run_full(const CoupledProblem& problem, const LoadCycle& cycle, const TimeGrid& grid,
                   const SteppingPolicy& policy, const CouplingOptions& options)
{
    return run_coupled(problem, cycle, grid, policy, options, RunMode::full);
}

}  // namespace glc
