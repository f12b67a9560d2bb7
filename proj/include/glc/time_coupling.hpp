#pragma once

// Coupling over a load cycle: prediscretization of the global model, weak
// coupling (additional local steps stay inside the local solve), full
// coupling (every additional step is promoted to the shared grid),
// submodeling (no feedback) and the monolithic reference.

#include "glc/coupling.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace glc {

/// Piecewise-linear amplitude curve.
struct LoadCycle {
    std::vector<std::pair<double, double>> stations;  // (time [s], amplitude)

    void validate() const;
    double amplitude(double t) const;
    double start() const { return stations.front().first; }
    double end() const { return stations.back().first; }

    /// (0, 0) -> (60, 1) -> (540, 1) -> (600, 0).
    static LoadCycle desk();
    friend bool operator==(const LoadCycle&, const LoadCycle&) = default;
};

enum class Provenance { cycle, prediscretization, global_ats, local_ats, cutback };
std::string to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

/// Ordered time stations with the reason each one exists.
class TimeGrid {
public:
    TimeGrid() = default;
    static TimeGrid from_cycle(const LoadCycle& cycle);

    /// Adds a station; an existing time keeps its provenance.
    void insert(double t, Provenance p);
    bool contains(double t) const;
    /// First station strictly after t; throws std::out_of_range past the end.
    double next_after(double t) const;
    /// Last station at or before t.
    double at_or_before(double t) const;

    std::size_t size() const { return times_.size(); }
    const std::vector<double>& times() const { return times_; }
    const std::vector<Provenance>& provenance() const { return provenance_; }
    int count(Provenance p) const;
    /// Strictly increasing, starts and ends on the cycle, cycle stations present.
    void validate(const LoadCycle& cycle) const;

    friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

private:
    std::vector<double> times_;
    std::vector<Provenance> provenance_;
};

enum class RunMode { monolithic, submodeling, weak, full };
std::string to_string(RunMode m);
/// Accepts "monolithic", "submodel"/"submodeling", "weak", "full".
RunMode run_mode_from_string(const std::string& s);

/// One synchronization interval [t_start, t_end] of a run.
struct StationRecord {
    double t_start = 0.0;
    double t_end = 0.0;
    Provenance provenance = Provenance::cycle;  // of t_end in the global grid
    int gl_iterations = 0;                      // of the converged attempt
    int abandoned_iterations = 0;               // spent on restarted attempts
    int restarts = 0;
    bool converged = true;
    std::vector<double> residuals;   // absolute norms per iteration
    std::vector<double> omegas;      // relaxation used after each iteration
    std::vector<int> local_ats;      // additional local steps per iteration

    friend bool operator==(const StationRecord&, const StationRecord&) = default;
};

struct ModelLog {
    std::string model;
    TimeGrid grid;
    std::vector<StepRecord> steps;
};

/// Point cloud of an end-of-cycle field (Gauss points and nodes).
struct FieldCloud {
    std::vector<Point> gp_xy;
    std::vector<double> p_f;
    std::vector<double> p_s;
    std::vector<double> von_mises;
    std::vector<Point> node_xy;
    std::vector<double> ux;
    std::vector<double> uy;

    static FieldCloud from_merged(const MergedField& m);
    int nearest_gp(const Point& x) const;
    int nearest_node(const Point& x) const;
};

struct EndMetrics {
    double max_von_mises = 0.0;
    Point von_mises_location = Point::Zero();
    double max_p_f = 0.0;
    Point p_f_location = Point::Zero();
};

struct Snapshot {
    double t = 0.0;
    std::string model;
    MergedField field;
};

struct RunReport {
    std::string scenario;
    RunMode mode = RunMode::monolithic;
    SteppingPolicy policy;
    CouplingOptions coupling;
    LoadCycle cycle;
    std::vector<StationRecord> stations;
    std::vector<ModelLog> models;   // first entry: global (or reference) model
    double wall_time = 0.0;         // s, excluded from reproducibility checks
    EndMetrics end;
    FieldCloud end_field;
    std::vector<Snapshot> snapshots;  // cycle stations; written as CSV, not JSON

    int gl_iterations_total() const;
    /// Stations of the given provenance across the global grid (global_ats,
    /// cutback, prediscretization) or the local grids (local_ats).
    int ats_count(Provenance p) const;
    const ModelLog& model(const std::string& name) const;
};

EndMetrics end_metrics(const FieldCloud& field);

/// Runs the global model alone over the cycle with dp control and returns
/// the cycle stations plus every accepted step boundary.
TimeGrid prediscretize(const Model& global, const LoadCycle& cycle, const SteppingPolicy& policy,
                       std::vector<StepRecord>* steps = nullptr);

/// Adaptive single-model run over the grid (reference mesh, no interface).
RunReport run_monolithic(const Model& reference, const LoadCycle& cycle, const TimeGrid& grid,
                         const SteppingPolicy& policy);

/// Global pass over the grid, then one local pass per zone driven by the
/// interpolated global interface displacement. P stays zero.
RunReport run_submodeling(const CoupledProblem& problem, const LoadCycle& cycle, const TimeGrid& grid,
                          const SteppingPolicy& policy);

/// Converged state of a coupled run at t_c; also the checkpoint format.
struct CoupledRunState {
    double t_c = 0.0;
    double dt_c = 0.0;
    CoupledFields fields;
    Vector P;
    RunReport report;
};

using CheckpointSink = std::function<void(const CoupledRunState&)>;

/// Weak (local ATS kept inside the local solve) or full (every ATS promoted
/// to the shared grid, loop restarted) time coupling over the grid. `resume`
/// restarts from a checkpoint taken by `sink`; the remainder of the run is
/// then bit-identical to the uninterrupted one. Throws StepFailure,
/// MaxIterations.
RunReport run_coupled(const CoupledProblem& problem, const LoadCycle& cycle, const TimeGrid& grid,
                      const SteppingPolicy& policy, const CouplingOptions& options, RunMode mode,
                      const CoupledRunState* resume = nullptr, const CheckpointSink& sink = {});

RunReport run_weak(const CoupledProblem& problem, const LoadCycle& cycle, const TimeGrid& grid,
                   const SteppingPolicy& policy, const CouplingOptions& options);
RunReport run_full(const CoupledProblem& problem, const LoadCycle& cycle, const TimeGrid& grid,
                   const SteppingPolicy& policy, const CouplingOptions& options);

/// Iterates gl_iteration at one aimed time until convergence or a required
/// reduction of the interval.
struct StationOutcome {
    std::optional<Reduction> reduction;
    bool converged = false;
    CouplingState coupling;
    GlIterationResult last;
    std::vector<int> local_ats;
};

StationOutcome converge_station(const CoupledProblem& problem, const CoupledFields& start, const SyncContext& ctx,
                                const SteppingPolicy& policy, const CouplingOptions& options, const Vector& P0);

/// Warm-start interface load for a new aimed time: the converged P scaled
/// by the amplitude ratio (unscaled when the start amplitude is zero).
Vector warm_start_load(const Vector& P_c, double amp_c, double amp_a);

}  // namespace glc
