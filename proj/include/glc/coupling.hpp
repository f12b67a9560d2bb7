#pragma once

// Non-invasive global/local coupling at one synchronization time. The global
// model carries an extra interface load P on Gamma_G; local and auxiliary
// models are driven by interface displacements; the interface residual
// r = -(T^T lambda_L - lambda_A + P) feeds a relaxed fixed-point update.

#include "glc/solver.hpp"

#include <optional>
#include <string>
#include <vector>

namespace glc {

/// Linear interpolation from global interface nodes to local interface
/// nodes. Scalar weights act on each displacement component.
struct TransferMatrix {
    SparseMatrix weights;  // n_local x n_global

    int local_size() const { return static_cast<int>(weights.rows()); }
    int global_size() const { return static_cast<int>(weights.cols()); }
    /// Interleaved (x, y) global values -> local values.
    Vector to_local(const Vector& global_values) const;
    /// Transpose: local nodal forces -> global nodal forces.
    Vector to_global(const Vector& local_values) const;
};

/// Locates every local point on the polyline made of `edges` (pairs of
/// indices into `global_points`) and stores its interpolation weights.
/// Throws ProjectionFailure when a point is farther than `tol` from every
/// edge.
TransferMatrix build_transfer(const std::vector<Point>& global_points,
                              const std::vector<std::array<int, 2>>& edges,
                              const std::vector<Point>& local_points, double tol);

struct Zone {
    std::string name;
    std::vector<int> aux_elements;   // in the global mesh
    Mesh aux;                        // restriction of the global mesh
    std::vector<int> aux_node_map;   // aux node -> global node
    Mesh local;
    std::vector<int> gamma_global;   // ordered along Gamma
    std::vector<int> gamma_aux;      // same nodes, aux numbering
    std::vector<int> gamma_local;    // ordered by arc length
    std::vector<std::array<int, 2>> gamma_edges;  // positions in gamma_global
    TransferMatrix transfer;
};

struct DomainPartition {
    Mesh global;
    std::vector<int> complement_elements;
    std::vector<Zone> zones;

    /// Concatenation of the zones' gamma_global lists (layout of P).
    std::vector<int> interface_nodes() const;
    /// Offset of each zone in the interleaved interface vector.
    std::vector<int> interface_offsets() const;
};

struct ZoneSpec {
    std::string name;
    std::array<double, 4> box;  // xmin, ymin, xmax, ymax; elements with centroid inside form the auxiliary patch
    Mesh local;
};

/// Splits `global` into complement and auxiliary patches, finds Gamma on
/// both sides and builds the transfers. `identity_transfer` replaces the
/// interpolation by coincident-node matching (matched meshes only).
/// Throws ProjectionFailure or std::invalid_argument.
DomainPartition make_partition(const Mesh& global, std::vector<ZoneSpec> zones, bool identity_transfer = false);

enum class Acceleration { fixed, aitken };

struct CouplingOptions {
    double tol = 1e-5;
    int max_iters = 50;
    Acceleration acceleration = Acceleration::aitken;
    double omega = 1.0;
    bool warm_start = true;
    /// Accept the last iterate at the cap instead of throwing MaxIterations.
    bool accept_at_cap = false;
    /// Residuals below this fraction of the interface force level count as
    /// converged regardless of r_0 (round-off floor).
    double absolute_floor = 1e-10;

    void validate() const;
    /// tol 1e-3, Aitken, at most 5 iterations.
    static CouplingOptions optimized();
};

struct CouplingState {
    Vector P;
    Vector r_prev;
    Vector r_curr;
    double omega = 1.0;
    int iter = 0;  // residuals computed so far
    std::vector<double> residual_history;
    std::vector<double> omega_history;
    int degenerate_aitken = 0;

    double relative_residual() const;
};

/// Updates omega (Aitken) and applies P += omega * r_curr.
void accelerate(CouplingState& state, Acceleration mode, double omega_fixed);

/// The three kinds of models built from a partition.
struct CoupledProblem {
    DomainPartition partition;
    Model global;
    std::vector<Model> aux;
    std::vector<Model> local;

    static CoupledProblem build(DomainPartition partition, const MaterialParams& material, const LoadCase& load);
    int interface_size() const { return static_cast<int>(2 * global.interface_nodes.size()); }
};

struct CoupledFields {
    FieldState global;
    std::vector<FieldState> aux;
    std::vector<FieldState> local;

    static CoupledFields zero(const CoupledProblem& problem);
};

/// How the local models integrate one synchronization interval.
enum class LocalStepping {
    internal_ats,  // weak coupling: adaptive, additional steps stay internal
    single_step,   // full coupling: one step, dp violations are reported
};

/// Reason a coupled increment must be retried with a smaller interval.
struct Reduction {
    enum class Kind { global_ats, local_ats, cutback };
    Kind kind = Kind::cutback;
    double factor = 1.0;
    std::string model;
    std::string message;
};

struct GlIterationResult {
    std::optional<Reduction> reduction;
    CoupledFields fields;
    StepRecord global_step;
    std::vector<std::vector<StepRecord>> local_steps;  // per zone
    int local_ats = 0;
    double residual_norm = 0.0;
    double force_level = 0.0;
    Vector residual;
};

struct SyncContext {
    double t_c = 0.0;
    double t_a = 0.0;
    std::function<double(double)> amplitude;
    Vector P_start;  // converged interface load at t_c
    LocalStepping local_stepping = LocalStepping::internal_ats;
};

/// One global/local cycle: global solve under P_i, local and auxiliary
/// solves (concurrently) under the global interface displacement, interface
/// residual. Does not update P; call accelerate. Throws StepFailure from an
/// internal local solve.
GlIterationResult gl_iteration(const CoupledProblem& problem, const CoupledFields& start, const SyncContext& ctx,
                               const SteppingPolicy& policy, CouplingState& state);

/// Field gathered from a coupled solution: local values inside the zones of
/// interest, global values on the complement.
struct MergedField {
    std::vector<Point> node_xy;
    Vector u;  // interleaved
    std::vector<Point> gp_xy;
    std::vector<MaterialState> gp_states;
    std::vector<StressPoint> gp_stresses;

    static MergedField from_model(const Mesh& mesh, const FieldState& field);
    /// Index of the nearest Gauss point.
    int nearest_gp(const Point& x) const;
    int nearest_node(const Point& x) const;
};

MergedField assemble_gl_solution(const DomainPartition& partition, const FieldState& global,
                                 const std::vector<FieldState>& local);

}  // namespace glc
