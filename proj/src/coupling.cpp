#include "glc/coupling.hpp"

#include "glc/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <map>
#include <set>

namespace glc {

// --- transfer -----------------------------------------------------------------

Vector TransferMatrix::to_local(const Vector& global_values) const
{
    const Eigen::Map<const Eigen::Matrix<double, 2, Eigen::Dynamic>> g(global_values.data(), 2, global_size());
    Vector out(2 * local_size());
    Eigen::Map<Eigen::Matrix<double, 2, Eigen::Dynamic>> l(out.data(), 2, local_size());
    l = g * weights.transpose();
    return out;
}

Vector TransferMatrix::to_global(const Vector& local_values) const
{
    const Eigen::Map<const Eigen::Matrix<double, 2, Eigen::Dynamic>> l(local_values.data(), 2, local_size());
    Vector out(2 * global_size());
    Eigen::Map<Eigen::Matrix<double, 2, Eigen::Dynamic>> g(out.data(), 2, global_size());
    g = l * weights;
    return out;
}

namespace {

struct Projection {
    int edge = -1;
    double s = 0.0;
    double distance = std::numeric_limits<double>::infinity();
};

Projection project(const std::vector<Point>& pts, const std::vector<std::array<int, 2>>& edges, const Point& x)
{
    Projection best;
    for (std::size_t k = 0; k < edges.size(); ++k) {
        const Point& a = pts[edges[k][0]];
        const Point& b = pts[edges[k][1]];
        const Point ab = b - a;
        const double len2 = ab.squaredNorm();
        double s = len2 > 0.0 ? (x - a).dot(ab) / len2 : 0.0;
        s = std::clamp(s, 0.0, 1.0);
        const double d = (a + s * ab - x).norm();
        if (d < best.distance) {
            best = {static_cast<int>(k), s, d};
        }
    }
    return best;
}

}  // namespace

TransferMatrix build_transfer(const std::vector<Point>& global_points, const std::vector<std::array<int, 2>>& edges,
                              const std::vector<Point>& local_points, double tol)
{
    const int ng = static_cast<int>(global_points.size());
    const int nl = static_cast<int>(local_points.size());
    std::vector<Eigen::Triplet<double>> trip;
    for (int i = 0; i < nl; ++i) {
        const Point& x = local_points[i];
        // A node coinciding with a global node gets a unit row whatever edge
        // it would project onto.
        int coincident = -1;
        for (int j = 0; j < ng; ++j) {
            if ((global_points[j] - x).norm() <= tol) {
                coincident = j;
                break;
            }
        }
        if (coincident >= 0) {
            trip.emplace_back(i, coincident, 1.0);
            continue;
        }
        const Projection p = project(global_points, edges, x);
        if (p.edge < 0 || p.distance > tol) {
            throw ProjectionFailure(fmt::format("interface node ({:.9g}, {:.9g}) is {:.3e} away from the global interface "
                                                "(tolerance {:.3e})",
                                                x.x(), x.y(), p.distance, tol));
        }
        // Weights computed so that the row sums to exactly one.
        double w0, w1;
        if (p.s >= 0.5) {
            w1 = p.s;
            w0 = 1.0 - w1;
        } else {
            w0 = 1.0 - p.s;
            w1 = 1.0 - w0;
        }
        trip.emplace_back(i, edges[p.edge][0], w0);
        trip.emplace_back(i, edges[p.edge][1], w1);
    }
    TransferMatrix t;
    t.weights.resize(nl, ng);
    t.weights.setFromTriplets(trip.begin(), trip.end());
    return t;
}

// --- partition ------------------------------------------------------------------

std::vector<int> DomainPartition::interface_nodes() const
{
    std::vector<int> out;
    for (const auto& z : zones) {
        out.insert(out.end(), z.gamma_global.begin(), z.gamma_global.end());
    }
    return out;
}

std::vector<int> DomainPartition::interface_offsets() const
{
    std::vector<int> out;
    int offset = 0;
    for (const auto& z : zones) {
        out.push_back(offset);
        offset += 2 * static_cast<int>(z.gamma_global.size());
    }
    return out;
}

namespace {

// Orders edges into chains (a -> b -> ...) and returns the node sequence plus
// edges as positions in it.
void chain_edges(const std::vector<Edge>& edges, std::vector<int>& nodes, std::vector<std::array<int, 2>>& positions)
{
    std::map<int, std::size_t> by_start;
    std::set<int> ends;
    for (std::size_t k = 0; k < edges.size(); ++k) {
        if (!by_start.emplace(edges[k].a, k).second) {
            throw std::invalid_argument("interface is not a simple curve");
        }
        ends.insert(edges[k].b);
    }
    std::vector<bool> used(edges.size(), false);
    std::map<int, int> position;
    auto pos_of = [&](int node) {
        auto it = position.find(node);
        if (it != position.end()) return it->second;
        const int p = static_cast<int>(nodes.size());
        nodes.push_back(node);
        position[node] = p;
        return p;
    };
    auto follow = [&](std::size_t k) {
        while (!used[k]) {
            used[k] = true;
            positions.push_back({pos_of(edges[k].a), pos_of(edges[k].b)});
            auto it = by_start.find(edges[k].b);
            if (it == by_start.end()) break;
            k = it->second;
        }
    };
    // Open chains first, starting where no edge ends.
    for (std::size_t k = 0; k < edges.size(); ++k) {
        if (!used[k] && ends.count(edges[k].a) == 0) follow(k);
    }
    for (std::size_t k = 0; k < edges.size(); ++k) {
        if (!used[k]) follow(k);
    }
}

std::vector<int> boundary_nodes(const Mesh& mesh)
{
    std::map<std::pair<int, int>, int> count;
    for (const auto& el : mesh.elements) {
        for (int k = 0; k < 4; ++k) {
            const int a = el[k];
            const int b = el[(k + 1) % 4];
            ++count[{std::min(a, b), std::max(a, b)}];
        }
    }
    std::set<int> out;
    for (const auto& [edge, n] : count) {
        if (n == 1) {
            out.insert(edge.first);
            out.insert(edge.second);
        }
    }
    return {out.begin(), out.end()};
}

}  // namespace

DomainPartition make_partition(const Mesh& global, std::vector<ZoneSpec> specs, bool identity_transfer)
{
    DomainPartition part;
    part.global = global;
    const double tol = 1e-8 * global.min_edge_length();
    std::vector<int> owner(global.num_elements(), -1);
    for (std::size_t z = 0; z < specs.size(); ++z) {
        for (int e : elements_in_box(global, specs[z].box)) {
            if (owner[e] >= 0) {
                throw std::invalid_argument(fmt::format("zones '{}' and '{}' overlap", specs[owner[e]].name, specs[z].name));
            }
            owner[e] = static_cast<int>(z);
        }
    }
    for (int e = 0; e < global.num_elements(); ++e) {
        if (owner[e] < 0) part.complement_elements.push_back(e);
    }
    std::set<int> seen_gamma;
    for (std::size_t zi = 0; zi < specs.size(); ++zi) {
        ZoneSpec& spec = specs[zi];
        Zone z;
        z.name = spec.name;
        for (int e = 0; e < global.num_elements(); ++e) {
            if (owner[e] == static_cast<int>(zi)) z.aux_elements.push_back(e);
        }
        if (z.aux_elements.empty()) {
            throw std::invalid_argument(fmt::format("zone '{}' contains no global element", z.name));
        }
        z.aux = submesh(global, z.aux_elements, &z.aux_node_map);
        const std::vector<Edge> edges = shared_edges(global, z.aux_elements, part.complement_elements);
        if (edges.empty()) {
            throw std::invalid_argument(fmt::format("zone '{}' has no interface with the complement", z.name));
        }
        chain_edges(edges, z.gamma_global, z.gamma_edges);
        for (int n : z.gamma_global) {
            if (!seen_gamma.insert(n).second) {
                throw std::invalid_argument(fmt::format("zone '{}' shares interface node {} with another zone", z.name, n));
            }
        }
        std::map<int, int> to_aux;
        for (std::size_t i = 0; i < z.aux_node_map.size(); ++i) to_aux[z.aux_node_map[i]] = static_cast<int>(i);
        for (int n : z.gamma_global) z.gamma_aux.push_back(to_aux.at(n));

        z.local = std::move(spec.local);
        std::vector<Point> gpts;
        for (int n : z.gamma_global) gpts.push_back(global.nodes[n]);
        std::vector<std::pair<double, int>> keyed;
        for (int n : boundary_nodes(z.local)) {
            const Projection p = project(gpts, z.gamma_edges, z.local.nodes[n]);
            if (p.distance <= tol) keyed.push_back({p.edge + p.s, n});
        }
        std::sort(keyed.begin(), keyed.end());
        std::vector<Point> lpts;
        for (const auto& [key, n] : keyed) {
            z.gamma_local.push_back(n);
            lpts.push_back(z.local.nodes[n]);
        }
        if (z.gamma_local.empty()) {
            throw ProjectionFailure(fmt::format("zone '{}': no local boundary node lies on the interface", z.name));
        }
        if (identity_transfer) {
            if (lpts.size() != gpts.size()) {
                throw ProjectionFailure(fmt::format("zone '{}': meshes are not matched on the interface", z.name));
            }
            std::vector<std::array<int, 2>> none;
            z.transfer = build_transfer(gpts, none, lpts, tol);
        } else {
            z.transfer = build_transfer(gpts, z.gamma_edges, lpts, tol);
        }
        part.zones.push_back(std::move(z));
    }
    return part;
}

// --- options and acceleration -----------------------------------------------------

void CouplingOptions::validate() const
{
    if (!(tol > 0.0)) throw std::invalid_argument("coupling tol must be positive");
    if (max_iters < 1) throw std::invalid_argument("max gl iterations must be at least 1");
    if (!(omega > 0.0)) throw std::invalid_argument("omega must be positive");
    if (!(absolute_floor >= 0.0)) throw std::invalid_argument("absolute floor must be non-negative");
}

CouplingOptions CouplingOptions::optimized()
{
    CouplingOptions o;
    o.tol = 1e-3;
    o.acceleration = Acceleration::aitken;
    o.max_iters = 5;
    o.accept_at_cap = true;
    return o;
}

double CouplingState::relative_residual() const
{
    if (residual_history.empty()) return std::numeric_limits<double>::infinity();
    if (residual_history.front() == 0.0) return 0.0;
    return residual_history.back() / residual_history.front();
}

void accelerate(CouplingState& state, Acceleration mode, double omega_fixed)
{
    if (mode == Acceleration::fixed || state.iter < 2) {
        state.omega = omega_fixed;
    } else {
        const Vector dr = state.r_curr - state.r_prev;
        const double dr2 = dr.squaredNorm();
        if (std::sqrt(dr2) < 1e-14 * state.r_curr.norm() || dr2 == 0.0) {
            state.omega = 1.0;
            ++state.degenerate_aitken;
        } else {
            state.omega = -state.omega * state.r_prev.dot(dr) / dr2;
        }
    }
    state.omega_history.push_back(state.omega);
    state.P += state.omega * state.r_curr;
}

// --- problem ------------------------------------------------------------------------

CoupledProblem CoupledProblem::build(DomainPartition partition, const MaterialParams& material, const LoadCase& load)
{
    CoupledProblem p;
    p.global.name = "global";
    p.global.mesh = partition.global;
    p.global.material = material;
    p.global.load = load;
    p.global.interface_nodes = partition.interface_nodes();
    p.global.interface_kind = Model::Interface::loaded;
    for (const auto& z : partition.zones) {
        Model a;
        a.name = "aux:" + z.name;
        a.mesh = z.aux;
        a.material = material;
        a.load = load;
        a.interface_nodes = z.gamma_aux;
        a.interface_kind = Model::Interface::prescribed;
        p.aux.push_back(std::move(a));
        Model l;
        l.name = "local:" + z.name;
        l.mesh = z.local;
        l.material = material;
        l.load = load;
        l.interface_nodes = z.gamma_local;
        l.interface_kind = Model::Interface::prescribed;
        p.local.push_back(std::move(l));
    }
    p.partition = std::move(partition);
    return p;
}

CoupledFields CoupledFields::zero(const CoupledProblem& problem)
{
    CoupledFields f;
    f.global = FieldState::zero(problem.global.mesh);
    for (const auto& m : problem.aux) f.aux.push_back(FieldState::zero(m.mesh));
    for (const auto& m : problem.local) f.local.push_back(FieldState::zero(m.mesh));
    return f;
}

// --- one global/local iteration -------------------------------------------------------

namespace {

std::optional<Reduction> reduction_for(const StepAttempt& att, const std::string& model, const SteppingPolicy& policy,
                                       bool check_dp, Reduction::Kind dp_kind)
{
    if (att.status == StepAttempt::Status::diverged) {
        return Reduction{Reduction::Kind::cutback, 1.0 / policy.divergence_factor, model, att.message};
    }
    if (att.status == StepAttempt::Status::slow) {
        return Reduction{Reduction::Kind::cutback, 1.0 / policy.slow_convergence_factor, model, att.message};
    }
    if (check_dp && att.dp_observed > policy.dp_max) {
        return Reduction{dp_kind, std::min(policy.dp_max / att.dp_observed, 0.999), model,
                         fmt::format("dp {:.6e} > {:.6e}", att.dp_observed, policy.dp_max)};
    }
    return std::nullopt;
}

struct ZoneOutcome {
    std::optional<Reduction> reduction;
    FieldState local;
    FieldState aux;
    Vector lambda_local;
    Vector lambda_aux;
    std::vector<StepRecord> local_steps;
};

ZoneOutcome solve_zone(const CoupledProblem& problem, std::size_t z, const CoupledFields& start, const SyncContext& ctx,
                       const SteppingPolicy& policy, const Vector& u_gamma_end)
{
    const Zone& zone = problem.partition.zones[z];
    const Model& local = problem.local[z];
    const Model& aux = problem.aux[z];
    ZoneOutcome out;

    // Auxiliary model: one step, no accuracy control.
    IncrementData aux_data{ctx.amplitude, gather_nodes(start.aux[z].u, aux.interface_nodes), u_gamma_end};
    StepAttempt aux_att = attempt_step(aux, start.aux[z], ctx.t_c, ctx.t_a, ctx.t_c, ctx.t_a, aux_data, policy);
    if (auto r = reduction_for(aux_att, aux.name, policy, false, Reduction::Kind::cutback)) {
        out.reduction = r;
        return out;
    }

    IncrementData local_data{ctx.amplitude, gather_nodes(start.local[z].u, local.interface_nodes),
                             zone.transfer.to_local(u_gamma_end)};
    if (ctx.local_stepping == LocalStepping::internal_ats) {
        IncrementResult res = solve_increment(local, start.local[z], ctx.t_c, ctx.t_a, policy, local_data);
        out.local = std::move(res.state);
        out.lambda_local = gather_nodes(res.residual, local.interface_nodes);
        out.local_steps = std::move(res.steps);
    } else {
        StepAttempt att = attempt_step(local, start.local[z], ctx.t_c, ctx.t_a, ctx.t_c, ctx.t_a, local_data, policy);
        if (auto r = reduction_for(att, local.name, policy, true, Reduction::Kind::local_ats)) {
            out.reduction = r;
            return out;
        }
        StepRecord rec;
        rec.t_start = ctx.t_c;
        rec.t_end = ctx.t_a;
        rec.newton_iters = att.newton_iters;
        rec.dp_observed = att.dp_observed;
        out.local_steps.push_back(rec);
        out.local = std::move(att.state);
        out.lambda_local = gather_nodes(att.residual, local.interface_nodes);
    }
    out.aux = std::move(aux_att.state);
    out.lambda_aux = gather_nodes(aux_att.residual, aux.interface_nodes);
    return out;
}

}  // namespace

GlIterationResult gl_iteration(const CoupledProblem& problem, const CoupledFields& start, const SyncContext& ctx,
                               const SteppingPolicy& policy, CouplingState& state)
{
    GlIterationResult out;
    const Model& global = problem.global;

    // (1) global solve under the current interface load.
    IncrementData gdata{ctx.amplitude, ctx.P_start, state.P};
    StepAttempt gatt = attempt_step(global, start.global, ctx.t_c, ctx.t_a, ctx.t_c, ctx.t_a, gdata, policy);
    if (auto r = reduction_for(gatt, global.name, policy, true, Reduction::Kind::global_ats)) {
        out.reduction = r;
        return out;
    }
    const Vector u_end = gather_nodes(gatt.state.u, global.interface_nodes);

    // (2)-(3) local and auxiliary solves, zones in parallel.
    const auto& zones = problem.partition.zones;
    const std::vector<int> offsets = problem.partition.interface_offsets();
    std::vector<std::future<ZoneOutcome>> futures;
    for (std::size_t z = 0; z < zones.size(); ++z) {
        const auto n = static_cast<Eigen::Index>(2 * zones[z].gamma_global.size());
        Vector ue = u_end.segment(offsets[z], n);
        futures.push_back(std::async(std::launch::async, [&, z, ue = std::move(ue)] {
            return solve_zone(problem, z, start, ctx, policy, ue);
        }));
    }
    std::vector<ZoneOutcome> outcomes;
    for (auto& f : futures) outcomes.push_back(f.get());

    for (const auto& o : outcomes) {
        if (o.reduction && (!out.reduction || o.reduction->factor < out.reduction->factor)) {
            out.reduction = o.reduction;
        }
    }
    if (out.reduction) return out;

    // (4) interface residual, zone blocks in order.
    Vector r(problem.interface_size());
    double level = 0.0;
    for (std::size_t z = 0; z < zones.size(); ++z) {
        const auto n = static_cast<Eigen::Index>(2 * zones[z].gamma_global.size());
        const Vector tl = zones[z].transfer.to_global(outcomes[z].lambda_local);
        r.segment(offsets[z], n) = -(tl - outcomes[z].lambda_aux + state.P.segment(offsets[z], n));
        level = std::max({level, tl.norm(), outcomes[z].lambda_aux.norm()});
    }
    out.residual = r;
    out.residual_norm = r.norm();
    out.force_level = level;
    state.r_prev = state.r_curr;
    state.r_curr = r;
    ++state.iter;
    state.residual_history.push_back(out.residual_norm);

    out.global_step.t_start = ctx.t_c;
    out.global_step.t_end = ctx.t_a;
    out.global_step.newton_iters = gatt.newton_iters;
    out.global_step.dp_observed = gatt.dp_observed;
    out.fields.global = std::move(gatt.state);
    for (auto& o : outcomes) {
        out.fields.local.push_back(std::move(o.local));
        out.fields.aux.push_back(std::move(o.aux));
        out.local_ats += std::max(0, static_cast<int>(o.local_steps.size()) - 1);
        out.local_steps.push_back(std::move(o.local_steps));
    }
    return out;
}

// --- merged field ------------------------------------------------------------------------

MergedField MergedField::from_model(const Mesh& mesh, const FieldState& field)
{
    MergedField m;
    m.node_xy = mesh.nodes;
    m.u = field.u;
    m.gp_xy = gauss_point_coordinates(mesh);
    m.gp_states = field.gp_states;
    m.gp_stresses = field.gp_stresses;
    return m;
}

namespace {
int nearest(const std::vector<Point>& pts, const Point& x)
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

int MergedField::nearest_gp(const Point& x) const { return nearest(gp_xy, x); }
int MergedField::nearest_node(const Point& x) const { return nearest(node_xy, x); }

MergedField assemble_gl_solution(const DomainPartition& partition, const FieldState& global,
                                 const std::vector<FieldState>& local)
{
    MergedField m;
    std::vector<double> u;
    std::set<int> gamma;
    for (const auto& z : partition.zones) gamma.insert(z.gamma_global.begin(), z.gamma_global.end());
    std::set<int> complement_nodes;
    for (int e : partition.complement_elements) {
        for (int n : partition.global.elements[e]) {
            if (gamma.count(n) == 0) complement_nodes.insert(n);
        }
    }
    for (int n : complement_nodes) {
        m.node_xy.push_back(partition.global.nodes[n]);
        u.push_back(global.u[2 * n]);
        u.push_back(global.u[2 * n + 1]);
    }
    const std::vector<Point> gxy = gauss_point_coordinates(partition.global);
    for (int e : partition.complement_elements) {
        for (int g = 0; g < 4; ++g) {
            m.gp_xy.push_back(gxy[4 * e + g]);
            m.gp_states.push_back(global.gp_states[4 * e + g]);
            m.gp_stresses.push_back(global.gp_stresses[4 * e + g]);
        }
    }
    for (std::size_t z = 0; z < partition.zones.size(); ++z) {
        const Mesh& lm = partition.zones[z].local;
        const FieldState& lf = local[z];
        for (int n = 0; n < lm.num_nodes(); ++n) {
            m.node_xy.push_back(lm.nodes[n]);
            u.push_back(lf.u[2 * n]);
            u.push_back(lf.u[2 * n + 1]);
        }
        const std::vector<Point> lxy = gauss_point_coordinates(lm);
        m.gp_xy.insert(m.gp_xy.end(), lxy.begin(), lxy.end());
        m.gp_states.insert(m.gp_states.end(), lf.gp_states.begin(), lf.gp_states.end());
        m.gp_stresses.insert(m.gp_stresses.end(), lf.gp_stresses.begin(), lf.gp_stresses.end());
    }
    m.u = Eigen::Map<Vector>(u.data(), static_cast<Eigen::Index>(u.size()));
    return m;
}

}  // namespace glc
