#include "glc/coupling.hpp"
#include "glc/time_coupling.hpp"

#include "doctest.h"
#include "fixtures.hpp"

#include <cmath>
#include <random>

using namespace glc;

namespace {

Eigen::MatrixXd dense(const TransferMatrix& t) { return Eigen::MatrixXd(t.weights); }

SyncContext context(double t_c, double t_a, const CoupledProblem& p, LocalStepping stepping)
{
    SyncContext ctx;
    ctx.t_c = t_c;
    ctx.t_a = t_a;
    ctx.amplitude = [](double t) { return std::min(t / 60.0, 1.0); };
    ctx.P_start = Vector::Zero(p.interface_size());
    ctx.local_stepping = stepping;
    return ctx;
}

SteppingPolicy policy_with(double dp_max)
{
    SteppingPolicy p;
    p.dp_max = dp_max;
    return p;
}

CouplingOptions tight(Acceleration a, double tol = 1e-11)
{
    CouplingOptions o;
    o.tol = tol;
    o.absolute_floor = 1e-14;
    o.acceleration = a;
    o.max_iters = 200;
    return o;
}

}  // namespace

TEST_CASE("transfer matrix")
{
    const std::vector<Point> g{{0, 0}, {1, 0}, {2, 0}, {2, 1}};
    const std::vector<std::array<int, 2>> edges{{0, 1}, {1, 2}, {2, 3}};

    SUBCASE("coincident nodes give the identity")
    {
        const TransferMatrix t = build_transfer(g, edges, g, 1e-8);
        CHECK((dense(t) - Eigen::MatrixXd::Identity(4, 4)).norm() == 0.0);
    }
    SUBCASE("midpoint")
    {
        const TransferMatrix t = build_transfer(g, edges, {{1.5, 0}}, 1e-8);
        const Eigen::MatrixXd w = dense(t);
        CHECK(w(0, 1) == 0.5);
        CHECK(w(0, 2) == 0.5);
        CHECK(w.row(0).sum() == 1.0);
    }
    SUBCASE("randomized non-matched interface reproduces affine fields")
    {
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> s(0.0, 1.0);
        std::vector<Point> local{g.front(), g.back()};
        for (int i = 0; i < 40; ++i) {
            const auto& e = edges[i % edges.size()];
            local.push_back(g[e[0]] + s(rng) * (g[e[1]] - g[e[0]]));
        }
        const TransferMatrix t = build_transfer(g, edges, local, 1e-8);
        const Eigen::MatrixXd w = dense(t);
        for (int r = 0; r < w.rows(); ++r) {
            CHECK(w.row(r).sum() == 1.0);
            CHECK(w.row(r).minCoeff() >= 0.0);
        }
        auto field = [](const Point& x) { return Point(0.3 + 1.7 * x.x() - 0.4 * x.y(), -2.0 + 0.25 * x.x() + 3.0 * x.y()); };
        Vector ug(2 * g.size());
        for (std::size_t i = 0; i < g.size(); ++i) ug.segment<2>(2 * i) = field(g[i]);
        const Vector ul = t.to_local(ug);
        for (std::size_t i = 0; i < local.size(); ++i) {
            CHECK((ul.segment<2>(2 * i) - field(local[i])).norm() < 1e-13);
        }
        // The transpose conserves the resultant of nodal forces.
        Vector f = Vector::Ones(2 * local.size());
        const Vector fg = t.to_global(f);
        CHECK(fg.sum() == doctest::Approx(f.sum()));
    }
    SUBCASE("projection failure")
    {
        CHECK_THROWS_AS(build_transfer(g, edges, {{1.0, 0.5}}, 1e-8), ProjectionFailure);
    }
}

TEST_CASE("Aitken relaxation")
{
    SUBCASE("scalar secant update")
    {
        CouplingState s;
        s.P = Vector::Zero(1);
        s.r_prev = Vector::Constant(1, 1.0);
        s.r_curr = Vector::Constant(1, 0.5);
        s.omega = 1.0;
        s.iter = 2;
        accelerate(s, Acceleration::aitken, 1.0);
        CHECK(s.omega == doctest::Approx(2.0));
        CHECK(s.P[0] == doctest::Approx(1.0));
    }
    SUBCASE("fixed relaxation with a zero residual")
    {
        CouplingState s;
        s.P = Vector::Constant(2, 3.0);
        s.r_curr = Vector::Zero(2);
        s.iter = 1;
        accelerate(s, Acceleration::fixed, 1.0);
        CHECK(s.P == Vector::Constant(2, 3.0));
    }
    SUBCASE("degenerate secant falls back to omega = 1")
    {
        CouplingState s;
        s.P = Vector::Zero(1);
        s.r_prev = Vector::Constant(1, 0.5);
        s.r_curr = Vector::Constant(1, 0.5);
        s.omega = 0.3;
        s.iter = 3;
        accelerate(s, Acceleration::aitken, 1.0);
        CHECK(s.omega == 1.0);
        CHECK(s.degenerate_aitken == 1);
    }
    SUBCASE("linear toy with contraction 0.9")
    {
        // r(P) = (1 - rho) (P* - P): plain substitution contracts the error by rho.
        const double rho = 0.9, target = 3.0, tol = 1e-10;
        auto run = [&](Acceleration mode) {
            CouplingState s;
            s.P = Vector::Zero(1);
            for (;;) {
                s.r_prev = s.r_curr;
                s.r_curr = Vector::Constant(1, (1 - rho) * (target - s.P[0]));
                ++s.iter;
                s.residual_history.push_back(s.r_curr.norm());
                if (s.relative_residual() < tol || s.iter > 1000) return s;
                accelerate(s, mode, 1.0);
            }
        };
        const CouplingState aitken = run(Acceleration::aitken);
        const CouplingState fixed = run(Acceleration::fixed);
        CHECK(aitken.iter <= 3);
        const int expected = static_cast<int>(std::ceil(std::log(tol) / std::log(rho))) + 1;
        CHECK(std::abs(fixed.iter - expected) <= 1);
        CHECK(aitken.P[0] == doctest::Approx(target));
    }
}

TEST_CASE("partition of the desk plate")
{
    const DeskMeshes matched = desk_meshes(DeskSpec{}, 2);
    const DeskMeshes finer = desk_meshes(DeskSpec{}, 3);
    const DomainPartition part = make_partition(matched.global, {{"foot", {0, 0, 20, 20}, matched.local}});
    const Zone& z = part.zones[0];

    std::vector<int> all(z.aux_elements);
    all.insert(all.end(), part.complement_elements.begin(), part.complement_elements.end());
    std::sort(all.begin(), all.end());
    CHECK(all.size() == static_cast<std::size_t>(matched.global.num_elements()));
    CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());

    const double tol = 1e-8 * matched.global.min_edge_length();
    for (int n : z.gamma_global) CHECK(std::abs(part.global.nodes[n].x() - 20.0) <= tol);
    for (int n : z.gamma_local) CHECK(std::abs(z.local.nodes[n].x() - 20.0) <= tol);
    CHECK(z.gamma_global.size() == z.gamma_local.size());
    // Matched interface: interpolation collapses to the identity.
    const Eigen::MatrixXd w = dense(z.transfer);
    CHECK((w - Eigen::MatrixXd::Identity(w.rows(), w.cols())).norm() == 0.0);

    const DomainPartition nm = make_partition(finer.global, {{"foot", {0, 0, 20, 20}, finer.local}});
    const Eigen::MatrixXd wn = dense(nm.zones[0].transfer);
    CHECK(wn.rows() > wn.cols());
    for (int r = 0; r < wn.rows(); ++r) CHECK(wn.row(r).sum() == 1.0);
}

TEST_CASE("local model identical to the auxiliary model")
{
    const DeskMeshes dm = desk_meshes(DeskSpec{}, 2);
    const std::array<double, 4> box{0, 0, 20, 20};
    Mesh aux = submesh(dm.global, elements_in_box(dm.global, box));
    label_plate_boundary(aux, 60, 20);
    const CoupledProblem p = CoupledProblem::build(make_partition(dm.global, {{"foot", box, aux}}), MaterialParams{},
                                                   fixtures::plate_load(-320, 0.08));
    CouplingState state;
    state.P = Vector::Zero(p.interface_size());
    const GlIterationResult r = gl_iteration(p, CoupledFields::zero(p), context(0, 60, p, LocalStepping::single_step),
                                             policy_with(SteppingPolicy::unlimited()), state);
    REQUIRE_FALSE(r.reduction);
    double p_f = 0.0;
    for (const auto& g : r.fields.local[0].gp_states) p_f = std::max(p_f, g.p_f);
    CHECK(p_f > 0.0);  // the step is viscoplastic
    CHECK(r.residual_norm == 0.0);
    CHECK(state.P.norm() == 0.0);

    SUBCASE("merged field equals the global field")
    {
        // The local solve reproduces the global field to Newton tolerance.
        const MergedField m = assemble_gl_solution(p.partition, r.fields.global, r.fields.local);
        const MergedField g = MergedField::from_model(p.global.mesh, r.fields.global);
        const double scale = g.u.lpNorm<Eigen::Infinity>();
        for (std::size_t i = 0; i < m.node_xy.size(); ++i) {
            const int j = g.nearest_node(m.node_xy[i]);
            CHECK((g.node_xy[j] - m.node_xy[i]).norm() < 1e-9);
            CHECK((m.u.segment<2>(2 * i) - g.u.segment<2>(2 * j)).norm() <= 1e-8 * scale);
        }
    }
    SUBCASE("zero fields merge to zero")
    {
        const CoupledFields zero = CoupledFields::zero(p);
        const MergedField m = assemble_gl_solution(p.partition, zero.global, zero.local);
        CHECK(m.u.norm() == 0.0);
    }
}

TEST_CASE("elastic coupling on matched meshes")
{
    const Scenario s = fixtures::scenario("elastic");
    const CoupledProblem p = build_problem(s);
    const SteppingPolicy policy = policy_with(SteppingPolicy::unlimited());
    const SyncContext ctx = context(0, 60, p, LocalStepping::internal_ats);
    const Vector P0 = Vector::Zero(p.interface_size());

    const StationOutcome aitken = converge_station(p, CoupledFields::zero(p), ctx, policy, tight(Acceleration::aitken), P0);
    REQUIRE(aitken.converged);

    SUBCASE("equals the monolithic solve")
    {
        Model ref = reference_model(s);
        IncrementData data;
        data.amplitude = ctx.amplitude;
        const IncrementResult mono = solve_increment(ref, FieldState::zero(ref.mesh), 0, 60, policy, data);
        const MergedField merged = assemble_gl_solution(p.partition, aitken.last.fields.global, aitken.last.fields.local);
        const MergedField exact = MergedField::from_model(ref.mesh, mono.state);
        REQUIRE(merged.node_xy.size() == exact.node_xy.size());
        Vector diff(exact.u.size());
        for (std::size_t i = 0; i < merged.node_xy.size(); ++i) {
            const int j = exact.nearest_node(merged.node_xy[i]);
            REQUIRE((exact.node_xy[j] - merged.node_xy[i]).norm() < 1e-9);
            diff.segment<2>(2 * i) = merged.u.segment<2>(2 * i) - exact.u.segment<2>(2 * j);
        }
        CHECK(diff.norm() <= 1e-9 * exact.u.norm());
    }
    SUBCASE("fixed relaxation reaches the same interface load")
    {
        const CouplingOptions o = tight(Acceleration::fixed, 1e-8);
        const StationOutcome fixed = converge_station(p, CoupledFields::zero(p), ctx, policy, o, P0);
        REQUIRE(fixed.converged);
        CHECK(fixed.coupling.iter > aitken.coupling.iter);
        CHECK((fixed.coupling.P - aitken.coupling.P).norm() <= 10 * o.tol * aitken.coupling.P.norm());
    }
    SUBCASE("built interpolation and identity shortcut agree")
    {
        Scenario si = s;
        si.identity_transfer = !s.identity_transfer;
        const CoupledProblem q = build_problem(si);
        const StationOutcome other = converge_station(q, CoupledFields::zero(q), ctx, policy, tight(Acceleration::aitken), P0);
        CHECK((other.coupling.P - aitken.coupling.P).norm() <= 1e-9 * aitken.coupling.P.norm());
    }
    SUBCASE("interface equilibrium against the complement reactions")
    {
        const Zone& z = p.partition.zones[0];
        std::vector<int> node_map;
        const Mesh comp = submesh(p.global.mesh, p.partition.complement_elements, &node_map);
        FieldState fc = FieldState::zero(comp);
        for (std::size_t i = 0; i < node_map.size(); ++i) fc.u.segment<2>(2 * i) = aitken.last.fields.global.u.segment<2>(2 * node_map[i]);
        std::vector<int> gamma_c;
        for (int n : z.gamma_global) {
            gamma_c.push_back(static_cast<int>(std::find(node_map.begin(), node_map.end(), n) - node_map.begin()));
        }
        const Vector lam_c = extract_reactions(comp, s.material, fc, s.load, 1.0, 60.0, FieldState::zero(comp), gamma_c);
        const Vector lam_l = extract_reactions(z.local, s.material, aitken.last.fields.local[0], s.load, 1.0, 60.0,
                                               FieldState::zero(z.local), z.gamma_local);
        const Vector balance = z.transfer.to_global(lam_l) + lam_c;
        CHECK(balance.norm() <= 1e-9 * lam_c.norm());
    }
}
