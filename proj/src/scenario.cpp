#include "glc/scenario.hpp"

#include "glc/errors.hpp"
#include "glc/meshgen.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <limits>

namespace glc {

namespace {

using nlohmann::json;

double number_or_inf(const json& j)
{
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
        throw ScenarioError("expected a number or \"inf\", got \"" + s + "\"");
    }
    return j.get<double>();
}

json inf_or_number(double v)
{
    if (std::isinf(v)) return "inf";
    return v;
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where)
{
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : keys) ok = ok || it.key() == k;
        if (!ok) throw ScenarioError(fmt::format("unknown key '{}' in {}", it.key(), where));
    }
}

SteppingPolicy policy_from_json(const json& j)
{
    reject_unknown(j,
                   {"dp_max", "divergence_factor", "slow_convergence_factor", "growth_factor",
                    "fast_steps_before_growth", "fast_iterations", "newton_tol", "newton_max_iter",
                    "slow_check_iteration", "slow_ratio", "dt_min_fraction", "force_floor"},
                   "policy");
    SteppingPolicy p;
    if (j.contains("dp_max")) p.dp_max = number_or_inf(j["dp_max"]);
    p.divergence_factor = j.value("divergence_factor", p.divergence_factor);
    p.slow_convergence_factor = j.value("slow_convergence_factor", p.slow_convergence_factor);
    p.growth_factor = j.value("growth_factor", p.growth_factor);
    p.fast_steps_before_growth = j.value("fast_steps_before_growth", p.fast_steps_before_growth);
    p.fast_iterations = j.value("fast_iterations", p.fast_iterations);
    p.newton_tol = j.value("newton_tol", p.newton_tol);
    p.newton_max_iter = j.value("newton_max_iter", p.newton_max_iter);
    p.slow_check_iteration = j.value("slow_check_iteration", p.slow_check_iteration);
    p.slow_ratio = j.value("slow_ratio", p.slow_ratio);
    p.dt_min_fraction = j.value("dt_min_fraction", p.dt_min_fraction);
    p.force_floor = j.value("force_floor", p.force_floor);
    return p;
}

}  // namespace

std::filesystem::path Scenario::resolve(const std::filesystem::path& p) const
{
    if (p.empty() || p.is_absolute()) return p;
    return base_dir / p;
}

Scenario Scenario::from_json(const json& j, const std::filesystem::path& base_dir)
{
    try {
        reject_unknown(j, {"name", "model", "material", "meshes", "partition", "loads", "cycle", "policy", "run", "outputs"},
                       "scenario");
        Scenario s;
        s.base_dir = base_dir;
        s.name = j.at("name").get<std::string>();
        s.model_type = j.value("model", std::string("plane_strain"));
        if (s.model_type != "plane_strain") {
            throw ScenarioError(fmt::format("model '{}' is not supported (only plane_strain)", s.model_type));
        }
        if (j.contains("material")) {
            s.material = MaterialParams::from_key_values(j["material"].get<std::map<std::string, double>>());
        }
        s.material.validate();

        const json& meshes = j.at("meshes");
        reject_unknown(meshes, {"global", "reference"}, "meshes");
        if (meshes.contains("global")) s.global_mesh = meshes["global"].get<std::string>();
        if (meshes.contains("reference")) s.reference_mesh = meshes["reference"].get<std::string>();

        if (j.contains("partition")) {
            const json& part = j["partition"];
            reject_unknown(part, {"zones", "identity_transfer"}, "partition");
            s.identity_transfer = part.value("identity_transfer", false);
            for (const json& z : part.at("zones")) {
                reject_unknown(z, {"name", "box", "local"}, "zone");
                ZoneEntry e;
                e.name = z.at("name").get<std::string>();
                e.box = z.at("box").get<std::array<double, 4>>();
                e.local_mesh = z.at("local").get<std::string>();
                s.zones.push_back(std::move(e));
            }
        }

        if (j.contains("loads")) {
            const json& loads = j["loads"];
            reject_unknown(loads, {"pressures", "body_force", "dirichlet"}, "loads");
            for (const json& p : loads.value("pressures", json::array())) {
                s.load.pressures.push_back({p.at("side_set").get<std::string>(), p.at("value").get<double>()});
            }
            if (loads.contains("body_force")) {
                const json& b = loads["body_force"];
                s.load.body.coefficient = b.at("coefficient").get<double>();
                const auto o = b.value("origin", std::array<double, 2>{0.0, 0.0});
                const auto d = b.value("direction", std::array<double, 2>{1.0, 0.0});
                s.load.body.origin = Point(o[0], o[1]);
                s.load.body.direction = Point(d[0], d[1]);
                if (s.load.body.direction.norm() == 0.0) throw ScenarioError("body force direction is zero");
            }
            for (const json& d : loads.value("dirichlet", json::array())) {
                s.load.dirichlet.push_back({d.at("node_set").get<std::string>(), d.value("x", false), d.value("y", false),
                                            d.value("value", 0.0)});
            }
        }

        if (j.contains("cycle")) {
            s.cycle.stations.clear();
            for (const json& st : j["cycle"]) s.cycle.stations.push_back({st.at(0).get<double>(), st.at(1).get<double>()});
        }
        s.cycle.validate();
        if (j.contains("policy")) s.policy = policy_from_json(j["policy"]);
        s.policy.validate();

        if (j.contains("run")) {
            const json& r = j["run"];
            reject_unknown(r, {"mode", "preset", "tol", "aitken", "max_gl_iters", "omega", "warm_start", "accept_at_cap",
                               "absolute_floor"},
                           "run");
            if (r.value("preset", std::string()) == "optimized") {
                s.coupling = CouplingOptions::optimized();
            } else if (r.contains("preset")) {
                throw ScenarioError("unknown preset '" + r["preset"].get<std::string>() + "'");
            }
            if (r.contains("mode")) s.mode = run_mode_from_string(r["mode"].get<std::string>());
            s.coupling.tol = r.value("tol", s.coupling.tol);
            if (r.contains("aitken")) {
                s.coupling.acceleration = r["aitken"].get<bool>() ? Acceleration::aitken : Acceleration::fixed;
            }
            s.coupling.max_iters = r.value("max_gl_iters", s.coupling.max_iters);
            s.coupling.omega = r.value("omega", s.coupling.omega);
            s.coupling.warm_start = r.value("warm_start", s.coupling.warm_start);
            s.coupling.accept_at_cap = r.value("accept_at_cap", s.coupling.accept_at_cap);
            s.coupling.absolute_floor = r.value("absolute_floor", s.coupling.absolute_floor);
        }
        s.coupling.validate();
        s.outputs = j.value("outputs", std::string("out/") + s.name);
        return s;
    } catch (const ScenarioError&) {
        throw;
    } catch (const std::exception& ex) {
        throw ScenarioError(ex.what());
    }
}

Scenario Scenario::read(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ScenarioError("cannot open scenario " + path.string());
    json j;
    try {
        in >> j;
    } catch (const std::exception& ex) {
        throw ScenarioError(fmt::format("{}: {}", path.string(), ex.what()));
    }
    return from_json(j, path.parent_path());
}

json Scenario::to_json() const
{
    json j;
    j["name"] = name;
    j["model"] = model_type;
    j["material"] = material.to_key_values();
    json meshes = json::object();
    if (!global_mesh.empty()) meshes["global"] = global_mesh.string();
    if (!reference_mesh.empty()) meshes["reference"] = reference_mesh.string();
    j["meshes"] = meshes;
    json zone_list = json::array();
    for (const auto& z : zones) {
        zone_list.push_back({{"name", z.name}, {"box", z.box}, {"local", z.local_mesh.string()}});
    }
    j["partition"] = {{"zones", zone_list}, {"identity_transfer", identity_transfer}};
    json pressures = json::array();
    for (const auto& p : load.pressures) pressures.push_back({{"side_set", p.side_set}, {"value", p.value}});
    json dirichlet = json::array();
    for (const auto& d : load.dirichlet) {
        dirichlet.push_back({{"node_set", d.node_set}, {"x", d.x}, {"y", d.y}, {"value", d.value}});
    }
    j["loads"] = {{"pressures", pressures},
                  {"body_force",
                   {{"coefficient", load.body.coefficient},
                    {"origin", {load.body.origin.x(), load.body.origin.y()}},
                    {"direction", {load.body.direction.x(), load.body.direction.y()}}}},
                  {"dirichlet", dirichlet}};
    json cyc = json::array();
    for (const auto& [t, a] : cycle.stations) cyc.push_back({t, a});
    j["cycle"] = cyc;
    j["policy"] = {{"dp_max", inf_or_number(policy.dp_max)},
                   {"divergence_factor", policy.divergence_factor},
                   {"slow_convergence_factor", policy.slow_convergence_factor},
                   {"growth_factor", policy.growth_factor},
                   {"fast_steps_before_growth", policy.fast_steps_before_growth},
                   {"fast_iterations", policy.fast_iterations},
                   {"newton_tol", policy.newton_tol},
                   {"newton_max_iter", policy.newton_max_iter},
                   {"slow_check_iteration", policy.slow_check_iteration},
                   {"slow_ratio", policy.slow_ratio},
                   {"dt_min_fraction", policy.dt_min_fraction},
                   {"force_floor", policy.force_floor}};
    j["run"] = {{"mode", to_string(mode)},
                {"tol", coupling.tol},
                {"aitken", coupling.acceleration == Acceleration::aitken},
                {"max_gl_iters", coupling.max_iters},
                {"omega", coupling.omega},
                {"warm_start", coupling.warm_start},
                {"accept_at_cap", coupling.accept_at_cap},
                {"absolute_floor", coupling.absolute_floor}};
    j["outputs"] = outputs.string();
    return j;
}

void Scenario::validate_for(RunMode m) const
{
    auto need = [&](const std::filesystem::path& p, const std::string& what) {
        if (p.empty()) throw ScenarioError(fmt::format("scenario '{}': mode {} needs a {} mesh", name, to_string(m), what));
        if (!std::filesystem::exists(resolve(p))) {
            throw ScenarioError(fmt::format("scenario '{}': {} mesh {} not found", name, what, resolve(p).string()));
        }
    };
    if (m == RunMode::monolithic) {
        need(reference_mesh, "reference");
        return;
    }
    need(global_mesh, "global");
    if (zones.empty()) throw ScenarioError(fmt::format("scenario '{}': coupled modes need at least one zone", name));
    for (const auto& z : zones) need(z.local_mesh, "local");
}

namespace {
Mesh load_mesh(const Scenario& s, const std::filesystem::path& p)
{
    try {
        return read_mesh(s.resolve(p));
    } catch (const std::exception& ex) {
        throw ScenarioError(fmt::format("mesh {}: {}", s.resolve(p).string(), ex.what()));
    }
}
}  // namespace

CoupledProblem build_problem(const Scenario& s, std::optional<std::uint64_t> seed)
{
    s.validate_for(RunMode::weak);
    const Mesh global = load_mesh(s, s.global_mesh);
    std::vector<ZoneSpec> specs;
    for (const auto& z : s.zones) specs.push_back({z.name, z.box, load_mesh(s, z.local_mesh)});
    DomainPartition part = make_partition(global, specs, s.identity_transfer && !seed);
    if (seed) {
        for (std::size_t i = 0; i < specs.size(); ++i) {
            specs[i].local = perturb_local(part.zones[i].local, part.zones[i].gamma_local, *seed + i);
        }
        part = make_partition(global, specs, false);
    }
    return CoupledProblem::build(std::move(part), s.material, s.load);
}

Model reference_model(const Scenario& s)
{
    s.validate_for(RunMode::monolithic);
    Model m;
    m.name = "reference";
    m.mesh = load_mesh(s, s.reference_mesh);
    m.material = s.material;
    m.load = s.load;
    return m;
}

Model global_model(const Scenario& s)
{
    if (s.global_mesh.empty()) throw ScenarioError(fmt::format("scenario '{}' has no global mesh", s.name));
    Model m;
    m.name = "global";
    m.mesh = load_mesh(s, s.global_mesh);
    m.material = s.material;
    m.load = s.load;
    return m;
}

}  // namespace glc
