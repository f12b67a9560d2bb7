#include "glc/report.hpp"

#include "glc/errors.hpp"

#include <Eigen/Geometry>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace glc {

using nlohmann::json;

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

namespace {

json inf_or_number(double v)
{
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

double number_or_inf(const json& j)
{
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        throw std::invalid_argument("bad number '" + s + "'");
    }
    return j.get<double>();
}

json points_xy(const std::vector<Point>& pts, json& ys)
{
    json xs = json::array();
    ys = json::array();
    for (const auto& p : pts) {
        xs.push_back(p.x());
        ys.push_back(p.y());
    }
    return xs;
}

std::vector<Point> points_from(const json& xs, const json& ys)
{
    std::vector<Point> out;
    for (std::size_t i = 0; i < xs.size(); ++i) out.emplace_back(xs[i].get<double>(), ys[i].get<double>());
    return out;
}

json step_to_json(const StepRecord& s)
{
    return {{"t_start", s.t_start},
            {"t_end", s.t_end},
            {"newton_iters", s.newton_iters},
            {"cutbacks_divergence", s.cutbacks_divergence},
            {"cutbacks_slow", s.cutbacks_slow},
            {"cutbacks_dp", s.cutbacks_dp},
            {"last_cause", to_string(s.last_cause)},
            {"dp_observed", s.dp_observed}};
}

StepRecord step_from_json(const json& j)
{
    StepRecord s;
    s.t_start = j.at("t_start").get<double>();
    s.t_end = j.at("t_end").get<double>();
    s.newton_iters = j.at("newton_iters").get<int>();
    s.cutbacks_divergence = j.at("cutbacks_divergence").get<int>();
    s.cutbacks_slow = j.at("cutbacks_slow").get<int>();
    s.cutbacks_dp = j.at("cutbacks_dp").get<int>();
    s.last_cause = cutback_cause_from_string(j.at("last_cause").get<std::string>());
    s.dp_observed = j.at("dp_observed").get<double>();
    return s;
}

json grid_to_json(const TimeGrid& g)
{
    json prov = json::array();
    for (Provenance p : g.provenance()) prov.push_back(to_string(p));
    return {{"times", g.times()}, {"provenance", prov}};
}

TimeGrid grid_from_json(const json& j)
{
    TimeGrid g;
    const auto times = j.at("times").get<std::vector<double>>();
    const auto prov = j.at("provenance").get<std::vector<std::string>>();
    if (times.size() != prov.size()) throw std::invalid_argument("grid times and provenance differ in length");
    for (std::size_t i = 0; i < times.size(); ++i) g.insert(times[i], provenance_from_string(prov[i]));
    return g;
}

}  // namespace

json report_to_json(const RunReport& r)
{
    json j;
    j["scenario"] = r.scenario;
    j["mode"] = to_string(r.mode);
    const SteppingPolicy& p = r.policy;
    j["policy"] = {{"dp_max", inf_or_number(p.dp_max)},
                   {"divergence_factor", p.divergence_factor},
                   {"slow_convergence_factor", p.slow_convergence_factor},
                   {"growth_factor", p.growth_factor},
                   {"fast_steps_before_growth", p.fast_steps_before_growth},
                   {"fast_iterations", p.fast_iterations},
                   {"newton_tol", p.newton_tol},
                   {"newton_max_iter", p.newton_max_iter},
                   {"slow_check_iteration", p.slow_check_iteration},
                   {"slow_ratio", p.slow_ratio},
                   {"dt_min_fraction", p.dt_min_fraction},
                   {"force_floor", p.force_floor}};
    const CouplingOptions& c = r.coupling;
    j["coupling"] = {{"tol", c.tol},
                     {"max_iters", c.max_iters},
                     {"acceleration", c.acceleration == Acceleration::aitken ? "aitken" : "fixed"},
                     {"omega", c.omega},
                     {"warm_start", c.warm_start},
                     {"accept_at_cap", c.accept_at_cap},
                     {"absolute_floor", c.absolute_floor}};
    json cyc = json::array();
    for (const auto& [t, a] : r.cycle.stations) cyc.push_back({t, a});
    j["cycle"] = cyc;
    json stations = json::array();
    for (const auto& s : r.stations) {
        stations.push_back({{"t_start", s.t_start},
                            {"t_end", s.t_end},
                            {"provenance", to_string(s.provenance)},
                            {"gl_iterations", s.gl_iterations},
                            {"abandoned_iterations", s.abandoned_iterations},
                            {"restarts", s.restarts},
                            {"converged", s.converged},
                            {"residuals", s.residuals},
                            {"omegas", s.omegas},
                            {"local_ats", s.local_ats}});
    }
    j["stations"] = stations;
    json models = json::array();
    for (const auto& m : r.models) {
        json steps = json::array();
        for (const auto& s : m.steps) steps.push_back(step_to_json(s));
        models.push_back({{"model", m.model}, {"grid", grid_to_json(m.grid)}, {"steps", steps}});
    }
    j["models"] = models;
    json ats = json::object();
    for (Provenance pv : {Provenance::prediscretization, Provenance::global_ats, Provenance::local_ats, Provenance::cutback}) {
        ats[to_string(pv)] = r.ats_count(pv);
    }
    j["summary"] = {{"gl_iterations_total", r.gl_iterations_total()}, {"ats", ats}, {"stations", r.stations.size()}};
    j["wall_time"] = r.wall_time;
    j["end"] = {{"max_von_mises", r.end.max_von_mises},
                {"von_mises_location", {r.end.von_mises_location.x(), r.end.von_mises_location.y()}},
                {"max_p_f", r.end.max_p_f},
                {"p_f_location", {r.end.p_f_location.x(), r.end.p_f_location.y()}}};
    json gy, ny;
    const json gx = points_xy(r.end_field.gp_xy, gy);
    const json nx = points_xy(r.end_field.node_xy, ny);
    j["end_field"] = {{"gp", {{"x", gx}, {"y", gy}, {"p_f", r.end_field.p_f}, {"p_s", r.end_field.p_s},
                              {"von_mises", r.end_field.von_mises}}},
                      {"nodes", {{"x", nx}, {"y", ny}, {"ux", r.end_field.ux}, {"uy", r.end_field.uy}}}};
    return j;
}

RunReport report_from_json(const json& j)
{
    RunReport r;
    r.scenario = j.at("scenario").get<std::string>();
    r.mode = run_mode_from_string(j.at("mode").get<std::string>());
    const json& p = j.at("policy");
    r.policy.dp_max = number_or_inf(p.at("dp_max"));
    r.policy.divergence_factor = p.at("divergence_factor").get<double>();
    r.policy.slow_convergence_factor = p.at("slow_convergence_factor").get<double>();
    r.policy.growth_factor = p.at("growth_factor").get<double>();
    r.policy.fast_steps_before_growth = p.at("fast_steps_before_growth").get<int>();
    r.policy.fast_iterations = p.at("fast_iterations").get<int>();
    r.policy.newton_tol = p.at("newton_tol").get<double>();
    r.policy.newton_max_iter = p.at("newton_max_iter").get<int>();
    r.policy.slow_check_iteration = p.at("slow_check_iteration").get<int>();
    r.policy.slow_ratio = p.at("slow_ratio").get<double>();
    r.policy.dt_min_fraction = p.at("dt_min_fraction").get<double>();
    r.policy.force_floor = p.at("force_floor").get<double>();
    const json& c = j.at("coupling");
    r.coupling.tol = c.at("tol").get<double>();
    r.coupling.max_iters = c.at("max_iters").get<int>();
    r.coupling.acceleration = c.at("acceleration").get<std::string>() == "aitken" ? Acceleration::aitken : Acceleration::fixed;
    r.coupling.omega = c.at("omega").get<double>();
    r.coupling.warm_start = c.at("warm_start").get<bool>();
    r.coupling.accept_at_cap = c.at("accept_at_cap").get<bool>();
    r.coupling.absolute_floor = c.at("absolute_floor").get<double>();
    for (const json& st : j.at("cycle")) r.cycle.stations.push_back({st.at(0).get<double>(), st.at(1).get<double>()});
    for (const json& s : j.at("stations")) {
        StationRecord st;
        st.t_start = s.at("t_start").get<double>();
        st.t_end = s.at("t_end").get<double>();
        st.provenance = provenance_from_string(s.at("provenance").get<std::string>());
        st.gl_iterations = s.at("gl_iterations").get<int>();
        st.abandoned_iterations = s.at("abandoned_iterations").get<int>();
        st.restarts = s.at("restarts").get<int>();
        st.converged = s.at("converged").get<bool>();
        st.residuals = s.at("residuals").get<std::vector<double>>();
        st.omegas = s.at("omegas").get<std::vector<double>>();
        st.local_ats = s.at("local_ats").get<std::vector<int>>();
        r.stations.push_back(std::move(st));
    }
    for (const json& m : j.at("models")) {
        ModelLog log;
        log.model = m.at("model").get<std::string>();
        log.grid = grid_from_json(m.at("grid"));
        for (const json& s : m.at("steps")) log.steps.push_back(step_from_json(s));
        r.models.push_back(std::move(log));
    }
    r.wall_time = j.at("wall_time").get<double>();
    const json& e = j.at("end");
    r.end.max_von_mises = e.at("max_von_mises").get<double>();
    r.end.von_mises_location = Point(e.at("von_mises_location").at(0).get<double>(), e.at("von_mises_location").at(1).get<double>());
    r.end.max_p_f = e.at("max_p_f").get<double>();
    r.end.p_f_location = Point(e.at("p_f_location").at(0).get<double>(), e.at("p_f_location").at(1).get<double>());
    const json& gp = j.at("end_field").at("gp");
    r.end_field.gp_xy = points_from(gp.at("x"), gp.at("y"));
    r.end_field.p_f = gp.at("p_f").get<std::vector<double>>();
    r.end_field.p_s = gp.at("p_s").get<std::vector<double>>();
    r.end_field.von_mises = gp.at("von_mises").get<std::vector<double>>();
    const json& nd = j.at("end_field").at("nodes");
    r.end_field.node_xy = points_from(nd.at("x"), nd.at("y"));
    r.end_field.ux = nd.at("ux").get<std::vector<double>>();
    r.end_field.uy = nd.at("uy").get<std::vector<double>>();
    return r;
}

RunReport read_report(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open report " + path.string());
    json j;
    in >> j;
    return report_from_json(j);
}

// --- CSV artifacts ---------------------------------------------------------------------

namespace {

std::string file_key(const std::string& model)
{
    std::string s = model;
    for (char& ch : s) {
        if (ch == ':' || ch == '/' || ch == ' ') ch = '_';
    }
    return s;
}

std::ofstream open_out(const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

}  // namespace

void write_grid_csv(const TimeGrid& grid, const std::filesystem::path& path)
{
    auto out = open_out(path);
    out << "station,time,provenance\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
        out << i << ',' << format_double(grid.times()[i]) << ',' << to_string(grid.provenance()[i]) << '\n';
    }
}

void write_run_artifacts(const RunReport& report, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    {
        auto out = open_out(dir / "report.json");
        out << report_to_json(report).dump(2) << '\n';
    }
    for (const auto& m : report.models) {
        const std::string key = file_key(m.model);
        write_grid_csv(m.grid, dir / ("grid_" + key + ".csv"));
        auto out = open_out(dir / ("steps_" + key + ".csv"));
        out << "t_start,t_end,newton_iters,cutback_cause,cutbacks,dp_observed\n";
        for (const auto& s : m.steps) {
            out << format_double(s.t_start) << ',' << format_double(s.t_end) << ',' << s.newton_iters << ','
                << to_string(s.last_cause) << ',' << s.cutbacks() << ',' << format_double(s.dp_observed) << '\n';
        }
    }
    {
        auto out = open_out(dir / "residuals.csv");
        out << "t_start,t_end,iter,residual_norm,relative_residual,omega,local_ats\n";
        for (const auto& s : report.stations) {
            for (std::size_t i = 0; i < s.residuals.size(); ++i) {
                const double rel = s.residuals[0] == 0.0 ? 0.0 : s.residuals[i] / s.residuals[0];
                const double omega = i < s.omegas.size() ? s.omegas[i] : 0.0;
                const int ats = i < s.local_ats.size() ? s.local_ats[i] : 0;
                out << format_double(s.t_start) << ',' << format_double(s.t_end) << ',' << i << ','
                    << format_double(s.residuals[i]) << ',' << format_double(rel) << ',' << format_double(omega) << ','
                    << ats << '\n';
            }
        }
    }
    std::map<std::string, int> counter;
    for (const auto& snap : report.snapshots) {
        const std::string key = file_key(snap.model);
        const int k = counter[key]++;
        const MergedField& f = snap.field;
        auto nodes = open_out(dir / fmt::format("fields_nodes_{}_{}.csv", key, k));
        nodes << "t,node,x,y,ux,uy\n";
        for (std::size_t i = 0; i < f.node_xy.size(); ++i) {
            nodes << format_double(snap.t) << ',' << i << ',' << format_double(f.node_xy[i].x()) << ','
                  << format_double(f.node_xy[i].y()) << ',' << format_double(f.u[2 * i]) << ','
                  << format_double(f.u[2 * i + 1]) << '\n';
        }
        auto gps = open_out(dir / fmt::format("fields_gp_{}_{}.csv", key, k));
        gps << "t,gp,x,y,p_f,p_s,von_mises,sxx,syy,szz,sxy\n";
        for (std::size_t i = 0; i < f.gp_xy.size(); ++i) {
            const Vec4& s = f.gp_stresses[i].sigma;
            gps << format_double(snap.t) << ',' << i << ',' << format_double(f.gp_xy[i].x()) << ','
                << format_double(f.gp_xy[i].y()) << ',' << format_double(f.gp_states[i].p_f) << ','
                << format_double(f.gp_states[i].p_s) << ',' << format_double(f.gp_stresses[i].von_mises()) << ','
                << format_double(s[0]) << ',' << format_double(s[1]) << ',' << format_double(s[2]) << ','
                << format_double(xy_component(s)) << '\n';
        }
    }
}

// --- comparison ---------------------------------------------------------------------------

namespace {
double relative_error(double run, double reference)
{
    if (run == reference) return 0.0;
    return (run - reference) / reference;
}
}  // namespace

double Comparison::p_f_error() const { return relative_error(p_f_run, p_f_reference); }
double Comparison::von_mises_error() const { return relative_error(von_mises_run, von_mises_reference); }

Comparison compare_runs(const RunReport& reference, const RunReport& run)
{
    if (!(reference.cycle == run.cycle)) throw IncompatibleRuns("the runs use different load cycles");
    if (reference.end_field.gp_xy.empty() || run.end_field.gp_xy.empty()) {
        throw IncompatibleRuns("a run has no end-of-cycle field");
    }
    auto bbox = [](const std::vector<Point>& pts) {
        Eigen::AlignedBox2d b;
        for (const auto& p : pts) b.extend(p);
        return b;
    };
    const auto ba = bbox(reference.end_field.node_xy);
    const auto bb = bbox(run.end_field.node_xy);
    const double diag = ba.diagonal().norm();
    if ((ba.min() - bb.min()).norm() > 1e-6 * diag || (ba.max() - bb.max()).norm() > 1e-6 * diag) {
        throw IncompatibleRuns("the runs cover different geometries");
    }
    Comparison c;
    // Most loaded point: maximal p_f, or maximal von Mises stress when the
    // reference stayed elastic.
    const FieldCloud& ref = reference.end_field;
    const bool plastic = *std::max_element(ref.p_f.begin(), ref.p_f.end()) > 0.0;
    const std::vector<double>& key = plastic ? ref.p_f : ref.von_mises;
    const int i = static_cast<int>(std::max_element(key.begin(), key.end()) - key.begin());
    c.location = reference.end_field.gp_xy[i];
    const int j = run.end_field.nearest_gp(c.location);
    c.matched = run.end_field.gp_xy[j];
    c.p_f_reference = reference.end_field.p_f[i];
    c.p_f_run = run.end_field.p_f[j];
    c.von_mises_reference = reference.end_field.von_mises[i];
    c.von_mises_run = run.end_field.von_mises[j];
    return c;
}

// --- self-check ----------------------------------------------------------------------------

namespace {

enum class Col { real, integer, provenance, cause };

struct Schema {
    std::string prefix;
    std::vector<std::string> header;
    std::vector<Col> types;
};

const std::vector<Schema>& schemas()
{
    static const std::vector<Schema> s{
        {"grid_", {"station", "time", "provenance"}, {Col::integer, Col::real, Col::provenance}},
        {"steps_",
         {"t_start", "t_end", "newton_iters", "cutback_cause", "cutbacks", "dp_observed"},
         {Col::real, Col::real, Col::integer, Col::cause, Col::integer, Col::real}},
        {"residuals",
         {"t_start", "t_end", "iter", "residual_norm", "relative_residual", "omega", "local_ats"},
         {Col::real, Col::real, Col::integer, Col::real, Col::real, Col::real, Col::integer}},
        {"fields_nodes_", {"t", "node", "x", "y", "ux", "uy"},
         {Col::real, Col::integer, Col::real, Col::real, Col::real, Col::real}},
        {"fields_gp_",
         {"t", "gp", "x", "y", "p_f", "p_s", "von_mises", "sxx", "syy", "szz", "sxy"},
         {Col::real, Col::integer, Col::real, Col::real, Col::real, Col::real, Col::real, Col::real, Col::real, Col::real,
          Col::real}},
        {"compare", {"quantity", "reference", "run", "relative_error"}, {}},
    };
    return s;
}

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

bool parse_real(const std::string& s)
{
    if (s.empty()) return false;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && std::isfinite(v);
}

bool parse_int(const std::string& s)
{
    if (s.empty()) return false;
    char* end = nullptr;
    std::strtol(s.c_str(), &end, 10);
    return end == s.c_str() + s.size();
}

void check_csv(const std::filesystem::path& path, const Schema& schema, std::vector<std::string>& problems)
{
    std::ifstream in(path);
    std::string line;
    const std::string name = path.filename().string();
    if (!std::getline(in, line) || split(line) != schema.header) {
        problems.push_back(name + ": unexpected header");
        return;
    }
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        const auto cells = split(line);
        if (cells.size() != schema.header.size()) {
            problems.push_back(fmt::format("{}:{}: {} columns, expected {}", name, row, cells.size(), schema.header.size()));
            continue;
        }
        for (std::size_t c = 0; c < schema.types.size(); ++c) {
            bool ok = true;
            try {
                switch (schema.types[c]) {
                case Col::real: ok = parse_real(cells[c]); break;
                case Col::integer: ok = parse_int(cells[c]); break;
                case Col::provenance: provenance_from_string(cells[c]); break;
                case Col::cause: cutback_cause_from_string(cells[c]); break;
                }
            } catch (const std::exception&) {
                ok = false;
            }
            if (!ok) problems.push_back(fmt::format("{}:{}: bad value '{}' in column {}", name, row, cells[c], schema.header[c]));
        }
    }
}

}  // namespace

std::vector<std::string> selfcheck(const std::filesystem::path& dir)
{
    std::vector<std::string> problems;
    if (!std::filesystem::is_directory(dir)) return {dir.string() + " is not a directory"};
    int checked = 0;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const auto path = entry.path();
        const std::string name = path.filename().string();
        if (path.extension() == ".json" && name == "report.json") {
            ++checked;
            try {
                std::ifstream in(path);
                json j;
                in >> j;
                const json again = report_to_json(report_from_json(j));
                if (again != j) problems.push_back(name + ": does not round-trip");
            } catch (const std::exception& ex) {
                problems.push_back(name + ": " + ex.what());
            }
            continue;
        }
        if (path.extension() != ".csv") continue;
        bool matched = false;
        for (const auto& s : schemas()) {
            if (name.rfind(s.prefix, 0) == 0) {
                matched = true;
                ++checked;
                check_csv(path, s, problems);
                break;
            }
        }
        if (!matched) problems.push_back(name + ": no schema for this file");
    }
    if (checked == 0) problems.push_back(dir.string() + ": no artifacts found");
    return problems;
}

}  // namespace glc
