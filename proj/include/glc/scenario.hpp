#pragma once

// Scenario files: JSON documents naming the meshes, partition, loads, load
// cycle, stepping policy and run options. Relative paths resolve against the
// scenario file's directory.

#include "glc/time_coupling.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace glc {

struct ZoneEntry {
    std::string name;
    std::array<double, 4> box{};  // xmin, ymin, xmax, ymax
    std::filesystem::path local_mesh;
};

struct Scenario {
    std::string name;
    std::filesystem::path base_dir;
    std::string model_type = "plane_strain";
    MaterialParams material;
    std::filesystem::path global_mesh;     // empty when absent
    std::filesystem::path reference_mesh;  // empty when absent
    std::vector<ZoneEntry> zones;
    bool identity_transfer = false;
    LoadCase load;
    LoadCycle cycle = LoadCycle::desk();
    SteppingPolicy policy;
    RunMode mode = RunMode::weak;
    CouplingOptions coupling;
    std::filesystem::path outputs;

    /// Throws ScenarioError on parse or validation failures.
    static Scenario read(const std::filesystem::path& path);
    static Scenario from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
    nlohmann::json to_json() const;

    /// Checks the meshes required by `mode` are named and exist.
    void validate_for(RunMode mode) const;
    std::filesystem::path resolve(const std::filesystem::path& p) const;
};

/// Coupled problem of a scenario; `seed` perturbs the local meshes (interior
/// jitter, interface nodes slid along the interface).
CoupledProblem build_problem(const Scenario& s, std::optional<std::uint64_t> seed = std::nullopt);
Model reference_model(const Scenario& s);
/// Global model alone (no interface load), used for prediscretization.
Model global_model(const Scenario& s);

}  // namespace glc
