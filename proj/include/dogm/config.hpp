#pragma once

#include "dogm/grid_manager.hpp"
#include "dogm/radar_sim.hpp"

#include <stdexcept>
#include <string>

namespace dogm {

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& message) : std::runtime_error(message) {}
};

/// Default four-radar mounting: front-left/right and rear-left/right with
/// overlapping cones.
SensorTable default_sensor_table();

/// Parses a run configuration (JSON). Missing keys keep their defaults;
/// unknown keys raise ConfigError naming the key.
ManagerConfig load_manager_config(const std::string& json_text);
ManagerConfig load_manager_config_file(const std::string& path);

/// Full simulation scenario: world geometry, platform trajectory, sensor
/// mounting and simulator parameters.
struct Scenario {
    std::string name = "scenario";
    double dt = 0.1;       // s between scans
    int num_scans = 20;
    WorldModel world;
    SimParams sim;
    std::vector<SensorMount> mounts;
};

Scenario load_scenario(const std::string& json_text);
Scenario load_scenario_file(const std::string& path);

/// Serialization helpers for the ground-truth sidecar written next to a
/// simulated log.
std::string truth_sidecar_json(const WorldModel& world, double dt, int num_scans);
struct TruthSidecar {
    WorldModel world;  // trajectory is not stored; only geometry
    std::vector<double> scan_times;
};
TruthSidecar load_truth_sidecar(const std::string& json_text);
TruthSidecar load_truth_sidecar_file(const std::string& path);

}  // namespace dogm
