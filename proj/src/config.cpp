#include "dogm/config.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace dogm {

using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json parse(const std::string& text, const char* what) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ConfigError(std::string(what) + ": invalid JSON");
    return j;
}

void expect_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& scope) {
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) {
                ok = true;
                break;
            }
        if (!ok) throw ConfigError("unknown key '" + scope + key + "'");
    }
}

double get_number(const json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number()) throw ConfigError(std::string("key '") + key + "' must be a number");
    return j[key].get<double>();
}

int get_int(const json& j, const char* key, int fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number_integer()) throw ConfigError(std::string("key '") + key + "' must be an integer");
    return j[key].get<int>();
}

bool get_bool(const json& j, const char* key, bool fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_boolean()) throw ConfigError(std::string("key '") + key + "' must be a boolean");
    return j[key].get<bool>();
}

Vec2 get_vec2(const json& j, const char* key, const Vec2& fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j[key];
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
        throw ConfigError(std::string("key '") + key + "' must be [x, y]");
    return Vec2(v[0].get<double>(), v[1].get<double>());
}

GridSpec parse_grid_spec(const json& j, const GridSpec& defaults, const std::string& scope) {
    expect_keys(j, {"cell_size", "extent_forward", "extent_backward", "extent_lateral", "origin"}, scope);
    GridSpec spec = defaults;
    spec.cell_size = get_number(j, "cell_size", defaults.cell_size);
    spec.extent_forward = get_number(j, "extent_forward", defaults.extent_forward);
    spec.extent_backward = get_number(j, "extent_backward", defaults.extent_backward);
    spec.extent_lateral = get_number(j, "extent_lateral", defaults.extent_lateral);
    spec.origin = get_vec2(j, "origin", defaults.origin);
    return spec;
}

SensorModelParams parse_model_params(const json& j, const SensorModelParams& defaults, const std::string& scope) {
    expect_keys(j,
                {"delta_range", "delta_azimuth", "delta_range_rate", "pos_index_bound", "rr_index_bound",
                 "rho0", "gamma", "eta_occupied", "eta_free", "eta_velocity"},
                scope);
    SensorModelParams p = defaults;
    p.delta_range = get_number(j, "delta_range", defaults.delta_range);
    p.delta_azimuth = get_number(j, "delta_azimuth", defaults.delta_azimuth);
    p.delta_range_rate = get_number(j, "delta_range_rate", defaults.delta_range_rate);
    p.pos_index_bound = get_int(j, "pos_index_bound", defaults.pos_index_bound);
    p.rr_index_bound = get_int(j, "rr_index_bound", defaults.rr_index_bound);
    p.rho0 = get_number(j, "rho0", defaults.rho0);
    p.gamma = get_number(j, "gamma", defaults.gamma);
    p.eta_occupied = get_number(j, "eta_occupied", defaults.eta_occupied);
    p.eta_free = get_number(j, "eta_free", defaults.eta_free);
    p.eta_velocity = get_number(j, "eta_velocity", defaults.eta_velocity);
    return p;
}

SensorMount parse_mount(const json& j, const std::string& scope) {
    expect_keys(j, {"id", "offset", "yaw", "fov_half_angle", "max_range", "model"}, scope);
    SensorMount m;
    m.sensor_id = get_int(j, "id", 0);
    m.offset = get_vec2(j, "offset", Vec2::Zero());
    m.yaw = get_number(j, "yaw", 0.0);
    m.fov_half_angle = get_number(j, "fov_half_angle", m.fov_half_angle);
    m.max_range = get_number(j, "max_range", m.max_range);
    return m;
}

}  // namespace

SensorTable default_sensor_table() {
    SensorTable table;
    const double fov = 1.31;  // ~75 deg half angle
    const double range = 100.0;
    table.mounts = {
        SensorMount{0, Vec2(3.7, 0.9), 0.785, fov, range},    // front left
        SensorMount{1, Vec2(3.7, -0.9), -0.785, fov, range},  // front right
        SensorMount{2, Vec2(-1.0, 0.9), 2.356, fov, range},   // rear left
        SensorMount{3, Vec2(-1.0, -0.9), -2.356, fov, range}, // rear right
    };
    table.params.assign(4, SensorModelParams{});
    return table;
}

ManagerConfig load_manager_config(const std::string& json_text) {
    const json j = parse(json_text, "config");
    expect_keys(j,
                {"seed", "model", "mode", "occupancy_grid", "velocity_grid", "log_odds_limit",
                 "decay_alpha", "transfer_gain", "lambda_floor", "likelihood_gain", "n_closest",
                 "association_gate", "margin_sigmas", "scroll_threshold_cells", "motion", "resample",
                 "hypotheses", "sensor_model", "mounts"},
                "");
    ManagerConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(get_number(j, "seed", 1.0));

    if (j.contains("model")) {
        const std::string m = j["model"].get<std::string>();
        if (m == "bb") cfg.model = OccupancyModel::BinaryBayes;
        else if (m == "ds") cfg.model = OccupancyModel::DempsterShafer;
        else throw ConfigError("key 'model' must be \"bb\" or \"ds\"");
    }
    if (j.contains("mode")) {
        const std::string m = j["mode"].get<std::string>();
        if (m == "full") cfg.mode = LayerMode::Full;
        else if (m == "occupancy-only") cfg.mode = LayerMode::OccupancyOnly;
        else if (m == "velocity-only") cfg.mode = LayerMode::VelocityOnly;
        else throw ConfigError("key 'mode' must be \"full\", \"occupancy-only\" or \"velocity-only\"");
    }

    if (j.contains("occupancy_grid"))
        cfg.occupancy_spec = parse_grid_spec(j["occupancy_grid"], cfg.occupancy_spec, "occupancy_grid.");
    if (j.contains("velocity_grid"))
        cfg.velocity_spec = parse_grid_spec(j["velocity_grid"], cfg.velocity_spec, "velocity_grid.");

    cfg.log_odds_limit = get_number(j, "log_odds_limit", cfg.log_odds_limit);
    cfg.decay_alpha = get_number(j, "decay_alpha", cfg.decay_alpha);
    cfg.transfer_gain = get_number(j, "transfer_gain", cfg.transfer_gain);
    cfg.lambda_floor = get_number(j, "lambda_floor", cfg.lambda_floor);
    cfg.likelihood_gain = get_number(j, "likelihood_gain", cfg.likelihood_gain);
    cfg.n_closest = get_int(j, "n_closest", cfg.n_closest);
    cfg.association_gate = get_number(j, "association_gate", cfg.association_gate);
    cfg.margin_sigmas = get_number(j, "margin_sigmas", cfg.margin_sigmas);
    cfg.scroll_threshold_cells = get_number(j, "scroll_threshold_cells", cfg.scroll_threshold_cells);

    if (j.contains("motion")) {
        expect_keys(j["motion"], {"sigma_pos", "sigma_vel"}, "motion.");
        cfg.motion.sigma_pos = get_number(j["motion"], "sigma_pos", cfg.motion.sigma_pos);
        cfg.motion.sigma_vel = get_number(j["motion"], "sigma_vel", cfg.motion.sigma_vel);
    }
    if (j.contains("resample")) {
        expect_keys(j["resample"], {"n_min", "n_max", "growth_min", "growth_max"}, "resample.");
        cfg.resample.n_min = get_int(j["resample"], "n_min", cfg.resample.n_min);
        cfg.resample.n_max = get_int(j["resample"], "n_max", cfg.resample.n_max);
        cfg.resample.growth_min = get_number(j["resample"], "growth_min", cfg.resample.growth_min);
        cfg.resample.growth_max = get_number(j["resample"], "growth_max", cfg.resample.growth_max);
    }
    if (j.contains("hypotheses")) {
        const json& h = j["hypotheses"];
        expect_keys(h,
                    {"dynamic_threshold", "cluster_radius", "min_cluster_size", "assoc_radius",
                     "cross_velocity_span", "spawn_per_cell", "init_speed_range"},
                    "hypotheses.");
        cfg.hypotheses.dynamic_threshold = get_number(h, "dynamic_threshold", cfg.hypotheses.dynamic_threshold);
        cfg.hypotheses.cluster_radius = get_number(h, "cluster_radius", cfg.hypotheses.cluster_radius);
        cfg.hypotheses.min_cluster_size = get_int(h, "min_cluster_size", cfg.hypotheses.min_cluster_size);
        cfg.hypotheses.assoc_radius = get_number(h, "assoc_radius", cfg.hypotheses.assoc_radius);
        cfg.hypotheses.cross_velocity_span =
            get_number(h, "cross_velocity_span", cfg.hypotheses.cross_velocity_span);
        cfg.hypotheses.spawn_per_cell = get_int(h, "spawn_per_cell", cfg.hypotheses.spawn_per_cell);
        cfg.hypotheses.init_speed_range = get_number(h, "init_speed_range", cfg.hypotheses.init_speed_range);
    }

    SensorModelParams default_params;
    if (j.contains("sensor_model"))
        default_params = parse_model_params(j["sensor_model"], default_params, "sensor_model.");

    if (j.contains("mounts")) {
        if (!j["mounts"].is_array()) throw ConfigError("key 'mounts' must be an array");
        cfg.sensors.mounts.clear();
        cfg.sensors.params.clear();
        for (const json& m : j["mounts"]) {
            cfg.sensors.mounts.push_back(parse_mount(m, "mounts[]."));
            cfg.sensors.params.push_back(m.contains("model")
                                             ? parse_model_params(m["model"], default_params, "mounts[].model.")
                                             : default_params);
        }
    } else {
        cfg.sensors = default_sensor_table();
        cfg.sensors.params.assign(cfg.sensors.mounts.size(), default_params);
    }

    try {
        cfg.validate();
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

ManagerConfig load_manager_config_file(const std::string& path) {
    return load_manager_config(read_file(path));
}

Scenario load_scenario(const std::string& json_text) {
    const json j = parse(json_text, "scenario");
    expect_keys(j, {"name", "dt", "num_scans", "seed", "world", "sim", "mounts", "trajectory"}, "");
    Scenario s;
    if (j.contains("name")) s.name = j["name"].get<std::string>();
    s.dt = get_number(j, "dt", s.dt);
    s.num_scans = get_int(j, "num_scans", s.num_scans);
    if (s.dt <= 0.0) throw ConfigError("key 'dt' must be > 0");
    if (s.num_scans < 0) throw ConfigError("key 'num_scans' must be >= 0");
    s.sim.seed = static_cast<std::uint64_t>(get_number(j, "seed", 1.0));

    if (j.contains("world")) {
        const json& w = j["world"];
        expect_keys(w, {"segments", "boxes"}, "world.");
        if (w.contains("segments"))
            for (const json& seg : w["segments"]) {
                expect_keys(seg, {"a", "b", "detection_rate"}, "world.segments[].");
                Segment out;
                out.a = get_vec2(seg, "a", Vec2::Zero());
                out.b = get_vec2(seg, "b", Vec2::Zero());
                out.detection_rate = get_number(seg, "detection_rate", out.detection_rate);
                s.world.segments.push_back(out);
            }
        if (w.contains("boxes"))
            for (const json& box : w["boxes"]) {
                expect_keys(box, {"center", "half_extent", "heading", "velocity", "detection_rate"},
                            "world.boxes[].");
                DynamicBox out;
                out.center = get_vec2(box, "center", Vec2::Zero());
                out.half_extent = get_vec2(box, "half_extent", out.half_extent);
                out.heading = get_number(box, "heading", 0.0);
                out.velocity = get_vec2(box, "velocity", Vec2::Zero());
                out.detection_rate = get_number(box, "detection_rate", out.detection_rate);
                s.world.boxes.push_back(out);
            }
    }

    if (j.contains("trajectory")) {
        for (const json& p : j["trajectory"]) {
            expect_keys(p, {"t", "position", "heading"}, "trajectory[].");
            TrajectoryPoint tp;
            tp.t = get_number(p, "t", 0.0);
            tp.position = get_vec2(p, "position", Vec2::Zero());
            tp.heading = get_number(p, "heading", 0.0);
            s.world.trajectory.push_back(tp);
        }
    } else {
        s.world.trajectory.push_back(TrajectoryPoint{});
    }

    if (j.contains("sim")) {
        const json& p = j["sim"];
        expect_keys(p,
                    {"point_spacing", "point_jitter", "sigma_range", "sigma_azimuth", "sigma_range_rate", "noise",
                     "alias_position_bound", "alias_range_rate_bound", "delta_range", "delta_azimuth",
                     "delta_range_rate", "clutter_rate", "clutter_range_rate_max", "clutter_bursts"},
                    "sim.");
        s.sim.point_spacing = get_number(p, "point_spacing", s.sim.point_spacing);
        s.sim.point_jitter = get_number(p, "point_jitter", s.sim.point_jitter);
        s.sim.sigma_range = get_number(p, "sigma_range", s.sim.sigma_range);
        s.sim.sigma_azimuth = get_number(p, "sigma_azimuth", s.sim.sigma_azimuth);
        s.sim.sigma_range_rate = get_number(p, "sigma_range_rate", s.sim.sigma_range_rate);
        s.sim.noise = get_bool(p, "noise", s.sim.noise);
        s.sim.alias_position_bound = get_int(p, "alias_position_bound", s.sim.alias_position_bound);
        s.sim.alias_range_rate_bound = get_int(p, "alias_range_rate_bound", s.sim.alias_range_rate_bound);
        s.sim.delta_range = get_number(p, "delta_range", s.sim.delta_range);
        s.sim.delta_azimuth = get_number(p, "delta_azimuth", s.sim.delta_azimuth);
        s.sim.delta_range_rate = get_number(p, "delta_range_rate", s.sim.delta_range_rate);
        s.sim.clutter_rate = get_number(p, "clutter_rate", s.sim.clutter_rate);
        s.sim.clutter_range_rate_max = get_number(p, "clutter_range_rate_max", s.sim.clutter_range_rate_max);
        if (p.contains("clutter_bursts"))
            for (const json& b : p["clutter_bursts"]) {
                expect_keys(b, {"t_start", "t_end", "rate"}, "sim.clutter_bursts[].");
                ClutterBurst burst;
                burst.t_start = get_number(b, "t_start", 0.0);
                burst.t_end = get_number(b, "t_end", 0.0);
                burst.rate = get_number(b, "rate", 0.0);
                s.sim.clutter_bursts.push_back(burst);
            }
    }

    if (j.contains("mounts")) {
        if (!j["mounts"].is_array()) throw ConfigError("key 'mounts' must be an array");
        for (const json& m : j["mounts"]) s.mounts.push_back(parse_mount(m, "mounts[]."));
    } else {
        s.mounts = default_sensor_table().mounts;
    }

    s.world.validate();
    for (const SensorMount& m : s.mounts) m.validate();
    return s;
}

Scenario load_scenario_file(const std::string& path) { return load_scenario(read_file(path)); }

std::string truth_sidecar_json(const WorldModel& world, double dt, int num_scans) {
    json j;
    j["segments"] = json::array();
    for (const Segment& s : world.segments)
        j["segments"].push_back({{"a", {s.a.x(), s.a.y()}}, {"b", {s.b.x(), s.b.y()}}});
    j["scans"] = json::array();
    for (int i = 0; i < num_scans; ++i) {
        const double t = i * dt;
        json objects = json::array();
        for (const DynamicBox& b : world.boxes) {
            const Vec2 c = b.center_at(t);
            objects.push_back({{"center", {c.x(), c.y()}},
                               {"half_extent", {b.half_extent.x(), b.half_extent.y()}},
                               {"heading", b.heading},
                               {"velocity", {b.velocity.x(), b.velocity.y()}}});
        }
        j["scans"].push_back({{"t", t}, {"objects", objects}});
    }
    return j.dump(2);
}

TruthSidecar load_truth_sidecar(const std::string& json_text) {
    const json j = parse(json_text, "truth sidecar");
    TruthSidecar out;
    if (j.contains("segments"))
        for (const json& seg : j["segments"]) {
            Segment s;
            s.a = get_vec2(seg, "a", Vec2::Zero());
            s.b = get_vec2(seg, "b", Vec2::Zero());
            out.world.segments.push_back(s);
        }
    if (j.contains("scans")) {
        bool boxes_taken = false;
        for (const json& scan : j["scans"]) {
            out.scan_times.push_back(get_number(scan, "t", 0.0));
            if (!boxes_taken && scan.contains("objects")) {
                // Box states are anchored at t = 0 plus constant velocity, so the
                // first scan's objects reconstruct the world.
                for (const json& obj : scan["objects"]) {
                    DynamicBox b;
                    b.center = get_vec2(obj, "center", Vec2::Zero());
                    b.half_extent = get_vec2(obj, "half_extent", Vec2(1.0, 1.0));
                    b.heading = get_number(obj, "heading", 0.0);
                    b.velocity = get_vec2(obj, "velocity", Vec2::Zero());
                    out.world.boxes.push_back(b);
                }
                boxes_taken = true;
            }
        }
    }
    out.world.trajectory.push_back(TrajectoryPoint{});
    return out;
}

TruthSidecar load_truth_sidecar_file(const std::string& path) {
    return load_truth_sidecar(read_file(path));
}

}  // namespace dogm
