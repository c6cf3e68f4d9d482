#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "rfmpc/controller.hpp"

namespace rfmpc {

enum class ScenarioKind { Case1, Case2, Case3, Custom };

std::string_view to_string(ScenarioKind kind);
ScenarioKind parse_scenario_kind(std::string_view name);

enum class PlantKind { Reactor, Model };

/// Every knob of a reactor run. Defaults reproduce the case study.
struct ScenarioConfig {
    ScenarioKind scenario = ScenarioKind::Case3;

    // controller
    double delta = 0.05;
    double horizon_T = 0.75;
    double input_bound_M = 600.0;
    double lambda_u = 1e-4;
    int control_intervals = 0;  // 0: round(horizon_T / delta)
    int integration_substeps = 10;
    int max_iterations = 200;
    double gradient_tolerance = 1e-6;
    double infeasibility_penalty_cap = 1e12;
    GradientMethod gradient = GradientMethod::Adjoint;
    double s_crit = 0.5;
    double phi_floor = 1e-9;
    bool definite_gains = true;
    double xi = 0.0;
    bool fc_enabled = true;
    InitVariant init = InitVariant::OutputResetKeepInternal;

    // funnel psi(t) = a e^{-lambda t} + c
    double funnel_a = 20.0;
    double funnel_lambda = 2.0;
    double funnel_c = 4.0;

    // reference ramp
    double ref_start = 270.0;
    double ref_final = 337.1;
    double ref_t_final = 2.0;

    ReactorParams reactor;
    Vector plant_initial = (Vector(3) << 270.0, 0.02, 0.9).finished();
    std::optional<Vector> model_initial;  // defaults to plant_initial
    double linearization_temperature = 337.1;
    PlantKind plant = PlantKind::Reactor;

    double sim_step = 1e-4;
    double t_end = 4.0;

    std::filesystem::path output_dir = "out";

    /// Forces the fc/init settings implied by the named cases.
    void apply_scenario(ScenarioKind kind);
    /// Throws Error(ErrorKind::Config) naming the violated field relation.
    void validate() const;

    int effective_control_intervals() const;
};

/// Parses a TOML document; unspecified fields keep their defaults.
ScenarioConfig parse_config(std::string_view text);
ScenarioConfig load_config(const std::filesystem::path& path);

struct RunSummary {
    std::string scenario;
    std::string status = "completed";
    double max_funnel_ratio = 0.0;
    bool funnel_violated = false;
    double max_model_funnel_ratio = 0.0;
    double fc_active_fraction = 0.0;
    double max_u_fmpc = 0.0;
    double max_u_fc = 0.0;
    double max_u_total = 0.0;
    int ocp_cycles = 0;
    double wall_time = 0.0;
};

/// Statistics over the logged samples.
RunSummary summarize(const TrajectoryLog& log);

/// Writes the trajectory CSV (header t,y,y_M,y_ref,psi,phi,u_fmpc,u_fc,u_total,fc_active).
void export_csv(const TrajectoryLog& log, const std::filesystem::path& path);

/// Reads a file written by export_csv (cycle records are not part of the file).
TrajectoryLog read_trajectory_csv(const std::filesystem::path& path);

void write_summary_csv(const RunSummary& summary, const std::filesystem::path& path);

struct ScenarioResult {
    RunSummary summary;
    TrajectoryLog log;
    std::optional<ErrorKind> error;
    std::string error_message;

    bool completed() const { return !error.has_value(); }
};

/// Runs the configured reactor scenario and writes trajectory.csv and
/// summary.csv into config.output_dir (also on controller failure).
ScenarioResult run_scenario(const ScenarioConfig& config, bool write_files = true);

}  // namespace rfmpc
