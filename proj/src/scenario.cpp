#include "rfmpc/scenario.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "rfmpc/toml_lite.hpp"

namespace rfmpc {

std::string_view to_string(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::Case1: return "case1";
        case ScenarioKind::Case2: return "case2";
        case ScenarioKind::Case3: return "case3";
        case ScenarioKind::Custom: return "custom";
    }
    return "custom";
}

ScenarioKind parse_scenario_kind(std::string_view name) {
    if (name == "case1") return ScenarioKind::Case1;
    if (name == "case2") return ScenarioKind::Case2;
    if (name == "case3") return ScenarioKind::Case3;
    if (name == "custom") return ScenarioKind::Custom;
    throw Error(ErrorKind::Config, "unknown scenario '" + std::string(name) + "' (expected case1|case2|case3|custom)");
}

void ScenarioConfig::apply_scenario(ScenarioKind kind) {
    scenario = kind;
    switch (kind) {
        case ScenarioKind::Case1:
            fc_enabled = false;
            init = InitVariant::OpenLoop;
            break;
        case ScenarioKind::Case2:
            fc_enabled = true;
            init = InitVariant::OpenLoop;
            break;
        case ScenarioKind::Case3:
            fc_enabled = true;
            init = InitVariant::OutputResetKeepInternal;
            break;
        case ScenarioKind::Custom:
            break;
    }
}

int ScenarioConfig::effective_control_intervals() const {
    if (control_intervals > 0) return control_intervals;
    return std::max(1, static_cast<int>(std::lround(horizon_T / delta)));
}

void ScenarioConfig::validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorKind::Config, "invalid config: " + what); };
    if (!(delta > 0.0)) fail("delta must be positive");
    if (horizon_T < delta) fail("horizon_T < delta");
    if (!(input_bound_M > 0.0)) fail("input_bound must be positive");
    if (lambda_u < 0.0) fail("lambda_u must be nonnegative");
    if (control_intervals < 0) fail("control_intervals must be nonnegative");
    if (integration_substeps < 1) fail("integration_substeps must be positive");
    if (max_iterations < 1) fail("max_iterations must be positive");
    if (!(gradient_tolerance > 0.0)) fail("gradient_tolerance must be positive");
    if (!(infeasibility_penalty_cap > 0.0)) fail("infeasibility_penalty_cap must be positive");
    if (!(s_crit > 0.0 && s_crit < 1.0)) fail("s_crit must lie in (0, 1)");
    if (!(phi_floor > 0.0)) fail("phi_floor must be positive");
    if (xi < 0.0) fail("xi must be nonnegative");
    if (!(funnel_c > 0.0)) fail("funnel.c must be positive");
    if (funnel_a < 0.0 || funnel_lambda < 0.0) fail("funnel.a and funnel.lambda must be nonnegative");
    if (!(ref_t_final > 0.0)) fail("reference.t_final must be positive");
    if (plant_initial.size() != 3) fail("reactor.initial must have 3 entries");
    if (model_initial && model_initial->size() != 3) fail("model.initial must have 3 entries");
    if (!(sim_step > 0.0)) fail("sim_step must be positive");
    if (!(t_end > 0.0)) fail("t_end must be positive");
    if (!(linearization_temperature > 0.0)) fail("reactor.linearization_temperature must be positive");
    try {
        reactor.validate();
    } catch (const Error& e) {
        fail(e.what());
    }
}

namespace {

class ConfigReader {
public:
    explicit ConfigReader(toml::Document doc) : doc_(std::move(doc)) {}

    template <typename T>
    void read(const std::string& key, T& target) {
        auto it = doc_.find(key);
        if (it == doc_.end()) return;
        seen_.insert(key);
        assign(key, it->second, target);
    }

    bool has(const std::string& key) const { return doc_.count(key) > 0; }

    void reject_unknown() const {
        for (const auto& [key, entry] : doc_) {
            if (!seen_.count(key)) {
                std::ostringstream msg;
                msg << "config line " << entry.line << ": unknown field '" << key << "'";
                throw Error(ErrorKind::Config, msg.str());
            }
        }
    }

private:
    [[noreturn]] static void type_error(const std::string& key, const toml::Entry& entry, const char* expected) {
        std::ostringstream msg;
        msg << "config line " << entry.line << ": field '" << key << "' expects " << expected;
        throw Error(ErrorKind::Config, msg.str());
    }

    static void assign(const std::string& key, const toml::Entry& entry, double& target) {
        const auto* v = std::get_if<double>(&entry.value);
        if (!v) type_error(key, entry, "a number");
        target = *v;
    }
    static void assign(const std::string& key, const toml::Entry& entry, int& target) {
        const auto* v = std::get_if<double>(&entry.value);
        if (!v || !entry.integral) type_error(key, entry, "an integer");
        target = static_cast<int>(*v);
    }
    static void assign(const std::string& key, const toml::Entry& entry, bool& target) {
        const auto* v = std::get_if<bool>(&entry.value);
        if (!v) type_error(key, entry, "a boolean");
        target = *v;
    }
    static void assign(const std::string& key, const toml::Entry& entry, std::string& target) {
        const auto* v = std::get_if<std::string>(&entry.value);
        if (!v) type_error(key, entry, "a string");
        target = *v;
    }
    static void assign(const std::string& key, const toml::Entry& entry, Vector& target) {
        const auto* v = std::get_if<std::vector<double>>(&entry.value);
        if (!v) type_error(key, entry, "an array of numbers");
        target = Eigen::Map<const Vector>(v->data(), static_cast<Eigen::Index>(v->size()));
    }

    toml::Document doc_;
    std::set<std::string> seen_;
};

InitVariant parse_init(const std::string& name) {
    if (name == "open_loop") return InitVariant::OpenLoop;
    if (name == "reset_keep_internal") return InitVariant::OutputResetKeepInternal;
    if (name == "reset_zero_internal") return InitVariant::OutputResetZeroInternal;
    throw Error(ErrorKind::Config,
                "controller.init: unknown variant '" + name + "' (open_loop|reset_keep_internal|reset_zero_internal)");
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

double max_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

}  // namespace

ScenarioConfig parse_config(std::string_view text) {
    ConfigReader reader(toml::parse(text));
    ScenarioConfig cfg;

    std::string scenario = std::string(to_string(cfg.scenario));
    reader.read("scenario", scenario);
    const ScenarioKind kind = parse_scenario_kind(scenario);
    cfg.apply_scenario(kind);

    std::string out = cfg.output_dir.string();
    reader.read("output_dir", out);
    cfg.output_dir = out;

    reader.read("controller.delta", cfg.delta);
    reader.read("controller.horizon", cfg.horizon_T);
    reader.read("controller.input_bound", cfg.input_bound_M);
    reader.read("controller.lambda_u", cfg.lambda_u);
    reader.read("controller.control_intervals", cfg.control_intervals);
    reader.read("controller.integration_substeps", cfg.integration_substeps);
    reader.read("controller.max_iterations", cfg.max_iterations);
    reader.read("controller.gradient_tolerance", cfg.gradient_tolerance);
    reader.read("controller.infeasibility_penalty_cap", cfg.infeasibility_penalty_cap);
    reader.read("controller.s_crit", cfg.s_crit);
    reader.read("controller.phi_floor", cfg.phi_floor);
    reader.read("controller.xi", cfg.xi);

    std::string gradient = "adjoint";
    reader.read("controller.gradient", gradient);
    if (gradient == "adjoint") {
        cfg.gradient = GradientMethod::Adjoint;
    } else if (gradient == "finite_difference") {
        cfg.gradient = GradientMethod::FiniteDifference;
    } else {
        throw Error(ErrorKind::Config, "controller.gradient: expected 'adjoint' or 'finite_difference'");
    }

    std::string gains = "definite";
    reader.read("controller.gains", gains);
    if (gains != "definite" && gains != "indefinite") {
        throw Error(ErrorKind::Config, "controller.gains: expected 'definite' or 'indefinite'");
    }
    cfg.definite_gains = gains == "definite";

    bool fc_enabled = cfg.fc_enabled;
    reader.read("controller.fc_enabled", fc_enabled);
    std::string init_name;
    reader.read("controller.init", init_name);
    const InitVariant init = init_name.empty() ? cfg.init : parse_init(init_name);
    if (kind == ScenarioKind::Custom) {
        cfg.fc_enabled = fc_enabled;
        cfg.init = init;
    } else if (fc_enabled != cfg.fc_enabled || init != cfg.init) {
        throw Error(ErrorKind::Config, "controller.fc_enabled/controller.init conflict with scenario '" + scenario +
                                           "'; use scenario = \"custom\" to choose them freely");
    }

    reader.read("funnel.a", cfg.funnel_a);
    reader.read("funnel.lambda", cfg.funnel_lambda);
    reader.read("funnel.c", cfg.funnel_c);

    reader.read("reference.start", cfg.ref_start);
    reader.read("reference.final", cfg.ref_final);
    reader.read("reference.t_final", cfg.ref_t_final);

    reader.read("reactor.b", cfg.reactor.b);
    reader.read("reactor.c1", cfg.reactor.c1);
    reader.read("reactor.c2", cfg.reactor.c2);
    reader.read("reactor.d", cfg.reactor.d);
    reader.read("reactor.q", cfg.reactor.q);
    reader.read("reactor.k0", cfg.reactor.k0);
    reader.read("reactor.k1", cfg.reactor.k1);
    reader.read("reactor.x1_in", cfg.reactor.x1_in);
    reader.read("reactor.x2_in", cfg.reactor.x2_in);
    reader.read("reactor.initial", cfg.plant_initial);
    reader.read("reactor.linearization_temperature", cfg.linearization_temperature);

    if (reader.has("model.initial")) {
        Vector initial;
        reader.read("model.initial", initial);
        cfg.model_initial = initial;
    }
    std::string plant = "reactor";
    reader.read("plant.kind", plant);
    if (plant == "reactor") {
        cfg.plant = PlantKind::Reactor;
    } else if (plant == "model") {
        cfg.plant = PlantKind::Model;
    } else {
        throw Error(ErrorKind::Config, "plant.kind: expected 'reactor' or 'model'");
    }

    reader.read("simulation.sim_step", cfg.sim_step);
    reader.read("simulation.t_end", cfg.t_end);

    reader.reject_unknown();
    cfg.validate();
    return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Config, "cannot open config file " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

RunSummary summarize(const TrajectoryLog& log) {
    RunSummary s;
    std::size_t active = 0;
    for (const auto& sample : log.samples) {
        s.max_funnel_ratio = std::max(s.max_funnel_ratio, (sample.y - sample.y_ref).norm() / sample.psi);
        s.max_model_funnel_ratio = std::max(s.max_model_funnel_ratio, (sample.y_M - sample.y_ref).norm() / sample.psi);
        s.max_u_fmpc = std::max(s.max_u_fmpc, max_norm(sample.u_fmpc));
        s.max_u_fc = std::max(s.max_u_fc, max_norm(sample.u_fc));
        s.max_u_total = std::max(s.max_u_total, max_norm(sample.u_total));
        if (sample.fc_active) ++active;
    }
    s.funnel_violated = s.max_funnel_ratio >= 1.0;
    s.fc_active_fraction =
        log.samples.empty() ? 0.0 : static_cast<double>(active) / static_cast<double>(log.samples.size());
    s.ocp_cycles = static_cast<int>(log.cycles.size());
    return s;
}

void export_csv(const TrajectoryLog& log, const std::filesystem::path& path) {
    if (log.samples.empty()) throw std::invalid_argument("export_csv: empty log");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("export_csv: cannot open " + path.string());

    const Eigen::Index m = log.samples.front().y.size();
    auto header = [&](const char* name) {
        if (m == 1) {
            out << ',' << name;
            return;
        }
        for (Eigen::Index i = 0; i < m; ++i) out << ',' << name << '_' << i;
    };
    out << 't';
    header("y");
    header("y_M");
    header("y_ref");
    out << ",psi,phi";
    header("u_fmpc");
    header("u_fc");
    header("u_total");
    out << ",fc_active\n";

    auto vec = [&](const Vector& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) out << ',' << format_double(v(i));
    };
    for (const auto& s : log.samples) {
        out << format_double(s.t);
        vec(s.y);
        vec(s.y_M);
        vec(s.y_ref);
        out << ',' << format_double(s.psi) << ',' << format_double(s.phi);
        vec(s.u_fmpc);
        vec(s.u_fc);
        vec(s.u_total);
        out << ',' << (s.fc_active ? 1 : 0) << '\n';
    }
    if (!out) throw std::runtime_error("export_csv: write failed for " + path.string());
}

TrajectoryLog read_trajectory_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_trajectory_csv: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("read_trajectory_csv: empty file");
    const auto columns = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ','));
    // t + 6 vector blocks of width m + psi + phi + fc_active
    const Eigen::Index m = (columns + 1 - 4) / 6;

    TrajectoryLog log;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> v;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            const auto comma = line.find(',', pos);
            const auto end = comma == std::string::npos ? line.size() : comma;
            double value = 0.0;
            std::from_chars(line.data() + pos, line.data() + end, value);
            v.push_back(value);
            pos = end + 1;
        }
        if (static_cast<Eigen::Index>(v.size()) != columns + 1) {
            throw std::runtime_error("read_trajectory_csv: ragged row");
        }
        LogSample s;
        std::size_t k = 0;
        auto take = [&](Eigen::Index n) {
            Vector out(n);
            for (Eigen::Index i = 0; i < n; ++i) out(i) = v[k++];
            return out;
        };
        s.t = v[k++];
        s.y = take(m);
        s.y_M = take(m);
        s.y_ref = take(m);
        s.psi = v[k++];
        s.phi = v[k++];
        s.u_fmpc = take(m);
        s.u_fc = take(m);
        s.u_total = take(m);
        s.fc_active = v[k++] != 0.0;
        log.samples.push_back(std::move(s));
    }
    return log;
}

void write_summary_csv(const RunSummary& s, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_summary_csv: cannot open " + path.string());
    out << "scenario,status,max_funnel_ratio,funnel_violated,max_model_funnel_ratio,fc_active_fraction,"
           "max_u_fmpc,max_u_fc,max_u_total,ocp_cycles,wall_time\n";
    out << s.scenario << ',' << s.status << ',' << format_double(s.max_funnel_ratio) << ','
        << (s.funnel_violated ? "true" : "false") << ',' << format_double(s.max_model_funnel_ratio) << ','
        << format_double(s.fc_active_fraction) << ',' << format_double(s.max_u_fmpc) << ','
        << format_double(s.max_u_fc) << ',' << format_double(s.max_u_total) << ',' << s.ocp_cycles << ','
        << format_double(s.wall_time) << '\n';
    if (!out) throw std::runtime_error("write_summary_csv: write failed for " + path.string());
}

ScenarioResult run_scenario(const ScenarioConfig& config, bool write_files) {
    config.validate();
    const auto started = std::chrono::steady_clock::now();

    const LinearizedReactor lin = linearize_reactor(config.reactor, config.linearization_temperature);
    const Vector model_x0 = config.model_initial.value_or(config.plant_initial);
    const ControlAffineModel model = linear_model(lin.A, lin.B, lin.C, lin.D, model_x0);
    const Plant plant = config.plant == PlantKind::Model ? model_as_plant(model)
                                                          : reactor_plant(config.reactor, config.plant_initial);

    const FunnelFunction psi = funnel_exp(config.funnel_a, config.funnel_lambda, config.funnel_c);
    const ReferenceSignal ref = ramp_reference(Vector::Constant(1, config.ref_start),
                                               Vector::Constant(1, config.ref_final), config.ref_t_final);
    StageCostParams params;
    params.lambda_u = config.lambda_u;
    params.funnel = psi;
    params.reference = ref;

    FunnelControllerConfig fc;
    fc.gains = standard_gains(config.definite_gains);
    fc.activation = relu_activation(config.s_crit);
    fc.phi_floor = config.phi_floor;

    LoopConfig loop;
    loop.delta = config.delta;
    loop.ocp.horizon_T = config.horizon_T;
    loop.ocp.control_intervals = config.effective_control_intervals();
    loop.ocp.input_bound_M = config.input_bound_M;
    loop.ocp.integration_substeps = config.integration_substeps;
    loop.ocp.max_iterations = config.max_iterations;
    loop.ocp.gradient_tolerance = config.gradient_tolerance;
    loop.ocp.infeasibility_penalty_cap = config.infeasibility_penalty_cap;
    loop.ocp.gradient = config.gradient;
    loop.init_strategy.variant = config.init;
    loop.init_strategy.xi = config.xi;
    loop.sim_step = config.sim_step;
    loop.t_end = config.t_end;
    loop.fc_enabled = config.fc_enabled;

    ScenarioResult result;
    try {
        result.log = run_robust_fmpc(plant, model, psi, ref, params, fc, loop);
    } catch (const LoopError& e) {
        result.log = e.partial_log();
        result.error = e.kind();
        result.error_message = e.what();
    }

    result.summary = summarize(result.log);
    result.summary.scenario = std::string(to_string(config.scenario));
    if (result.error) result.summary.status = std::string(to_string(*result.error));
    result.summary.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    if (write_files) {
        std::filesystem::create_directories(config.output_dir);
        if (!result.log.samples.empty()) export_csv(result.log, config.output_dir / "trajectory.csv");
        write_summary_csv(result.summary, config.output_dir / "summary.csv");
    }
    return result;
}

}  // namespace rfmpc
