// Scenario runner for the robust funnel MPC reactor study.

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "rfmpc/scenario.hpp"

namespace fs = std::filesystem;

namespace {

void print_summary(std::ostream& os, const rfmpc::RunSummary& s) {
    os << std::setprecision(6) << "scenario            " << s.scenario << '\n'
       << "status              " << s.status << '\n'
       << "max |e|/psi         " << s.max_funnel_ratio << (s.funnel_violated ? "  (funnel violated)" : "") << '\n'
       << "max |e_M|/psi       " << s.max_model_funnel_ratio << '\n'
       << "fc active fraction  " << s.fc_active_fraction << '\n'
       << "max |u_fmpc|        " << s.max_u_fmpc << '\n'
       << "max |u_fc|          " << s.max_u_fc << '\n'
       << "max |u|             " << s.max_u_total << '\n'
       << "ocp cycles          " << s.ocp_cycles << '\n'
       << "wall time [s]       " << s.wall_time << '\n';
}

bool wildcard_match(const std::string& pattern, const std::string& name) {
    std::size_t p = 0, n = 0, star = std::string::npos, mark = 0;
    while (n < name.size()) {
        if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == name[n])) {
            ++p;
            ++n;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            mark = n;
        } else if (star != std::string::npos) {
            p = star + 1;
            n = ++mark;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') ++p;
    return p == pattern.size();
}

std::vector<fs::path> expand_glob(const std::string& pattern) {
    const fs::path pat(pattern);
    const fs::path dir = pat.has_parent_path() ? pat.parent_path() : fs::path(".");
    const std::string leaf = pat.filename().string();
    std::vector<fs::path> matches;
    if (!fs::is_directory(dir)) return matches;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && wildcard_match(leaf, entry.path().filename().string())) {
            matches.push_back(entry.path());
        }
    }
    std::sort(matches.begin(), matches.end());
    return matches;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Robust funnel MPC scenario runner"};
    app.require_subcommand(1);

    double sim_step = 0.0;
    unsigned seed = 0;
    app.add_option("--sim-step", sim_step, "Closed-loop integration step (overrides config)");
    app.add_option("--seed", seed, "Reserved; all components are deterministic");

    auto* run = app.add_subcommand("run", "Run one scenario");
    std::string scenario;
    std::string config_path;
    std::string out_dir = "out";
    run->add_option("--scenario", scenario, "case1 | case2 | case3 | custom");
    run->add_option("--config", config_path, "TOML configuration file");
    run->add_option("--out", out_dir, "Output directory");
    run->add_option("--sim-step", sim_step, "Closed-loop integration step (overrides config)");
    run->add_option("--seed", seed, "Reserved; all components are deterministic");

    auto* sweep = app.add_subcommand("sweep", "Run every config matching a glob, in parallel");
    std::string configs_glob;
    int jobs = 0;
    sweep->add_option("--configs", configs_glob, "Glob of TOML files, e.g. configs/*.toml")->required();
    sweep->add_option("--out", out_dir, "Output root; one subdirectory per config");
    sweep->add_option("--jobs", jobs, "Worker threads (default: hardware concurrency)");
    sweep->add_option("--sim-step", sim_step, "Closed-loop integration step (overrides config)");
    sweep->add_option("--seed", seed, "Reserved; all components are deterministic");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            rfmpc::ScenarioConfig cfg = config_path.empty() ? rfmpc::parse_config("") : rfmpc::load_config(config_path);
            if (!scenario.empty()) cfg.apply_scenario(rfmpc::parse_scenario_kind(scenario));
            if (sim_step > 0.0) cfg.sim_step = sim_step;
            cfg.output_dir = out_dir;
            const auto result = rfmpc::run_scenario(cfg);
            print_summary(std::cout, result.summary);
            if (!result.completed()) {
                std::cerr << "error: " << result.error_message << '\n';
                return 2;
            }
            return 0;
        }

        const auto files = expand_glob(configs_glob);
        if (files.empty()) {
            std::cerr << "error: no config matches " << configs_glob << '\n';
            return 1;
        }
        std::vector<rfmpc::ScenarioConfig> configs;
        for (const auto& file : files) {
            rfmpc::ScenarioConfig cfg = rfmpc::load_config(file);
            if (sim_step > 0.0) cfg.sim_step = sim_step;
            cfg.output_dir = fs::path(out_dir) / file.stem();
            configs.push_back(std::move(cfg));
        }

        const unsigned workers = std::max(1u, jobs > 0 ? static_cast<unsigned>(jobs) : std::thread::hardware_concurrency());
        std::vector<rfmpc::ScenarioResult> results(configs.size());
        std::atomic<std::size_t> next{0};
        std::mutex io;
        {
            std::vector<std::jthread> pool;
            for (unsigned w = 0; w < std::min<std::size_t>(workers, configs.size()); ++w) {
                pool.emplace_back([&] {
                    for (std::size_t i = next++; i < configs.size(); i = next++) {
                        results[i] = rfmpc::run_scenario(configs[i]);
                        std::lock_guard lock(io);
                        std::cout << files[i].string() << ": " << results[i].summary.status << '\n';
                    }
                });
            }
        }
        int failures = 0;
        for (std::size_t i = 0; i < results.size(); ++i) {
            std::cout << "\n== " << files[i].string() << '\n';
            print_summary(std::cout, results[i].summary);
            if (!results[i].completed()) ++failures;
        }
        return failures == 0 ? 0 : 2;
    } catch (const rfmpc::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
