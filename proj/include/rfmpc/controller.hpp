#pragma once

#include <functional>
#include <string>
#include <vector>

#include "rfmpc/model.hpp"
#include "rfmpc/ocp.hpp"
#include "rfmpc/plant.hpp"
#include "rfmpc/signals.hpp"

namespace rfmpc {

struct FunnelControllerConfig {
    GainPair gains;
    ActivationFunction activation;
    double phi_floor = 1e-9;
};

struct LoopConfig {
    double delta = 0.05;
    OcpConfig ocp;
    InitializationStrategy init_strategy;
    /// Optional per-cycle override of the initialization variant (argument: cycle index k).
    std::function<InitVariant(int)> init_override;
    double sim_step = 1e-4;
    double t_end = 4.0;
    bool fc_enabled = true;

    void validate() const;
};

struct LogSample {
    double t = 0.0;
    Vector y;
    Vector y_M;
    Vector y_ref;
    double psi = 0.0;
    double phi = 0.0;
    Vector u_fmpc;
    Vector u_fc;
    Vector u_total;
    bool fc_active = false;
};

struct CycleRecord {
    double t_k = 0.0;
    Vector x_hat;
    Vector x_pre;
    double cost = 0.0;
    int iterations = 0;
    bool converged = false;
    /// Plant and model outputs at the end of the cycle, before any re-initialization.
    Vector y_end;
    Vector y_M_end;
    double phi_end = 0.0;
};

struct TrajectoryLog {
    std::vector<LogSample> samples;
    std::vector<CycleRecord> cycles;
    std::vector<std::string> warnings;
    int phi_floor_hits = 0;
};

/// Controller failure; carries the cycle start time and everything logged so far.
class LoopError : public Error {
public:
    LoopError(ErrorKind kind, double t_k, TrajectoryLog partial, const std::string& what)
        : Error(kind, what), t_k_(t_k), partial_(std::move(partial)) {}

    double t_k() const noexcept { return t_k_; }
    const TrajectoryLog& partial_log() const noexcept { return partial_; }

private:
    double t_k_;
    TrajectoryLog partial_;
};

/// phi(t) = psi(t) - |y_M - y_ref|, clamped from below by phi_floor.
double adaptive_funnel(const FunnelFunction& psi, const Vector& y_M, const Vector& y_ref_val, double t,
                       double phi_floor = 1e-9, bool* clamped = nullptr);

/// u_FC = beta(|w|) N(alpha(|w|^2)) w with w = e_S / phi.
Vector funnel_control(const FunnelControllerConfig& config, const Vector& e_S, double phi);

/// The model viewed as a plant (for nominal runs where system and model coincide).
Plant model_as_plant(const ControlAffineModel& model);

/**
 * Robust funnel MPC closed loop on [0, t_end].
 *
 * Each cycle re-initializes the model, solves the OCP, and co-integrates
 * plant and model on [t_k, t_k + delta] with the MPC control held and the
 * funnel feedback evaluated at every integration stage.
 */
TrajectoryLog run_robust_fmpc(const Plant& plant, const ControlAffineModel& model, const FunnelFunction& psi,
                              const ReferenceSignal& y_ref, const StageCostParams& params,
                              const FunnelControllerConfig& fc, const LoopConfig& loop_cfg);

/// Model-free funnel feedback alone: u = beta N(alpha) w with w = (y - y_ref) / psi.
TrajectoryLog run_funnel_control(const Plant& plant, const FunnelFunction& psi, const ReferenceSignal& y_ref,
                                 const FunnelControllerConfig& fc, double t_end, double step);

}  // namespace rfmpc
