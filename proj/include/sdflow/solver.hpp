#pragma once

#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "sdflow/monitors.hpp"
#include "sdflow/state.hpp"

namespace sdflow {

enum class Scheme { Explicit, SemiImplicit };

struct DtPolicy {
    enum class Kind { Fixed, Cfl };
    Kind kind = Kind::Cfl;
    /// dt for Fixed, safety factor σ for Cfl.
    double value = 0.01;

    static DtPolicy fixed(double dt) { return {Kind::Fixed, dt}; }
    static DtPolicy cfl(double safety) { return {Kind::Cfl, safety}; }

    friend bool operator==(const DtPolicy&, const DtPolicy&) = default;
};

struct StopRules {
    /// Clean stop once sphericity reaches this value; <= 0 disables.
    double sphericity = 0.0;
    /// Singularity proxy: minimum face aspect quality.
    double quality_floor = 0.02;
    /// Singularity proxy: max_i |A|_i · h_i.
    double curvature_ceiling = 2.0;

    friend bool operator==(const StopRules&, const StopRules&) = default;
};

struct SolverConfig {
    Scheme scheme = Scheme::SemiImplicit;
    DtPolicy dt_policy = DtPolicy::cfl(0.01);
    double t_end = std::numeric_limits<double>::infinity();
    long max_steps = 1000;
    bool volume_correction = false;
    double linear_tol = 1e-10;
    /// 0 selects 10 · vertex count.
    int linear_max_iter = 0;
    int snapshot_every = 100;
    std::vector<double> monitor_radii;
    /// ε₀ of the smallness gate ∫|A°|² < ε₀.
    double smallness_gate = kEightPi;
    StopRules stop_on;

    /// Throws ArgumentError when an invariant is broken.
    void check() const;

    friend bool operator==(const SolverConfig&, const SolverConfig&) = default;
};

enum class StepReason { Ok, QualityFloor, Diverged };

struct StepOutcome {
    bool accepted = false;
    double dt_used = 0.0;
    double displacement_max = 0.0;
    int linear_iters = 0;
    StepReason reason = StepReason::Ok;
    std::string message;
};

struct StepResult {
    FlowState state;
    StepOutcome outcome;
};

struct StepOptions {
    double linear_tol = 1e-10;
    int linear_max_iter = 0;
    double quality_floor = 0.0;

    static StepOptions from(const SolverConfig& config);
};

/// Moves every vertex by dt · velocity_i along its normal. A rejected step
/// (degenerate or flipped face, non-finite position) returns the input state.
StepResult apply_normal_velocity(const FlowState& state, std::span<const double> velocity, double dt,
                                 const StepOptions& options = {});

/// -(LH)_i / w_i with w the volume gradient norm: the normal speed ΔH with the
/// velocity-side mass chosen so that Σ w_i v_i = 0 exactly.
std::vector<double> normal_velocity(const FlowState& state);

/// Forward Euler: x_i ← x_i + dt · v_i ν_i with v = normal_velocity.
StepResult step_explicit(const FlowState& state, double dt, const StepOptions& options = {});

/// Linearly implicit normal step: (W + dt L M⁻¹ L) δ = −dt L H with L, M, ν
/// and the volume weights W frozen at the current positions, then
/// x_i ← x_i + δ_i ν_i.
StepResult step_semi_implicit(const FlowState& state, double dt, const StepOptions& options = {});

double choose_dt(const FlowState& state, const DtPolicy& policy, Scheme scheme);

struct VolumeCorrection {
    FlowState state;
    double offset = 0.0;       ///< normal offset s
    double area_change = 0.0;  ///< area after − area before
};

/// Shifts all vertices along their normals by one scalar so the enclosed
/// volume equals `target_volume`.
VolumeCorrection correct_volume(const FlowState& state, double target_volume);

struct CgResult {
    int iterations = 0;
    double relative_residual = 0.0;
    bool converged = false;
};

/// Jacobi-preconditioned conjugate gradient for a symmetric positive definite
/// operator given as apply(x, out). `x` holds the initial guess on entry.
CgResult conjugate_gradient(const std::function<void(std::span<const double>, std::span<double>)>& apply,
                            std::span<const double> diagonal, std::span<const double> rhs, std::span<double> x,
                            double relative_tol, int max_iter);

// -- Runs --------------------------------------------------------------------

enum class StopReason {
    TimeReached,
    MaxSteps,
    Converged,
    QualityFloor,
    CurvatureCeiling,
    Diverged,
    NonFinite,
    VolumeBracket,
};

std::string to_string(StopReason reason);

/// Process exit code contract: 0 clean, 3 singularity proxy, 4 divergence.
int exit_code(StopReason reason);

struct Snapshot {
    long step = 0;
    double t = 0.0;
    TriangleMesh mesh;
};

struct Trajectory {
    std::vector<DiagnosticsRecord> records;
    std::vector<Snapshot> snapshots;
    StopReason stop_reason = StopReason::MaxSteps;
    std::string message;
    int snapshot_every = 1;
    long rejected_steps = 0;
    long linear_iterations = 0;
};

/// Observer called for every record as it is produced.
using RecordObserver = std::function<void(const DiagnosticsRecord&)>;

Trajectory run(const TriangleMesh& initial, const SolverConfig& config, const RecordObserver& observer = {});

} // namespace sdflow
