#pragma once

#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sdflow/state.hpp"

namespace sdflow {

/// Li–Yau threshold on the Willmore energy (1/4)∫H² and default smallness gate.
inline constexpr double kEightPi = 8.0 * std::numbers::pi;

struct EtaSample {
    double radius = 0.0;
    double value = 0.0;
    Vec3 center = Vec3::Zero();
    int center_vertex = -1;
};

/// One row of monitored integrals and gates.
struct DiagnosticsRecord {
    long step = 0;
    double t = 0.0;
    double area = 0.0;
    double volume = 0.0;
    double willmore = 0.0;      ///< (1/4)∫H²
    double tracefree_l2 = 0.0;  ///< ∫|A°|²
    double gradH_l2 = 0.0;      ///< ∫|∇H|²
    double lapH_l2 = 0.0;       ///< ∫|ΔH|²
    double max_abs_A = 0.0;
    double h_min = 0.0;
    double quality = 0.0;
    double sphericity = 0.0;
    bool li_yau_ok = false;
    bool smallness_ok = false;
    std::vector<EtaSample> eta;

    /// max_i |A|_i · (mean edge length at i); not part of the CSV schema.
    double curvature_scale = 0.0;

    [[nodiscard]] bool all_finite() const;
};

/// (36π)^{1/3} V^{2/3} / A, equal to 1 for a round sphere.
double sphericity(double volume, double area);

DiagnosticsRecord diagnostics(const FlowState& state, std::span<const double> radii, double smallness_gate);

/// Sup over vertex-anchored balls B_r(x_c) of Σ_{|x_i − x_c| < r} |A|²_i m_i.
EtaSample concentration(const FlowState& state, double radius);
EtaSample concentration(const TriangleMesh& mesh, std::span<const double> density, double radius);

/// Σ_{|x_i − center| ≤ r} |A|²_i m_i (closed ball).
double ball_integral(const FlowState& state, const Vec3& center, double radius);

/// Worker count for internal parallel loops, from SDFLOW_THREADS (default 1).
int thread_budget();

// -- Trajectory audits -------------------------------------------------------

enum class MonitoredQuantity { Area, TracefreeL2, Willmore };

std::string to_string(MonitoredQuantity q);
double quantity_of(const DiagnosticsRecord& record, MonitoredQuantity q);

struct AuditViolation {
    long step = 0;
    double before = 0.0;
    double after = 0.0;
    double allowed_slack = 0.0;
};

struct MonotonicityAudit {
    MonitoredQuantity quantity = MonitoredQuantity::Area;
    std::vector<AuditViolation> violations;
    double max_violation = 0.0;
    bool passed = true;
};

/// Allowed increase of a quantity across one step.
using SlackRule = std::function<double(const DiagnosticsRecord& before, const DiagnosticsRecord& after,
                                       double quantity_before)>;

/// 1e-8·|q| + dt²·∫|ΔH|².
double default_slack(const DiagnosticsRecord& before, const DiagnosticsRecord& after, double quantity_before);

MonotonicityAudit audit_monotone(std::span<const DiagnosticsRecord> records, MonitoredQuantity quantity,
                                 const SlackRule& slack = default_slack);

enum class DissipationCheck { AreaRate, TracefreeRate };

struct DissipationOptions {
    /// Leading fraction of the records treated as transient and skipped.
    double transient_fraction = 0.1;
    /// Steps where both sides are below this are vacuous passes (TracefreeRate:
    /// also steps where the energy stays below it).
    double absolute_floor = 1e-10;
    /// AreaRate: pass when the median relative error is below this.
    double area_rate_tolerance = 0.15;
    /// TracefreeRate: required constant c in ΔE/Δt ≤ −c ∫|ΔH|².
    double tracefree_constant = 0.125;
};

struct DissipationReport {
    DissipationCheck check = DissipationCheck::AreaRate;
    std::size_t window_begin = 0;  ///< first step index (into records) audited
    std::size_t steps = 0;
    std::size_t vacuous_steps = 0;
    /// AreaRate: |ΔA/Δt + ∫|∇H|²| / ∫|∇H|² per step.
    /// TracefreeRate: −(ΔE/Δt) / ∫|ΔH|² per step.
    std::vector<double> per_step;
    double median = 0.0;
    /// TracefreeRate: smallest observed constant; AreaRate: largest error.
    double extreme = 0.0;
    long worst_step = -1;
    bool passed = false;
};

DissipationReport audit_dissipation(std::span<const DiagnosticsRecord> records, DissipationCheck which,
                                    const DissipationOptions& options = {});

struct DecayWindow {
    double t_begin = 0.0;
    double t_end = 0.0;
};

struct DecayFit {
    DecayWindow window;
    double lambda_fit = 0.0;
    double r_squared = 0.0;
    std::size_t samples = 0;
};

/// Tail window: from the first record with ∫|A°|² < 0.5·initial through the
/// last record whose ∫|A°|² is still at least `floor_fraction`·initial.
DecayWindow auto_decay_window(std::span<const DiagnosticsRecord> records, double floor_fraction = 1e-3);

/// Least-squares fit of ln ∫|A°|² against t; λ = −slope/2.
DecayFit fit_decay(std::span<const DiagnosticsRecord> records, std::optional<DecayWindow> window = std::nullopt);

struct StationarityResidual {
    double raw = 0.0;         ///< sqrt(∫|ΔH|²)
    double normalized = 0.0;  ///< raw · area, dimensionless
};

StationarityResidual stationarity_residual(const FlowState& state);

} // namespace sdflow
