#pragma once

#include <span>
#include <vector>

#include "sdflow/monitors.hpp"
#include "sdflow/solver.hpp"

namespace sdflow {

/// Default detection threshold ε₁ = 8π/100.
inline constexpr double kDefaultEps1 = kEightPi / 100.0;

struct ConcentrationEvent {
    double r_j = 0.0;
    double t_j = 0.0;
    Vec3 x_j = Vec3::Zero();
    double eta_at_t = 0.0;
    bool triggered = false;
    /// Step of the triggering record, -1 when untriggered.
    long step = -1;
};

/// First record (in time order) whose η(r_j) exceeds eps1, for each radius.
/// Radii must be strictly decreasing and present in the records' eta samples.
std::vector<ConcentrationEvent> detect(std::span<const DiagnosticsRecord> records, std::span<const double> radii,
                                       double eps1);
std::vector<ConcentrationEvent> detect(const Trajectory& trajectory, std::span<const double> radii, double eps1);

/// Diagnostics (with the given radii) of every snapshot, in snapshot order.
std::vector<DiagnosticsRecord> snapshot_records(std::span<const Snapshot> snapshots, std::span<const double> radii);

struct BlowupFrame {
    TriangleMesh mesh;
    double radius = 0.0;        ///< r_j
    Vec3 center = Vec3::Zero();  ///< x_j
    double space_factor = 0.0;  ///< 1 / r_j
    double time_origin = 0.0;   ///< t_j
    double time_factor = 0.0;   ///< space_factor⁴
    long source_step = 0;
    double source_time = 0.0;
    /// t_j minus the snapshot time (≥ 0).
    double offset = 0.0;
    /// Frame diagnostics, eta at radius 1.
    DiagnosticsRecord diagnostics;
    /// Σ |A|² m over the closed unit ball at the origin of the frame.
    double unit_ball_integral = 0.0;
    StationarityResidual residual;
};

/// (s·s)·(s·s), the recorded time factor for a space factor s.
double time_factor_of(double space_factor);

/// Rescales the latest snapshot at or before t_j around x_j by 1/r_j.
BlowupFrame rescale_frame(std::span<const Snapshot> snapshots, int snapshot_every, const ConcentrationEvent& event);
BlowupFrame rescale_frame(const Trajectory& trajectory, const ConcentrationEvent& event);

} // namespace sdflow
