#include "sdflow/blowup.hpp"

#include <cmath>

#include <fmt/format.h>

#include "sdflow/error.hpp"

namespace sdflow {

namespace {

const EtaSample& sample_for(const DiagnosticsRecord& record, double radius) {
    for (const auto& e : record.eta) {
        if (std::abs(e.radius - radius) <= 1e-12 * radius) return e;
    }
    throw ArgumentError(fmt::format("record at step {} has no eta sample for r = {}", record.step, radius));
}

} // namespace

std::vector<ConcentrationEvent> detect(std::span<const DiagnosticsRecord> records, std::span<const double> radii,
                                       double eps1) {
    if (records.empty()) throw ArgumentError("cannot detect concentration on an empty trajectory");
    if (!(eps1 >= 0.0)) throw ArgumentError("eps1 must be nonnegative");
    if (radii.empty()) throw ArgumentError("no detection radii given");
    for (std::size_t k = 0; k < radii.size(); ++k) {
        if (!(radii[k] > 0.0)) throw ArgumentError("detection radii must be positive");
        if (k > 0 && !(radii[k] < radii[k - 1])) throw ArgumentError("detection radii must be strictly decreasing");
    }

    std::vector<ConcentrationEvent> events;
    events.reserve(radii.size());
    for (double r : radii) {
        ConcentrationEvent ev;
        ev.r_j = r;
        for (const auto& rec : records) {
            const auto& s = sample_for(rec, r);
            if (s.value > eps1) {
                ev.triggered = true;
                ev.t_j = rec.t;
                ev.x_j = s.center;
                ev.eta_at_t = s.value;
                ev.step = rec.step;
                break;
            }
        }
        events.push_back(ev);
    }
    return events;
}

std::vector<ConcentrationEvent> detect(const Trajectory& trajectory, std::span<const double> radii, double eps1) {
    return detect(trajectory.records, radii, eps1);
}

std::vector<DiagnosticsRecord> snapshot_records(std::span<const Snapshot> snapshots, std::span<const double> radii) {
    std::vector<DiagnosticsRecord> out;
    out.reserve(snapshots.size());
    for (const auto& snap : snapshots) {
        const FlowState state(snap.mesh, snap.t, snap.step);
        out.push_back(diagnostics(state, radii, kEightPi));
    }
    return out;
}

double time_factor_of(double space_factor) {
    const double s2 = space_factor * space_factor;
    return s2 * s2;
}

BlowupFrame rescale_frame(std::span<const Snapshot> snapshots, int snapshot_every, const ConcentrationEvent& event) {
    if (!event.triggered) throw ArgumentError("cannot rescale around an untriggered event");
    if (!(event.r_j > 0.0)) throw ArgumentError("event radius must be positive");

    const Snapshot* source = nullptr;
    for (const auto& snap : snapshots) {
        if (snap.t <= event.t_j && (source == nullptr || snap.t >= source->t)) source = &snap;
    }
    if (source == nullptr) throw ArgumentError(fmt::format("no snapshot at or before t = {}", event.t_j));
    if (event.step >= 0 && event.step - source->step > snapshot_every) {
        throw ArgumentError(fmt::format("nearest snapshot (step {}) is more than one interval before step {}",
                                        source->step, event.step));
    }

    BlowupFrame frame;
    frame.radius = event.r_j;
    frame.center = event.x_j;
    frame.space_factor = 1.0 / event.r_j;
    frame.time_factor = time_factor_of(frame.space_factor);
    frame.time_origin = event.t_j;
    frame.source_step = source->step;
    frame.source_time = source->t;
    frame.offset = event.t_j - source->t;
    frame.mesh = rescale(source->mesh, event.x_j, frame.space_factor);

    const FlowState state(frame.mesh, 0.0, 0);
    const double unit[] = {1.0};
    frame.diagnostics = diagnostics(state, unit, kEightPi);
    frame.unit_ball_integral = ball_integral(state, Vec3::Zero(), 1.0);
    frame.residual = stationarity_residual(state);
    return frame;
}

BlowupFrame rescale_frame(const Trajectory& trajectory, const ConcentrationEvent& event) {
    return rescale_frame(trajectory.snapshots, trajectory.snapshot_every, event);
}

} // namespace sdflow
