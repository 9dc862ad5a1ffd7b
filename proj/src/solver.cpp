#include "sdflow/solver.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "sdflow/error.hpp"

namespace sdflow {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    std::vector<double> terms(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) terms[i] = a[i] * b[i];
    return pairwise_sum(terms);
}

double min_edge_length(const TriangleMesh& mesh) {
    double h = std::numeric_limits<double>::infinity();
    for (const auto& face : mesh.faces) {
        for (int e = 0; e < 3; ++e) h = std::min(h, (mesh.vertices[face[e]] - mesh.vertices[face[(e + 1) % 3]]).norm());
    }
    return h;
}

StepResult rejected(const FlowState& state, double dt, std::string message) {
    StepResult r{state, {}};
    r.outcome.accepted = false;
    r.outcome.dt_used = dt;
    r.outcome.reason = StepReason::Diverged;
    r.outcome.message = std::move(message);
    return r;
}

// Moves x_i by displacement_i · ν_i and checks the result.
StepResult displace(const FlowState& state, std::span<const double> displacement, double dt,
                    const StepOptions& options) {
    const auto& mesh = state.mesh();
    const auto& normal = state.geometry().curvature.normal;
    std::vector<Vec3> moved(mesh.vertices.size());
    double max_disp = 0.0;
    for (std::size_t i = 0; i < moved.size(); ++i) {
        moved[i] = mesh.vertices[i] + displacement[i] * normal[i];
        if (!moved[i].allFinite()) return rejected(state, dt, fmt::format("non-finite position at vertex {}", i));
        max_disp = std::max(max_disp, std::abs(displacement[i]));
    }

    double min_quality = 1.0;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& [a, b, c] = mesh.faces[f];
        const Vec3 n_old = (mesh.vertices[b] - mesh.vertices[a]).cross(mesh.vertices[c] - mesh.vertices[a]);
        const Vec3 e0 = moved[b] - moved[a];
        const Vec3 e1 = moved[c] - moved[a];
        const Vec3 n_new = e0.cross(e1);
        const double longest_sq = std::max({e0.squaredNorm(), e1.squaredNorm(), (moved[c] - moved[b]).squaredNorm()});
        const double area = 0.5 * n_new.norm();
        if (!(area >= kDegenerateAreaRatio * longest_sq) || area == 0.0) {
            return rejected(state, dt, fmt::format("degenerate face {} after step", f));
        }
        if (n_old.dot(n_new) <= 0.0) return rejected(state, dt, fmt::format("face {} flipped", f));
        const double sq = e0.squaredNorm() + e1.squaredNorm() + (moved[c] - moved[b]).squaredNorm();
        min_quality = std::min(min_quality, 4.0 * std::numbers::sqrt3 * area / sq);
    }

    StepResult r{state.advanced(std::move(moved), dt), {}};
    r.outcome.accepted = true;
    r.outcome.dt_used = dt;
    r.outcome.displacement_max = max_disp;
    r.outcome.reason = min_quality < options.quality_floor ? StepReason::QualityFloor : StepReason::Ok;
    return r;
}

} // namespace

void SolverConfig::check() const {
    if (dt_policy.kind == DtPolicy::Kind::Fixed && !(dt_policy.value > 0.0)) {
        throw ArgumentError("fixed dt must be positive");
    }
    if (dt_policy.kind == DtPolicy::Kind::Cfl && !(dt_policy.value > 0.0 && dt_policy.value <= 1.0)) {
        throw ArgumentError("CFL safety factor must lie in (0, 1]");
    }
    if (!(linear_tol > 0.0 && linear_tol <= 1e-4)) throw ArgumentError("linear_tol must lie in (0, 1e-4]");
    if (linear_max_iter < 0) throw ArgumentError("linear_max_iter must be nonnegative");
    if (max_steps < 0) throw ArgumentError("max_steps must be nonnegative");
    if (snapshot_every < 1) throw ArgumentError("snapshot_every must be at least 1");
    if (std::isnan(t_end)) throw ArgumentError("t_end must be a number");
    for (double r : monitor_radii) {
        if (!(r > 0.0)) throw ArgumentError("monitor radii must be positive");
    }
}

StepOptions StepOptions::from(const SolverConfig& config) {
    return {config.linear_tol, config.linear_max_iter, config.stop_on.quality_floor};
}

StepResult apply_normal_velocity(const FlowState& state, std::span<const double> velocity, double dt,
                                 const StepOptions& options) {
    if (!(dt > 0.0)) throw ArgumentError("dt must be positive");
    if (velocity.size() != state.mesh().vertices.size()) throw ArgumentError("velocity length mismatch");
    std::vector<double> displacement(velocity.size());
    for (std::size_t i = 0; i < velocity.size(); ++i) displacement[i] = dt * velocity[i];
    return displace(state, displacement, dt, options);
}

std::vector<double> normal_velocity(const FlowState& state) {
    const auto& g = state.geometry();
    auto velocity = g.lap.apply(g.curvature.mean);
    for (std::size_t i = 0; i < velocity.size(); ++i) velocity[i] = -velocity[i] / g.volume_weight[i];
    return velocity;
}

StepResult step_explicit(const FlowState& state, double dt, const StepOptions& options) {
    return apply_normal_velocity(state, normal_velocity(state), dt, options);
}

StepResult step_semi_implicit(const FlowState& state, double dt, const StepOptions& options) {
    if (!(dt > 0.0)) throw ArgumentError("dt must be positive");
    const auto& g = state.geometry();
    const auto& mass = g.mass.vertex_area;
    const auto& weight = g.volume_weight;
    const auto& lap = g.lap;
    const std::size_t n = mass.size();

    std::vector<double> rhs = lap.apply(g.curvature.mean);
    for (double& v : rhs) v *= -dt;

    std::vector<double> diagonal(n);
    for (Eigen::Index row = 0; row < lap.matrix.outerSize(); ++row) {
        double s = 0.0;
        for (SparseMatrix::InnerIterator it(lap.matrix, row); it; ++it) s += it.value() * it.value() / mass[it.col()];
        diagonal[row] = weight[row] + dt * s;
    }

    std::vector<double> scratch(n);
    auto apply = [&](std::span<const double> x, std::span<double> out) {
        lap.apply(x, scratch);
        for (std::size_t i = 0; i < n; ++i) scratch[i] /= mass[i];
        lap.apply(scratch, out);
        for (std::size_t i = 0; i < n; ++i) out[i] = weight[i] * x[i] + dt * out[i];
    };

    const int max_iter = options.linear_max_iter > 0 ? options.linear_max_iter : static_cast<int>(10 * n);
    std::vector<double> displacement(n, 0.0);
    const auto cg = conjugate_gradient(apply, diagonal, rhs, displacement, options.linear_tol, max_iter);
    if (!cg.converged) {
        auto r = rejected(state, dt,
                          fmt::format("conjugate gradient stalled after {} iterations (residual {:.3g})",
                                      cg.iterations, cg.relative_residual));
        r.outcome.linear_iters = cg.iterations;
        return r;
    }
    auto result = displace(state, displacement, dt, options);
    result.outcome.linear_iters = cg.iterations;
    return result;
}

CgResult conjugate_gradient(const std::function<void(std::span<const double>, std::span<double>)>& apply,
                            std::span<const double> diagonal, std::span<const double> rhs, std::span<double> x,
                            double relative_tol, int max_iter) {
    const std::size_t n = rhs.size();
    CgResult result;
    const double rhs_norm = std::sqrt(dot(rhs, rhs));
    if (rhs_norm == 0.0) {
        std::fill(x.begin(), x.end(), 0.0);
        result.converged = true;
        return result;
    }
    std::vector<double> r(n), z(n), p(n), q(n);
    apply(x, q);
    for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - q[i];
    for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diagonal[i];
    p = z;
    double rho = dot(r, z);
    result.relative_residual = std::sqrt(dot(r, r)) / rhs_norm;
    while (result.relative_residual > relative_tol && result.iterations < max_iter) {
        apply(p, q);
        const double pq = dot(p, q);
        if (!(pq > 0.0)) break;
        const double alpha = rho / pq;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diagonal[i];
        const double rho_next = dot(r, z);
        const double beta = rho_next / rho;
        rho = rho_next;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
        ++result.iterations;
        result.relative_residual = std::sqrt(dot(r, r)) / rhs_norm;
    }
    result.converged = result.relative_residual <= relative_tol;
    return result;
}

double choose_dt(const FlowState& state, const DtPolicy& policy, Scheme scheme) {
    if (policy.kind == DtPolicy::Kind::Fixed) return policy.value;
    const double h = min_edge_length(state.mesh());
    const double h2 = h * h;
    return scheme == Scheme::Explicit ? policy.value * h2 * h2 : policy.value * h2;
}

VolumeCorrection correct_volume(const FlowState& state, double target_volume) {
    const auto& mesh = state.mesh();
    const double current = enclosed_volume(mesh);
    if (!(std::abs(current - target_volume) <= 0.1 * std::abs(target_volume))) {
        throw NumericalError(fmt::format("volume correction bracket failure: volume {} drifted more than 10% from {}",
                                         current, target_volume));
    }
    VolumeCorrection out{state, 0.0, 0.0};
    if (current == target_volume) return out;

    const auto& normal = state.geometry().curvature.normal;
    const double area = state.geometry().mass.total_area;
    TriangleMesh trial = mesh;
    auto offset_mesh = [&](double s) {
        for (std::size_t i = 0; i < trial.vertices.size(); ++i) trial.vertices[i] = mesh.vertices[i] + s * normal[i];
    };
    auto residual = [&](double s) {
        offset_mesh(s);
        return enclosed_volume(trial) - target_volume;
    };

    const double reach = 0.2 * std::sqrt(area / (4.0 * std::numbers::pi));
    double lo = -reach;
    double hi = reach;
    double f_lo = residual(lo);
    double f_hi = residual(hi);
    if (f_lo > 0.0 || f_hi < 0.0) {
        throw NumericalError("volume correction bracket failure: no sign change along the normal offset");
    }
    const double tol = 1e-13 * std::abs(target_volume);
    double best = 0.0;
    double best_err = std::abs(current - target_volume);
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        const double f = residual(mid);
        if (std::abs(f) < best_err) {
            best_err = std::abs(f);
            best = mid;
        }
        if (best_err <= tol) break;
        (f < 0.0 ? lo : hi) = mid;
    }
    offset_mesh(best);
    out.offset = best;
    out.state = state.with_vertices(trial.vertices);
    out.area_change = surface_area(trial) - area;
    return out;
}

// -- Runs --------------------------------------------------------------------

std::string to_string(StopReason reason) {
    switch (reason) {
    case StopReason::TimeReached: return "T_END";
    case StopReason::MaxSteps: return "MAX_STEPS";
    case StopReason::Converged: return "CONVERGED";
    case StopReason::QualityFloor: return "QUALITY_FLOOR";
    case StopReason::CurvatureCeiling: return "CURVATURE_CEILING";
    case StopReason::Diverged: return "DIVERGED";
    case StopReason::NonFinite: return "NON_FINITE";
    case StopReason::VolumeBracket: return "VOLUME_BRACKET";
    }
    return "?";
}

int exit_code(StopReason reason) {
    switch (reason) {
    case StopReason::TimeReached:
    case StopReason::MaxSteps:
    case StopReason::Converged: return 0;
    case StopReason::QualityFloor:
    case StopReason::CurvatureCeiling: return 3;
    case StopReason::Diverged:
    case StopReason::NonFinite:
    case StopReason::VolumeBracket: return 4;
    }
    return 4;
}

Trajectory run(const TriangleMesh& initial, const SolverConfig& config, const RecordObserver& observer) {
    config.check();
    require_valid(initial);

    Trajectory traj;
    traj.snapshot_every = config.snapshot_every;
    FlowState state(initial);
    const double target_volume = enclosed_volume(initial);
    const auto options = StepOptions::from(config);

    auto emit = [&](const FlowState& s) {
        traj.records.push_back(diagnostics(s, config.monitor_radii, config.smallness_gate));
        if (observer) observer(traj.records.back());
    };
    auto stop = [&](StopReason reason, std::string message) {
        traj.stop_reason = reason;
        traj.message = std::move(message);
    };

    emit(state);
    traj.snapshots.push_back({state.step(), state.time(), state.mesh()});

    // CFL steps are held piecewise constant so that audit windows see a
    // uniform dt; the step is re-evaluated only when the mesh has shrunk
    // enough to halve the stable step.
    double held_dt = choose_dt(state, config.dt_policy, config.scheme);

    while (true) {
        const auto& last = traj.records.back();
        if (!last.all_finite()) {
            stop(StopReason::NonFinite, fmt::format("non-finite diagnostics at step {}", last.step));
            break;
        }
        if (last.step > 0) {
            if (last.quality < config.stop_on.quality_floor) {
                stop(StopReason::QualityFloor,
                     fmt::format("aspect quality {:.4g} below floor at step {}", last.quality, last.step));
                break;
            }
            if (last.curvature_scale > config.stop_on.curvature_ceiling) {
                stop(StopReason::CurvatureCeiling,
                     fmt::format("max |A| h = {:.4g} above ceiling at step {}", last.curvature_scale, last.step));
                break;
            }
            if (config.stop_on.sphericity > 0.0 && last.sphericity >= config.stop_on.sphericity) {
                stop(StopReason::Converged, fmt::format("sphericity {:.12g} reached at step {}", last.sphericity,
                                                        last.step));
                break;
            }
        }
        if (state.time() >= config.t_end) {
            stop(StopReason::TimeReached, fmt::format("t_end reached at step {}", state.step()));
            break;
        }
        if (state.step() >= config.max_steps) {
            stop(StopReason::MaxSteps, fmt::format("max_steps reached at t = {:.6g}", state.time()));
            break;
        }

        if (config.dt_policy.kind == DtPolicy::Kind::Cfl) {
            const double fresh = choose_dt(state, config.dt_policy, config.scheme);
            if (fresh < 0.5 * held_dt) held_dt = fresh;
        }
        double dt = held_dt;
        StepResult result;
        int rejections = 0;
        try {
            while (true) {
                result = config.scheme == Scheme::Explicit ? step_explicit(state, dt, options)
                                                           : step_semi_implicit(state, dt, options);
                traj.linear_iterations += result.outcome.linear_iters;
                if (result.outcome.accepted) break;
                ++traj.rejected_steps;
                if (++rejections == 3) break;
                dt *= 0.5;
            }
        } catch (const NumericalError& e) {
            stop(StopReason::Diverged, fmt::format("step {} failed: {}", state.step() + 1, e.what()));
            break;
        }
        if (!result.outcome.accepted) {
            stop(StopReason::Diverged, fmt::format("three consecutive rejected steps after step {}: {}", state.step(),
                                                   result.outcome.message));
            break;
        }
        state = std::move(result.state);

        if (config.volume_correction) {
            try {
                state = correct_volume(state, target_volume).state;
            } catch (const NumericalError& e) {
                stop(StopReason::VolumeBracket, fmt::format("step {}: {}", state.step(), e.what()));
                break;
            }
        }

        try {
            emit(state);
        } catch (const Error& e) {
            stop(StopReason::Diverged, fmt::format("diagnostics failed at step {}: {}", state.step(), e.what()));
            break;
        }
        if (state.step() % config.snapshot_every == 0) {
            traj.snapshots.push_back({state.step(), state.time(), state.mesh()});
        }
    }

    if (traj.snapshots.back().step != state.step()) {
        traj.snapshots.push_back({state.step(), state.time(), state.mesh()});
    }
    return traj;
}

} // namespace sdflow
