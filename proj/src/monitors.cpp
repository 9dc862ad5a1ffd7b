#include "sdflow/monitors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>
#include <unordered_map>

#include <fmt/format.h>

#include "sdflow/error.hpp"

namespace sdflow {

namespace {

std::vector<double> squared(std::span<const double> u) {
    std::vector<double> out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = u[i] * u[i];
    return out;
}

// Uniform hash grid with cell size r over the vertex cloud.
class BallQuery {
public:
    BallQuery(std::span<const Vec3> points, double radius) : points_(points), radius_(radius) {
        origin_ = points.empty() ? Vec3::Zero() : points.front();
        for (const auto& p : points) origin_ = origin_.cwiseMin(p);
        for (std::size_t i = 0; i < points.size(); ++i) cells_[key(cell_of(points[i]))].push_back(static_cast<int>(i));
    }

    // Calls visit(i) for every point with |x_i − center| < radius (or ≤ when closed).
    template <typename Visit>
    void for_each(const Vec3& center, bool closed, Visit&& visit) const {
        const auto c = cell_of(center);
        const double r2 = radius_ * radius_;
        for (long dx = -1; dx <= 1; ++dx) {
            for (long dy = -1; dy <= 1; ++dy) {
                for (long dz = -1; dz <= 1; ++dz) {
                    auto it = cells_.find(key({c[0] + dx, c[1] + dy, c[2] + dz}));
                    if (it == cells_.end()) continue;
                    for (int i : it->second) {
                        const double d2 = (points_[i] - center).squaredNorm();
                        if (d2 < r2 || (closed && d2 == r2)) visit(i);
                    }
                }
            }
        }
    }

private:
    std::array<long, 3> cell_of(const Vec3& p) const {
        const Vec3 q = (p - origin_) / radius_;
        return {static_cast<long>(std::floor(q.x())), static_cast<long>(std::floor(q.y())),
                static_cast<long>(std::floor(q.z()))};
    }
    static std::uint64_t key(const std::array<long, 3>& c) {
        const auto h = [](long v) { return static_cast<std::uint64_t>(v + (1L << 20)) & 0x1fffffULL; };
        return (h(c[0]) << 42) | (h(c[1]) << 21) | h(c[2]);
    }

    std::span<const Vec3> points_;
    double radius_;
    Vec3 origin_;
    std::unordered_map<std::uint64_t, std::vector<int>> cells_;
};

} // namespace

int thread_budget() {
    const char* env = std::getenv("SDFLOW_THREADS");
    if (env == nullptr) return 1;
    int n = 1;
    const std::string_view s(env);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
    if (ec != std::errc{} || n < 1) return 1;
    return std::min(n, 256);
}

bool DiagnosticsRecord::all_finite() const {
    const double values[] = {t, area, volume, willmore, tracefree_l2, gradH_l2, lapH_l2, max_abs_A, h_min, quality,
                             sphericity};
    if (!std::ranges::all_of(values, [](double v) { return std::isfinite(v); })) return false;
    return std::ranges::all_of(eta, [](const EtaSample& e) { return std::isfinite(e.value); });
}

double sphericity(double volume, double area) {
    return std::cbrt(36.0 * std::numbers::pi * volume * volume) / area;
}

EtaSample concentration(const TriangleMesh& mesh, std::span<const double> density, double radius) {
    if (!(radius > 0.0)) throw ArgumentError("concentration radius must be positive");
    if (density.size() != mesh.vertices.size()) throw ArgumentError("density length mismatch");
    EtaSample best;
    best.radius = radius;
    if (mesh.vertices.empty()) return best;

    if (radius > mesh_diameter_bound(mesh)) {
        best.value = pairwise_sum(density);
        best.center = mesh.vertices.front();
        best.center_vertex = 0;
        return best;
    }

    // Candidates are gathered once per cell and shared by all centres in it.
    // Cells are a fraction of r, but not much finer than the mesh spacing.
    const std::size_t nv = mesh.vertices.size();
    const auto edge_lengths = mean_edge_length(mesh);
    const double spacing = 2.0 * pairwise_sum(edge_lengths) / static_cast<double>(nv);
    const double cell = std::max(0.5 * radius, std::min(radius, spacing));
    const long reach = static_cast<long>(std::ceil(radius / cell));
    const double half_diag = 0.5 * std::sqrt(3.0) * cell;
    const double gather2 = (radius + half_diag) * (radius + half_diag);
    Vec3 origin = mesh.vertices.front();
    for (const auto& p : mesh.vertices) origin = origin.cwiseMin(p);
    auto cell_of = [&](const Vec3& p) {
        const Vec3 q = (p - origin) / cell;
        return std::array<long, 3>{static_cast<long>(q.x()), static_cast<long>(q.y()), static_cast<long>(q.z())};
    };
    auto key = [](long x, long y, long z) {
        const auto h = [](long v) { return static_cast<std::uint64_t>(v + (1L << 20)) & 0x1fffffULL; };
        return (h(x) << 42) | (h(y) << 21) | h(z);
    };
    std::unordered_map<std::uint64_t, std::vector<int>> cells;
    std::vector<std::array<long, 3>> order;
    for (std::size_t i = 0; i < nv; ++i) {
        const auto c = cell_of(mesh.vertices[i]);
        auto& members = cells[key(c[0], c[1], c[2])];
        if (members.empty()) order.push_back(c);
        members.push_back(static_cast<int>(i));
    }

    std::vector<double> value(nv, 0.0);
    const double r2 = radius * radius;
    auto sweep = [&](std::size_t begin, std::size_t end) {
        std::vector<double> cx, cy, cz, cw;
        for (std::size_t o = begin; o < end; ++o) {
            const auto& c = order[o];
            cx.clear();
            cy.clear();
            cz.clear();
            cw.clear();
            const Vec3 mid = origin + cell * Vec3(c[0] + 0.5, c[1] + 0.5, c[2] + 0.5);
            for (long dx = -reach; dx <= reach; ++dx) {
                for (long dy = -reach; dy <= reach; ++dy) {
                    for (long dz = -reach; dz <= reach; ++dz) {
                        auto it = cells.find(key(c[0] + dx, c[1] + dy, c[2] + dz));
                        if (it == cells.end()) continue;
                        for (int i : it->second) {
                            if ((mesh.vertices[i] - mid).squaredNorm() > gather2) continue;
                            cx.push_back(mesh.vertices[i].x());
                            cy.push_back(mesh.vertices[i].y());
                            cz.push_back(mesh.vertices[i].z());
                            cw.push_back(density[i]);
                        }
                    }
                }
            }
            for (int centre : cells.find(key(c[0], c[1], c[2]))->second) {
                const Vec3& p = mesh.vertices[centre];
                double s = 0.0;
                for (std::size_t j = 0; j < cx.size(); ++j) {
                    const double ex = cx[j] - p.x();
                    const double ey = cy[j] - p.y();
                    const double ez = cz[j] - p.z();
                    s += (ex * ex + ey * ey + ez * ez < r2) ? cw[j] : 0.0;
                }
                value[centre] = s;
            }
        }
    };
    const auto workers = static_cast<std::size_t>(std::min<long>(thread_budget(), static_cast<long>(order.size())));
    if (workers <= 1) {
        sweep(0, order.size());
    } else {
        std::vector<std::jthread> pool;
        const std::size_t chunk = (order.size() + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back(sweep, std::min(order.size(), w * chunk), std::min(order.size(), (w + 1) * chunk));
        }
    }
    std::size_t arg = 0;
    for (std::size_t c = 1; c < nv; ++c) {
        if (value[c] > value[arg]) arg = c;
    }
    best.value = value[arg];
    best.center = mesh.vertices[arg];
    best.center_vertex = static_cast<int>(arg);
    return best;
}

EtaSample concentration(const FlowState& state, double radius) {
    const auto& g = state.geometry();
    std::vector<double> density(state.mesh().vertices.size());
    for (std::size_t i = 0; i < density.size(); ++i) {
        density[i] = g.curvature.second_form_sq[i] * g.mass.vertex_area[i];
    }
    return concentration(state.mesh(), density, radius);
}

double ball_integral(const FlowState& state, const Vec3& center, double radius) {
    if (!(radius > 0.0)) throw ArgumentError("ball radius must be positive");
    const auto& g = state.geometry();
    const BallQuery query(state.mesh().vertices, radius);
    double s = 0.0;
    query.for_each(center, true,
                   [&](int i) { s += g.curvature.second_form_sq[i] * g.mass.vertex_area[i]; });
    return s;
}

DiagnosticsRecord diagnostics(const FlowState& state, std::span<const double> radii, double smallness_gate) {
    const auto& mesh = state.mesh();
    const auto& g = state.geometry();
    const auto& k = g.curvature;

    DiagnosticsRecord r;
    r.step = state.step();
    r.t = state.time();
    r.area = g.mass.total_area;
    r.volume = enclosed_volume(mesh);
    r.willmore = 0.25 * integrate(squared(k.mean), g.mass);
    r.tracefree_l2 = integrate(k.tracefree_sq, g.mass);
    r.gradH_l2 = dirichlet_energy(k.mean, g.lap);
    r.lapH_l2 = integrate(squared(k.lap_mean), g.mass);

    const auto edge_mean = mean_edge_length(mesh);
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        const double a = std::sqrt(k.second_form_sq[i]);
        r.max_abs_A = std::max(r.max_abs_A, a);
        r.curvature_scale = std::max(r.curvature_scale, a * edge_mean[i]);
    }
    r.h_min = std::numeric_limits<double>::infinity();
    r.quality = 1.0;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& face = mesh.faces[f];
        for (int e = 0; e < 3; ++e) {
            r.h_min = std::min(r.h_min, (mesh.vertices[face[e]] - mesh.vertices[face[(e + 1) % 3]]).norm());
        }
        r.quality = std::min(r.quality, face_quality(mesh, f));
    }
    r.sphericity = sphericity(r.volume, r.area);
    r.li_yau_ok = r.willmore < kEightPi;
    r.smallness_ok = r.tracefree_l2 < smallness_gate;
    r.eta.reserve(radii.size());
    for (double radius : radii) r.eta.push_back(concentration(state, radius));
    return r;
}

StationarityResidual stationarity_residual(const FlowState& state) {
    const auto& g = state.geometry();
    StationarityResidual res;
    res.raw = std::sqrt(integrate(squared(g.curvature.lap_mean), g.mass));
    res.normalized = res.raw * g.mass.total_area;
    return res;
}

// -- Audits -----------------------------------------------------------------

std::string to_string(MonitoredQuantity q) {
    switch (q) {
    case MonitoredQuantity::Area: return "AREA";
    case MonitoredQuantity::TracefreeL2: return "TRACEFREE_L2";
    case MonitoredQuantity::Willmore: return "WILLMORE";
    }
    return "?";
}

double quantity_of(const DiagnosticsRecord& record, MonitoredQuantity q) {
    switch (q) {
    case MonitoredQuantity::Area: return record.area;
    case MonitoredQuantity::TracefreeL2: return record.tracefree_l2;
    case MonitoredQuantity::Willmore: return record.willmore;
    }
    return 0.0;
}

double default_slack(const DiagnosticsRecord& before, const DiagnosticsRecord& after, double quantity_before) {
    const double dt = after.t - before.t;
    return 1e-8 * std::abs(quantity_before) + dt * dt * before.lapH_l2;
}

MonotonicityAudit audit_monotone(std::span<const DiagnosticsRecord> records, MonitoredQuantity quantity,
                                 const SlackRule& slack) {
    if (records.size() < 2) throw ArgumentError("monotonicity audit needs at least two records");
    MonotonicityAudit audit;
    audit.quantity = quantity;
    for (std::size_t k = 1; k < records.size(); ++k) {
        const double before = quantity_of(records[k - 1], quantity);
        const double after = quantity_of(records[k], quantity);
        const double allowed = slack(records[k - 1], records[k], before);
        const double excess = after - before - allowed;
        if (excess > 0.0 || std::isnan(after)) {
            audit.violations.push_back({records[k].step, before, after, allowed});
            audit.max_violation = std::max(audit.max_violation, excess);
        }
    }
    audit.passed = audit.violations.empty();
    return audit;
}

DissipationReport audit_dissipation(std::span<const DiagnosticsRecord> records, DissipationCheck which,
                                    const DissipationOptions& options) {
    const std::size_t n = records.size();
    const auto begin = static_cast<std::size_t>(std::floor(options.transient_fraction * static_cast<double>(n - 1)));
    if (n < 2 || n - begin < 10) throw ArgumentError("dissipation audit needs a window of at least 10 records");

    DissipationReport report;
    report.check = which;
    report.window_begin = begin;
    const double dt_ref = records[begin + 1].t - records[begin].t;
    if (!(dt_ref > 0.0)) throw ArgumentError("nonuniform dt window: nonpositive step");

    report.extreme = which == DissipationCheck::TracefreeRate ? std::numeric_limits<double>::infinity() : 0.0;
    for (std::size_t k = begin; k + 1 < n; ++k) {
        const auto& a = records[k];
        const auto& b = records[k + 1];
        const double dt = b.t - a.t;
        if (std::abs(dt - dt_ref) > 1e-6 * dt_ref) {
            throw ArgumentError(fmt::format("nonuniform dt window at step {} ({} vs {})", b.step, dt, dt_ref));
        }
        ++report.steps;
        if (which == DissipationCheck::AreaRate) {
            const double rate = (b.area - a.area) / dt;
            const double dissipation = a.gradH_l2;
            if (dissipation < options.absolute_floor && std::abs(rate) < options.absolute_floor) {
                ++report.vacuous_steps;
                report.per_step.push_back(0.0);
                continue;
            }
            const double err = std::abs(rate + dissipation) / std::max(dissipation, options.absolute_floor);
            report.per_step.push_back(err);
            if (err > report.extreme) {
                report.extreme = err;
                report.worst_step = b.step;
            }
        } else {
            const double rate = (b.tracefree_l2 - a.tracefree_l2) / dt;
            const double dissipation = a.lapH_l2;
            // E is clamped at zero: once it sits at the floor there is nothing left to dissipate.
            const bool exhausted = a.tracefree_l2 < options.absolute_floor && b.tracefree_l2 < options.absolute_floor;
            if (exhausted || (dissipation < options.absolute_floor && std::abs(rate) < options.absolute_floor)) {
                ++report.vacuous_steps;
                continue;
            }
            const double ratio = -rate / std::max(dissipation, options.absolute_floor);
            report.per_step.push_back(ratio);
            if (ratio < report.extreme) {
                report.extreme = ratio;
                report.worst_step = b.step;
            }
        }
    }

    if (!report.per_step.empty()) {
        std::vector<double> sorted = report.per_step;
        std::ranges::sort(sorted);
        const std::size_t m = sorted.size();
        report.median = m % 2 == 1 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
    }
    if (which == DissipationCheck::AreaRate) {
        report.passed = report.median < options.area_rate_tolerance;
    } else {
        report.passed = report.per_step.empty() || report.extreme >= options.tracefree_constant;
        if (report.per_step.empty()) report.extreme = 0.0;
    }
    return report;
}

DecayWindow auto_decay_window(std::span<const DiagnosticsRecord> records, double floor_fraction) {
    if (records.empty()) throw ArgumentError("decay fit needs records");
    const double initial = records.front().tracefree_l2;
    if (!(initial > 0.0)) throw ArgumentError("decay fit: initial tracefree energy is not positive");
    std::size_t first = records.size();
    for (std::size_t k = 0; k < records.size(); ++k) {
        if (records[k].tracefree_l2 < 0.5 * initial) {
            first = k;
            break;
        }
    }
    if (first == records.size()) throw ArgumentError("decay fit: tracefree energy never fell below half its initial value");
    std::size_t last = first;
    for (std::size_t k = first; k < records.size(); ++k) {
        if (records[k].tracefree_l2 >= floor_fraction * initial && records[k].tracefree_l2 > 0.0) {
            last = k;
        } else {
            break;
        }
    }
    return {records[first].t, records[last].t};
}

DecayFit fit_decay(std::span<const DiagnosticsRecord> records, std::optional<DecayWindow> window) {
    DecayFit fit;
    fit.window = window ? *window : auto_decay_window(records);
    if (!(fit.window.t_end > fit.window.t_begin)) throw ArgumentError("decay fit: empty window");

    std::vector<double> ts;
    std::vector<double> ys;
    for (const auto& r : records) {
        if (r.t < fit.window.t_begin || r.t > fit.window.t_end) continue;
        if (!(r.tracefree_l2 > 0.0)) {
            throw ArgumentError(fmt::format("decay fit: nonpositive tracefree energy at step {}", r.step));
        }
        ts.push_back(r.t);
        ys.push_back(std::log(r.tracefree_l2));
    }
    fit.samples = ts.size();
    if (fit.samples < 10) throw ArgumentError(fmt::format("decay fit: too few samples ({})", fit.samples));

    const double n = static_cast<double>(ts.size());
    const double t_mean = pairwise_sum(ts) / n;
    const double y_mean = pairwise_sum(ys) / n;
    std::vector<double> sxy(ts.size());
    std::vector<double> sxx(ts.size());
    std::vector<double> syy(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const double dt = ts[i] - t_mean;
        const double dy = ys[i] - y_mean;
        sxy[i] = dt * dy;
        sxx[i] = dt * dt;
        syy[i] = dy * dy;
    }
    const double cov = pairwise_sum(sxy);
    const double var_t = pairwise_sum(sxx);
    const double var_y = pairwise_sum(syy);
    const double slope = cov / var_t;
    fit.lambda_fit = -slope / 2.0;
    if (var_y == 0.0) {
        fit.r_squared = 1.0;
    } else {
        std::vector<double> res(ts.size());
        for (std::size_t i = 0; i < ts.size(); ++i) {
            const double e = ys[i] - (y_mean + slope * (ts[i] - t_mean));
            res[i] = e * e;
        }
        fit.r_squared = 1.0 - pairwise_sum(res) / var_y;
    }
    return fit;
}

} // namespace sdflow
