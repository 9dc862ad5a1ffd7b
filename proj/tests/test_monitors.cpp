#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>

#include "sdflow/error.hpp"
#include "sdflow/monitors.hpp"
#include "sdflow/solver.hpp"
#include "support.hpp"

using namespace sdflow;

namespace {

constexpr double kPi = std::numbers::pi;

TriangleMesh ovaloid(int subdivisions = 4) {
    std::vector<HarmonicMode> modes{{2, 0, 0.1}};
    return make_perturbed_sphere(1.0, modes, std::nullopt, subdivisions);
}

std::vector<double> density_of(const FlowState& s) {
    const auto& g = s.geometry();
    std::vector<double> d(s.mesh().vertex_count());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = g.curvature.second_form_sq[i] * g.mass.vertex_area[i];
    return d;
}

double brute_eta(const TriangleMesh& m, std::span<const double> density, double r) {
    double best = 0.0;
    for (const auto& c : m.vertices) {
        double sum = 0.0;
        for (std::size_t i = 0; i < m.vertex_count(); ++i)
            if ((m.vertices[i] - c).norm() < r) sum += density[i];
        best = std::max(best, sum);
    }
    return best;
}

/// Records with tracefree energy E0 exp(-2 lambda t), uniform dt.
std::vector<DiagnosticsRecord> synthetic_decay(double lambda, int n, double dt) {
    std::vector<DiagnosticsRecord> out(n);
    for (int k = 0; k < n; ++k) {
        out[k].step = k;
        out[k].t = k * dt;
        out[k].tracefree_l2 = 3.0 * std::exp(-2.0 * lambda * out[k].t);
    }
    return out;
}

Trajectory explicit_run(const TriangleMesh& m, long steps) {
    SolverConfig c;
    c.scheme = Scheme::Explicit;
    c.dt_policy = DtPolicy::cfl(0.005);
    c.max_steps = steps;
    return run(m, c);
}

class ThreadsEnv {
public:
    explicit ThreadsEnv(const char* value) { ::setenv("SDFLOW_THREADS", value, 1); }
    ~ThreadsEnv() { ::unsetenv("SDFLOW_THREADS"); }
};

} // namespace

TEST_SUITE("monitors") {

TEST_CASE("diagnostics of a round sphere") {
    const auto rec = diagnostics(FlowState(make_icosphere(1.0, 4)), std::vector<double>{0.5}, kEightPi);
    CHECK(rec.willmore == doctest::Approx(4.0 * kPi).epsilon(3e-2));
    CHECK(rec.sphericity > 0.999);
    CHECK(rec.sphericity <= 1.0 + 1e-9);
    CHECK(rec.li_yau_ok);
    CHECK(rec.smallness_ok);
    CHECK(rec.tracefree_l2 == 0.0);
    CHECK(rec.all_finite());
    REQUIRE(rec.eta.size() == 1);
    CHECK(rec.eta[0].radius == 0.5);
}

TEST_CASE("diagnostics of the ovaloid") {
    const auto rec = diagnostics(FlowState(ovaloid()), {}, kEightPi);
    CHECK(rec.tracefree_l2 > 0.0);
    CHECK(rec.smallness_ok);
    CHECK(rec.li_yau_ok);
    CHECK(rec.h_min > 0.0);
    CHECK(rec.quality > 0.0);
    CHECK(rec.quality <= 1.0);
}

TEST_CASE("sphericity never exceeds one") {
    for (const auto& m : test::random_meshes(12)) {
        if (validate(m).genus != 0) continue;
        CHECK(sphericity(enclosed_volume(m), surface_area(m)) <= 1.0 + 1e-9);
    }
    CHECK(sphericity(4.0 * kPi / 3.0, 4.0 * kPi) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("scale-invariant quantities are unchanged under rescaling") {
    const auto m = ovaloid(3);
    const double lambda = 3.0;
    const auto a = diagnostics(FlowState(m), {}, kEightPi);
    const auto b = diagnostics(FlowState(rescale(m, Vec3(1, 2, 3), lambda)), {}, kEightPi);
    CHECK(b.willmore == doctest::Approx(a.willmore).epsilon(1e-10));
    CHECK(b.tracefree_l2 == doctest::Approx(a.tracefree_l2).epsilon(1e-10));
    CHECK(b.sphericity == doctest::Approx(a.sphericity).epsilon(1e-12));
    CHECK(b.area == doctest::Approx(lambda * lambda * a.area).epsilon(1e-12));
    CHECK(b.volume == doctest::Approx(lambda * lambda * lambda * a.volume).epsilon(1e-12));
    CHECK(b.max_abs_A == doctest::Approx(a.max_abs_A / lambda).epsilon(1e-10));
}

TEST_CASE("concentration") {
    const FlowState sphere(make_icosphere(1.0, 4));
    SUBCASE("radius beyond the diameter gives the full integral") {
        const auto& g = sphere.geometry();
        const double total = integrate(g.curvature.second_form_sq, g.mass);
        CHECK(concentration(sphere, 2.5).value == doctest::Approx(total).epsilon(1e-14));
        CHECK(total == doctest::Approx(8.0 * kPi).epsilon(3e-2));
    }
    SUBCASE("monotone in the radius") {
        double prev = 0.0;
        for (double r : {0.05, 0.1, 0.2, 0.4, 0.8, 1.6, 3.2}) {
            const double v = concentration(sphere, r).value;
            CHECK(v >= prev);
            prev = v;
        }
    }
    SUBCASE("small balls on a sphere stay below the detection threshold") {
        CHECK(concentration(sphere, 0.1).value < kEightPi / 100.0);
    }
    SUBCASE("matches brute force") {
        for (const auto& m : test::random_meshes(4)) {
            const FlowState s(m);
            const auto d = density_of(s);
            for (double r : {0.07, 0.3, 1.1}) {
                const auto e = concentration(m, d, r);
                CHECK(e.value == doctest::Approx(brute_eta(m, d, r)).epsilon(1e-12));
                REQUIRE(e.center_vertex >= 0);
                CHECK(e.center == m.vertices[e.center_vertex]);
            }
        }
    }
    SUBCASE("thin neck concentrates on the neck") {
        const FlowState s(make_dumbbell(1.0, 0.15, 2.0));
        const auto e = concentration(s, 0.125);
        CHECK(std::abs(e.center.x()) <= 1.0);
        CHECK(std::hypot(e.center.y(), e.center.z()) < 0.3);
    }
    SUBCASE("argument errors") {
        CHECK_THROWS_AS(concentration(sphere, 0.0), ArgumentError);
        std::vector<double> wrong(3, 1.0);
        CHECK_THROWS_AS(concentration(sphere.mesh(), wrong, 0.5), ArgumentError);
    }
}

TEST_CASE("concentration is independent of the thread count") {
    const FlowState s(ovaloid(4));
    EtaSample one, four;
    {
        ThreadsEnv env("1");
        CHECK(thread_budget() == 1);
        one = concentration(s, 0.3);
    }
    {
        ThreadsEnv env("4");
        CHECK(thread_budget() == 4);
        four = concentration(s, 0.3);
    }
    CHECK(one.value == four.value);
    CHECK(one.center_vertex == four.center_vertex);
    {
        ThreadsEnv env("garbage");
        CHECK(thread_budget() == 1);
    }
}

TEST_CASE("ball integral uses the closed ball") {
    const FlowState s(make_icosphere(1.0, 2));
    const auto d = density_of(s);
    const Vec3 c = s.mesh().vertices[0];
    const double r = 0.77;
    double expected = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i)
        if ((s.mesh().vertices[i] - c).norm() <= r) expected += d[i];
    CHECK(ball_integral(s, c, r) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("monotonicity audits") {
    const auto traj = explicit_run(ovaloid(3), 60);
    SUBCASE("explicit run is monotone") {
        for (auto q : {MonitoredQuantity::Area, MonitoredQuantity::TracefreeL2, MonitoredQuantity::Willmore}) {
            const auto audit = audit_monotone(traj.records, q);
            CHECK(audit.passed);
            CHECK(audit.violations.empty());
        }
    }
    SUBCASE("time-reversed trajectory fails every step") {
        auto reversed = traj.records;
        std::reverse(reversed.begin(), reversed.end());
        for (std::size_t k = 0; k < reversed.size(); ++k) {
            reversed[k].step = static_cast<long>(k);
            reversed[k].t = traj.records[k].t;
        }
        const auto audit = audit_monotone(reversed, MonitoredQuantity::Area);
        CHECK_FALSE(audit.passed);
        CHECK(audit.violations.size() == reversed.size() - 1);
        CHECK(audit.violations.front().step == 1);
    }
    SUBCASE("stationary sphere passes") {
        const auto sphere = explicit_run(make_icosphere(1.0, 3), 20);
        CHECK(audit_monotone(sphere.records, MonitoredQuantity::Area).passed);
    }
    SUBCASE("needs two records") {
        CHECK_THROWS_AS(audit_monotone(std::span(traj.records).first(1), MonitoredQuantity::Area), ArgumentError);
    }
}

TEST_CASE("dissipation audits") {
    SUBCASE("explicit ovaloid run satisfies both rates") {
        const auto traj = explicit_run(ovaloid(3), 60);
        const auto area = audit_dissipation(traj.records, DissipationCheck::AreaRate);
        CHECK(area.passed);
        CHECK(area.median < 0.15);
        const auto tf = audit_dissipation(traj.records, DissipationCheck::TracefreeRate);
        CHECK(tf.passed);
        CHECK(tf.extreme >= 0.125);
    }
    SUBCASE("sphere run is a vacuous pass") {
        const auto traj = explicit_run(make_icosphere(1.0, 3), 30);
        const auto tf = audit_dissipation(traj.records, DissipationCheck::TracefreeRate);
        CHECK(tf.passed);
        CHECK(tf.vacuous_steps == tf.steps);
    }
    SUBCASE("nonuniform dt is rejected") {
        auto records = synthetic_decay(1.0, 40, 0.01);
        records[20].t += 0.003;
        CHECK_THROWS_WITH_AS(audit_dissipation(records, DissipationCheck::AreaRate), doctest::Contains("nonuniform"),
                             ArgumentError);
    }
    SUBCASE("too few records") {
        const auto records = synthetic_decay(1.0, 8, 0.01);
        CHECK_THROWS_AS(audit_dissipation(records, DissipationCheck::AreaRate), ArgumentError);
    }
}

TEST_CASE("decay fit") {
    SUBCASE("recovers the rate of a pure exponential") {
        const auto records = synthetic_decay(0.7, 200, 0.05);
        const auto fit = fit_decay(records);
        CHECK(fit.lambda_fit == doctest::Approx(0.7).epsilon(1e-6));
        CHECK(fit.r_squared > 1.0 - 1e-9);
        CHECK(fit.samples >= 10);
    }
    SUBCASE("explicit window") {
        const auto records = synthetic_decay(0.7, 200, 0.05);
        const auto fit = fit_decay(records, DecayWindow{1.0, 3.0});
        CHECK(fit.samples == 41);
        CHECK(fit.lambda_fit == doctest::Approx(0.7).epsilon(1e-9));
    }
    SUBCASE("auto window stops at the floor") {
        const auto records = synthetic_decay(0.7, 400, 0.05);
        const auto w = auto_decay_window(records);
        CHECK(w.t_begin == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(w.t_end <= std::log(1000.0) / 1.4 + 1e-12);
        CHECK(w.t_end >= std::log(1000.0) / 1.4 - 0.05);
    }
    SUBCASE("nonpositive energy in the window") {
        auto records = synthetic_decay(0.7, 200, 0.05);
        records[50].tracefree_l2 = 0.0;
        CHECK_THROWS_AS(fit_decay(records, DecayWindow{1.0, 5.0}), ArgumentError);
    }
    SUBCASE("too few samples") {
        const auto records = synthetic_decay(0.7, 200, 0.05);
        CHECK_THROWS_WITH_AS(fit_decay(records, DecayWindow{1.0, 1.2}), doctest::Contains("too few"), ArgumentError);
    }
}

TEST_CASE("stationarity residual") {
    SUBCASE("decreases under sphere refinement") {
        double prev = stationarity_residual(FlowState(make_icosphere(1.0, 2))).raw;
        for (int s = 3; s <= 5; ++s) {
            const double r = stationarity_residual(FlowState(make_icosphere(1.0, s))).raw;
            CHECK(r < prev);
            prev = r;
        }
    }
    SUBCASE("normalised value is scale invariant") {
        const auto m = ovaloid(3);
        const auto a = stationarity_residual(FlowState(m));
        const auto b = stationarity_residual(FlowState(rescale(m, Vec3::Zero(), 4.0)));
        CHECK(b.normalized == doctest::Approx(a.normalized).epsilon(1e-9));
    }
    SUBCASE("dumbbell is far from stationary") {
        const double sphere = stationarity_residual(FlowState(make_icosphere(1.0, 4))).raw;
        const double dumbbell = stationarity_residual(FlowState(make_dumbbell(1.0, 0.5, 1.0, {40, 64}))).raw;
        CHECK(dumbbell > 10.0 * sphere);
    }
}

TEST_CASE("quantity accessors") {
    DiagnosticsRecord r;
    r.area = 1.0;
    r.tracefree_l2 = 2.0;
    r.willmore = 3.0;
    CHECK(quantity_of(r, MonitoredQuantity::Area) == 1.0);
    CHECK(quantity_of(r, MonitoredQuantity::TracefreeL2) == 2.0);
    CHECK(quantity_of(r, MonitoredQuantity::Willmore) == 3.0);
    r.eta.push_back({0.5, std::nan(""), Vec3::Zero(), 0});
    CHECK_FALSE(r.all_finite());
}

} // TEST_SUITE
