#include <doctest.h>

#include <cmath>
#include <numbers>

#include "sdflow/error.hpp"
#include "sdflow/solver.hpp"
#include "support.hpp"

using namespace sdflow;

namespace {

TriangleMesh ovaloid(int subdivisions = 4) {
    std::vector<HarmonicMode> modes{{2, 0, 0.1}};
    return make_perturbed_sphere(1.0, modes, std::nullopt, subdivisions);
}

double max_displacement(const FlowState& a, const FlowState& b) {
    return test::max_vertex_distance(a.mesh(), b.mesh());
}

Eigen::Matrix3d rotation() {
    return (Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()) * Eigen::AngleAxisd(-0.3, Vec3::UnitZ()))
        .toRotationMatrix();
}

} // namespace

TEST_SUITE("flow_solver") {

TEST_CASE("choose_dt") {
    const FlowState tet(test::regular_tetrahedron(0.1));
    CHECK(choose_dt(tet, DtPolicy::cfl(0.01), Scheme::Explicit) == doctest::Approx(1e-6).epsilon(1e-12));
    CHECK(choose_dt(tet, DtPolicy::cfl(0.01), Scheme::SemiImplicit) == doctest::Approx(1e-4).epsilon(1e-12));
    CHECK(choose_dt(tet, DtPolicy::fixed(3e-5), Scheme::Explicit) == 3e-5);

    const FlowState big(rescale(tet.mesh(), Vec3::Zero(), 2.0));
    const double dt = choose_dt(tet, DtPolicy::cfl(0.01), Scheme::Explicit);
    CHECK(choose_dt(big, DtPolicy::cfl(0.01), Scheme::Explicit) == doctest::Approx(16.0 * dt).epsilon(1e-12));
}

TEST_CASE("solver config checks") {
    SolverConfig c;
    CHECK_NOTHROW(c.check());
    c.dt_policy = DtPolicy::cfl(1.5);
    CHECK_THROWS_AS(c.check(), ArgumentError);
    c.dt_policy = DtPolicy::fixed(-1.0);
    CHECK_THROWS_AS(c.check(), ArgumentError);
    c = SolverConfig{};
    c.monitor_radii = {0.5, -1.0};
    CHECK_THROWS_AS(c.check(), ArgumentError);
    c = SolverConfig{};
    c.snapshot_every = 0;
    CHECK_THROWS_AS(c.check(), ArgumentError);
}

TEST_CASE("explicit step barely moves a round sphere") {
    const FlowState sphere(make_icosphere(1.0, 4));
    const auto r = step_explicit(sphere, 1e-6);
    REQUIRE(r.outcome.accepted);
    CHECK(r.outcome.displacement_max < 1e-4);
    CHECK(r.state.time() == 1e-6);
    CHECK(r.state.step() == 1);
}

TEST_CASE("zero velocity leaves the mesh unchanged") {
    const FlowState s(ovaloid(3));
    std::vector<double> zero(s.mesh().vertex_count(), 0.0);
    const auto r = apply_normal_velocity(s, zero, 1e-3);
    REQUIRE(r.outcome.accepted);
    CHECK(r.state.mesh() == s.mesh());
    CHECK_THROWS_AS(apply_normal_velocity(s, zero, 0.0), ArgumentError);
    std::vector<double> short_v(3, 0.0);
    CHECK_THROWS_AS(apply_normal_velocity(s, short_v, 1e-3), ArgumentError);
}

TEST_CASE("normal velocity has zero volume-weighted mean") {
    const FlowState s(test::random_meshes(1).front());
    const auto v = normal_velocity(s);
    const auto& w = s.geometry().volume_weight;
    double flux = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        flux += w[i] * v[i];
        scale += std::abs(w[i] * v[i]);
    }
    CHECK(std::abs(flux) < 1e-12 * scale);
}

TEST_CASE("halving dt cuts the per-step volume drift at least threefold") {
    const FlowState s(ovaloid(4));
    const double v0 = enclosed_volume(s.mesh());
    const double big = std::abs(enclosed_volume(step_explicit(s, 2e-6).state.mesh()) - v0);
    const double small = std::abs(enclosed_volume(step_explicit(s, 1e-6).state.mesh()) - v0);
    CHECK(small > 0.0);
    CHECK(big / small >= 3.0);
}

TEST_CASE("explicit step is equivariant under rigid motions") {
    const auto m = ovaloid(3);
    const Eigen::Matrix3d R = rotation();
    const Vec3 shift(0.4, -1.2, 2.0);
    TriangleMesh moved = m;
    for (auto& v : moved.vertices) v = R * v + shift;
    FlowState a(m), b(moved);
    for (int k = 0; k < 20; ++k) {
        a = step_explicit(a, 1e-6).state;
        b = step_explicit(b, 1e-6).state;
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < m.vertex_count(); ++i)
        worst = std::max(worst, (R * a.mesh().vertices[i] + shift - b.mesh().vertices[i]).norm());
    CHECK(worst < 1e-10);
}

TEST_CASE("explicit step is covariant under parabolic scaling") {
    const auto m = ovaloid(3);
    const double lambda = 2.0;
    FlowState a(m), b(rescale(m, Vec3::Zero(), lambda));
    const double dt = 1e-6;
    for (int k = 0; k < 20; ++k) {
        a = step_explicit(a, dt).state;
        b = step_explicit(b, std::pow(lambda, 4) * dt).state;
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < m.vertex_count(); ++i)
        worst = std::max(worst, (lambda * a.mesh().vertices[i] - b.mesh().vertices[i]).norm());
    CHECK(worst < 1e-9);
    CHECK(b.time() == doctest::Approx(16.0 * a.time()).epsilon(1e-14));
}

TEST_CASE("semi-implicit step keeps a sphere in place") {
    const FlowState sphere(make_icosphere(1.0, 4));
    const auto r = step_semi_implicit(sphere, 1e-3);
    REQUIRE(r.outcome.accepted);
    CHECK(r.outcome.displacement_max < 1e-3);
    CHECK(r.outcome.linear_iters > 0);
}

TEST_CASE("semi-implicit and explicit steps agree to second order in dt") {
    const FlowState s(ovaloid(3));
    auto gap = [&](double dt) {
        StepOptions tight;
        tight.linear_tol = 1e-14;
        return max_displacement(step_explicit(s, dt).state, step_semi_implicit(s, dt, tight).state);
    };
    const double coarse = gap(2.5e-7);
    const double fine = gap(1.25e-7);
    CHECK(std::log2(coarse / fine) >= 1.9);
}

TEST_CASE("semi-implicit steps preserve the axial symmetry of a dumbbell") {
    const auto m = make_dumbbell(1.0, 0.5, 1.0, {24, 48});
    FlowState s(m);
    for (int k = 0; k < 10; ++k) {
        auto r = step_semi_implicit(s, 1e-5);
        REQUIRE(r.outcome.accepted);
        s = std::move(r.state);
    }
    // Vertices on one initial ring must share radius and axial position.
    double worst = 0.0;
    const auto& out = s.mesh().vertices;
    for (std::size_t i = 0; i < m.vertex_count(); ++i) {
        for (std::size_t j = i + 1; j < m.vertex_count(); ++j) {
            if (m.vertices[i].x() != m.vertices[j].x()) continue;
            const double ri = std::hypot(out[i].y(), out[i].z());
            const double rj = std::hypot(out[j].y(), out[j].z());
            worst = std::max({worst, std::abs(ri - rj), std::abs(out[i].x() - out[j].x())});
        }
    }
    CHECK(worst < 1e-8);
    CHECK(max_displacement(s, FlowState(m)) > 1e-6);
}

TEST_CASE("flipped faces reject the step and keep the state") {
    const FlowState s(ovaloid(3));
    const auto r = step_explicit(s, 1.0);
    CHECK_FALSE(r.outcome.accepted);
    CHECK(r.state.mesh() == s.mesh());
    CHECK(r.state.step() == s.step());
}

TEST_CASE("conjugate gradient solves a small SPD system") {
    Eigen::Matrix3d A;
    A << 4, 1, 0, 1, 3, 1, 0, 1, 2;
    const std::vector<double> diag{4, 3, 2};
    const std::vector<double> b{1, 2, 3};
    std::vector<double> x(3, 0.0);
    auto apply = [&](std::span<const double> in, std::span<double> out) {
        const Eigen::Vector3d y = A * Eigen::Vector3d(in[0], in[1], in[2]);
        for (int i = 0; i < 3; ++i) out[i] = y[i];
    };
    const auto res = conjugate_gradient(apply, diag, b, x, 1e-14, 10);
    CHECK(res.converged);
    const Eigen::Vector3d exact = A.ldlt().solve(Eigen::Vector3d(1, 2, 3));
    for (int i = 0; i < 3; ++i) CHECK(x[i] == doctest::Approx(exact[i]).epsilon(1e-12));
}

TEST_CASE("correct_volume") {
    SUBCASE("already at target") {
        const FlowState s(ovaloid(3));
        const auto c = correct_volume(s, enclosed_volume(s.mesh()));
        CHECK(c.offset == 0.0);
        CHECK(c.state.mesh() == s.mesh());
    }
    SUBCASE("inflated sphere returns to its radius") {
        const auto unit = make_icosphere(1.0, 0);
        const FlowState inflated(rescale(unit, Vec3::Zero(), 1.01));
        const auto c = correct_volume(inflated, enclosed_volume(unit));
        for (const auto& v : c.state.mesh().vertices) CHECK(std::abs(v.norm() - 1.0) < 1e-10);
        CHECK(c.area_change < 0.0);
    }
    SUBCASE("restores volume after explicit steps") {
        FlowState s(ovaloid(3));
        const double target = enclosed_volume(s.mesh());
        for (int k = 0; k < 100; ++k) s = step_explicit(s, 2e-6).state;
        const auto c = correct_volume(s, target);
        CHECK(std::abs(enclosed_volume(c.state.mesh()) - target) / target < 1e-12);
    }
    SUBCASE("more than 10% drift is a bracket failure") {
        const FlowState s(make_icosphere(1.0, 2));
        CHECK_THROWS_WITH_AS(correct_volume(s, 2.0 * enclosed_volume(s.mesh())), doctest::Contains("bracket"),
                             NumericalError);
    }
}

TEST_CASE("stop reasons map to exit codes") {
    CHECK(exit_code(StopReason::TimeReached) == 0);
    CHECK(exit_code(StopReason::MaxSteps) == 0);
    CHECK(exit_code(StopReason::Converged) == 0);
    CHECK(exit_code(StopReason::QualityFloor) == 3);
    CHECK(exit_code(StopReason::CurvatureCeiling) == 3);
    CHECK(exit_code(StopReason::Diverged) == 4);
    CHECK(exit_code(StopReason::NonFinite) == 4);
    CHECK(to_string(StopReason::CurvatureCeiling) == "CURVATURE_CEILING");
}

TEST_CASE("run: sphere stays round and area is steady") {
    SolverConfig c;
    c.scheme = Scheme::SemiImplicit;
    c.dt_policy = DtPolicy::fixed(1e-3);
    c.t_end = 0.02;
    c.monitor_radii = {0.5};
    const auto traj = run(make_icosphere(1.0, 3), c);
    CHECK(traj.stop_reason == StopReason::TimeReached);
    CHECK(traj.records.size() == 21);
    for (const auto& r : traj.records) {
        CHECK(r.sphericity > 0.999);
        CHECK(std::abs(r.area - traj.records.front().area) < 1e-3 * traj.records.front().area);
        CHECK(r.eta.size() == 1);
    }
    CHECK(traj.snapshots.front().step == 0);
    CHECK(traj.snapshots.back().step == traj.records.back().step);
}

TEST_CASE("run: snapshots, observer and determinism") {
    SolverConfig c;
    c.scheme = Scheme::Explicit;
    c.dt_policy = DtPolicy::cfl(0.005);
    c.max_steps = 25;
    c.snapshot_every = 10;
    std::vector<long> seen;
    const auto a = run(ovaloid(3), c, [&](const DiagnosticsRecord& r) { seen.push_back(r.step); });
    const auto b = run(ovaloid(3), c);
    CHECK(a.stop_reason == StopReason::MaxSteps);
    REQUIRE(seen.size() == 26);
    CHECK(seen.back() == 25);
    REQUIRE(a.snapshots.size() == 4);
    CHECK(a.snapshots[1].step == 10);
    CHECK(a.snapshots[3].step == 25);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].t == b.records[i].t);
        CHECK(a.records[i].area == b.records[i].area);
        CHECK(a.records[i].tracefree_l2 == b.records[i].tracefree_l2);
    }
    CHECK(a.snapshots.back().mesh == b.snapshots.back().mesh);
}

TEST_CASE("run: volume correction holds the volume") {
    SolverConfig c;
    c.scheme = Scheme::SemiImplicit;
    c.dt_policy = DtPolicy::fixed(1e-3);
    c.max_steps = 20;
    c.volume_correction = true;
    const auto traj = run(ovaloid(3), c);
    const double v0 = traj.records.front().volume;
    for (const auto& r : traj.records) CHECK(std::abs(r.volume - v0) / v0 < 1e-12);
}

TEST_CASE("run: oversized explicit step diverges after three rejections") {
    SolverConfig c;
    c.scheme = Scheme::Explicit;
    c.dt_policy = DtPolicy::fixed(10.0);
    c.max_steps = 5;
    const auto traj = run(ovaloid(3), c);
    CHECK(traj.stop_reason == StopReason::Diverged);
    CHECK(exit_code(traj.stop_reason) == 4);
    CHECK(traj.rejected_steps == 3);
    CHECK(traj.records.size() == 1);
}

TEST_CASE("run: thin-neck dumbbell stops on a singularity proxy") {
    SolverConfig c;
    c.scheme = Scheme::SemiImplicit;
    c.dt_policy = DtPolicy::cfl(0.01);
    c.max_steps = 20000;
    const auto traj = run(make_dumbbell(1.0, 0.15, 2.0, {16, 48}), c);
    CHECK((traj.stop_reason == StopReason::CurvatureCeiling || traj.stop_reason == StopReason::QualityFloor));
    CHECK(exit_code(traj.stop_reason) == 3);
}

TEST_CASE("run rejects invalid input") {
    auto open = test::regular_tetrahedron();
    open.faces.pop_back();
    CHECK_THROWS_AS(run(open, SolverConfig{}), MeshError);
}

} // TEST_SUITE
