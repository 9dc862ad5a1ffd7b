#pragma once

#include <memory>

#include "sdflow/geometry.hpp"
#include "sdflow/mesh.hpp"

namespace sdflow {

/// Operators and curvature of one vertex configuration.
struct Geometry {
    LumpedMass mass;
    LaplaceOperator lap;
    CurvatureField curvature;
    /// Velocity-side mass: |∂V/∂x_i|, see volume_gradient_norm.
    std::vector<double> volume_weight;
};

Geometry build_geometry(const TriangleMesh& mesh);

/// Mesh at simulation time t after `step` accepted steps. The geometry cache
/// is rebuilt lazily and always matches the current vertex positions.
class FlowState {
public:
    FlowState() = default;
    explicit FlowState(TriangleMesh mesh, double time = 0.0, long step = 0);

    [[nodiscard]] const TriangleMesh& mesh() const { return mesh_; }
    [[nodiscard]] double time() const { return time_; }
    [[nodiscard]] long step() const { return step_; }

    [[nodiscard]] const Geometry& geometry() const;
    [[nodiscard]] bool has_cached_geometry() const { return cache_ != nullptr; }

    /// Same connectivity, new positions, clock advanced by dt.
    [[nodiscard]] FlowState advanced(std::vector<Vec3> vertices, double dt) const;

    /// Same clock, new positions (used by constraint projections).
    [[nodiscard]] FlowState with_vertices(std::vector<Vec3> vertices) const;

private:
    TriangleMesh mesh_;
    double time_ = 0.0;
    long step_ = 0;
    mutable std::shared_ptr<const Geometry> cache_;
};

} // namespace sdflow
