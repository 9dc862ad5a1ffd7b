#include "sdflow/state.hpp"

#include "sdflow/error.hpp"

namespace sdflow {

Geometry build_geometry(const TriangleMesh& mesh) {
    Geometry g;
    g.mass = lumped_mass(mesh);
    g.lap = cotan_laplacian(mesh);
    g.curvature = curvature_field(mesh, g.mass, g.lap);
    g.volume_weight = volume_gradient_norm(mesh);
    return g;
}

FlowState::FlowState(TriangleMesh mesh, double time, long step)
    : mesh_(std::move(mesh)), time_(time), step_(step) {}

const Geometry& FlowState::geometry() const {
    if (!cache_) cache_ = std::make_shared<const Geometry>(build_geometry(mesh_));
    return *cache_;
}

FlowState FlowState::advanced(std::vector<Vec3> vertices, double dt) const {
    if (vertices.size() != mesh_.vertices.size()) throw ArgumentError("vertex count changed during a step");
    FlowState next;
    next.mesh_.vertices = std::move(vertices);
    next.mesh_.faces = mesh_.faces;
    next.time_ = time_ + dt;
    next.step_ = step_ + 1;
    return next;
}

FlowState FlowState::with_vertices(std::vector<Vec3> vertices) const {
    if (vertices.size() != mesh_.vertices.size()) throw ArgumentError("vertex count changed");
    FlowState next;
    next.mesh_.vertices = std::move(vertices);
    next.mesh_.faces = mesh_.faces;
    next.time_ = time_;
    next.step_ = step_;
    return next;
}

} // namespace sdflow
