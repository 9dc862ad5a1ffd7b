#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "sdflow/mesh.hpp"

namespace sdflow {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Sum of values with pairwise (cascade) summation in a fixed order.
double pairwise_sum(std::span<const double> values);

enum class MassLumping {
    /// Meyer et al. mixed Voronoi areas; exact mean curvature on inscribed spheres.
    MixedVoronoi,
    /// One third of the incident face area.
    Barycentric,
};

/// Per-vertex lumped area weights. Strictly positive; they partition the
/// surface area face by face.
struct LumpedMass {
    std::vector<double> vertex_area;
    double total_area = 0.0;
};

/// Cotangent Laplacian, positive semidefinite convention: u^T L u is the
/// discrete Dirichlet energy, rows sum to zero.
struct LaplaceOperator {
    SparseMatrix matrix;
    /// Undirected edges (i < j) with weight w_ij = (cot a + cot b) / 2.
    std::vector<std::array<int, 2>> edges;
    std::vector<double> weights;

    [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(matrix.rows()); }
    [[nodiscard]] std::vector<double> apply(std::span<const double> u) const;
    void apply(std::span<const double> u, std::span<double> out) const;
};

/// Per-vertex geometric data.
struct CurvatureField {
    std::vector<Vec3> normal;
    std::vector<double> mean;            ///< H, 2/R on a sphere of radius R
    std::vector<double> gauss;           ///< K from the angle defect
    std::vector<double> second_form_sq;  ///< |A|^2
    std::vector<double> tracefree_sq;    ///< |A°|^2, clamped at zero
    std::vector<double> lap_mean;        ///< ΔH = -M^{-1} L H
};

LumpedMass lumped_mass(const TriangleMesh& mesh, MassLumping lumping = MassLumping::MixedVoronoi);
LaplaceOperator cotan_laplacian(const TriangleMesh& mesh);

/// Area-weighted outward vertex normals.
std::vector<Vec3> vertex_normals(const TriangleMesh& mesh);

/// |∂V/∂x_i|: one third of the norm of the summed incident face area vectors.
/// A normal displacement δ_i changes the enclosed volume by Σ w_i δ_i to first order.
std::vector<double> volume_gradient_norm(const TriangleMesh& mesh);

/// Angle defect 2π − Σ incident angles at each vertex.
std::vector<double> angle_defects(const TriangleMesh& mesh);

CurvatureField curvature_field(const TriangleMesh& mesh, const LumpedMass& mass, const LaplaceOperator& lap);

/// Σ u_i m_i.
double integrate(std::span<const double> field, const LumpedMass& mass);

/// u^T L u, summed over edges as Σ w_ij (u_i − u_j)².
double dirichlet_energy(std::span<const double> field, const LaplaceOperator& lap);

/// (1/6) Σ <x_a, x_b × x_c>; positive for outward orientation.
double enclosed_volume(const TriangleMesh& mesh);

double surface_area(const TriangleMesh& mesh);

/// Per-vertex mean incident edge length.
std::vector<double> mean_edge_length(const TriangleMesh& mesh);

} // namespace sdflow
