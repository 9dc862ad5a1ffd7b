#include "sdflow/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

#include <fmt/format.h>

#include "sdflow/error.hpp"

namespace sdflow {

namespace {

constexpr std::size_t kPairwiseBlock = 64;

double pairwise_sum_range(const double* data, std::size_t n) {
    if (n <= kPairwiseBlock) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += data[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum_range(data, half) + pairwise_sum_range(data + half, n - half);
}

void check_face(const TriangleMesh& mesh, std::size_t f) {
    const auto& [a, b, c] = mesh.faces[f];
    const Vec3& pa = mesh.vertices[a];
    const Vec3& pb = mesh.vertices[b];
    const Vec3& pc = mesh.vertices[c];
    const double longest = std::max({(pb - pa).norm(), (pc - pb).norm(), (pa - pc).norm()});
    const double area = 0.5 * (pb - pa).cross(pc - pa).norm();
    if (!(area >= kDegenerateAreaRatio * longest * longest) || area == 0.0) {
        throw NumericalError(fmt::format("degenerate face {} (area {:.3g})", f, area));
    }
}

void check_length(std::span<const double> field, std::size_t expected) {
    if (field.size() != expected) {
        throw ArgumentError(fmt::format("field length {} does not match vertex count {}", field.size(), expected));
    }
}

} // namespace

double pairwise_sum(std::span<const double> values) { return pairwise_sum_range(values.data(), values.size()); }

LumpedMass lumped_mass(const TriangleMesh& mesh, MassLumping lumping) {
    LumpedMass mass;
    mass.vertex_area.assign(mesh.vertices.size(), 0.0);
    std::vector<double> areas(mesh.faces.size());
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        check_face(mesh, f);
        const auto& face = mesh.faces[f];
        areas[f] = face_area(mesh, f);
        if (lumping == MassLumping::Barycentric) {
            for (int v : face) mass.vertex_area[v] += areas[f] / 3.0;
            continue;
        }
        const Vec3* p[3] = {&mesh.vertices[face[0]], &mesh.vertices[face[1]], &mesh.vertices[face[2]]};
        int obtuse = -1;
        double cot[3];
        for (int k = 0; k < 3; ++k) {
            const Vec3 u = *p[(k + 1) % 3] - *p[k];
            const Vec3 v = *p[(k + 2) % 3] - *p[k];
            const double d = u.dot(v);
            cot[k] = d / u.cross(v).norm();
            if (d < 0.0) obtuse = k;
        }
        if (obtuse >= 0) {
            for (int k = 0; k < 3; ++k) mass.vertex_area[face[k]] += areas[f] * (k == obtuse ? 0.5 : 0.25);
            continue;
        }
        for (int k = 0; k < 3; ++k) {
            const double next_sq = (*p[(k + 1) % 3] - *p[k]).squaredNorm();
            const double prev_sq = (*p[(k + 2) % 3] - *p[k]).squaredNorm();
            mass.vertex_area[face[k]] += (next_sq * cot[(k + 2) % 3] + prev_sq * cot[(k + 1) % 3]) / 8.0;
        }
    }
    mass.total_area = pairwise_sum(areas);
    return mass;
}

LaplaceOperator cotan_laplacian(const TriangleMesh& mesh) {
    const auto nv = static_cast<int>(mesh.vertices.size());
    std::unordered_map<std::uint64_t, std::size_t> edge_index;
    edge_index.reserve(mesh.faces.size() * 2);
    LaplaceOperator lap;

    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        check_face(mesh, f);
        const auto& face = mesh.faces[f];
        for (int k = 0; k < 3; ++k) {
            // Angle at face[k] is opposite the edge (face[k+1], face[k+2]).
            const int o = face[k];
            const int i = face[(k + 1) % 3];
            const int j = face[(k + 2) % 3];
            const Vec3 u = mesh.vertices[i] - mesh.vertices[o];
            const Vec3 v = mesh.vertices[j] - mesh.vertices[o];
            const double cross = u.cross(v).norm();
            if (!(cross > 0.0)) throw NumericalError(fmt::format("unbounded cotangent on face {}", f));
            const double half_cot = 0.5 * u.dot(v) / cross;
            const int lo = std::min(i, j);
            const int hi = std::max(i, j);
            const auto key = (static_cast<std::uint64_t>(lo) << 32) | static_cast<std::uint32_t>(hi);
            auto [it, inserted] = edge_index.try_emplace(key, lap.edges.size());
            if (inserted) {
                lap.edges.push_back({lo, hi});
                lap.weights.push_back(0.0);
            }
            lap.weights[it->second] += half_cot;
        }
    }

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(lap.edges.size() * 2 + static_cast<std::size_t>(nv));
    std::vector<double> diagonal(static_cast<std::size_t>(nv), 0.0);
    for (std::size_t e = 0; e < lap.edges.size(); ++e) {
        const auto [i, j] = lap.edges[e];
        const double w = lap.weights[e];
        triplets.emplace_back(i, j, -w);
        triplets.emplace_back(j, i, -w);
        diagonal[i] += w;
        diagonal[j] += w;
    }
    for (int i = 0; i < nv; ++i) triplets.emplace_back(i, i, diagonal[i]);
    lap.matrix.resize(nv, nv);
    lap.matrix.setFromTriplets(triplets.begin(), triplets.end());
    lap.matrix.makeCompressed();
    return lap;
}

void LaplaceOperator::apply(std::span<const double> u, std::span<double> out) const {
    check_length(u, size());
    check_length(out, size());
    for (Eigen::Index row = 0; row < matrix.outerSize(); ++row) {
        double s = 0.0;
        for (SparseMatrix::InnerIterator it(matrix, row); it; ++it) s += it.value() * u[it.col()];
        out[row] = s;
    }
}

std::vector<double> LaplaceOperator::apply(std::span<const double> u) const {
    std::vector<double> out(size());
    apply(u, out);
    return out;
}

std::vector<Vec3> vertex_normals(const TriangleMesh& mesh) {
    std::vector<Vec3> normals(mesh.vertices.size(), Vec3::Zero());
    for (const auto& [a, b, c] : mesh.faces) {
        const Vec3 n = (mesh.vertices[b] - mesh.vertices[a]).cross(mesh.vertices[c] - mesh.vertices[a]);
        normals[a] += n;
        normals[b] += n;
        normals[c] += n;
    }
    for (auto& n : normals) {
        const double len = n.norm();
        if (!(len > 0.0)) throw NumericalError("vertex normal undefined (zero area-weighted sum)");
        n /= len;
    }
    return normals;
}

std::vector<double> volume_gradient_norm(const TriangleMesh& mesh) {
    std::vector<Vec3> sums(mesh.vertices.size(), Vec3::Zero());
    for (const auto& [a, b, c] : mesh.faces) {
        const Vec3 n = (mesh.vertices[b] - mesh.vertices[a]).cross(mesh.vertices[c] - mesh.vertices[a]);
        sums[a] += n;
        sums[b] += n;
        sums[c] += n;
    }
    std::vector<double> w(sums.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = sums[i].norm() / 6.0;
    return w;
}

std::vector<double> angle_defects(const TriangleMesh& mesh) {
    std::vector<double> defect(mesh.vertices.size(), 2.0 * std::numbers::pi);
    for (const auto& face : mesh.faces) {
        for (int k = 0; k < 3; ++k) {
            const Vec3& p = mesh.vertices[face[k]];
            const Vec3 u = mesh.vertices[face[(k + 1) % 3]] - p;
            const Vec3 v = mesh.vertices[face[(k + 2) % 3]] - p;
            defect[face[k]] -= std::atan2(u.cross(v).norm(), u.dot(v));
        }
    }
    return defect;
}

CurvatureField curvature_field(const TriangleMesh& mesh, const LumpedMass& mass, const LaplaceOperator& lap) {
    const std::size_t nv = mesh.vertices.size();
    if (mass.vertex_area.size() != nv || lap.size() != nv) {
        throw ArgumentError("operators were built from a different mesh");
    }
    CurvatureField field;
    field.normal = vertex_normals(mesh);

    std::vector<double> coord(nv);
    std::vector<double> lap_coord(nv);
    std::vector<Vec3> mean_vector(nv, Vec3::Zero());
    for (int d = 0; d < 3; ++d) {
        for (std::size_t i = 0; i < nv; ++i) coord[i] = mesh.vertices[i][d];
        lap.apply(coord, lap_coord);
        for (std::size_t i = 0; i < nv; ++i) mean_vector[i][d] = lap_coord[i];
    }

    const auto defect = angle_defects(mesh);
    field.mean.resize(nv);
    field.gauss.resize(nv);
    for (std::size_t i = 0; i < nv; ++i) {
        const double m = mass.vertex_area[i];
        field.mean[i] = mean_vector[i].dot(field.normal[i]) / m;
        field.gauss[i] = defect[i] / m;
    }

    // |A°|² = H²/2 − 2K in dimension two. On inscribed spheres the raw value
    // sits slightly below zero (the polyhedral area deficit); clamped so the
    // integral stays a nonnegative energy that vanishes on spheres.
    field.tracefree_sq.resize(nv);
    field.second_form_sq.resize(nv);
    for (std::size_t i = 0; i < nv; ++i) {
        const double h = field.mean[i];
        const double raw = 0.5 * h * h - 2.0 * field.gauss[i];
        field.tracefree_sq[i] = std::max(raw, 0.0);
        field.second_form_sq[i] = field.tracefree_sq[i] + 0.5 * h * h;
    }

    field.lap_mean = lap.apply(field.mean);
    for (std::size_t i = 0; i < nv; ++i) field.lap_mean[i] = -field.lap_mean[i] / mass.vertex_area[i];
    return field;
}

double integrate(std::span<const double> field, const LumpedMass& mass) {
    check_length(field, mass.vertex_area.size());
    std::vector<double> terms(field.size());
    for (std::size_t i = 0; i < field.size(); ++i) terms[i] = field[i] * mass.vertex_area[i];
    return pairwise_sum(terms);
}

double dirichlet_energy(std::span<const double> field, const LaplaceOperator& lap) {
    check_length(field, lap.size());
    std::vector<double> terms(lap.edges.size());
    for (std::size_t e = 0; e < lap.edges.size(); ++e) {
        const double d = field[lap.edges[e][0]] - field[lap.edges[e][1]];
        terms[e] = lap.weights[e] * d * d;
    }
    return pairwise_sum(terms);
}

double enclosed_volume(const TriangleMesh& mesh) {
    std::vector<double> terms(mesh.faces.size());
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& [a, b, c] = mesh.faces[f];
        terms[f] = mesh.vertices[a].dot(mesh.vertices[b].cross(mesh.vertices[c]));
    }
    return pairwise_sum(terms) / 6.0;
}

double surface_area(const TriangleMesh& mesh) {
    std::vector<double> areas(mesh.faces.size());
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) areas[f] = face_area(mesh, f);
    return pairwise_sum(areas);
}

std::vector<double> mean_edge_length(const TriangleMesh& mesh) {
    std::vector<double> sum(mesh.vertices.size(), 0.0);
    std::vector<int> count(mesh.vertices.size(), 0);
    for (const auto& face : mesh.faces) {
        for (int k = 0; k < 3; ++k) {
            const int a = face[k];
            const int b = face[(k + 1) % 3];
            const double len = (mesh.vertices[a] - mesh.vertices[b]).norm();
            sum[a] += len;
            ++count[a];
        }
    }
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = count[i] > 0 ? sum[i] / count[i] : 0.0;
    return sum;
}

} // namespace sdflow
