#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "sdflow/mesh.hpp"

namespace sdflow::test {

/// Regular tetrahedron with edge length `a`, outward orientation.
inline TriangleMesh regular_tetrahedron(double a = 1.0) {
    const double s = a / (2.0 * std::sqrt(2.0));
    TriangleMesh m;
    m.vertices = {Vec3(s, s, s), Vec3(s, -s, -s), Vec3(-s, s, -s), Vec3(-s, -s, s)};
    m.faces = {{0, 1, 2}, {0, 2, 3}, {0, 3, 1}, {1, 3, 2}};
    return m;
}

/// Surface of the box [0,sx]x[0,sy]x[0,sz], each side split into n x n quads
/// and two triangles per quad.
inline TriangleMesh box_grid(int n, double sx = 1.0, double sy = 1.0, double sz = 1.0) {
    TriangleMesh m;
    std::map<std::tuple<int, int, int>, int> index;
    auto vertex = [&](int i, int j, int k) {
        auto [it, fresh] = index.try_emplace({i, j, k}, static_cast<int>(m.vertices.size()));
        if (fresh) m.vertices.emplace_back(sx * i / n, sy * j / n, sz * k / n);
        return it->second;
    };
    // For each axis and side, walk the (u, v) grid; flip orientation on the low side.
    for (int axis = 0; axis < 3; ++axis) {
        for (int side = 0; side < 2; ++side) {
            for (int a = 0; a < n; ++a) {
                for (int b = 0; b < n; ++b) {
                    auto at = [&](int u, int v) {
                        int c[3];
                        c[axis] = side * n;
                        c[(axis + 1) % 3] = u;
                        c[(axis + 2) % 3] = v;
                        return vertex(c[0], c[1], c[2]);
                    };
                    int p00 = at(a, b), p10 = at(a + 1, b), p11 = at(a + 1, b + 1), p01 = at(a, b + 1);
                    if (side == 1) {
                        m.faces.push_back({p00, p10, p11});
                        m.faces.push_back({p00, p11, p01});
                    } else {
                        m.faces.push_back({p00, p11, p10});
                        m.faces.push_back({p00, p01, p11});
                    }
                }
            }
        }
    }
    return m;
}

/// Family of closed test meshes: perturbed spheres with random modes and
/// jitter, ellipsoids, dumbbells and tori. Deterministic in `seed`.
inline std::vector<TriangleMesh> random_meshes(int count, std::uint64_t seed = 7) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<TriangleMesh> out;
    for (int k = 0; k < count; ++k) {
        TriangleMesh m;
        switch (k % 4) {
        case 0: {
            std::vector<HarmonicMode> modes{{2, 0, 0.1}, {3, 1, 0.05}, {4, -2, 0.05}};
            m = make_perturbed_sphere(0.5 + unit(rng), modes, rng(), 2 + k % 2);
            break;
        }
        case 1: m = make_ellipsoid(1.0, 0.5 + unit(rng), 0.3 + unit(rng), 3); break;
        case 2: m = make_dumbbell(1.0, 0.3 + 0.5 * unit(rng), 0.5 + unit(rng), {16, 32}); break;
        default: m = make_torus(2.0, 0.4 + 0.5 * unit(rng), 24, 12); break;
        }
        // Small random jitter breaks any residual symmetry of the generators.
        for (auto& v : m.vertices) v += 1e-3 * Vec3(unit(rng) - 0.5, unit(rng) - 0.5, unit(rng) - 0.5);
        out.push_back(std::move(m));
    }
    return out;
}

inline double max_vertex_distance(const TriangleMesh& a, const TriangleMesh& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.vertices.size(); ++i) d = std::max(d, (a.vertices[i] - b.vertices[i]).norm());
    return d;
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
        path_ = std::filesystem::temp_directory_path() /
                ("sdflow_test_" + std::to_string(stamp) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    [[nodiscard]] const std::filesystem::path& path() const { return path_; }
    [[nodiscard]] std::string str(const std::string& name = {}) const {
        return name.empty() ? path_.string() : (path_ / name).string();
    }

private:
    std::filesystem::path path_;
};

} // namespace sdflow::test
