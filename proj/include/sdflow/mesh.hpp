#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace sdflow {

using Vec3 = Eigen::Vector3d;
using Face = std::array<int, 3>;

/// Closed oriented triangle mesh. Faces are counterclockwise seen from outside.
struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;

    [[nodiscard]] std::size_t vertex_count() const { return vertices.size(); }
    [[nodiscard]] std::size_t face_count() const { return faces.size(); }

    friend bool operator==(const TriangleMesh&, const TriangleMesh&) = default;
};

struct MeshReport {
    bool is_closed = false;
    bool is_oriented = false;
    int euler_characteristic = 0;
    int genus = 0;
    double min_face_area = 0.0;
    double min_edge_length = 0.0;
    double max_edge_length = 0.0;
    double aspect_quality = 0.0;

    std::size_t vertex_count = 0;
    std::size_t edge_count = 0;
    std::size_t face_count = 0;
    std::size_t degenerate_faces = 0;
    std::size_t repeated_index_faces = 0;
    std::size_t duplicate_faces = 0;
    std::size_t out_of_range_indices = 0;

    /// All structural invariants hold: closed, oriented, no degenerate,
    /// repeated or duplicate faces.
    [[nodiscard]] bool is_valid() const;
    [[nodiscard]] std::string summary() const;
};

enum class MeshFormat { Off, Obj };

/// Faces whose area falls below this multiple of their squared longest edge
/// are treated as degenerate.
inline constexpr double kDegenerateAreaRatio = 1e-12;

/// Largest icosphere subdivision level accepted by the generators.
inline constexpr int kMaxSubdivisions = 8;

// -- File I/O ---------------------------------------------------------------

TriangleMesh load_mesh(std::string_view bytes, MeshFormat format);
TriangleMesh load_mesh_file(const std::string& path);
std::string to_off(const TriangleMesh& mesh);
void save_off(const TriangleMesh& mesh, const std::string& path);

// -- Validation -------------------------------------------------------------

MeshReport validate(const TriangleMesh& mesh);

/// Throws MeshError if validate() reports any broken invariant.
void require_valid(const TriangleMesh& mesh);

double face_area(const TriangleMesh& mesh, std::size_t f);

/// 4*sqrt(3)*area / (sum of squared edge lengths); 1 for equilateral faces.
double face_quality(const TriangleMesh& mesh, std::size_t f);

// -- Generators -------------------------------------------------------------

TriangleMesh make_icosphere(double radius, int subdivisions);

/// Real spherical harmonic Y_l^m with unit L2 norm on the unit sphere.
/// Polar angle measured from +z; m < 0 selects the sin(|m| phi) branch.
double real_spherical_harmonic(int l, int m, const Vec3& unit_direction);

struct HarmonicMode {
    int l = 0;
    int m = 0;
    double amplitude = 0.0;

    friend bool operator==(const HarmonicMode&, const HarmonicMode&) = default;
};

/// Icosphere with radial displacement sum(amp * Y_l^m). With a seed, each
/// amplitude is replaced by a uniform draw from [-amp, amp].
TriangleMesh make_perturbed_sphere(double radius, std::span<const HarmonicMode> modes,
                                   std::optional<std::uint64_t> seed = std::nullopt,
                                   int subdivisions = 4);

TriangleMesh make_ellipsoid(double a, double b, double c, int subdivisions);

struct RevolutionResolution {
    int azimuthal = 48;
    int axial = 96;
};

/// Radius profile of the dumbbell surface of revolution about the x axis.
struct DumbbellProfile {
    double bulb_radius = 1.0;
    double neck_radius = 0.5;
    double neck_length = 1.0;

    [[nodiscard]] double join_radius() const;
    [[nodiscard]] double neck_stretch() const;
    [[nodiscard]] double bulb_center() const;
    [[nodiscard]] double half_extent() const;
    [[nodiscard]] double radius_at(double x) const;
};

TriangleMesh make_dumbbell(double bulb_radius, double neck_radius, double neck_length,
                           RevolutionResolution resolution = {});

TriangleMesh make_torus(double major_radius, double minor_radius, int major_segments,
                        int minor_segments);

// -- Transformations --------------------------------------------------------

/// x -> (x - center) * factor, connectivity unchanged.
TriangleMesh rescale(const TriangleMesh& mesh, const Vec3& center, double factor);

Vec3 vertex_centroid(const TriangleMesh& mesh);
double mesh_diameter_bound(const TriangleMesh& mesh);

} // namespace sdflow
