#include "sdflow/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>

#include "sdflow/error.hpp"

namespace sdflow {

namespace {

// Splits a line into whitespace-separated tokens, dropping anything after '#'.
std::vector<std::string_view> tokenize(std::string_view line) {
    if (auto hash = line.find('#'); hash != std::string_view::npos) {
        line = line.substr(0, hash);
    }
    std::vector<std::string_view> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t j = i;
        while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
        if (j > i) tokens.push_back(line.substr(i, j - i));
        i = j;
    }
    return tokens;
}

double parse_double(std::string_view token, std::size_t line_no) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc{} || ptr != token.data() + token.size()) {
        throw MeshError(fmt::format("line {}: malformed number '{}'", line_no, token));
    }
    return value;
}

long long parse_int(std::string_view token, std::size_t line_no) {
    long long value = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc{} || ptr != token.data() + token.size()) {
        throw MeshError(fmt::format("line {}: malformed integer '{}'", line_no, token));
    }
    return value;
}

// Yields (line number, tokens) for every non-empty line.
std::vector<std::pair<std::size_t, std::vector<std::string_view>>> token_lines(std::string_view bytes) {
    std::vector<std::pair<std::size_t, std::vector<std::string_view>>> out;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= bytes.size()) {
        std::size_t end = bytes.find('\n', start);
        if (end == std::string_view::npos) end = bytes.size();
        ++line_no;
        auto tokens = tokenize(bytes.substr(start, end - start));
        if (!tokens.empty()) out.emplace_back(line_no, std::move(tokens));
        start = end + 1;
    }
    return out;
}

TriangleMesh parse_off(std::string_view bytes) {
    auto lines = token_lines(bytes);
    if (lines.empty()) throw MeshError("empty OFF file");

    std::size_t cursor = 0;
    auto& header = lines[cursor].second;
    if (header[0] != "OFF") throw MeshError("missing OFF header");
    std::vector<std::string_view> counts(header.begin() + 1, header.end());
    ++cursor;
    if (counts.empty()) {
        if (cursor >= lines.size()) throw MeshError("missing OFF counts line");
        counts = lines[cursor].second;
        ++cursor;
    }
    if (counts.size() < 2) throw MeshError("OFF counts line needs vertex and face counts");
    const auto nv = parse_int(counts[0], lines[cursor - 1].first);
    const auto nf = parse_int(counts[1], lines[cursor - 1].first);
    if (nv < 0 || nf < 0) throw MeshError("negative OFF counts");

    TriangleMesh mesh;
    mesh.vertices.reserve(static_cast<std::size_t>(nv));
    mesh.faces.reserve(static_cast<std::size_t>(nf));
    for (long long i = 0; i < nv; ++i, ++cursor) {
        if (cursor >= lines.size()) throw MeshError("OFF file truncated in vertex block");
        const auto& [no, tok] = lines[cursor];
        if (tok.size() < 3) throw MeshError(fmt::format("line {}: vertex needs 3 coordinates", no));
        mesh.vertices.emplace_back(parse_double(tok[0], no), parse_double(tok[1], no), parse_double(tok[2], no));
    }
    for (long long i = 0; i < nf; ++i, ++cursor) {
        if (cursor >= lines.size()) throw MeshError("OFF file truncated in face block");
        const auto& [no, tok] = lines[cursor];
        const auto arity = parse_int(tok[0], no);
        if (arity != 3) throw MeshError(fmt::format("line {}: non-triangle face ({} vertices)", no, arity));
        if (tok.size() < 4) throw MeshError(fmt::format("line {}: face needs 3 indices", no));
        Face face{};
        for (int k = 0; k < 3; ++k) {
            const auto idx = parse_int(tok[1 + k], no);
            if (idx < 0 || idx >= nv) throw MeshError(fmt::format("line {}: out-of-range index {}", no, idx));
            face[k] = static_cast<int>(idx);
        }
        mesh.faces.push_back(face);
    }
    return mesh;
}

TriangleMesh parse_obj(std::string_view bytes) {
    TriangleMesh mesh;
    std::vector<std::pair<std::size_t, std::vector<long long>>> raw_faces;
    for (const auto& [no, tok] : token_lines(bytes)) {
        if (tok[0] == "v") {
            if (tok.size() < 4) throw MeshError(fmt::format("line {}: vertex needs 3 coordinates", no));
            mesh.vertices.emplace_back(parse_double(tok[1], no), parse_double(tok[2], no), parse_double(tok[3], no));
        } else if (tok[0] == "f") {
            if (tok.size() != 4) {
                throw MeshError(fmt::format("line {}: non-triangle face ({} vertices)", no, tok.size() - 1));
            }
            std::vector<long long> idx;
            for (std::size_t k = 1; k < 4; ++k) {
                auto t = tok[k];
                t = t.substr(0, t.find('/'));
                idx.push_back(parse_int(t, no));
            }
            raw_faces.emplace_back(no, std::move(idx));
        }
    }
    const auto nv = static_cast<long long>(mesh.vertices.size());
    for (const auto& [no, idx] : raw_faces) {
        Face face{};
        for (int k = 0; k < 3; ++k) {
            long long i = idx[k] > 0 ? idx[k] - 1 : nv + idx[k];
            if (idx[k] == 0 || i < 0 || i >= nv) {
                throw MeshError(fmt::format("line {}: out-of-range index {}", no, idx[k]));
            }
            face[k] = static_cast<int>(i);
        }
        mesh.faces.push_back(face);
    }
    return mesh;
}

std::uint64_t edge_key(int a, int b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

} // namespace

TriangleMesh load_mesh(std::string_view bytes, MeshFormat format) {
    return format == MeshFormat::Off ? parse_off(bytes) : parse_obj(bytes);
}

TriangleMesh load_mesh_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MeshError("cannot open " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    std::string lower = path;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    const auto format = lower.ends_with(".obj") ? MeshFormat::Obj : MeshFormat::Off;
    return load_mesh(buffer.str(), format);
}

std::string to_off(const TriangleMesh& mesh) {
    std::string out = fmt::format("OFF\n{} {} 0\n", mesh.vertices.size(), mesh.faces.size());
    out.reserve(out.size() + mesh.vertices.size() * 72 + mesh.faces.size() * 24);
    for (const auto& v : mesh.vertices) {
        out += fmt::format("{:.17g} {:.17g} {:.17g}\n", v.x(), v.y(), v.z());
    }
    for (const auto& f : mesh.faces) {
        out += fmt::format("3 {} {} {}\n", f[0], f[1], f[2]);
    }
    return out;
}

void save_off(const TriangleMesh& mesh, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw MeshError("cannot write " + path);
    out << to_off(mesh);
}

double face_area(const TriangleMesh& mesh, std::size_t f) {
    const auto& [a, b, c] = mesh.faces[f];
    const Vec3& p = mesh.vertices[a];
    return 0.5 * (mesh.vertices[b] - p).cross(mesh.vertices[c] - p).norm();
}

double face_quality(const TriangleMesh& mesh, std::size_t f) {
    const auto& [a, b, c] = mesh.faces[f];
    const Vec3& pa = mesh.vertices[a];
    const Vec3& pb = mesh.vertices[b];
    const Vec3& pc = mesh.vertices[c];
    const double sq = (pb - pa).squaredNorm() + (pc - pb).squaredNorm() + (pa - pc).squaredNorm();
    if (sq == 0.0) return 0.0;
    return 4.0 * std::numbers::sqrt3 * face_area(mesh, f) / sq;
}

bool MeshReport::is_valid() const {
    return is_closed && is_oriented && degenerate_faces == 0 && repeated_index_faces == 0 &&
           duplicate_faces == 0 && out_of_range_indices == 0 && face_count > 0;
}

std::string MeshReport::summary() const {
    return fmt::format(
        "V={} E={} F={} chi={} genus={} closed={} oriented={} min_area={:.6g} h_min={:.6g} h_max={:.6g} "
        "quality={:.6g} valid={}",
        vertex_count, edge_count, face_count, euler_characteristic, genus, is_closed, is_oriented, min_face_area,
        min_edge_length, max_edge_length, aspect_quality, is_valid());
}

MeshReport validate(const TriangleMesh& mesh) {
    MeshReport report;
    report.vertex_count = mesh.vertices.size();
    report.face_count = mesh.faces.size();

    const int nv = static_cast<int>(mesh.vertices.size());
    std::unordered_map<std::uint64_t, int> directed;
    std::set<std::array<int, 3>> triples;
    directed.reserve(mesh.faces.size() * 3);

    report.min_face_area = std::numeric_limits<double>::infinity();
    report.min_edge_length = std::numeric_limits<double>::infinity();
    report.max_edge_length = 0.0;
    report.aspect_quality = 1.0;

    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& face = mesh.faces[f];
        if (std::ranges::any_of(face, [nv](int i) { return i < 0 || i >= nv; })) {
            ++report.out_of_range_indices;
            continue;
        }
        if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2]) {
            ++report.repeated_index_faces;
        }
        auto sorted = face;
        std::ranges::sort(sorted);
        if (!triples.insert(sorted).second) ++report.duplicate_faces;

        double longest = 0.0;
        for (int k = 0; k < 3; ++k) {
            const int a = face[k];
            const int b = face[(k + 1) % 3];
            ++directed[edge_key(a, b)];
            const double len = (mesh.vertices[a] - mesh.vertices[b]).norm();
            longest = std::max(longest, len);
            report.min_edge_length = std::min(report.min_edge_length, len);
            report.max_edge_length = std::max(report.max_edge_length, len);
        }
        const double area = face_area(mesh, f);
        report.min_face_area = std::min(report.min_face_area, area);
        report.aspect_quality = std::min(report.aspect_quality, face_quality(mesh, f));
        if (!(area >= kDegenerateAreaRatio * longest * longest) || area == 0.0) ++report.degenerate_faces;
    }

    // Closed: every undirected edge has exactly two incident faces.
    // Oriented: those two faces traverse it in opposite directions.
    std::map<std::pair<int, int>, std::pair<int, int>> undirected;  // (a<b) -> (#a->b, #b->a)
    for (const auto& [key, count] : directed) {
        const int a = static_cast<int>(key >> 32);
        const int b = static_cast<int>(key & 0xffffffffu);
        auto& entry = undirected[{std::min(a, b), std::max(a, b)}];
        (a < b ? entry.first : entry.second) += count;
    }
    bool closed = !undirected.empty();
    bool oriented = !undirected.empty();
    for (const auto& [edge, counts] : undirected) {
        const int total = counts.first + counts.second;
        if (total != 2) closed = false;
        if (counts.first != 1 || counts.second != 1) oriented = false;
    }
    report.is_closed = closed && oriented;
    report.is_oriented = oriented;
    report.edge_count = undirected.size();
    report.euler_characteristic = static_cast<int>(report.vertex_count) - static_cast<int>(report.edge_count) +
                                  static_cast<int>(report.face_count);
    report.genus = (2 - report.euler_characteristic) / 2;
    if (mesh.faces.empty()) {
        report.min_face_area = 0.0;
        report.min_edge_length = 0.0;
        report.aspect_quality = 0.0;
    }
    return report;
}

void require_valid(const TriangleMesh& mesh) {
    const auto report = validate(mesh);
    if (!report.is_valid()) throw MeshError("invalid mesh: " + report.summary());
}

// -- Generators -------------------------------------------------------------

namespace {

TriangleMesh unit_icosphere(int subdivisions) {
    if (subdivisions < 0 || subdivisions > kMaxSubdivisions) {
        throw ArgumentError(fmt::format("subdivision limit exceeded: {} not in [0, {}]", subdivisions,
                                        kMaxSubdivisions));
    }
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    TriangleMesh mesh;
    mesh.vertices = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                     {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    for (auto& v : mesh.vertices) v.normalize();
    mesh.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                  {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                  {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};

    for (int level = 0; level < subdivisions; ++level) {
        std::unordered_map<std::uint64_t, int> midpoint;
        auto mid = [&](int a, int b) {
            const auto key = edge_key(std::min(a, b), std::max(a, b));
            if (auto it = midpoint.find(key); it != midpoint.end()) return it->second;
            const Vec3 p = (0.5 * (mesh.vertices[a] + mesh.vertices[b])).normalized();
            mesh.vertices.push_back(p);
            const int idx = static_cast<int>(mesh.vertices.size()) - 1;
            midpoint.emplace(key, idx);
            return idx;
        };
        std::vector<Face> refined;
        refined.reserve(mesh.faces.size() * 4);
        for (const auto& [a, b, c] : mesh.faces) {
            const int ab = mid(a, b);
            const int bc = mid(b, c);
            const int ca = mid(c, a);
            refined.push_back({a, ab, ca});
            refined.push_back({b, bc, ab});
            refined.push_back({c, ca, bc});
            refined.push_back({ab, bc, ca});
        }
        mesh.faces = std::move(refined);
    }
    return mesh;
}

double signed_volume(const TriangleMesh& mesh) {
    double vol = 0.0;
    for (const auto& [a, b, c] : mesh.faces) {
        vol += mesh.vertices[a].dot(mesh.vertices[b].cross(mesh.vertices[c]));
    }
    return vol / 6.0;
}

void orient_outward(TriangleMesh& mesh) {
    if (signed_volume(mesh) < 0.0) {
        for (auto& f : mesh.faces) std::swap(f[1], f[2]);
    }
}

// splitmix64: small, portable, and fully specified.
struct SplitMix64 {
    std::uint64_t state;
    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

} // namespace

TriangleMesh make_icosphere(double radius, int subdivisions) {
    if (!(radius > 0.0)) throw ArgumentError("icosphere radius must be positive");
    auto mesh = unit_icosphere(subdivisions);
    for (auto& v : mesh.vertices) v = v * radius;
    return mesh;
}

double real_spherical_harmonic(int l, int m, const Vec3& u) {
    if (l < 0 || std::abs(m) > l) throw ArgumentError(fmt::format("invalid harmonic degree/order ({}, {})", l, m));
    const int am = std::abs(m);
    const double cos_theta = std::clamp(u.z(), -1.0, 1.0);
    const double phi = std::atan2(u.y(), u.x());
    // (l-|m|)! / (l+|m|)!
    double ratio = 1.0;
    for (int k = l - am + 1; k <= l + am; ++k) ratio /= static_cast<double>(k);
    const double norm = std::sqrt((2.0 * l + 1.0) / (4.0 * std::numbers::pi) * ratio);
    const double legendre = std::assoc_legendre(static_cast<unsigned>(l), static_cast<unsigned>(am), cos_theta);
    if (m == 0) return norm * legendre;
    const double angular = m > 0 ? std::cos(am * phi) : std::sin(am * phi);
    return std::numbers::sqrt2 * norm * legendre * angular;
}

TriangleMesh make_perturbed_sphere(double radius, std::span<const HarmonicMode> modes,
                                   std::optional<std::uint64_t> seed, int subdivisions) {
    if (!(radius > 0.0)) throw ArgumentError("sphere radius must be positive");
    std::vector<HarmonicMode> active(modes.begin(), modes.end());
    for (auto& mode : active) {
        if (!(std::abs(mode.amplitude) < radius / 2.0)) {
            throw ArgumentError(fmt::format("amplitude guard violated: |{}| >= radius/2", mode.amplitude));
        }
        (void)real_spherical_harmonic(mode.l, mode.m, Vec3::UnitZ());
    }
    if (seed) {
        SplitMix64 rng{*seed};
        for (auto& mode : active) mode.amplitude = (2.0 * rng.uniform01() - 1.0) * mode.amplitude;
    }
    auto mesh = unit_icosphere(subdivisions);
    for (auto& u : mesh.vertices) {
        double r = radius;
        for (const auto& mode : active) r += mode.amplitude * real_spherical_harmonic(mode.l, mode.m, u);
        u = u * r;
    }
    return mesh;
}

TriangleMesh make_ellipsoid(double a, double b, double c, int subdivisions) {
    if (!(a > 0.0 && b > 0.0 && c > 0.0)) throw ArgumentError("ellipsoid semi-axes must be positive");
    auto mesh = unit_icosphere(subdivisions);
    for (auto& v : mesh.vertices) v = Vec3(a * v.x(), b * v.y(), c * v.z());
    return mesh;
}

double DumbbellProfile::join_radius() const { return 0.5 * (neck_radius + bulb_radius); }

double DumbbellProfile::neck_stretch() const {
    return 0.5 * neck_length / std::acosh(join_radius() / neck_radius);
}

double DumbbellProfile::bulb_center() const {
    const double rj = join_radius();
    return 0.5 * neck_length + std::sqrt(bulb_radius * bulb_radius - rj * rj);
}

double DumbbellProfile::half_extent() const { return bulb_center() + bulb_radius; }

double DumbbellProfile::radius_at(double x) const {
    const double ax = std::abs(x);
    if (ax <= 0.5 * neck_length) return neck_radius * std::cosh(ax / neck_stretch());
    const double d = ax - bulb_center();
    return std::sqrt(std::max(0.0, bulb_radius * bulb_radius - d * d));
}

TriangleMesh make_dumbbell(double bulb_radius, double neck_radius, double neck_length,
                           RevolutionResolution resolution) {
    if (!(neck_radius > 0.0 && neck_radius < bulb_radius)) {
        throw ArgumentError("dumbbell requires 0 < neck_radius < bulb_radius");
    }
    if (!(neck_length > 0.0)) throw ArgumentError("degenerate neck: neck_length must be positive");
    if (resolution.azimuthal < 3 || resolution.axial < 4) throw ArgumentError("dumbbell resolution too coarse");
    const DumbbellProfile profile{bulb_radius, neck_radius, neck_length};
    const double center = profile.bulb_center();
    const double half_neck = 0.5 * neck_length;

    // Half meridian from the right pole (s = 0) to the waist x = 0, densely sampled.
    constexpr int kSamples = 20000;
    std::vector<double> xs;
    std::vector<double> rs;
    const double join_angle = std::acos(std::clamp((half_neck - center) / bulb_radius, -1.0, 1.0));
    for (int i = 0; i <= kSamples; ++i) {
        const double angle = join_angle * i / kSamples;
        xs.push_back(center + bulb_radius * std::cos(angle));
        rs.push_back(bulb_radius * std::sin(angle));
    }
    for (int i = 1; i <= kSamples; ++i) {
        const double x = half_neck * (1.0 - static_cast<double>(i) / kSamples);
        xs.push_back(x);
        rs.push_back(profile.radius_at(x));
    }
    std::vector<double> arc(xs.size(), 0.0);
    for (std::size_t i = 1; i < xs.size(); ++i) {
        arc[i] = arc[i - 1] + std::hypot(xs[i] - xs[i - 1], rs[i] - rs[i - 1]);
    }

    // Rings k = 0..axial from right pole to left pole; the waist ring sits at k = axial/2.
    const int axial = resolution.axial + (resolution.axial % 2);
    const int half = axial / 2;
    std::vector<double> ring_x(axial + 1);
    std::vector<double> ring_r(axial + 1);
    std::size_t seg = 0;
    for (int k = 0; k <= half; ++k) {
        const double s = arc.back() * k / half;
        while (seg + 2 < arc.size() && arc[seg + 1] < s) ++seg;
        const double w = std::clamp((s - arc[seg]) / (arc[seg + 1] - arc[seg]), 0.0, 1.0);
        ring_x[k] = xs[seg] + w * (xs[seg + 1] - xs[seg]);
        ring_r[k] = rs[seg] + w * (rs[seg + 1] - rs[seg]);
    }
    ring_x[0] = profile.half_extent();
    ring_r[0] = 0.0;
    ring_x[half] = 0.0;
    ring_r[half] = neck_radius;
    for (int k = half + 1; k <= axial; ++k) {
        ring_x[k] = -ring_x[axial - k];
        ring_r[k] = ring_r[axial - k];
    }

    const int n = resolution.azimuthal;
    TriangleMesh mesh;
    std::vector<int> ring_start(axial + 1);
    for (int k = 0; k <= axial; ++k) {
        ring_start[k] = static_cast<int>(mesh.vertices.size());
        if (k == 0 || k == axial) {
            mesh.vertices.emplace_back(ring_x[k], 0.0, 0.0);
            continue;
        }
        const double offset = (k % 2) * 0.5;
        for (int j = 0; j < n; ++j) {
            const double phi = 2.0 * std::numbers::pi * (j + offset) / n;
            mesh.vertices.emplace_back(ring_x[k], ring_r[k] * std::cos(phi), ring_r[k] * std::sin(phi));
        }
    }
    auto at = [&](int k, int j) { return ring_start[k] + ((j % n) + n) % n; };
    for (int j = 0; j < n; ++j) {
        mesh.faces.push_back({ring_start[0], at(1, j), at(1, j + 1)});
        mesh.faces.push_back({ring_start[axial], at(axial - 1, j + 1), at(axial - 1, j)});
    }
    for (int k = 1; k + 1 < axial; ++k) {
        // Ring k has offset (k%2)/2, ring k+1 the other parity.
        for (int j = 0; j < n; ++j) {
            if (k % 2 == 0) {
                mesh.faces.push_back({at(k, j), at(k + 1, j), at(k, j + 1)});
                mesh.faces.push_back({at(k, j + 1), at(k + 1, j), at(k + 1, j + 1)});
            } else {
                mesh.faces.push_back({at(k, j), at(k + 1, j + 1), at(k, j + 1)});
                mesh.faces.push_back({at(k, j), at(k + 1, j), at(k + 1, j + 1)});
            }
        }
    }
    orient_outward(mesh);
    return mesh;
}

TriangleMesh make_torus(double major_radius, double minor_radius, int major_segments, int minor_segments) {
    if (!(minor_radius > 0.0 && major_radius > minor_radius)) {
        throw ArgumentError("torus requires 0 < minor_radius < major_radius");
    }
    if (major_segments < 3 || minor_segments < 3) throw ArgumentError("torus resolution too coarse");
    TriangleMesh mesh;
    for (int i = 0; i < major_segments; ++i) {
        const double u = 2.0 * std::numbers::pi * i / major_segments;
        for (int j = 0; j < minor_segments; ++j) {
            const double v = 2.0 * std::numbers::pi * j / minor_segments;
            const double ring = major_radius + minor_radius * std::cos(v);
            mesh.vertices.emplace_back(ring * std::cos(u), ring * std::sin(u), minor_radius * std::sin(v));
        }
    }
    auto at = [&](int i, int j) {
        return (i % major_segments) * minor_segments + (j % minor_segments);
    };
    for (int i = 0; i < major_segments; ++i) {
        for (int j = 0; j < minor_segments; ++j) {
            mesh.faces.push_back({at(i, j), at(i + 1, j), at(i + 1, j + 1)});
            mesh.faces.push_back({at(i, j), at(i + 1, j + 1), at(i, j + 1)});
        }
    }
    orient_outward(mesh);
    return mesh;
}

TriangleMesh rescale(const TriangleMesh& mesh, const Vec3& center, double factor) {
    if (!(factor > 0.0)) throw ArgumentError("rescale factor must be positive");
    TriangleMesh out = mesh;
    for (auto& v : out.vertices) v = (v - center) * factor;
    return out;
}

Vec3 vertex_centroid(const TriangleMesh& mesh) {
    Vec3 sum = Vec3::Zero();
    for (const auto& v : mesh.vertices) sum += v;
    return mesh.vertices.empty() ? sum : Vec3(sum / static_cast<double>(mesh.vertices.size()));
}

double mesh_diameter_bound(const TriangleMesh& mesh) {
    if (mesh.vertices.empty()) return 0.0;
    Vec3 lo = mesh.vertices.front();
    Vec3 hi = lo;
    for (const auto& v : mesh.vertices) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    return (hi - lo).norm();
}

} // namespace sdflow
