#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sdflow/blowup.hpp"
#include "sdflow/mesh.hpp"
#include "sdflow/solver.hpp"

namespace sdflow {

/// Initial surface: a generator name with its parameters, or a mesh file.
struct InitialSpec {
    /// icosphere, perturbed_sphere, ellipsoid, dumbbell, torus or file.
    std::string generator = "icosphere";
    std::string path;
    double radius = 1.0;
    int subdivisions = 4;
    std::vector<HarmonicMode> modes;
    std::array<double, 3> axes{1.0, 1.0, 1.0};
    double bulb = 1.0;
    double neck = 0.5;
    double length = 1.0;
    RevolutionResolution resolution;
    double major = 2.0;
    double minor = 0.5;
    int major_segments = 32;
    int minor_segments = 16;

    bool operator==(const InitialSpec& other) const;
};

struct RunConfig {
    SolverConfig solver;
    InitialSpec initial;
    std::string output = "run";
    double eps1 = kDefaultEps1;
    std::optional<std::uint64_t> seed;
    bool fit_decay = true;

    bool operator==(const RunConfig& other) const;
};

/// Parses `key = value` lines; '#' starts a comment. Throws ConfigError on
/// unknown keys, duplicates, bad values or keys that do not apply to the
/// chosen generator.
RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::string& path);

/// Canonical text form; parse_run_config(to_text(c)) == c.
std::string to_text(const RunConfig& config);

/// Builds the initial mesh for an InitialSpec (seed applies to
/// perturbed_sphere amplitudes).
TriangleMesh build_initial(const InitialSpec& spec, std::optional<std::uint64_t> seed);

/// Shortest text that parses back to the same double ("inf" for infinity).
std::string format_double(double v);
double parse_double(std::string_view text);

std::vector<double> parse_double_list(std::string_view text);

} // namespace sdflow
