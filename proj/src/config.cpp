#include "sdflow/config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "sdflow/error.hpp"

namespace sdflow {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        parts.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return parts;
}

template <typename Int>
Int parse_int(std::string_view text, std::string_view key) {
    Int v{};
    const auto t = trim(text);
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty()) {
        throw ConfigError(fmt::format("{}: expected an integer, got '{}'", key, text));
    }
    return v;
}

bool parse_bool(std::string_view text, std::string_view key) {
    const auto t = trim(text);
    if (t == "true") return true;
    if (t == "false") return false;
    throw ConfigError(fmt::format("{}: expected true or false, got '{}'", key, text));
}

double parse_double_key(std::string_view text, std::string_view key) {
    try {
        return parse_double(text);
    } catch (const Error&) {
        throw ConfigError(fmt::format("{}: expected a number, got '{}'", key, text));
    }
}

std::string join(const std::vector<double>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0) out += ",";
        out += format_double(values[i]);
    }
    return out;
}

const std::map<std::string, std::set<std::string>, std::less<>>& generator_keys() {
    static const std::map<std::string, std::set<std::string>, std::less<>> keys{
        {"icosphere", {"radius", "subdivisions"}},
        {"perturbed_sphere", {"radius", "subdivisions", "modes"}},
        {"ellipsoid", {"axes", "subdivisions"}},
        {"dumbbell", {"bulb", "neck", "length", "azimuthal", "axial"}},
        {"torus", {"major", "minor", "major_segments", "minor_segments"}},
        {"file", {"path"}},
    };
    return keys;
}

std::string scheme_name(Scheme s) { return s == Scheme::Explicit ? "explicit" : "semi_implicit"; }

} // namespace

bool InitialSpec::operator==(const InitialSpec& o) const {
    return generator == o.generator && path == o.path && radius == o.radius && subdivisions == o.subdivisions &&
           modes == o.modes && axes == o.axes && bulb == o.bulb && neck == o.neck && length == o.length &&
           resolution.azimuthal == o.resolution.azimuthal && resolution.axial == o.resolution.axial &&
           major == o.major && minor == o.minor && major_segments == o.major_segments &&
           minor_segments == o.minor_segments;
}

bool RunConfig::operator==(const RunConfig& o) const {
    return solver == o.solver && initial == o.initial && output == o.output && eps1 == o.eps1 && seed == o.seed &&
           fit_decay == o.fit_decay;
}

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

double parse_double(std::string_view text) {
    const auto t = trim(text);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty()) {
        throw ArgumentError(fmt::format("not a number: '{}'", text));
    }
    return v;
}

std::vector<double> parse_double_list(std::string_view text) {
    std::vector<double> out;
    if (trim(text).empty()) return out;
    for (auto part : split(text, ',')) out.push_back(parse_double(part));
    return out;
}

RunConfig parse_run_config(std::string_view text) {
    std::map<std::string, std::string, std::less<>> entries;
    std::size_t line_no = 0;
    for (auto raw : split(text, '\n')) {
        ++line_no;
        auto line = raw;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigError(fmt::format("line {}: expected key = value", line_no));
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        if (key.empty()) throw ConfigError(fmt::format("line {}: empty key", line_no));
        if (!entries.emplace(key, value).second) throw ConfigError(fmt::format("duplicate key '{}'", key));
    }

    RunConfig c;
    auto take = [&](std::string_view key) -> std::optional<std::string> {
        auto it = entries.find(key);
        if (it == entries.end()) return std::nullopt;
        std::string v = it->second;
        entries.erase(it);
        return v;
    };

    if (auto v = take("seed")) {
        if (*v != "none") c.seed = parse_int<std::uint64_t>(*v, "seed");
    }
    if (auto v = take("output")) {
        if (v->empty()) throw ConfigError("output: empty directory name");
        c.output = *v;
    }

    auto& s = c.solver;
    if (auto v = take("solver.scheme")) {
        if (*v == "explicit") s.scheme = Scheme::Explicit;
        else if (*v == "semi_implicit") s.scheme = Scheme::SemiImplicit;
        else throw ConfigError(fmt::format("solver.scheme: unknown scheme '{}'", *v));
    }
    if (auto v = take("solver.dt")) {
        const auto colon = v->find(':');
        const auto kind = v->substr(0, colon);
        if (colon == std::string::npos || (kind != "fixed" && kind != "cfl")) {
            throw ConfigError(fmt::format("solver.dt: expected fixed:<dt> or cfl:<sigma>, got '{}'", *v));
        }
        const double value = parse_double_key(v->substr(colon + 1), "solver.dt");
        s.dt_policy = kind == "fixed" ? DtPolicy::fixed(value) : DtPolicy::cfl(value);
    }
    if (auto v = take("solver.t_end")) s.t_end = parse_double_key(*v, "solver.t_end");
    if (auto v = take("solver.max_steps")) s.max_steps = parse_int<long>(*v, "solver.max_steps");
    if (auto v = take("solver.volume_correction")) s.volume_correction = parse_bool(*v, "solver.volume_correction");
    if (auto v = take("solver.linear_tol")) s.linear_tol = parse_double_key(*v, "solver.linear_tol");
    if (auto v = take("solver.linear_max_iter")) s.linear_max_iter = parse_int<int>(*v, "solver.linear_max_iter");
    if (auto v = take("solver.snapshot_every")) s.snapshot_every = parse_int<int>(*v, "solver.snapshot_every");
    if (auto v = take("solver.stop_sphericity")) s.stop_on.sphericity = parse_double_key(*v, "solver.stop_sphericity");
    if (auto v = take("solver.stop_quality_floor")) {
        s.stop_on.quality_floor = parse_double_key(*v, "solver.stop_quality_floor");
    }
    if (auto v = take("solver.stop_curvature_ceiling")) {
        s.stop_on.curvature_ceiling = parse_double_key(*v, "solver.stop_curvature_ceiling");
    }

    if (auto v = take("monitor.radii")) {
        try {
            s.monitor_radii = parse_double_list(*v);
        } catch (const Error&) {
            throw ConfigError(fmt::format("monitor.radii: expected a comma-separated list, got '{}'", *v));
        }
    }
    if (auto v = take("monitor.eps0")) s.smallness_gate = parse_double_key(*v, "monitor.eps0");
    if (auto v = take("monitor.eps1")) c.eps1 = parse_double_key(*v, "monitor.eps1");
    if (auto v = take("monitor.fit_decay")) c.fit_decay = parse_bool(*v, "monitor.fit_decay");

    auto& init = c.initial;
    if (auto v = take("initial.generator")) init.generator = *v;
    const auto gen = generator_keys().find(init.generator);
    if (gen == generator_keys().end()) {
        throw ConfigError(fmt::format("initial.generator: unknown generator '{}'", init.generator));
    }
    for (const auto& [key, value] : entries) {
        if (!key.starts_with("initial.")) continue;
        const auto param = key.substr(8);
        if (gen->second.contains(param)) continue;
        for (const auto& [name, params] : generator_keys()) {
            if (params.contains(param)) {
                throw ConfigError(fmt::format("{} does not apply to generator '{}'", key, init.generator));
            }
        }
    }
    if (auto v = take("initial.path")) init.path = *v;
    if (auto v = take("initial.radius")) init.radius = parse_double_key(*v, "initial.radius");
    if (auto v = take("initial.subdivisions")) init.subdivisions = parse_int<int>(*v, "initial.subdivisions");
    if (auto v = take("initial.modes")) {
        for (auto mode : split(*v, ';')) {
            if (mode.empty()) continue;
            const auto f = split(mode, ',');
            if (f.size() != 3) throw ConfigError(fmt::format("initial.modes: expected l,m,amplitude in '{}'", mode));
            init.modes.push_back({parse_int<int>(f[0], "initial.modes"), parse_int<int>(f[1], "initial.modes"),
                                  parse_double_key(f[2], "initial.modes")});
        }
    }
    if (auto v = take("initial.axes")) {
        std::vector<double> axes;
        try {
            axes = parse_double_list(*v);
        } catch (const Error&) {
        }
        if (axes.size() != 3) throw ConfigError(fmt::format("initial.axes: expected a,b,c, got '{}'", *v));
        init.axes = {axes[0], axes[1], axes[2]};
    }
    if (auto v = take("initial.bulb")) init.bulb = parse_double_key(*v, "initial.bulb");
    if (auto v = take("initial.neck")) init.neck = parse_double_key(*v, "initial.neck");
    if (auto v = take("initial.length")) init.length = parse_double_key(*v, "initial.length");
    if (auto v = take("initial.azimuthal")) init.resolution.azimuthal = parse_int<int>(*v, "initial.azimuthal");
    if (auto v = take("initial.axial")) init.resolution.axial = parse_int<int>(*v, "initial.axial");
    if (auto v = take("initial.major")) init.major = parse_double_key(*v, "initial.major");
    if (auto v = take("initial.minor")) init.minor = parse_double_key(*v, "initial.minor");
    if (auto v = take("initial.major_segments")) init.major_segments = parse_int<int>(*v, "initial.major_segments");
    if (auto v = take("initial.minor_segments")) init.minor_segments = parse_int<int>(*v, "initial.minor_segments");

    if (!entries.empty()) throw ConfigError(fmt::format("unknown key '{}'", entries.begin()->first));
    if (init.generator == "file" && init.path.empty()) throw ConfigError("initial.path is required for generator file");

    try {
        s.check();
    } catch (const ArgumentError& e) {
        throw ConfigError(e.what());
    }
    if (!(c.eps1 >= 0.0)) throw ConfigError("monitor.eps1 must be nonnegative");
    if (!(s.smallness_gate > 0.0)) throw ConfigError("monitor.eps0 must be positive");
    return c;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot open config '{}'", path));
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str());
}

std::string to_text(const RunConfig& c) {
    const auto& s = c.solver;
    const auto& init = c.initial;
    std::string out;
    auto line = [&](std::string_view key, const std::string& value) { out += fmt::format("{} = {}\n", key, value); };

    line("output", c.output);
    line("seed", c.seed ? std::to_string(*c.seed) : "none");
    line("solver.scheme", scheme_name(s.scheme));
    line("solver.dt", fmt::format("{}:{}", s.dt_policy.kind == DtPolicy::Kind::Fixed ? "fixed" : "cfl",
                                  format_double(s.dt_policy.value)));
    line("solver.t_end", format_double(s.t_end));
    line("solver.max_steps", std::to_string(s.max_steps));
    line("solver.volume_correction", s.volume_correction ? "true" : "false");
    line("solver.linear_tol", format_double(s.linear_tol));
    line("solver.linear_max_iter", std::to_string(s.linear_max_iter));
    line("solver.snapshot_every", std::to_string(s.snapshot_every));
    line("solver.stop_sphericity", format_double(s.stop_on.sphericity));
    line("solver.stop_quality_floor", format_double(s.stop_on.quality_floor));
    line("solver.stop_curvature_ceiling", format_double(s.stop_on.curvature_ceiling));
    line("monitor.radii", join(s.monitor_radii));
    line("monitor.eps0", format_double(s.smallness_gate));
    line("monitor.eps1", format_double(c.eps1));
    line("monitor.fit_decay", c.fit_decay ? "true" : "false");
    line("initial.generator", init.generator);

    const auto& keys = generator_keys().at(init.generator);
    if (keys.contains("path")) line("initial.path", init.path);
    if (keys.contains("radius")) line("initial.radius", format_double(init.radius));
    if (keys.contains("subdivisions")) line("initial.subdivisions", std::to_string(init.subdivisions));
    if (keys.contains("modes")) {
        std::string modes;
        for (std::size_t i = 0; i < init.modes.size(); ++i) {
            if (i > 0) modes += "; ";
            modes += fmt::format("{},{},{}", init.modes[i].l, init.modes[i].m, format_double(init.modes[i].amplitude));
        }
        line("initial.modes", modes);
    }
    if (keys.contains("axes")) line("initial.axes", join({init.axes[0], init.axes[1], init.axes[2]}));
    if (keys.contains("bulb")) {
        line("initial.bulb", format_double(init.bulb));
        line("initial.neck", format_double(init.neck));
        line("initial.length", format_double(init.length));
        line("initial.azimuthal", std::to_string(init.resolution.azimuthal));
        line("initial.axial", std::to_string(init.resolution.axial));
    }
    if (keys.contains("major")) {
        line("initial.major", format_double(init.major));
        line("initial.minor", format_double(init.minor));
        line("initial.major_segments", std::to_string(init.major_segments));
        line("initial.minor_segments", std::to_string(init.minor_segments));
    }
    return out;
}

TriangleMesh build_initial(const InitialSpec& spec, std::optional<std::uint64_t> seed) {
    if (spec.generator == "icosphere") return make_icosphere(spec.radius, spec.subdivisions);
    if (spec.generator == "perturbed_sphere") {
        return make_perturbed_sphere(spec.radius, spec.modes, seed, spec.subdivisions);
    }
    if (spec.generator == "ellipsoid") return make_ellipsoid(spec.axes[0], spec.axes[1], spec.axes[2], spec.subdivisions);
    if (spec.generator == "dumbbell") return make_dumbbell(spec.bulb, spec.neck, spec.length, spec.resolution);
    if (spec.generator == "torus") {
        return make_torus(spec.major, spec.minor, spec.major_segments, spec.minor_segments);
    }
    if (spec.generator == "file") return load_mesh_file(spec.path);
    throw ConfigError(fmt::format("unknown generator '{}'", spec.generator));
}

} // namespace sdflow
