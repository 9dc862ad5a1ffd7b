#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "sdflow/blowup.hpp"
#include "sdflow/config.hpp"
#include "sdflow/error.hpp"
#include "sdflow/io.hpp"
#include "sdflow/monitors.hpp"
#include "sdflow/solver.hpp"

namespace sdflow::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json record_json(const DiagnosticsRecord& r) {
    json j{{"step", r.step},
           {"t", r.t},
           {"area", r.area},
           {"volume", r.volume},
           {"willmore", r.willmore},
           {"tracefree_l2", r.tracefree_l2},
           {"gradH_l2", r.gradH_l2},
           {"lapH_l2", r.lapH_l2},
           {"max_abs_A", r.max_abs_A},
           {"h_min", r.h_min},
           {"quality", r.quality},
           {"sphericity", r.sphericity},
           {"li_yau_ok", r.li_yau_ok},
           {"smallness_ok", r.smallness_ok}};
    json eta = json::array();
    for (const auto& e : r.eta) eta.push_back({{"r", e.radius}, {"value", e.value}, {"center", vec_json(e.center)}});
    j["eta"] = eta;
    return j;
}

json audit_json(const MonotonicityAudit& a) {
    json j{{"passed", a.passed}, {"violations", a.violations.size()}, {"max_violation", a.max_violation}};
    if (!a.violations.empty()) j["first_violation_step"] = a.violations.front().step;
    return j;
}

json dissipation_json(std::span<const DiagnosticsRecord> records, DissipationCheck which) {
    try {
        const auto rep = audit_dissipation(records, which);
        return {{"passed", rep.passed},
                {"steps", rep.steps},
                {"vacuous_steps", rep.vacuous_steps},
                {"median", rep.median},
                {which == DissipationCheck::AreaRate ? "worst_error" : "best_constant", rep.extreme},
                {"worst_step", rep.worst_step}};
    } catch (const Error& e) {
        return {{"error", e.what()}};
    }
}

json fit_json(const DecayFit& f) {
    return {{"lambda_fit", f.lambda_fit},
            {"r_squared", f.r_squared},
            {"samples", f.samples},
            {"t_begin", f.window.t_begin},
            {"t_end", f.window.t_end}};
}

json event_json(const ConcentrationEvent& ev) {
    return {{"r_j", ev.r_j},   {"t_j", ev.t_j},           {"x_j", vec_json(ev.x_j)},
            {"step", ev.step}, {"eta_at_t", ev.eta_at_t}, {"triggered", ev.triggered}};
}

std::vector<double> descending(std::vector<double> radii) {
    std::ranges::sort(radii, std::greater<>());
    radii.erase(std::unique(radii.begin(), radii.end()), radii.end());
    return radii;
}

void print_audits(std::ostream& out, std::span<const DiagnosticsRecord> records) {
    for (auto q : {MonitoredQuantity::Area, MonitoredQuantity::TracefreeL2, MonitoredQuantity::Willmore}) {
        const auto a = audit_monotone(records, q);
        if (a.passed) {
            out << fmt::format("{} audit: PASS (0 violations)\n", to_string(q));
        } else {
            out << fmt::format("{} audit: FAIL ({} violations, first at step {}, max excess {:.6g})\n", to_string(q),
                               a.violations.size(), a.violations.front().step, a.max_violation);
        }
    }
}

// -- gen ----------------------------------------------------------------------

struct GenArgs {
    std::string generator;
    std::string output;
    double radius = 1.0;
    int subdiv = 4;
    std::vector<std::string> modes;
    std::optional<std::uint64_t> seed;
    std::vector<double> axes{1.0, 1.0, 1.0};
    double bulb = 1.0;
    double neck = 0.5;
    double len = 1.0;
    int azimuthal = 48;
    int axial = 96;
    double major = 2.0;
    double minor = 0.5;
    int nu = 32;
    int nv = 16;
};

int cmd_gen(const GenArgs& a, std::ostream& out) {
    InitialSpec spec;
    spec.generator = a.generator;
    spec.radius = a.radius;
    spec.subdivisions = a.subdiv;
    for (const auto& m : a.modes) {
        const auto f = parse_double_list(m);
        if (f.size() != 3) throw ArgumentError(fmt::format("--mode expects l,m,amplitude, got '{}'", m));
        spec.modes.push_back({static_cast<int>(f[0]), static_cast<int>(f[1]), f[2]});
    }
    if (a.axes.size() != 3) throw ArgumentError("--axes expects three values");
    spec.axes = {a.axes[0], a.axes[1], a.axes[2]};
    spec.bulb = a.bulb;
    spec.neck = a.neck;
    spec.length = a.len;
    spec.resolution = {a.azimuthal, a.axial};
    spec.major = a.major;
    spec.minor = a.minor;
    spec.major_segments = a.nu;
    spec.minor_segments = a.nv;

    const auto mesh = build_initial(spec, a.seed);
    save_off(mesh, a.output);
    out << validate(mesh).summary() << '\n';
    return kExitOk;
}

// -- run ----------------------------------------------------------------------

int cmd_run(const std::string& config_path, const std::string& output_override, std::ostream& out) {
    RunConfig config = load_run_config(config_path);
    if (!output_override.empty()) config.output = output_override;
    const auto initial = build_initial(config.initial, config.seed);
    require_valid(initial);

    const fs::path dir(config.output);
    fs::create_directories(dir);
    {
        std::ofstream cfg(dir / "config.txt");
        cfg << to_text(config);
    }

    std::ofstream csv(dir / "diagnostics.csv", std::ios::binary);
    if (!csv) throw FormatError(fmt::format("cannot write to '{}'", dir.string()));
    csv << csv_header(config.solver.monitor_radii.size()) << '\n';
    const auto trajectory = run(initial, config.solver, [&](const DiagnosticsRecord& r) { csv << csv_row(r) << '\n'; });
    csv.close();

    for (const auto& snap : trajectory.snapshots) save_off(snap.mesh, (dir / snapshot_name(snap.step)).string());

    const auto& records = trajectory.records;
    const auto& first = records.front();
    const auto& last = records.back();
    json summary{{"stop_reason", to_string(trajectory.stop_reason)},
                 {"exit_code", exit_code(trajectory.stop_reason)},
                 {"message", trajectory.message},
                 {"steps", last.step},
                 {"records", records.size()},
                 {"t", last.t},
                 {"rejected_steps", trajectory.rejected_steps},
                 {"linear_iterations", trajectory.linear_iterations},
                 {"snapshot_every", trajectory.snapshot_every},
                 {"monitor_radii", config.solver.monitor_radii},
                 {"eps0", config.solver.smallness_gate},
                 {"eps1", config.eps1},
                 {"area_drift", (last.area - first.area) / first.area},
                 {"volume_drift", (last.volume - first.volume) / first.volume},
                 {"initial", record_json(first)},
                 {"final", record_json(last)}};
    json audits;
    for (auto q : {MonitoredQuantity::Area, MonitoredQuantity::TracefreeL2, MonitoredQuantity::Willmore}) {
        audits[to_string(q)] = audit_json(audit_monotone(records, q));
    }
    summary["audits"] = audits;
    summary["dissipation"] = {{"AREA_RATE", dissipation_json(records, DissipationCheck::AreaRate)},
                              {"TRACEFREE_RATE", dissipation_json(records, DissipationCheck::TracefreeRate)}};
    if (config.fit_decay) {
        try {
            summary["decay_fit"] = fit_json(fit_decay(records));
        } catch (const Error& e) {
            summary["decay_fit"] = {{"error", e.what()}};
        }
    }
    json events = json::array();
    if (!config.solver.monitor_radii.empty()) {
        for (const auto& ev : detect(trajectory, descending(config.solver.monitor_radii), config.eps1)) {
            events.push_back(event_json(ev));
        }
    }
    summary["events"] = events;
    std::ofstream(dir / "summary.json") << summary.dump(2) << '\n';

    out << fmt::format("stop: {} after {} steps at t = {:.6g}", to_string(trajectory.stop_reason), last.step, last.t);
    if (!trajectory.message.empty()) out << " (" << trajectory.message << ")";
    out << '\n';
    out << fmt::format("area drift {:.3e}, volume drift {:.3e}, tracefree_l2 {:.6g} -> {:.6g}\n",
                       summary["area_drift"].get<double>(), summary["volume_drift"].get<double>(), first.tracefree_l2,
                       last.tracefree_l2);
    print_audits(out, records);
    for (const auto& ev : events) {
        if (ev["triggered"].get<bool>()) {
            out << fmt::format("concentration: r = {:.6g} triggered at t = {:.6g} (step {})\n",
                               ev["r_j"].get<double>(), ev["t_j"].get<double>(), ev["step"].get<long>());
        }
    }
    out << "wrote " << dir.string() << '\n';
    return exit_code(trajectory.stop_reason);
}

// -- analyze ------------------------------------------------------------------

std::string csv_path_of(const std::string& target) {
    return fs::is_directory(target) ? (fs::path(target) / "diagnostics.csv").string() : target;
}

std::optional<DecayWindow> parse_window(const std::string& spec, bool& enabled) {
    enabled = spec != "none";
    if (spec == "auto" || spec == "none") return std::nullopt;
    const auto colon = spec.find(':');
    if (colon == std::string::npos) throw ArgumentError(fmt::format("--fit-window expects auto, none or t0:t1"));
    DecayWindow w{parse_double(spec.substr(0, colon)), parse_double(spec.substr(colon + 1))};
    if (!(w.t_end > w.t_begin)) throw ArgumentError("--fit-window needs t0 < t1");
    return w;
}

int cmd_analyze(const std::string& target, bool as_json, const std::string& window_spec, std::ostream& out) {
    bool fit_enabled = true;
    const auto window = parse_window(window_spec, fit_enabled);
    const auto records = read_csv_file(csv_path_of(target));
    if (records.empty()) throw FormatError("diagnostics table has no rows");

    json j{{"records", records.size()}};
    json audits;
    for (auto q : {MonitoredQuantity::Area, MonitoredQuantity::TracefreeL2, MonitoredQuantity::Willmore}) {
        audits[to_string(q)] = audit_json(audit_monotone(records, q));
    }
    j["audits"] = audits;
    j["dissipation"] = {{"AREA_RATE", dissipation_json(records, DissipationCheck::AreaRate)},
                        {"TRACEFREE_RATE", dissipation_json(records, DissipationCheck::TracefreeRate)}};
    if (fit_enabled) {
        try {
            j["decay_fit"] = fit_json(fit_decay(records, window));
        } catch (const Error& e) {
            j["decay_fit"] = {{"error", e.what()}};
        }
    }

    if (as_json) {
        out << j.dump(2) << '\n';
        return kExitOk;
    }
    out << fmt::format("{} records, t = {:.6g} .. {:.6g}\n", records.size(), records.front().t, records.back().t);
    print_audits(out, records);
    const auto& area = j["dissipation"]["AREA_RATE"];
    if (area.contains("error")) {
        out << "AREA_RATE: skipped (" << area["error"].get<std::string>() << ")\n";
    } else {
        out << fmt::format("AREA_RATE: median relative error {:.4g} over {} steps: {}\n", area["median"].get<double>(),
                           area["steps"].get<std::size_t>(), area["passed"].get<bool>() ? "PASS" : "FAIL");
    }
    const auto& tf = j["dissipation"]["TRACEFREE_RATE"];
    if (tf.contains("error")) {
        out << "TRACEFREE_RATE: skipped (" << tf["error"].get<std::string>() << ")\n";
    } else {
        out << fmt::format("TRACEFREE_RATE: best constant {:.4g} (required 0.125) over {} steps: {}\n",
                           tf["best_constant"].get<double>() + 0.0, tf["steps"].get<std::size_t>(),
                           tf["passed"].get<bool>() ? "PASS" : "FAIL");
    }
    if (fit_enabled) {
        const auto& f = j["decay_fit"];
        if (f.contains("error")) {
            out << "decay fit: skipped (" << f["error"].get<std::string>() << ")\n";
        } else {
            out << fmt::format("decay fit: lambda {:.10g}, r^2 {:.6f}, window [{:.6g}, {:.6g}], {} samples\n",
                               f["lambda_fit"].get<double>(), f["r_squared"].get<double>(),
                               f["t_begin"].get<double>(), f["t_end"].get<double>(), f["samples"].get<std::size_t>());
        }
    }
    return kExitOk;
}

// -- blowup -------------------------------------------------------------------

int cmd_blowup(const std::string& dir, std::optional<double> eps1_arg, std::vector<double> radii,
               std::ostream& out) {
    json summary;
    const fs::path summary_path = fs::path(dir) / "summary.json";
    if (fs::exists(summary_path)) {
        try {
            summary = json::parse(read_text_file(summary_path.string()));
        } catch (const json::exception& e) {
            throw FormatError(fmt::format("corrupt summary.json: {}", e.what()));
        }
    }
    if (radii.empty() && summary.contains("monitor_radii")) radii = summary["monitor_radii"].get<std::vector<double>>();
    if (radii.empty()) throw ArgumentError("no radii given and none recorded in summary.json");
    radii = descending(radii);
    double eps1 = kDefaultEps1;
    if (summary.contains("eps1")) eps1 = summary["eps1"].get<double>();
    if (eps1_arg) eps1 = *eps1_arg;

    const auto records = read_csv_file((fs::path(dir) / "diagnostics.csv").string());
    const auto snapshots = load_snapshots(dir, records);
    if (snapshots.empty()) throw FormatError(fmt::format("no snapshots in '{}'", dir));
    int snapshot_every = 1;
    if (summary.contains("snapshot_every")) {
        snapshot_every = summary["snapshot_every"].get<int>();
    } else {
        for (std::size_t k = 1; k < snapshots.size(); ++k) {
            snapshot_every = std::max<int>(snapshot_every, static_cast<int>(snapshots[k].step - snapshots[k - 1].step));
        }
    }

    // Only snapshots carry positions, so detection runs on snapshot diagnostics.
    const auto snap_records = snapshot_records(snapshots, radii);
    const auto events = detect(snap_records, radii, eps1);

    out << fmt::format("eps1 = {:.6g}, {} snapshots\n", eps1, snapshots.size());
    out << fmt::format("{:>5} {:>12} {:>6} {:>12} {:>14} {:>10}\n", "frame", "r_j", "step", "t_j", "eta", "triggered");
    int written = 0;
    for (std::size_t k = 0; k < events.size(); ++k) {
        const auto& ev = events[k];
        if (!ev.triggered) {
            out << fmt::format("{:>5} {:>12.6g} {:>6} {:>12} {:>14} {:>10}\n", k, ev.r_j, "-", "-", "-", "no");
            continue;
        }
        out << fmt::format("{:>5} {:>12.6g} {:>6} {:>12.6g} {:>14.6g} {:>10}\n", k, ev.r_j, ev.step, ev.t_j,
                           ev.eta_at_t, "yes");
        const auto frame = rescale_frame(snapshots, snapshot_every, ev);
        const auto stem = fs::path(dir) / fmt::format("frame_{:02d}", k);
        save_off(frame.mesh, stem.string() + ".off");
        const auto& d = frame.diagnostics;
        json meta{{"r_j", frame.radius},
                  {"t_j", frame.time_origin},
                  {"x_j", vec_json(frame.center)},
                  {"eta_at_t", ev.eta_at_t},
                  {"space_factor", frame.space_factor},
                  {"time_factor", frame.time_factor},
                  {"time_origin", frame.time_origin},
                  {"source_step", frame.source_step},
                  {"source_time", frame.source_time},
                  {"offset", frame.offset},
                  {"unit_ball_integral", frame.unit_ball_integral},
                  {"eta_1", d.eta.front().value},
                  {"willmore", d.willmore},
                  {"tracefree_l2", d.tracefree_l2},
                  {"sphericity", d.sphericity},
                  {"max_abs_A", d.max_abs_A},
                  {"stationarity_raw", frame.residual.raw},
                  {"stationarity_normalized", frame.residual.normalized}};
        std::ofstream(stem.string() + ".json") << meta.dump(2) << '\n';
        ++written;
    }
    if (written == 0) {
        out << "no concentration detected\n";
    } else {
        out << fmt::format("wrote {} frame(s) to {}\n", written, dir);
    }
    return kExitOk;
}

} // namespace

int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Surface diffusion flow laboratory", "sdflow"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* gen_cmd = app.add_subcommand("gen", "Generate an initial surface as OFF");
    gen_cmd->add_option("generator", gen.generator, "Surface family")
        ->required()
        ->check(CLI::IsMember({"icosphere", "perturbed_sphere", "ellipsoid", "dumbbell", "torus"}));
    gen_cmd->add_option("-o,--output", gen.output, "Output OFF path")->required();
    gen_cmd->add_option("--radius", gen.radius, "Sphere radius");
    gen_cmd->add_option("--subdiv", gen.subdiv, "Icosphere subdivision level");
    gen_cmd->add_option("--mode", gen.modes, "Harmonic mode l,m,amplitude (repeatable)");
    gen_cmd->add_option("--seed", gen.seed, "Randomize mode amplitudes with this seed");
    gen_cmd->add_option("--axes", gen.axes, "Ellipsoid semi-axes a,b,c")->delimiter(',')->expected(3);
    gen_cmd->add_option("--bulb", gen.bulb, "Dumbbell bulb radius");
    gen_cmd->add_option("--neck", gen.neck, "Dumbbell neck radius");
    gen_cmd->add_option("--len", gen.len, "Dumbbell neck length");
    gen_cmd->add_option("--azimuthal", gen.azimuthal, "Dumbbell segments around the axis");
    gen_cmd->add_option("--axial", gen.axial, "Dumbbell rings along the axis");
    gen_cmd->add_option("--major", gen.major, "Torus major radius");
    gen_cmd->add_option("--minor", gen.minor, "Torus minor radius");
    gen_cmd->add_option("--nu", gen.nu, "Torus segments around the major circle");
    gen_cmd->add_option("--nv", gen.nv, "Torus segments around the tube");

    std::string config_path;
    std::string run_output;
    auto* run_cmd = app.add_subcommand("run", "Run a flow from a config file");
    run_cmd->add_option("config", config_path, "key = value config file")->required();
    run_cmd->add_option("-o,--output", run_output, "Override the output directory");

    std::string analyze_target;
    bool analyze_json = false;
    std::string fit_window = "auto";
    auto* analyze_cmd = app.add_subcommand("analyze", "Audit a diagnostics table");
    analyze_cmd->add_option("dir", analyze_target, "Run directory or diagnostics.csv")->required();
    analyze_cmd->add_flag("--json", analyze_json, "Machine-readable output");
    analyze_cmd->add_option("--fit-window", fit_window, "auto, none or t0:t1");

    std::string blowup_dir;
    std::optional<double> eps1;
    std::vector<double> radii;
    auto* blowup_cmd = app.add_subcommand("blowup", "Detect concentration and write rescaled frames");
    blowup_cmd->add_option("dir", blowup_dir, "Run directory")->required();
    blowup_cmd->add_option("--eps1", eps1, "Detection threshold");
    blowup_cmd->add_option("--radii", radii, "Comma-separated radii")->delimiter(',');

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (app.got_subcommand(gen_cmd)) return cmd_gen(gen, out);
        if (app.got_subcommand(run_cmd)) return cmd_run(config_path, run_output, out);
        if (app.got_subcommand(analyze_cmd)) return cmd_analyze(analyze_target, analyze_json, fit_window, out);
        if (app.got_subcommand(blowup_cmd)) return cmd_blowup(blowup_dir, eps1, radii, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}

} // namespace sdflow::cli
