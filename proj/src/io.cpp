#include "sdflow/io.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "sdflow/error.hpp"

namespace sdflow {

namespace {

constexpr std::string_view kFixedColumns[] = {
    "step",     "t",        "area",      "volume", "willmore", "tracefree_l2", "gradH_l2",
    "lapH_l2", "max_abs_A", "h_min",     "quality", "sphericity", "li_yau_ok", "smallness_ok",
};
constexpr std::size_t kFixedCount = std::size(kFixedColumns);

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

double field_double(std::string_view s, std::size_t line_no) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
        throw FormatError(fmt::format("diagnostics line {}: bad number '{}'", line_no, s));
    }
    return v;
}

long field_long(std::string_view s, std::size_t line_no) {
    long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
        throw FormatError(fmt::format("diagnostics line {}: bad integer '{}'", line_no, s));
    }
    return v;
}

bool field_flag(std::string_view s, std::size_t line_no) {
    if (s == "1") return true;
    if (s == "0") return false;
    throw FormatError(fmt::format("diagnostics line {}: bad flag '{}'", line_no, s));
}

} // namespace

std::string csv_header(std::size_t eta_count) {
    std::string out;
    for (std::size_t i = 0; i < kFixedCount; ++i) {
        if (i > 0) out += ',';
        out += kFixedColumns[i];
    }
    for (std::size_t k = 1; k <= eta_count; ++k) out += fmt::format(",eta_r{}", k);
    return out;
}

std::string csv_row(const DiagnosticsRecord& r) {
    std::string out = fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},"
                                  "{:.17g},{},{}",
                                  r.step, r.t, r.area, r.volume, r.willmore, r.tracefree_l2, r.gradH_l2, r.lapH_l2,
                                  r.max_abs_A, r.h_min, r.quality, r.sphericity, r.li_yau_ok ? 1 : 0,
                                  r.smallness_ok ? 1 : 0);
    for (const auto& e : r.eta) out += fmt::format(",{:.17g}", e.value);
    return out;
}

void write_csv(std::ostream& out, std::span<const DiagnosticsRecord> records, std::size_t eta_count) {
    out << csv_header(eta_count) << '\n';
    for (const auto& r : records) out << csv_row(r) << '\n';
}

std::vector<DiagnosticsRecord> parse_csv(std::string_view text, std::span<const double> radii) {
    std::vector<DiagnosticsRecord> records;
    std::size_t line_no = 0;
    std::size_t columns = 0;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;

        const auto fields = split_fields(line);
        if (columns == 0) {
            if (fields.size() < kFixedCount) throw FormatError("diagnostics header is missing columns");
            const std::size_t eta_count = fields.size() - kFixedCount;
            if (std::string(line) != csv_header(eta_count)) {
                throw FormatError(fmt::format("unexpected diagnostics header '{}'", line));
            }
            columns = fields.size();
            continue;
        }
        if (fields.size() != columns) {
            throw FormatError(fmt::format("diagnostics line {}: {} fields, expected {}", line_no, fields.size(),
                                          columns));
        }
        DiagnosticsRecord r;
        r.step = field_long(fields[0], line_no);
        r.t = field_double(fields[1], line_no);
        r.area = field_double(fields[2], line_no);
        r.volume = field_double(fields[3], line_no);
        r.willmore = field_double(fields[4], line_no);
        r.tracefree_l2 = field_double(fields[5], line_no);
        r.gradH_l2 = field_double(fields[6], line_no);
        r.lapH_l2 = field_double(fields[7], line_no);
        r.max_abs_A = field_double(fields[8], line_no);
        r.h_min = field_double(fields[9], line_no);
        r.quality = field_double(fields[10], line_no);
        r.sphericity = field_double(fields[11], line_no);
        r.li_yau_ok = field_flag(fields[12], line_no);
        r.smallness_ok = field_flag(fields[13], line_no);
        const std::size_t eta_count = columns - kFixedCount;
        for (std::size_t k = 0; k < eta_count; ++k) {
            EtaSample e;
            e.radius = radii.size() == eta_count ? radii[k] : 0.0;
            e.value = field_double(fields[kFixedCount + k], line_no);
            r.eta.push_back(e);
        }
        records.push_back(std::move(r));
    }
    if (columns == 0) throw FormatError("diagnostics table is empty");
    return records;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(fmt::format("cannot open '{}'", path));
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<DiagnosticsRecord> read_csv_file(const std::string& path, std::span<const double> radii) {
    return parse_csv(read_text_file(path), radii);
}

std::string snapshot_name(long step) { return fmt::format("step_{:08d}.off", step); }

std::vector<Snapshot> load_snapshots(const std::string& directory, std::span<const DiagnosticsRecord> records) {
    namespace fs = std::filesystem;
    std::vector<Snapshot> snapshots;
    if (!fs::is_directory(directory)) throw FormatError(fmt::format("'{}' is not a directory", directory));
    for (const auto& entry : fs::directory_iterator(directory)) {
        const auto name = entry.path().filename().string();
        if (name.size() != 17 || !name.starts_with("step_") || !name.ends_with(".off")) continue;
        long step = 0;
        auto [ptr, ec] = std::from_chars(name.data() + 5, name.data() + 13, step);
        if (ec != std::errc{} || ptr != name.data() + 13) continue;
        auto rec = std::ranges::find_if(records, [&](const DiagnosticsRecord& r) { return r.step == step; });
        if (rec == records.end()) throw FormatError(fmt::format("snapshot {} has no diagnostics record", name));
        snapshots.push_back({step, rec->t, load_mesh_file(entry.path().string())});
    }
    std::ranges::sort(snapshots, {}, &Snapshot::step);
    return snapshots;
}

} // namespace sdflow
