#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "xtrack/errors.hpp"
#include "xtrack/scenario.hpp"

namespace xtrack {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr int kArchiveVersion = 1;
constexpr const char* kArchiveFormat = "xtrack-scenarios";

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' '))
            cell.pop_back();
        std::size_t lead = 0;
        while (lead < cell.size() && cell[lead] == ' ') ++lead;
        cells.push_back(cell.substr(lead));
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_cell(const std::string& cell, int row, const std::string& column) {
    const char* begin = cell.c_str();
    char* end = nullptr;
    const double value = std::strtod(begin, &end);
    if (cell.empty() || end != begin + cell.size())
        throw DataError("row " + std::to_string(row) + ": non-numeric value '" +
                        cell + "' in column '" + column + "'");
    return value;
}

struct CsvRow {
    std::int64_t frame, id;
    double x, y, vx, vy, ax, ay;
    int lane;
};

// Speed is the velocity magnitude; acceleration is the component magnitude
// signed by its alignment with the velocity.
void derive_motion(const CsvRow& r, double& v, double& a) {
    v = std::hypot(r.vx, r.vy);
    const double mag = std::hypot(r.ax, r.ay);
    const double align = v > 1e-12 ? r.ax * r.vx + r.ay * r.vy : r.ax;
    a = align < 0.0 ? -mag : mag;
}

std::string format_double(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

void check_finite(const std::vector<double>& values, const std::string& id) {
    for (const double v : values)
        if (!std::isfinite(v))
            throw DataError("non-finite value in scenario '" + id + "'");
}

ordered_json series_json(const NeighborTrack& n) {
    return ordered_json{
        {"ghost", n.ghost}, {"x", n.x}, {"y", n.y}, {"v", n.v}, {"a", n.a}};
}

std::vector<double> read_series(const ordered_json& j, const char* key,
                                std::size_t expected, int record) {
    auto out = j.at(key).get<std::vector<double>>();
    if (out.size() != expected)
        throw DataError("scenario record " + std::to_string(record) +
                        ": series '" + key + "' has " + std::to_string(out.size()) +
                        " samples, expected " + std::to_string(expected));
    return out;
}

}  // namespace

std::vector<Track> load_tracks(const std::string& path, const FormatConfig& fmt) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw DataError("'" + path + "': empty file, header required");
    const std::vector<std::string> header = split_csv_line(line);
    auto column = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw DataError("'" + path + "': missing column '" + name + "'");
    };
    const std::size_t c_frame = column(fmt.frame), c_id = column(fmt.id);
    const std::size_t c_x = column(fmt.x), c_y = column(fmt.y);
    const std::size_t c_vx = column(fmt.x_velocity), c_vy = column(fmt.y_velocity);
    const std::size_t c_ax = column(fmt.x_acceleration), c_ay = column(fmt.y_acceleration);
    const std::size_t c_lane = column(fmt.lane);

    std::map<std::int64_t, std::vector<CsvRow>> rows;
    int row_number = 1;
    while (std::getline(in, line)) {
        ++row_number;
        if (line.empty() || line == "\r") continue;
        const std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw DataError("row " + std::to_string(row_number) + ": expected " +
                            std::to_string(header.size()) + " cells, got " +
                            std::to_string(cells.size()));
        auto cell = [&](std::size_t c, const std::string& name) {
            return parse_cell(cells[c], row_number, name);
        };
        CsvRow r;
        r.frame = std::llround(cell(c_frame, fmt.frame));
        r.id = std::llround(cell(c_id, fmt.id));
        r.x = cell(c_x, fmt.x);
        r.y = cell(c_y, fmt.y);
        r.vx = cell(c_vx, fmt.x_velocity);
        r.vy = cell(c_vy, fmt.y_velocity);
        r.ax = cell(c_ax, fmt.x_acceleration);
        r.ay = cell(c_ay, fmt.y_acceleration);
        r.lane = static_cast<int>(std::llround(cell(c_lane, fmt.lane)));
        rows[r.id].push_back(r);
    }

    std::vector<Track> tracks;
    for (auto& [id, samples] : rows) {
        std::stable_sort(samples.begin(), samples.end(),
                         [](const CsvRow& a, const CsvRow& b) { return a.frame < b.frame; });
        Track t;
        t.vehicle_id = id;
        t.frame_rate = fmt.frame_rate;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const CsvRow& r = samples[i];
            if (i > 0) {
                const std::int64_t prev = samples[i - 1].frame;
                if (r.frame == prev)
                    throw DataError("vehicle " + std::to_string(id) +
                                    ": duplicate frame " + std::to_string(r.frame));
                if (r.frame != prev + 1) {  // gap: start a new segment
                    tracks.push_back(std::move(t));
                    t = Track{};
                    t.vehicle_id = id;
                    t.frame_rate = fmt.frame_rate;
                }
            }
            double v, a;
            derive_motion(r, v, a);
            t.frames.push_back(r.frame);
            t.x.push_back(r.x);
            t.y.push_back(r.y);
            t.v.push_back(v);
            t.a.push_back(a);
            t.lane_id.push_back(r.lane);
        }
        if (!t.frames.empty()) tracks.push_back(std::move(t));
    }
    return tracks;
}

void write_tracks(const std::string& path, const std::vector<Track>& tracks,
                  const FormatConfig& fmt) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << fmt.frame << ',' << fmt.id << ',' << fmt.x << ',' << fmt.y << ','
        << fmt.x_velocity << ',' << fmt.y_velocity << ',' << fmt.x_acceleration
        << ',' << fmt.y_acceleration << ',' << fmt.lane << '\n';
    for (const Track& t : tracks) {
        for (std::size_t i = 0; i < t.size(); ++i) {
            out << t.frames[i] << ',' << t.vehicle_id << ',' << format_double(t.x[i])
                << ',' << format_double(t.y[i]) << ',' << format_double(t.v[i])
                << ",0," << format_double(t.a[i]) << ",0," << t.lane_id[i] << '\n';
        }
    }
    if (!out) throw DataError("write to '" + path + "' failed");
}

void write_scenarios(const std::string& path,
                     const std::vector<Scenario>& scenarios) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << ordered_json{{"format", kArchiveFormat}, {"version", kArchiveVersion}}.dump()
        << '\n';
    for (const Scenario& s : scenarios) {
        check_finite(s.x, s.scenario_id);
        check_finite(s.y, s.scenario_id);
        check_finite(s.v, s.scenario_id);
        check_finite(s.a, s.scenario_id);
        ordered_json slots = ordered_json::array();
        for (const NeighborTrack& n : s.neighbors.slots) {
            check_finite(n.x, s.scenario_id);
            check_finite(n.y, s.scenario_id);
            slots.push_back(series_json(n));
        }
        const ordered_json record{
            {"id", s.scenario_id},
            {"maneuver", to_string(s.maneuver)},
            {"dt", s.dt},
            {"t_obs", s.t_obs},
            {"t_f", s.t_f},
            {"normalized", s.normalized},
            {"target",
             ordered_json{{"x", s.x}, {"y", s.y}, {"v", s.v}, {"a", s.a}}},
            {"neighbors", slots}};
        out << record.dump() << '\n';
    }
    if (!out) throw DataError("write to '" + path + "' failed");
}

std::vector<Scenario> read_scenarios(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line))
        throw DataError("'" + path + "': empty archive, version header required");
    ordered_json header;
    try {
        header = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("'" + path + "': cannot parse archive header: " + e.what());
    }
    if (!header.is_object() || header.value("format", "") != kArchiveFormat)
        throw DataError("'" + path + "': not a scenario archive");
    if (header.value("version", -1) != kArchiveVersion)
        throw DataError("'" + path + "': unsupported archive version " +
                        header.at("version").dump());

    std::vector<Scenario> out;
    int record = 0;
    while (std::getline(in, line)) {
        ++record;
        if (line.empty()) continue;
        try {
            const ordered_json j = ordered_json::parse(line);
            Scenario s;
            s.scenario_id = j.at("id").get<std::string>();
            s.maneuver = maneuver_from_string(j.at("maneuver").get<std::string>());
            s.dt = j.at("dt").get<double>();
            s.t_obs = j.at("t_obs").get<int>();
            s.t_f = j.at("t_f").get<int>();
            s.normalized = j.at("normalized").get<bool>();
            if (s.dt <= 0.0 || s.t_obs < 1 || s.t_f < 1)
                throw DataError("scenario record " + std::to_string(record) +
                                ": invalid window parameters");
            const auto n = static_cast<std::size_t>(s.length());
            const ordered_json& target = j.at("target");
            s.x = read_series(target, "x", n, record);
            s.y = read_series(target, "y", n, record);
            s.v = read_series(target, "v", n, record);
            s.a = read_series(target, "a", n, record);
            const ordered_json& slots = j.at("neighbors");
            if (slots.size() != NeighborGrid::kSlotCount)
                throw DataError("scenario record " + std::to_string(record) +
                                ": expected 8 neighbor slots, got " +
                                std::to_string(slots.size()));
            for (int k = 0; k < NeighborGrid::kSlotCount; ++k) {
                NeighborTrack& slot = s.neighbors.slots[static_cast<std::size_t>(k)];
                slot.ghost = slots[static_cast<std::size_t>(k)].at("ghost").get<bool>();
                slot.x = read_series(slots[static_cast<std::size_t>(k)], "x", n, record);
                slot.y = read_series(slots[static_cast<std::size_t>(k)], "y", n, record);
                slot.v = read_series(slots[static_cast<std::size_t>(k)], "v", n, record);
                slot.a = read_series(slots[static_cast<std::size_t>(k)], "a", n, record);
            }
            out.push_back(std::move(s));
        } catch (const nlohmann::json::exception& e) {
            throw DataError("scenario record " + std::to_string(record) + ": " +
                            e.what());
        }
    }
    return out;
}

}  // namespace xtrack
