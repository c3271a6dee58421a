#include "xtrack/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "xtrack/errors.hpp"
#include "xtrack/parallel.hpp"
#include "xtrack/rng.hpp"

namespace xtrack {

namespace {

// Longitudinal overlap half-length: neighbors within this many meters of the
// target along the travel direction count as "alongside".
constexpr double kAlongsideHalfLength = 5.0;

constexpr int kPreceding = 0;
constexpr int kFollowing = 1;
constexpr int kLeftPreceding = 2;
constexpr int kLeftAlongside = 3;
constexpr int kLeftFollowing = 4;
constexpr int kRightPreceding = 5;
constexpr int kRightAlongside = 6;
constexpr int kRightFollowing = 7;

int side_slot(int lane_offset, double delta) {
    const int base = lane_offset < 0 ? kLeftPreceding : kRightPreceding;
    if (delta > kAlongsideHalfLength) return base;
    if (delta < -kAlongsideHalfLength) return base + 2;
    return base + 1;
}

NeighborTrack ghost_of(const std::vector<double>& x, const std::vector<double>& y,
                       const std::vector<double>& v, const std::vector<double>& a) {
    NeighborTrack g;
    g.ghost = true;
    g.x = x;
    g.y = y;
    g.v = v;
    g.a = a;
    return g;
}

}  // namespace

const char* to_string(Maneuver m) {
    return m == Maneuver::keep_lane ? "keep_lane" : "lane_change";
}

Maneuver maneuver_from_string(const std::string& s) {
    if (s == "keep_lane") return Maneuver::keep_lane;
    if (s == "lane_change") return Maneuver::lane_change;
    throw DataError("unknown maneuver '" + s + "'");
}

const char* slot_name(int slot) {
    static const char* const names[NeighborGrid::kSlotCount] = {
        "preceding",      "following",       "left_preceding",
        "left_alongside", "left_following",  "right_preceding",
        "right_alongside", "right_following"};
    if (slot < 0 || slot >= NeighborGrid::kSlotCount)
        throw UsageError("neighbor slot out of range: " + std::to_string(slot));
    return names[slot];
}

NeighborGrid assign_neighbors(const Track& target, std::size_t start, int step,
                              int t_obs, int t_f,
                              const std::vector<Track>& all_tracks) {
    const int total = t_obs + t_f;
    if (step < 1 || t_obs < 1 || t_f < 1)
        throw UsageError("assign_neighbors needs step, t_obs, t_f >= 1");
    const std::size_t last = start + static_cast<std::size_t>(total - 1) * step;
    if (last >= target.size())
        throw UsageError("scenario window exceeds the target track");

    const std::size_t obs = start + static_cast<std::size_t>(t_obs - 1) * step;
    const std::int64_t first_frame = target.frames[start];
    const std::int64_t last_frame = target.frames[last];
    const std::int64_t obs_frame = target.frames[obs];
    const int target_lane = target.lane_id[obs];
    const double dir = target.x[last] >= target.x[start] ? 1.0 : -1.0;

    NeighborGrid grid;
    std::vector<double> best(NeighborGrid::kSlotCount,
                             std::numeric_limits<double>::infinity());
    for (const Track& cand : all_tracks) {
        if (cand.vehicle_id == target.vehicle_id || cand.size() == 0) continue;
        if (cand.frames.front() > first_frame || cand.frames.back() < last_frame)
            continue;
        const std::size_t at = static_cast<std::size_t>(obs_frame - cand.frames.front());
        const int lane_offset = cand.lane_id[at] - target_lane;
        if (lane_offset < -1 || lane_offset > 1) continue;
        const double delta = (cand.x[at] - target.x[obs]) * dir;

        int slot;
        if (lane_offset == 0) {
            slot = delta > 0.0 ? kPreceding : kFollowing;
        } else {
            slot = side_slot(lane_offset, delta);
        }
        const double dist = std::fabs(delta);
        if (dist >= best[static_cast<std::size_t>(slot)]) continue;
        best[static_cast<std::size_t>(slot)] = dist;

        NeighborTrack n;
        n.ghost = false;
        const std::size_t base = static_cast<std::size_t>(first_frame - cand.frames.front());
        for (int k = 0; k < total; ++k) {
            const std::size_t i = base + static_cast<std::size_t>(k) * step;
            n.x.push_back(cand.x[i]);
            n.y.push_back(cand.y[i]);
            n.v.push_back(cand.v[i]);
            n.a.push_back(cand.a[i]);
        }
        grid.slots[static_cast<std::size_t>(slot)] = std::move(n);
    }

    std::vector<double> gx, gy, gv, ga;
    for (int k = 0; k < total; ++k) {
        const std::size_t i = start + static_cast<std::size_t>(k) * step;
        gx.push_back(target.x[i]);
        gy.push_back(target.y[i]);
        gv.push_back(target.v[i]);
        ga.push_back(target.a[i]);
    }
    for (auto& slot : grid.slots) {
        if (slot.ghost) slot = ghost_of(gx, gy, gv, ga);
    }
    return grid;
}

std::vector<Scenario> extract_scenarios(const std::vector<Track>& tracks,
                                        double dt_target, int t_obs, int t_f) {
    if (dt_target <= 0.0) throw UsageError("dt_target must be positive");
    if (t_obs < 1 || t_f < 1) throw UsageError("t_obs and t_f must be >= 1");

    std::vector<std::vector<Scenario>> per_track(tracks.size());
    parallel_for(tracks.size(), [&](std::size_t ti) {
        const Track& track = tracks[ti];
        const double ratio = track.frame_rate * dt_target;
        const int step = static_cast<int>(std::lround(ratio));
        if (step < 1 || std::fabs(ratio - step) > 1e-9)
            throw UsageError("frame rate " + std::to_string(track.frame_rate) +
                             " Hz is not a multiple of the target rate");

        const int total = t_obs + t_f;
        const std::size_t span = static_cast<std::size_t>(total - 1) * step;
        if (track.size() < span + 1) return;

        for (std::size_t start = 0; start + span < track.size();
             start += static_cast<std::size_t>(step)) {
            Scenario s;
            char id[32];
            std::snprintf(id, sizeof(id), "v%06lld_f%08lld",
                          static_cast<long long>(track.vehicle_id),
                          static_cast<long long>(track.frames[start]));
            s.scenario_id = id;
            s.dt = dt_target;
            s.t_obs = t_obs;
            s.t_f = t_f;
            for (int k = 0; k < total; ++k) {
                const std::size_t i = start + static_cast<std::size_t>(k) * step;
                s.x.push_back(track.x[i]);
                s.y.push_back(track.y[i]);
                s.v.push_back(track.v[i]);
                s.a.push_back(track.a[i]);
            }
            s.maneuver = Maneuver::keep_lane;
            for (std::size_t i = start; i <= start + span; ++i) {
                if (track.lane_id[i] != track.lane_id[start]) {
                    s.maneuver = Maneuver::lane_change;
                    break;
                }
            }
            s.neighbors = assign_neighbors(track, start, step, t_obs, t_f, tracks);
            per_track[ti].push_back(std::move(s));
        }
    });

    std::vector<Scenario> out;
    for (auto& chunk : per_track)
        for (auto& s : chunk) out.push_back(std::move(s));
    return out;
}

std::vector<Scenario> balance_scenarios(const std::vector<Scenario>& scenarios,
                                        std::uint64_t seed) {
    std::vector<std::size_t> keep, change;
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
        (scenarios[i].maneuver == Maneuver::keep_lane ? keep : change).push_back(i);
    }
    const std::size_t quota = std::min(keep.size(), change.size());

    Rng rng(seed);
    rng.shuffle(keep);
    rng.shuffle(change);
    std::vector<Scenario> out;
    for (std::size_t i = 0; i < quota; ++i) out.push_back(scenarios[keep[i]]);
    for (std::size_t i = 0; i < quota; ++i) out.push_back(scenarios[change[i]]);
    rng.shuffle(out);
    return out;
}

Scenario to_target_frame(const Scenario& s) {
    if (s.t_obs < 1 || static_cast<int>(s.x.size()) != s.length())
        throw DataError("scenario '" + s.scenario_id + "' has a malformed window");

    const double x0 = s.x[0];
    const double y0 = s.y[0];
    const double hx = s.x[static_cast<std::size_t>(s.t_obs) - 1] - x0;
    const double hy = s.y[static_cast<std::size_t>(s.t_obs) - 1] - y0;
    if (std::hypot(hx, hy) < 1e-9)
        throw DataError("degenerate scenario '" + s.scenario_id +
                        "': target stationary over the history");
    const double sign = hx < 0.0 ? -1.0 : 1.0;

    Scenario out = s;
    auto remap = [&](std::vector<double>& xs, std::vector<double>& ys) {
        for (double& v : xs) v = sign * (v - x0);
        for (double& v : ys) v -= y0;
    };
    remap(out.x, out.y);
    for (auto& slot : out.neighbors.slots) remap(slot.x, slot.y);
    out.normalized = true;
    return out;
}

DatasetSplits split_dataset(const std::vector<Scenario>& scenarios,
                            const SplitSpec& spec) {
    if (spec.train < 0.0 || spec.val < 0.0 || spec.test < 0.0 ||
        std::fabs(spec.train + spec.val + spec.test - 1.0) > 1e-9)
        throw UsageError("split fractions must be non-negative and sum to 1");

    std::vector<std::size_t> order(scenarios.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(spec.seed);
    rng.shuffle(order);

    const auto n = static_cast<double>(scenarios.size());
    const auto n_train = static_cast<std::size_t>(std::floor(spec.train * n));
    const auto n_val = static_cast<std::size_t>(std::floor(spec.val * n));

    DatasetSplits out;
    for (std::size_t i = 0; i < order.size(); ++i) {
        const Scenario& s = scenarios[order[i]];
        if (i < n_train)
            out.train.push_back(s);
        else if (i < n_train + n_val)
            out.val.push_back(s);
        else
            out.test.push_back(s);
    }
    return out;
}

}  // namespace xtrack
