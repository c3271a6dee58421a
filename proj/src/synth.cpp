#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "xtrack/errors.hpp"
#include "xtrack/kinematics.hpp"
#include "xtrack/rng.hpp"
#include "xtrack/scenario.hpp"

namespace xtrack {

namespace {

// Generated target tracks must reconstruct through derive_controls + rollout
// at least this well; anything worse means the generator drifted from the
// motion model.
constexpr double kSelfCheckLimit = 0.05;  // m

constexpr int kPreceding = 0;
constexpr int kFollowing = 1;
constexpr int kLeftAlongside = 3;
constexpr int kRightAlongside = 6;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void derive_series(const std::vector<double>& x, const std::vector<double>& y,
                   double dt, std::vector<double>& v, std::vector<double>& a) {
    const DerivedMotion m = derive_controls(x, y, dt);
    v = m.v;
    a = m.a_x;
}

// Straight constant-speed vehicle used for the real neighbor slots.
NeighborTrack straight_neighbor(double x0, double y, double speed, int total,
                                double dt) {
    NeighborTrack n;
    n.ghost = false;
    for (int t = 0; t < total; ++t) {
        n.x.push_back(x0 + speed * t * dt);
        n.y.push_back(y);
        n.v.push_back(speed);
        n.a.push_back(0.0);
    }
    return n;
}

void check_spec(const SynthSpec& sp) {
    if (sp.keep_lane < 0 || sp.lane_change < 0)
        throw UsageError("scenario counts must be non-negative");
    if (!(sp.speed_min > 0.0) || sp.speed_max < sp.speed_min)
        throw UsageError("need 0 < speed_min <= speed_max");
    if (!(sp.noise >= 0.0) || !std::isfinite(sp.noise))
        throw UsageError("noise must be a non-negative std in meters");
    if (!(sp.lane_width > 0.0)) throw UsageError("lane_width must be positive");
    if (!(sp.lane_change_duration > 0.0))
        throw UsageError("lane_change_duration must be positive");
    if (!(sp.dt > 0.0)) throw UsageError("dt must be positive");
    if (sp.t_obs < 2 || sp.t_f < 1)
        throw UsageError("need t_obs >= 2 and t_f >= 1");
}

}  // namespace

std::vector<Scenario> synth_generate(const SynthSpec& sp, std::uint64_t seed) {
    check_spec(sp);
    Rng rng(seed);
    const int total = sp.t_obs + sp.t_f;
    const double w = sp.lane_width;

    auto scaffold = [&](const char* tag, int index) {
        Scenario s;
        char id[32];
        std::snprintf(id, sizeof(id), "synth_%s%04d", tag, index);
        s.scenario_id = id;
        s.dt = sp.dt;
        s.t_obs = sp.t_obs;
        s.t_f = sp.t_f;
        return s;
    };

    auto add_neighbors = [&](Scenario& s, int lane) {
        const double x0 = s.x[0];
        const double v0 = s.v[0];
        s.neighbors.slots[kPreceding] = straight_neighbor(
            x0 + rng.uniform(25.0, 45.0), lane * w,
            v0 * rng.uniform(0.95, 1.05), total, sp.dt);
        s.neighbors.slots[kFollowing] = straight_neighbor(
            x0 - rng.uniform(25.0, 45.0), lane * w,
            v0 * rng.uniform(0.95, 1.05), total, sp.dt);
        const int side = lane > 1 ? -1 : 1;
        const int slot = side < 0 ? kLeftAlongside : kRightAlongside;
        s.neighbors.slots[slot] = straight_neighbor(
            x0 + rng.uniform(-4.0, 4.0), (lane + side) * w, v0, total, sp.dt);
        for (auto& n : s.neighbors.slots) {
            if (!n.ghost) continue;
            n.x = s.x;
            n.y = s.y;
            n.v = s.v;
            n.a = s.a;
        }
    };

    auto finish = [&](Scenario& s, int lane) {
        if (sp.noise > 0.0) {
            for (double& v : s.x) v += rng.normal(0.0, sp.noise);
            for (double& v : s.y) v += rng.normal(0.0, sp.noise);
        }
        derive_series(s.x, s.y, sp.dt, s.v, s.a);
        const double err = roundtrip_error(s.x, s.y, sp.dt);
        if (!(err < kSelfCheckLimit))
            throw NumericError("synthetic track '" + s.scenario_id +
                               "' failed the kinematic self-check: roundtrip error " +
                               std::to_string(err) + " m");
        add_neighbors(s, lane);
    };

    std::vector<Scenario> out;
    for (int i = 0; i < sp.keep_lane; ++i) {
        Scenario s = scaffold("k", i);
        s.maneuver = Maneuver::keep_lane;
        const double v0 = rng.uniform(sp.speed_min, sp.speed_max);
        const double accel = i % 2 == 0 ? 0.0 : rng.uniform(-1.5, 1.5);
        const double x0 = rng.uniform(0.0, 50.0);
        const int lane = 1 + static_cast<int>(rng.uniform_int(3));
        for (int t = 0; t < total; ++t) {
            const double tt = t * sp.dt;
            s.x.push_back(x0 + v0 * tt + 0.5 * accel * tt * tt);
            s.y.push_back(lane * w);
        }
        finish(s, lane);
        out.push_back(std::move(s));
    }

    for (int i = 0; i < sp.lane_change; ++i) {
        Scenario s = scaffold("c", i);
        s.maneuver = Maneuver::lane_change;
        const double v0 = rng.uniform(sp.speed_min, sp.speed_max);
        const double x0 = rng.uniform(0.0, 50.0);
        const int lane = 1 + static_cast<int>(rng.uniform_int(3));
        const int dir = lane == 1 ? 1 : lane == 3 ? -1 : (rng.uniform() < 0.5 ? -1 : 1);
        const double k = 2.0 * std::log(49.0) / sp.lane_change_duration;
        const double mid = 0.5 * (total - 1) * sp.dt;
        for (int t = 0; t < total; ++t) {
            const double tt = t * sp.dt;
            s.x.push_back(x0 + v0 * tt);
            s.y.push_back(lane * w + dir * w * sigmoid(k * (tt - mid)));
        }
        finish(s, lane);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace xtrack
