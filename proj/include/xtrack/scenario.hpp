#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace xtrack {

// One vehicle's contiguous samples from a recording, at the source frame rate.
struct Track {
    std::int64_t vehicle_id = 0;
    std::vector<std::int64_t> frames;  // strictly increasing by 1
    std::vector<double> x;             // m
    std::vector<double> y;             // m
    std::vector<double> v;             // speed, m/s
    std::vector<double> a;             // longitudinal acceleration, m/s^2
    std::vector<int> lane_id;
    double frame_rate = 25.0;  // Hz

    std::size_t size() const { return frames.size(); }
};

// Maps vendor CSV column names onto the loader contract and carries the
// recording rate, which the file itself does not state.
struct FormatConfig {
    double frame_rate = 25.0;
    std::string frame = "frame";
    std::string id = "id";
    std::string x = "x";
    std::string y = "y";
    std::string x_velocity = "xVelocity";
    std::string y_velocity = "yVelocity";
    std::string x_acceleration = "xAcceleration";
    std::string y_acceleration = "yAcceleration";
    std::string lane = "laneId";
};

enum class Maneuver { keep_lane, lane_change };

const char* to_string(Maneuver m);
Maneuver maneuver_from_string(const std::string& s);

// Samples for one neighbor slot, aligned with the scenario window. A ghost
// slot carries a copy of the target's own samples.
struct NeighborTrack {
    bool ghost = true;
    std::vector<double> x, y, v, a;
};

struct NeighborGrid {
    static constexpr int kSlotCount = 8;
    std::array<NeighborTrack, kSlotCount> slots;
};

// Slot order: preceding, following, left_preceding, left_alongside,
// left_following, right_preceding, right_alongside, right_following.
const char* slot_name(int slot);

// A fixed window of t_obs observed + t_f future samples around one target
// vehicle, with its 8-slot neighborhood.
struct Scenario {
    std::string scenario_id;
    Maneuver maneuver = Maneuver::keep_lane;
    double dt = 0.2;
    int t_obs = 15;
    int t_f = 25;
    bool normalized = false;           // positions in the target frame
    std::vector<double> x, y, v, a;    // target samples, t_obs + t_f each
    NeighborGrid neighbors;

    int length() const { return t_obs + t_f; }
};

// CSV ingestion per the contract in FormatConfig. Vehicles with frame gaps
// split into one Track per contiguous segment; output is ordered by
// vehicle_id, then start frame.
std::vector<Track> load_tracks(const std::string& path, const FormatConfig& fmt);

// Inverse of load_tracks for synthetic data: speed goes out as (v, 0) velocity
// components and acceleration as (a, 0), which the loader maps back exactly.
void write_tracks(const std::string& path, const std::vector<Track>& tracks,
                  const FormatConfig& fmt);

// Classifies the vehicles around `target` at its last observed sample into the
// 8 grid slots. `start` indexes the window's first sample in the target track;
// samples sit `step` source frames apart. Candidates must cover the full
// window; empty slots become ghosts.
NeighborGrid assign_neighbors(const Track& target, std::size_t start, int step,
                              int t_obs, int t_f,
                              const std::vector<Track>& all_tracks);

// Slides 8 s windows over every track, downsampling to dt_target. A window is
// lane_change iff the target's lane id changes anywhere inside it.
std::vector<Scenario> extract_scenarios(const std::vector<Track>& tracks,
                                        double dt_target, int t_obs, int t_f);

// Downsamples the majority class to the minority count, then reshuffles.
std::vector<Scenario> balance_scenarios(const std::vector<Scenario>& scenarios,
                                        std::uint64_t seed);

// Translates so the target's first observed position is the origin and mirrors
// x when the target travels in decreasing x. Pure isometry; idempotent.
Scenario to_target_frame(const Scenario& s);

struct SplitSpec {
    double train = 0.7;
    double val = 0.1;
    double test = 0.2;
    std::uint64_t seed = 0;
};

struct DatasetSplits {
    std::vector<Scenario> train, val, test;
};

// Seeded shuffle, then contiguous cut at floor(train*n) / floor(val*n) with
// the remainder as test.
DatasetSplits split_dataset(const std::vector<Scenario>& scenarios,
                            const SplitSpec& spec);

struct SynthSpec {
    int keep_lane = 0;    // alternates constant-speed and accelerating targets
    int lane_change = 0;  // sigmoid lateral ramp over lane_change_duration
    double speed_min = 20.0;  // m/s
    double speed_max = 35.0;
    double noise = 0.0;       // per-sample position jitter std, m
    double lane_width = 3.5;  // m
    double lane_change_duration = 4.0;  // s for 2%..98% of the ramp
    double dt = 0.2;
    int t_obs = 15;
    int t_f = 25;
};

// Generates kinematically consistent highway scenarios with three real
// neighbors (leader, follower, left-alongside) and ghosts elsewhere. Every
// target track satisfies roundtrip_error < 0.05 m; violations throw.
std::vector<Scenario> synth_generate(const SynthSpec& spec, std::uint64_t seed);

// Line-delimited JSON archive: a version header line, then one scenario per
// line, 64-bit lossless numbers. read_scenarios rejects unknown versions.
void write_scenarios(const std::string& path,
                     const std::vector<Scenario>& scenarios);
std::vector<Scenario> read_scenarios(const std::string& path);

}  // namespace xtrack
