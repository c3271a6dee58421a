// Physics layer: finite-difference derivation of motion parameters from
// position tracks, smooth clamping to physical limits, and the kinematic
// rollout that integrates (a_x, psi_dot) controls into positions. The
// rollout exists twice: a plain-double version for data preparation and a
// tape version that is differentiable through every step.
#pragma once

#include <numbers>
#include <vector>

#include "xtrack/tensor.hpp"

namespace xtrack {

struct KinematicState {
    double x = 0.0;    // m
    double y = 0.0;    // m
    double v = 0.0;    // m/s
    double psi = 0.0;  // heading, rad
};

struct ControlSequence {
    std::vector<double> a_x;      // m/s^2
    std::vector<double> psi_dot;  // rad/s
    double dt = 0.0;              // s

    int length() const { return static_cast<int>(a_x.size()); }
};

// 71.26 deg/s converted at build time.
inline constexpr double kYawRateLimit = 71.26 * std::numbers::pi / 180.0;

struct MotionLimits {
    double a_max = 9.0;                 // m/s^2
    double psi_dot_max = kYawRateLimit; // rad/s
};

// Smooth saturation bound*tanh(raw/bound): odd, strictly inside the bounds,
// with gradients that never vanish to exactly zero.
ControlSequence clamp_controls(const ControlSequence& raw, const MotionLimits& limits);
// Tape variant over one [a_x, psi_dot] pair.
Tensor clamp_controls(Tape& tape, const Tensor& control, const MotionLimits& limits);

// Integrates the state forward one step per control:
//   x += v cos(psi) dt + (a cos(psi) - psi_dot v sin(psi)) dt^2/2
//   y += v sin(psi) dt + (a sin(psi) + psi_dot v cos(psi)) dt^2/2
//   v += a dt;  psi += psi_dot dt
// Returns the state after every step. Throws NumericError naming the step
// index if the state leaves the finite range.
std::vector<KinematicState> rollout(const KinematicState& initial,
                                    const ControlSequence& controls);

// Differentiable rollout: initial is [x, y, v, psi], each control [a, psi_dot].
// Returns the [x, y] position after every step.
std::vector<Tensor> rollout(Tape& tape, const Tensor& initial,
                            const std::vector<Tensor>& controls, double dt);

// Per-sample motion quantities recovered from a position track.
// Velocity components use central differences inside the track and
// second-order one-sided stencils at the ends; v and psi follow from them
// (psi unwrapped). The controls are forward differences of v and psi,
// which act as midpoint estimates over each integration interval; the last
// sample repeats its predecessor.
struct DerivedMotion {
    std::vector<double> x, y;            // copies of the input positions
    std::vector<double> v, psi;          // per sample
    std::vector<double> a_x, psi_dot;    // per sample
    double dt = 0.0;

    KinematicState state_at(int t) const;
    KinematicState final_state() const;
    ControlSequence controls(int begin, int count) const;
};

DerivedMotion derive_controls(const std::vector<double>& x, const std::vector<double>& y,
                              double dt);
// Validates that the timestamps are uniformly spaced (tolerance 1e-6 s)
// and infers dt from them.
DerivedMotion derive_controls(const std::vector<double>& x, const std::vector<double>& y,
                              const std::vector<double>& times);

// Max Euclidean deviation between the track and its reconstruction
// (derive_controls, then rollout from the first sample).
double roundtrip_error(const std::vector<double>& x, const std::vector<double>& y,
                       double dt);

}  // namespace xtrack
