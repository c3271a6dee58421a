#include "xtrack/kinematics.hpp"

#include <cmath>
#include <string>

#include "xtrack/errors.hpp"

namespace xtrack {

namespace {

void check_limits(const MotionLimits& limits) {
    if (!(limits.a_max > 0.0) || !(limits.psi_dot_max > 0.0)) {
        throw UsageError("clamp_controls: motion limits must be strictly positive");
    }
}

double saturate(double raw, double bound) { return bound * std::tanh(raw / bound); }

// Maps an angle difference into (-pi, pi].
double wrap_angle(double d) {
    d = std::remainder(d, 2.0 * std::numbers::pi);
    if (d <= -std::numbers::pi) d += 2.0 * std::numbers::pi;
    return d;
}

}  // namespace

ControlSequence clamp_controls(const ControlSequence& raw, const MotionLimits& limits) {
    check_limits(limits);
    if (raw.a_x.size() != raw.psi_dot.size()) {
        throw UsageError("clamp_controls: a_x and psi_dot lengths differ");
    }
    ControlSequence out = raw;
    for (double& a : out.a_x) a = saturate(a, limits.a_max);
    for (double& p : out.psi_dot) p = saturate(p, limits.psi_dot_max);
    return out;
}

Tensor clamp_controls(Tape& tape, const Tensor& control, const MotionLimits& limits) {
    check_limits(limits);
    if (control.size() != 2) {
        throw DimensionError("clamp_controls: expected [a_x, psi_dot], got " +
                             control.shape_str());
    }
    Tensor a = tanh_saturate(tape, pick(tape, control, 0), limits.a_max);
    Tensor p = tanh_saturate(tape, pick(tape, control, 1), limits.psi_dot_max);
    return concat(tape, a, p);
}

std::vector<KinematicState> rollout(const KinematicState& initial,
                                    const ControlSequence& controls) {
    if (!(controls.dt > 0.0)) throw UsageError("rollout: dt must be positive");
    if (controls.a_x.size() != controls.psi_dot.size()) {
        throw UsageError("rollout: a_x and psi_dot lengths differ");
    }
    const double dt = controls.dt;
    const double half = dt * dt / 2.0;
    KinematicState s = initial;
    std::vector<KinematicState> trace;
    trace.reserve(controls.a_x.size());
    for (std::size_t t = 0; t < controls.a_x.size(); ++t) {
        const double a = controls.a_x[t];
        const double pd = controls.psi_dot[t];
        const double c = std::cos(s.psi);
        const double sn = std::sin(s.psi);
        s.x += s.v * c * dt + (a * c - pd * s.v * sn) * half;
        s.y += s.v * sn * dt + (a * sn + pd * s.v * c) * half;
        s.v += a * dt;
        s.psi += pd * dt;
        if (!std::isfinite(s.x) || !std::isfinite(s.y) || !std::isfinite(s.v) ||
            !std::isfinite(s.psi)) {
            throw NumericError("rollout: non-finite state at step " + std::to_string(t));
        }
        trace.push_back(s);
    }
    return trace;
}

std::vector<Tensor> rollout(Tape& tape, const Tensor& initial,
                            const std::vector<Tensor>& controls, double dt) {
    if (!(dt > 0.0)) throw UsageError("rollout: dt must be positive");
    if (initial.size() != 4) {
        throw DimensionError("rollout: initial state must be [x, y, v, psi], got " +
                             initial.shape_str());
    }
    const double half = dt * dt / 2.0;
    Tensor x = pick(tape, initial, 0);
    Tensor y = pick(tape, initial, 1);
    Tensor v = pick(tape, initial, 2);
    Tensor psi = pick(tape, initial, 3);

    std::vector<Tensor> positions;
    positions.reserve(controls.size());
    for (std::size_t t = 0; t < controls.size(); ++t) {
        const Tensor& ctrl = controls[t];
        if (ctrl.size() != 2) {
            throw DimensionError("rollout: control " + std::to_string(t) +
                                 " must be [a_x, psi_dot], got " + ctrl.shape_str());
        }
        Tensor a = pick(tape, ctrl, 0);
        Tensor pd = pick(tape, ctrl, 1);
        Tensor c = cos(tape, psi);
        Tensor sn = sin(tape, psi);
        Tensor vc = mul(tape, v, c);
        Tensor vs = mul(tape, v, sn);
        x = add(tape, x,
                add(tape, scale(tape, vc, dt),
                    scale(tape, sub(tape, mul(tape, a, c), mul(tape, pd, vs)), half)));
        y = add(tape, y,
                add(tape, scale(tape, vs, dt),
                    scale(tape, add(tape, mul(tape, a, sn), mul(tape, pd, vc)), half)));
        v = add(tape, v, scale(tape, a, dt));
        psi = add(tape, psi, scale(tape, pd, dt));
        if (!x.all_finite() || !y.all_finite() || !v.all_finite() || !psi.all_finite()) {
            throw NumericError("rollout: non-finite state at step " + std::to_string(t));
        }
        positions.push_back(concat(tape, x, y));
    }
    return positions;
}

KinematicState DerivedMotion::state_at(int t) const {
    return {x.at(static_cast<std::size_t>(t)), y.at(static_cast<std::size_t>(t)),
            v.at(static_cast<std::size_t>(t)), psi.at(static_cast<std::size_t>(t))};
}

KinematicState DerivedMotion::final_state() const {
    return state_at(static_cast<int>(x.size()) - 1);
}

ControlSequence DerivedMotion::controls(int begin, int count) const {
    if (begin < 0 || count < 0 ||
        static_cast<std::size_t>(begin + count) > a_x.size()) {
        throw UsageError("DerivedMotion::controls: range [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") outside 0.." +
                         std::to_string(a_x.size()));
    }
    ControlSequence out;
    out.dt = dt;
    out.a_x.assign(a_x.begin() + begin, a_x.begin() + begin + count);
    out.psi_dot.assign(psi_dot.begin() + begin, psi_dot.begin() + begin + count);
    return out;
}

DerivedMotion derive_controls(const std::vector<double>& x, const std::vector<double>& y,
                              double dt) {
    const std::size_t K = x.size();
    if (K != y.size()) throw DataError("derive_controls: x and y lengths differ");
    if (K < 3) throw DataError("derive_controls: need at least 3 samples, got " +
                               std::to_string(K));
    if (!(dt > 0.0)) throw UsageError("derive_controls: dt must be positive");

    DerivedMotion m;
    m.x = x;
    m.y = y;
    m.dt = dt;
    m.v.resize(K);
    m.psi.resize(K);
    m.a_x.resize(K);
    m.psi_dot.resize(K);

    std::vector<double> dx(K), dy(K);
    for (std::size_t t = 1; t + 1 < K; ++t) {
        dx[t] = (x[t + 1] - x[t - 1]) / (2.0 * dt);
        dy[t] = (y[t + 1] - y[t - 1]) / (2.0 * dt);
    }
    dx[0] = (-3.0 * x[0] + 4.0 * x[1] - x[2]) / (2.0 * dt);
    dy[0] = (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * dt);
    dx[K - 1] = (3.0 * x[K - 1] - 4.0 * x[K - 2] + x[K - 3]) / (2.0 * dt);
    dy[K - 1] = (3.0 * y[K - 1] - 4.0 * y[K - 2] + y[K - 3]) / (2.0 * dt);

    for (std::size_t t = 0; t < K; ++t) {
        m.v[t] = std::hypot(dx[t], dy[t]);
        const double raw = std::atan2(dy[t], dx[t]);
        m.psi[t] = t == 0 ? raw : m.psi[t - 1] + wrap_angle(raw - m.psi[t - 1]);
    }
    for (std::size_t t = 0; t + 1 < K; ++t) {
        m.a_x[t] = (m.v[t + 1] - m.v[t]) / dt;
        m.psi_dot[t] = (m.psi[t + 1] - m.psi[t]) / dt;
    }
    m.a_x[K - 1] = m.a_x[K - 2];
    m.psi_dot[K - 1] = m.psi_dot[K - 2];
    return m;
}

DerivedMotion derive_controls(const std::vector<double>& x, const std::vector<double>& y,
                              const std::vector<double>& times) {
    if (times.size() != x.size()) throw DataError("derive_controls: timestamp count mismatch");
    if (times.size() < 2) throw DataError("derive_controls: need at least 3 samples");
    const double dt = times[1] - times[0];
    for (std::size_t t = 1; t < times.size(); ++t) {
        if (std::fabs(times[t] - times[t - 1] - dt) > 1e-6) {
            throw DataError("derive_controls: non-uniform timestamps at sample " +
                            std::to_string(t));
        }
    }
    return derive_controls(x, y, dt);
}

double roundtrip_error(const std::vector<double>& x, const std::vector<double>& y,
                       double dt) {
    DerivedMotion m = derive_controls(x, y, dt);
    const int steps = static_cast<int>(x.size()) - 1;
    auto trace = rollout(m.state_at(0), m.controls(0, steps));
    double worst = 0.0;
    for (int t = 0; t < steps; ++t) {
        const auto& s = trace[static_cast<std::size_t>(t)];
        worst = std::fmax(worst, std::hypot(s.x - x[static_cast<std::size_t>(t + 1)],
                                            s.y - y[static_cast<std::size_t>(t + 1)]));
    }
    return worst;
}

}  // namespace xtrack
