#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "xtrack/errors.hpp"
#include "xtrack/gradcheck.hpp"
#include "xtrack/kinematics.hpp"
#include "xtrack/rng.hpp"
#include "xtrack/tensor.hpp"

using namespace xtrack;

namespace {

// Sampled synthetic tracks used across the roundtrip tests.
void sample_line(int n, double dt, double speed, std::vector<double>& x,
                 std::vector<double>& y) {
    for (int t = 0; t < n; ++t) {
        x.push_back(3.0 + speed * t * dt);
        y.push_back(-2.0);
    }
}

void sample_circle(int n, double dt, double radius, double speed, std::vector<double>& x,
                   std::vector<double>& y) {
    const double w = speed / radius;
    for (int t = 0; t < n; ++t) {
        x.push_back(radius * std::sin(w * t * dt));
        y.push_back(radius * (1.0 - std::cos(w * t * dt)));
    }
}

// Lane change: 3.5 m of lateral motion through a logistic ramp that covers
// 96% of its range in `transition` seconds, centered mid-window.
void sample_lane_change(int n, double dt, double speed, double transition,
                        std::vector<double>& x, std::vector<double>& y) {
    const double k = 2.0 * std::log(49.0) / transition;
    const double mid = 0.5 * (n - 1) * dt;
    for (int t = 0; t < n; ++t) {
        const double tt = t * dt;
        x.push_back(speed * tt);
        y.push_back(3.5 / (1.0 + std::exp(-k * (tt - mid))));
    }
}

}  // namespace

TEST_CASE("yaw-rate limit is the build-time degree conversion") {
    const double oracle = 71.26 * (4.0 * std::atan(1.0)) / 180.0;
    CHECK(std::fabs(kYawRateLimit - oracle) < 1e-15);
    MotionLimits limits;
    CHECK(limits.a_max == 9.0);
    CHECK(limits.psi_dot_max == kYawRateLimit);
}

TEST_CASE("clamp_controls bounds every value") {
    MotionLimits limits;
    ControlSequence raw;
    raw.dt = 0.2;
    raw.a_x = {0.0, 100.0, -3.0};
    raw.psi_dot = {0.0, -5.0, 0.2};
    ControlSequence out = clamp_controls(raw, limits);
    CHECK(out.a_x[0] == 0.0);
    CHECK(out.psi_dot[0] == 0.0);
    CHECK(out.a_x[1] <= 9.0);
    CHECK(out.a_x[1] > 8.9);
    CHECK(out.psi_dot[1] >= -kYawRateLimit);
    CHECK(out.psi_dot[1] < -0.99 * kYawRateLimit);

    Rng rng(1);
    ControlSequence wild;
    wild.dt = 0.2;
    for (int i = 0; i < 1000; ++i) {
        wild.a_x.push_back(rng.uniform(-100.0, 100.0));
        wild.psi_dot.push_back(rng.uniform(-100.0, 100.0));
    }
    ControlSequence c = clamp_controls(wild, limits);
    for (int i = 0; i < 1000; ++i) {
        CHECK(std::fabs(c.a_x[static_cast<std::size_t>(i)]) <= limits.a_max);
        CHECK(std::fabs(c.psi_dot[static_cast<std::size_t>(i)]) <= limits.psi_dot_max);
    }
}

TEST_CASE("tape clamp matches the plain clamp") {
    MotionLimits limits;
    Tape tape;
    Tensor ctrl = Tensor::from({2}, {42.0, -3.0});
    Tensor out = clamp_controls(tape, ctrl, limits);
    CHECK(out[0] == doctest::Approx(9.0 * std::tanh(42.0 / 9.0)).epsilon(1e-15));
    CHECK(out[1] ==
          doctest::Approx(kYawRateLimit * std::tanh(-3.0 / kYawRateLimit)).epsilon(1e-15));
}

TEST_CASE("rest stays at rest") {
    ControlSequence zero;
    zero.dt = 0.2;
    zero.a_x.assign(25, 0.0);
    zero.psi_dot.assign(25, 0.0);
    auto trace = rollout({1.0, 2.0, 0.0, 0.7}, zero);
    for (const auto& s : trace) {
        CHECK(s.x == 1.0);
        CHECK(s.y == 2.0);
        CHECK(s.v == 0.0);
        CHECK(s.psi == 0.7);
    }
}

TEST_CASE("uniform motion moves v*dt along the heading") {
    ControlSequence zero;
    zero.dt = 0.2;
    zero.a_x = {0.0};
    zero.psi_dot = {0.0};
    auto trace = rollout({0.0, 0.0, 10.0, 0.0}, zero);
    REQUIRE(trace.size() == 1);
    CHECK(trace[0].x == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(trace[0].y == 0.0);
    CHECK(trace[0].v == 10.0);
    CHECK(trace[0].psi == 0.0);
}

TEST_CASE("one curved step matches the hand evaluation") {
    ControlSequence c;
    c.dt = 0.1;
    c.a_x = {0.0};
    c.psi_dot = {0.1};
    auto trace = rollout({0.0, 0.0, 10.0, 0.0}, c);
    REQUIRE(trace.size() == 1);
    CHECK(trace[0].x == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(trace[0].y == doctest::Approx(0.005).epsilon(1e-12));
    CHECK(trace[0].v == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(trace[0].psi == doctest::Approx(0.01).epsilon(1e-12));
}

TEST_CASE("zero controls trace a straight line at constant speed") {
    ControlSequence zero;
    zero.dt = 0.2;
    zero.a_x.assign(20, 0.0);
    zero.psi_dot.assign(20, 0.0);
    KinematicState init{5.0, -3.0, 7.0, 2.1};
    auto trace = rollout(init, zero);
    const double step_x = trace[0].x - init.x;
    const double step_y = trace[0].y - init.y;
    for (std::size_t t = 0; t < trace.size(); ++t) {
        CHECK(trace[t].v == init.v);
        CHECK(trace[t].psi == init.psi);
        if (t > 0) {
            CHECK(std::fabs((trace[t].x - trace[t - 1].x) - step_x) < 1e-12);
            CHECK(std::fabs((trace[t].y - trace[t - 1].y) - step_y) < 1e-12);
        }
    }
}

TEST_CASE("rollout reports the step where the state blew up") {
    ControlSequence c;
    c.dt = 0.2;
    c.a_x = {0.0, std::numeric_limits<double>::infinity(), 0.0};
    c.psi_dot = {0.0, 0.0, 0.0};
    try {
        rollout({0.0, 0.0, 10.0, 0.0}, c);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("step 1") != std::string::npos);
    }
}

TEST_CASE("derive_controls on uniform motion") {
    std::vector<double> x, y;
    sample_line(40, 0.2, 25.0, x, y);
    DerivedMotion m = derive_controls(x, y, 0.2);
    for (std::size_t t = 0; t < x.size(); ++t) {
        CHECK(std::fabs(m.v[t] - 25.0) < 1e-10);
        CHECK(std::fabs(m.a_x[t]) < 1e-10);
        CHECK(std::fabs(m.psi_dot[t]) < 1e-10);
    }
}

TEST_CASE("derive_controls on uniformly accelerated motion") {
    const double dt = 0.2;
    std::vector<double> x, y;
    for (int t = 0; t < 40; ++t) {
        const double tt = t * dt;
        x.push_back(3.0 + 20.0 * tt + 1.0 * tt * tt);  // a = 2
        y.push_back(-2.0);
    }
    DerivedMotion m = derive_controls(x, y, dt);
    for (std::size_t t = 0; t < x.size(); ++t) {
        CHECK(std::fabs(m.a_x[t] - 2.0) < 1e-9);
        CHECK(std::fabs(m.psi_dot[t]) < 1e-9);
    }
}

TEST_CASE("derive_controls recovers the circle yaw rate") {
    std::vector<double> x, y;
    sample_circle(26, 0.2, 100.0, 10.0, x, y);
    DerivedMotion m = derive_controls(x, y, 0.2);
    for (std::size_t t = 0; t < x.size(); ++t) {
        CHECK(std::fabs(m.psi_dot[t] - 0.1) < 1e-3);
        CHECK(std::fabs(m.v[t] - 10.0) < 1e-2);
    }
}

TEST_CASE("derive_controls validates its input") {
    CHECK_THROWS_AS(derive_controls({0.0, 1.0}, {0.0, 0.0}, 0.2), DataError);
    CHECK_THROWS_AS(derive_controls({0.0, 1.0, 2.0}, {0.0, 0.0}, 0.2), DataError);
    CHECK_THROWS_AS(derive_controls({0.0, 1.0, 2.0}, {0.0, 0.0, 0.0}, 0.0), UsageError);

    std::vector<double> x = {0.0, 1.0, 2.0, 3.0};
    std::vector<double> y = {0.0, 0.0, 0.0, 0.0};
    CHECK_NOTHROW(derive_controls(x, y, std::vector<double>{0.0, 0.2, 0.4, 0.6}));
    CHECK_THROWS_AS(derive_controls(x, y, std::vector<double>{0.0, 0.2, 0.41, 0.6}),
                    DataError);
}

TEST_CASE("roundtrip is near-exact for straight constant-speed tracks") {
    std::vector<double> x, y;
    sample_line(40, 0.2, 25.0, x, y);
    CHECK(roundtrip_error(x, y, 0.2) < 1e-9);
}

TEST_CASE("roundtrip stays under a decimeter for a sigmoid lane change") {
    std::vector<double> x5, y5;
    sample_lane_change(26, 0.2, 30.0, 4.0, x5, y5);  // 5 s window
    CHECK(roundtrip_error(x5, y5, 0.2) < 0.1);

    std::vector<double> x8, y8;
    sample_lane_change(40, 0.2, 30.0, 4.0, x8, y8);  // 8 s window
    CHECK(roundtrip_error(x8, y8, 0.2) < 0.1);
}

TEST_CASE("halving dt tightens the circle roundtrip") {
    std::vector<double> xa, ya, xb, yb;
    sample_circle(26, 0.2, 100.0, 10.0, xa, ya);
    sample_circle(51, 0.1, 100.0, 10.0, xb, yb);
    const double coarse = roundtrip_error(xa, ya, 0.2);
    const double fine = roundtrip_error(xb, yb, 0.1);
    CHECK(fine < coarse);
}

TEST_CASE("tape rollout agrees with the plain rollout") {
    Rng rng(4);
    ControlSequence c;
    c.dt = 0.2;
    for (int t = 0; t < 10; ++t) {
        c.a_x.push_back(rng.uniform(-3.0, 3.0));
        c.psi_dot.push_back(rng.uniform(-0.4, 0.4));
    }
    KinematicState init{1.0, -2.0, 12.0, 0.5};
    auto plain = rollout(init, c);

    Tape tape;
    Tensor init_t = Tensor::from({4}, {init.x, init.y, init.v, init.psi});
    std::vector<Tensor> controls;
    for (int t = 0; t < 10; ++t) {
        controls.push_back(Tensor::from(
            {2}, {c.a_x[static_cast<std::size_t>(t)], c.psi_dot[static_cast<std::size_t>(t)]}));
    }
    auto positions = rollout(tape, init_t, controls, c.dt);
    REQUIRE(positions.size() == plain.size());
    for (std::size_t t = 0; t < plain.size(); ++t) {
        CHECK(std::fabs(positions[t][0] - plain[t].x) < 1e-14);
        CHECK(std::fabs(positions[t][1] - plain[t].y) < 1e-14);
    }
}

TEST_CASE("rotating the initial heading rotates the trajectory") {
    Rng rng(5);
    ControlSequence c;
    c.dt = 0.2;
    for (int t = 0; t < 15; ++t) {
        c.a_x.push_back(rng.uniform(-2.0, 2.0));
        c.psi_dot.push_back(rng.uniform(-0.3, 0.3));
    }
    const double theta = 0.9;
    KinematicState base{3.0, 1.0, 9.0, 0.4};
    KinematicState turned = base;
    turned.psi += theta;

    auto t0 = rollout(base, c);
    auto t1 = rollout(turned, c);
    const double ct = std::cos(theta), st = std::sin(theta);
    for (std::size_t t = 0; t < t0.size(); ++t) {
        const double rx = base.x + ct * (t0[t].x - base.x) - st * (t0[t].y - base.y);
        const double ry = base.y + st * (t0[t].x - base.x) + ct * (t0[t].y - base.y);
        CHECK(std::fabs(t1[t].x - rx) < 1e-10);
        CHECK(std::fabs(t1[t].y - ry) < 1e-10);
    }
}

TEST_CASE("rollout gradients check out for controls and initial state") {
    Rng rng(6);
    Tensor initial = Tensor::from({4}, {0.5, -1.0, 8.0, 0.3});
    std::vector<Tensor> controls;
    for (int t = 0; t < 3; ++t) {
        controls.push_back(
            Tensor::from({2}, {rng.uniform(-3.0, 3.0), rng.uniform(-0.5, 0.5)}));
    }
    Tensor probe = Tensor::from({2}, {0.7, -1.3});
    std::vector<Tensor> inputs = controls;
    inputs.push_back(initial);
    auto fn = [=](Tape& tape) {
        auto positions = rollout(tape, initial, controls, 0.2);
        return dot(tape, probe, positions.back());
    };
    GradCheckReport r = grad_check(fn, inputs, 1e-5);
    INFO(r.to_string());
    CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("clamped rollout gradients survive deep saturation") {
    // Controls far beyond the limits: the smooth clamp keeps gradients alive.
    Tensor initial = Tensor::from({4}, {0.0, 0.0, 10.0, 0.0});
    std::vector<Tensor> raw = {Tensor::from({2}, {30.0, -4.0}),
                               Tensor::from({2}, {-25.0, 2.0})};
    MotionLimits limits;
    auto fn = [=](Tape& tape) {
        std::vector<Tensor> clamped;
        for (const Tensor& c : raw) clamped.push_back(clamp_controls(tape, c, limits));
        auto positions = rollout(tape, initial, clamped, 0.2);
        return sum(tape, positions.back());
    };
    raw[0].zero_grad();
    raw[1].zero_grad();
    Tape tape;
    Tensor loss = fn(tape);
    tape.backward(loss);
    for (const Tensor& c : raw) {
        for (const double g : c.grad()) CHECK(g != 0.0);
    }

    GradCheckReport r = grad_check(fn, raw, 1e-5);
    INFO(r.to_string());
    CHECK(r.max_rel_error < 1e-4);
}
