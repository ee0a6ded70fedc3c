#include <random>

#include "doctest.h"
#include "support.hpp"

#include "fdot/error.hpp"
#include "fdot/forward.hpp"

using namespace fdot;

namespace {

QuadratureSpec tight() {
    QuadratureSpec q;
    q.rel_tol = 1e-12;
    return q;
}

const SDPair kPair = make_pair({-3, 0}, {3, 0});

}  // namespace

TEST_SUITE("forward") {
    TEST_CASE("point signal agrees with an independent high-precision quadrature") {
        const auto p = OpticalParams::tissue_defaults();
        for (const auto& r : test::read_csv("tpsf_point.csv")) {
            const SDPair pair = make_pair({r[0], r[1]}, {r[2], r[3]});
            const PointTarget target{{r[4], r[5], r[6]}, r[7]};
            CAPTURE(r[8]);
            CHECK(test::rel_diff(tpsf_point(pair, target, r[8], p, tight()), r[9]) <= 1e-9);
        }
    }

    TEST_CASE("peak value at depth 5 is frozen") {
        const auto p = OpticalParams::tissue_defaults();
        const double u = tpsf_point(kPair, PointTarget{{0, 0, 5}, 1e6}, 115.1599, p, QuadratureSpec{});
        CHECK(u == doctest::Approx(0.0301606324379).epsilon(1e-8));
    }

    TEST_CASE("prefactor") {
        const auto p = OpticalParams::tissue_defaults();
        CHECK(emission_prefactor(0.0, p) == doctest::Approx(1.0 / (16 * M_PI * M_PI * M_PI * 0.219 / 9.0)));
        const auto pc = peak_constants(kPair, {0, 0, 5}, p);
        CHECK(pc.A_ps == doctest::Approx(34.0 / (4 * 0.073)));
        CHECK(pc.A_ps == pc.B_ps);
    }

    TEST_CASE("reciprocity, linearity and positivity on random configurations") {
        const auto p = OpticalParams::tissue_defaults();
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> xy(-8, 8), depth(0.2, 8), tt(20, 900);
        const QuadratureSpec q;
        for (int i = 0; i < 20; ++i) {
            const SDPair pair = make_pair({xy(rng), xy(rng)}, {xy(rng), xy(rng)});
            const PointTarget target{{xy(rng), xy(rng), depth(rng)}, 1.0};
            const double t = tt(rng);
            const double u = tpsf_point(pair, target, t, p, q);
            CHECK(u > 0.0);
            CHECK(test::rel_diff(tpsf_point(pair.swapped(), target, t, p, q), u) <= 1e-9);
            const PointTarget scaled{target.center, 7.25};
            CHECK(test::rel_diff(tpsf_point(pair, scaled, t, p, q), 7.25 * u) <= 1e-12);
        }
    }

    TEST_CASE("tiny cube behaves like a point of the same mass") {
        const auto p = OpticalParams::tissue_defaults();
        const double L = 0.01;
        const CuboidTarget cube_t{cube({0, 0, 5}, L), 1e6};
        const PointTarget point{{0, 0, 5}, 1e6 * L * L * L};
        for (double t : {80.0, 115.0, 300.0}) {
            CAPTURE(t);
            CHECK(test::rel_diff(tpsf_cuboid(kPair, cube_t, t, p, QuadratureSpec{}), tpsf_point(kPair, point, t, p, tight())) <= 1e-4);
        }
    }

    TEST_CASE("separable and tensor cuboid rules agree") {
        const auto p = OpticalParams::tissue_defaults();
        const CuboidTarget target{Box{{-0.5, -0.2, 4.5}, {0.7, 0.5, 5.5}}, 1e6};
        QuadratureSpec tensor;
        tensor.rel_tol = 1e-8;
        tensor.cuboid_rule = CuboidRule::TensorGaussLegendre;
        for (double t : {90.0, 120.0, 250.0}) {
            CAPTURE(t);
            CHECK(test::rel_diff(tpsf_cuboid(kPair, target, t, p, tight()), tpsf_cuboid(kPair, target, t, p, tensor)) <= 1e-6);
        }
    }

    TEST_CASE("constant-polynomial targets reduce to the static cuboid") {
        const auto p = OpticalParams::tissue_defaults().with_absorption(2.0);
        const SDPair pair = make_pair({-13, -13}, {2, -18});
        const GateWindow gate{0.0, 140.0};
        const GrowingCuboidTarget grow{{0, 0, 10}, Polynomial{{1.0, 0.0}}, 0.5};
        const MovingCuboidTarget move{{Polynomial{{0, 0}}, Polynomial{{0, 0}}, Polynomial{{10, 0}}}, 1.0, 0.5};
        const CuboidTarget fixed{cube({0, 0, 10}, 1.0), 0.5};
        for (double t : {100.0, 128.0}) {
            const double ref = tpsf_cuboid(pair, fixed, t, p, QuadratureSpec{});
            CHECK(test::rel_diff(tpsf(pair, Target{grow}, t, p, QuadratureSpec{}, gate), ref) <= 1e-10);
            CHECK(test::rel_diff(tpsf(pair, Target{move}, t, p, QuadratureSpec{}, gate), ref) <= 1e-10);
        }
    }

    TEST_CASE("growing cube gains on the cube frozen at its initial size") {
        const auto p = OpticalParams::tissue_defaults().with_absorption(2.0);
        const SDPair pair = make_pair({-13, -13}, {2, -18});
        const GateWindow gate{0.0, 140.0};
        const GrowingCuboidTarget grow{{0, 0, 10}, Polynomial{{0.5, 1.0}}, 0.5};
        const CuboidTarget frozen{cube({0, 0, 10}, 0.5), 0.5};
        double prev = 1.0;
        for (int k = 1; k <= 10; ++k) {
            const double t = 14.0 * k;
            const double ratio = tpsf(pair, Target{grow}, t, p, QuadratureSpec{}, gate) / tpsf_cuboid(pair, frozen, t, p, QuadratureSpec{});
            CAPTURE(t);
            CHECK(ratio > prev);
            prev = ratio;
        }
    }

    TEST_CASE("moving cube gives finite positive data on its grids") {
        const auto p = OpticalParams::tissue_defaults().with_absorption(2.0);
        const MovingCuboidTarget move{{Polynomial{{-4, 6}}, Polynomial{{-5, 8}}, Polynomial{{8, 0}}}, 2.0, 0.5};
        const Acquisition acq = Acquisition::make({make_pair({-13, -13}, {2, -18}), make_pair({9, 9}, {-13, 2})},
                                                  {TimeGrid::uniform(95, 2, 20), TimeGrid::uniform(100, 2, 20)});
        for (double u : simulate(Target{move}, acq, p, QuadratureSpec{})) {
            CHECK(std::isfinite(u));
            CHECK(u > 0);
        }
    }

    TEST_CASE("time-dependent box leaving the medium is a domain error") {
        const auto p = OpticalParams::tissue_defaults();
        // depth of the lower face crosses zero at s = 0.8 t of the gate
        const MovingCuboidTarget rising{{Polynomial{{0}}, Polynomial{{0}}, Polynomial{{2, -2.5}}}, 2.0, 1.0};
        CHECK_THROWS_AS(tpsf(kPair, Target{rising}, 100.0, p, QuadratureSpec{}, GateWindow{0.0, 100.0}), DomainError);
    }

    TEST_CASE("halving the tolerance moves the value by less than the error estimate") {
        const auto p = OpticalParams::tissue_defaults();
        const PointTarget target{{0.3, 0.2, 4}, 1e6};
        for (double t : {30.0, 115.0, 600.0}) {
            QuadratureSpec q;
            q.rel_tol = 1e-7;
            const auto coarse = tpsf_point_estimate(kPair, target, t, p, q);
            q.rel_tol = 5e-8;
            const auto fine = tpsf_point_estimate(kPair, target, t, p, q);
            CAPTURE(t);
            CHECK(std::abs(fine.value - coarse.value) <= coarse.error);
        }
    }

    TEST_CASE("measure, simulate and the batched operator agree") {
        const auto p = OpticalParams::tissue_defaults().with_absorption(2.0);
        const Acquisition acq = Acquisition::make({make_pair({-13, -13}, {2, -18}), make_pair({9, 9}, {-13, 2})},
                                                  {TimeGrid::uniform(100, 5, 4), TimeGrid::uniform(120, 5, 4)});
        const ParamVector a{Layout::Cuboid7, {-1, 1, -1, 1, 9, 11, 0.5}};
        const auto m = measure(a, acq, p, QuadratureSpec{});
        CHECK(m.data == simulate(decode(a), acq, p, QuadratureSpec{}));
        ParamVector b = a;
        b.values[0] += 1e-5;
        const std::vector<ParamVector> both{a, b};
        const auto batch = measure_batch(both, acq, p, QuadratureSpec{});
        const auto mb = measure(b, acq, p, QuadratureSpec{}).data;
        REQUIRE(batch.size() == 2);
        for (std::size_t i = 0; i < m.data.size(); ++i) {
            CHECK(test::rel_diff(batch[0][i], m.data[i]) <= 1e-8);
            CHECK(test::rel_diff(batch[1][i], mb[i]) <= 1e-8);
        }
        // joint layout with the medium's own coefficients is the same measurement
        const ParamVector j{Layout::Joint9, {10, 2, -1, 1, -1, 1, 9, 11, 0.5}};
        const auto mj = measure(j, acq, p, QuadratureSpec{}).data;
        for (std::size_t i = 0; i < m.data.size(); ++i) CHECK(test::rel_diff(mj[i], m.data[i]) <= 1e-12);
        // stacking order: pair-major, time-minor
        const CuboidTarget c = std::get<CuboidTarget>(decode(a));
        CHECK(m.data[5] == tpsf_cuboid(acq.pairs[1], c, acq.grids[1].times_ps[1], p, QuadratureSpec{}));
        const Acquisition none = Acquisition::make({}, {});
        CHECK(measure(a, none, p, QuadratureSpec{}).data.empty());
    }

    TEST_CASE("domain errors") {
        const auto p = OpticalParams::tissue_defaults();
        CHECK_THROWS_AS(tpsf_point(kPair, PointTarget{{0, 0, 5}, 1}, 0.0, p, QuadratureSpec{}), DomainError);
        CHECK_THROWS_AS(tpsf_point(kPair, PointTarget{{0, 0, 5}, 1}, -1.0, p, QuadratureSpec{}), DomainError);
        QuadratureSpec bad;
        bad.rel_tol = 0;
        CHECK_THROWS_AS(validate(bad), ValidationError);
    }

    TEST_CASE("quadrature failure surfaces as a numerical error") {
        const auto p = OpticalParams::tissue_defaults();
        QuadratureSpec starved;
        starved.rel_tol = 1e-15;
        starved.max_subdivisions = 2;
        CHECK_THROWS_AS(tpsf_point(kPair, PointTarget{{0, 0, 5}, 1}, 115.0, p, starved), QuadratureError);
    }
}
