#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "support.hpp"

#include "fdot/error.hpp"
#include "fdot/peaks.hpp"
#include "fdot/scenarios.hpp"

using namespace fdot;

TEST_SUITE("scenarios") {
    TEST_CASE("builtin registry") {
        const auto& ids = builtin_ids();
        CHECK(ids == std::vector<std::string>{"ex1", "ex2", "ex3a", "ex3b", "ex4a", "ex4b"});
        for (const auto& id : ids) {
            const Scenario s = builtin(id);
            CHECK(s.id == id);
            CHECK_NOTHROW(validate(s));
        }
        try {
            (void)builtin("ex9");
            FAIL("expected ValidationError");
        } catch (const ValidationError& e) {
            CHECK(std::string(e.what()).find("ex3a") != std::string::npos);
        }
    }

    TEST_CASE("builtin geometry") {
        const Scenario a = builtin("ex3a");
        CHECK(std::get<CuboidTarget>(a.target) == CuboidTarget{Box{{-1, -1, 9}, {1, 1, 11}}, 0.5});
        CHECK(a.pairs.size() == 32);
        CHECK(a.optical.mu_a() == 2.0);
        CHECK(a.optical.mu_s() == 10.0);
        CHECK(a.pairs.front() == make_pair({-13, -13}, {-13, -6}));
        CHECK(a.pairs.back() == make_pair({-13, 9}, {-13, 2}));
        CHECK(a.exact().values == std::vector<double>{-1, 1, -1, 1, 9, 11, 0.5});
        const Scenario b = builtin("ex3b");
        CHECK(b.exact().values == std::vector<double>{10, 2, -1, 1, -1, 1, 9, 11, 0.5});
        const Scenario one = builtin("ex1");
        CHECK(std::get<PointTarget>(one.target) == PointTarget{{0, 0, 5}, 1e6});
        CHECK(one.sweep->values.front() == 0.05);
        CHECK(one.sweep->values.back() == doctest::Approx(6.0));
        const Scenario two = builtin("ex2");
        CHECK(two.sweep->values.front() == 0.01);
        CHECK(two.sweep->values.back() == doctest::Approx(1.0));
        CHECK(builtin("ex4a").initial_guess->values == std::vector<double>{-2, -2, 5, 0.2, 0.1, 0.2});
        CHECK(builtin("ex4b").initial_guess->values == std::vector<double>{-1, 2, -2, 3, 4, 0, 0.2, 0.1});
    }

    TEST_CASE("JSON round-trip is exact") {
        for (const auto& id : builtin_ids()) {
            const Scenario s = builtin(id);
            const auto j = to_json(s);
            const Scenario back = scenario_from_json(nlohmann::json::parse(j.dump()));
            CHECK(to_json(back) == j);
            CHECK(back.exact() == s.exact());
            CHECK(back.pairs == s.pairs);
            CHECK(back.optical == s.optical);
        }
    }

    TEST_CASE("malformed scenario JSON names the field") {
        auto j = to_json(builtin("ex3a"));
        j["optical_params"]["mu_s"] = -1.0;
        CHECK_THROWS_AS(scenario_from_json(j), ValidationError);
        auto k = to_json(builtin("ex3a"));
        k.erase("target");
        try {
            (void)scenario_from_json(k);
            FAIL("expected ValidationError");
        } catch (const ValidationError& e) {
            CHECK(e.field().find("target") != std::string::npos);
        }
        CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json"), ValidationError);
    }

    TEST_CASE("peak-centred grids") {
        Scenario s = builtin("ex3a");
        const auto grids = acquisition_grids(s, QuadratureSpec{});
        REQUIRE(grids.size() == 32);
        std::size_t total = 0;
        for (const auto& g : grids) {
            CHECK(g.size() == 20);
            CHECK(g.times_ps.front() > 0);
            CHECK(g.times_ps[1] - g.times_ps[0] == doctest::Approx(2.0));
            total += g.size();
        }
        CHECK(total == 640);
        // centre sample t_peak sits 10 steps in; compare with a 0.1 ps dense argmax
        for (std::size_t k : {0u, 13u, 27u}) {
            const auto f = [&](double t) { return tpsf(s.pairs[k], s.target, t, s.optical, QuadratureSpec{}); };
            const double centre = grids[k].times_ps[10];
            double best_t = 0, best_u = -1;
            for (double t = centre - 10; t <= centre + 10; t += 0.1) {
                const double u = f(t);
                if (u > best_u) best_u = u, best_t = t;
            }
            CAPTURE(k);
            CHECK(std::abs(best_t - centre) <= 1.0);
        }
    }

    TEST_CASE("mirror-image pairs get the same grid") {
        Scenario s = builtin("ex3a");
        s.pairs = {make_pair({-13, -13}, {2, -18}), make_pair({13, -13}, {-2, -18})};
        const auto grids = acquisition_grids(s, QuadratureSpec{});
        for (std::size_t i = 0; i < 20; ++i) CHECK(grids[0].times_ps[i] == doctest::Approx(grids[1].times_ps[i]).epsilon(1e-9));
    }

    TEST_CASE("Hausdorff distance between boxes") {
        const Box a = cube({0, 0, 5}, 2);
        CHECK(hausdorff(a, a) == 0.0);
        CHECK(hausdorff(a, cube({0.5, 0, 5}, 2)) == doctest::Approx(0.5));
        CHECK(hausdorff(a, cube({0, 0, 5}, 1)) == doctest::Approx(std::sqrt(3.0) * 0.5));
        const ParamVector m{Layout::MovingCuboid, {-4, 6, -5, 8, 8, 0, 2, 0.5}};
        CHECK(box_of(m, 0.5) == cube({-1, -1, 8}, 2));
    }

    TEST_CASE("depth sweep rows") {
        Scenario s = builtin("ex1");
        s.sweep->values = {1.0, 5.0};
        const Table t = depth_sweep_table(s, QuadratureSpec{});
        REQUIRE(t.rows.size() == 2);
        CHECK(t.columns.front() == "depth_mm");
        CHECK(t.rows[1][1] == doctest::Approx(115.1599).epsilon(1e-6));
        CHECK(t.rows[1][3] <= 0.05);
        CHECK(t.rows[0][3] > t.rows[1][3]);
        const Table again = depth_sweep_table(s, QuadratureSpec{});
        CHECK(again.rows == t.rows);
    }

    TEST_CASE("side sweep rows") {
        Scenario s = builtin("ex2");
        s.sweep->values = {0.01, 1.0};
        const Table t = side_sweep_table(s, QuadratureSpec{});
        REQUIRE(t.rows.size() == 2);
        CHECK(t.rows[0][3] < 1e-4);
        CHECK(t.rows[0][6] < 1e-4);
        CHECK(t.rows[1][1] == doctest::Approx(113.364).epsilon(1e-4));
        CHECK(t.rows[1][3] == doctest::Approx(1.584e-2).epsilon(5e-3));
    }

    TEST_CASE("wrong tables are refused") {
        CHECK_THROWS_AS(depth_sweep_table(builtin("ex2"), QuadratureSpec{}), ValidationError);
        CHECK_THROWS_AS(side_sweep_table(builtin("ex1"), QuadratureSpec{}), ValidationError);
        const Table t = tpsf_table(builtin("ex1"), QuadratureSpec{});
        CHECK(t.rows.size() == 600);
        CHECK(t.columns == std::vector<std::string>{"pair", "t_ps", "u"});
    }
}
