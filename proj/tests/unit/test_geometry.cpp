#include <algorithm>
#include <numeric>

#include "atomchip/errors.hpp"
#include "atomchip/geometry.hpp"
#include "doctest.h"

using namespace atomchip;

TEST_CASE("conveyor layout crossings") {
    const double P = 402e-6;
    const ChipLayout layout = conveyor_layout(P, 6);
    CHECK_NOTHROW(layout.validate());
    const auto all = layout.modulation_crossings();
    REQUIRE(all.size() == 24);
    for (std::size_t i = 1; i < all.size(); ++i) CHECK(all[i] - all[i - 1] == doctest::Approx(P / 4).epsilon(1e-12));
    CHECK(all.front() + all.back() == doctest::Approx(0.0).scale(1e-6));

    const auto wells = layout.m1_well_crossings();
    REQUIRE(wells.size() == 6);
    for (std::size_t i = 1; i < wells.size(); ++i) CHECK(wells[i] - wells[i - 1] == doctest::Approx(P).epsilon(1e-12));
    CHECK(layout.find("H2") != nullptr);
    CHECK(layout.h2().channel == Channel::H2);
    CHECK(layout.h2().path.front().start.x() > all.back());
}

TEST_CASE("channel names round trip") {
    for (Channel c : {Channel::I0, Channel::M1, Channel::M2, Channel::H2, Channel::Constant}) {
        CHECK(channel_from_string(to_string(c)) == c);
    }
    CHECK_THROWS(channel_from_string("M3"));
}

TEST_CASE("ribbon decomposition") {
    RibbonSegment r;
    r.start = Vec3(0, 0, 0);
    r.end = Vec3(1e-3, 0, 0);
    r.width = 50e-6;
    for (int n : {1, 2, 7, 32}) {
        const auto f = decompose_ribbon(r, n);
        REQUIRE(f.size() == static_cast<std::size_t>(n));
        double total = 0.0, centroid = 0.0;
        for (const auto& fil : f) {
            total += fil.current_fraction;
            centroid += fil.current_fraction * fil.start.y();
            CHECK(std::abs(fil.start.y()) < r.width / 2);
            CHECK((fil.end - fil.start).norm() == doctest::Approx(r.length()));
        }
        CHECK(total == doctest::Approx(1.0));
        CHECK(centroid == doctest::Approx(0.0).scale(1e-9));
    }
    CHECK_THROWS_AS(decompose_ribbon(r, 0), DomainError);
}

TEST_CASE("layout invariants are enforced") {
    LayoutParams p;
    p.modulation_period = -1.0;
    CHECK_THROWS_AS(p.validate(), DomainError);
    p = LayoutParams{};
    p.n_periods = 0;
    CHECK_THROWS_AS(p.validate(), DomainError);

    ChipLayout layout = conveyor_layout(LayoutParams{});
    layout.conductors.front().path.front().width = -1e-6;
    CHECK_THROWS_AS(layout.validate(), DomainError);

    // every layout needs exactly one H2 conductor
    ChipLayout no_h2 = conveyor_layout(LayoutParams{});
    no_h2.conductors.erase(std::remove_if(no_h2.conductors.begin(), no_h2.conductors.end(),
                                          [](const Conductor& c) { return c.channel == Channel::H2; }),
                           no_h2.conductors.end());
    CHECK_THROWS_AS(no_h2.validate(), DomainError);
}

TEST_CASE("rigid transforms move every segment") {
    const ChipLayout layout = conveyor_layout(LayoutParams{});
    const Vec3 t(1e-3, -2e-3, 0.0);
    const ChipLayout moved = layout.transformed(Mat3::Identity(), t);
    REQUIRE(moved.conductors.size() == layout.conductors.size());
    for (std::size_t i = 0; i < layout.conductors.size(); ++i) {
        for (std::size_t j = 0; j < layout.conductors[i].path.size(); ++j) {
            CHECK((moved.conductors[i].path[j].start - layout.conductors[i].path[j].start - t).norm() < 1e-15);
        }
    }
}
