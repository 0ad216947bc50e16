#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>

#include "mgnet/partition.hpp"

using namespace mgnet;
using Catch::Approx;

TEST_CASE("integer powers guard against overflow") {
    REQUIRE(ipow64(2, 10) == 1024);
    REQUIRE(ipow64(3, 0) == 1);
    REQUIRE(ipow64(2, 62) == (std::int64_t{1} << 62));
    REQUIRE_THROWS_AS(ipow64(2, 63), std::overflow_error);
    REQUIRE_THROWS_AS(ipow64(-2, 3), std::invalid_argument);
}

TEST_CASE("configuration validation") {
    REQUIRE(PartitionConfig::default_delta(2, 6) == 1e-3 / 64.0);

    PartitionConfig good = PartitionConfig::make(2, 2, 3);
    REQUIRE(good.delta == 1e-3 / 8.0);
    REQUIRE(good.cells_per_axis(2) == 4);
    REQUIRE(good.cube_count(2) == 16);
    REQUIRE(good.side(3) == Approx(0.125 - 1e-3 / 8.0));

    REQUIRE_THROWS_AS((PartitionConfig{0, 2, 1, 0.1}.validate()), std::invalid_argument);
    REQUIRE_THROWS_AS((PartitionConfig{1, 1, 1, 0.1}.validate()), std::invalid_argument);
    REQUIRE_THROWS_AS((PartitionConfig{1, 2, -1, 0.1}.validate()), std::invalid_argument);
    // Gap width must sit strictly inside (0, 1/(2 N^L)).
    REQUIRE_THROWS_AS((PartitionConfig{1, 2, 1, 0.0}.validate()), std::invalid_argument);
    REQUIRE_THROWS_AS((PartitionConfig{1, 2, 1, 0.25}.validate()), std::invalid_argument);
    REQUIRE_NOTHROW((PartitionConfig{1, 2, 1, 0.2}.validate()));
    // Label space must fit in 62 bits.
    REQUIRE_THROWS_AS((PartitionConfig{1, 2, 63, 1e-20}.validate()), std::overflow_error);
    REQUIRE_THROWS_AS((PartitionConfig{2, 10, 11, 1e-12}.validate()), std::overflow_error);
}

TEST_CASE("labels and flat indices round-trip") {
    PartitionConfig cfg{2, 2, 3, 1e-3};

    CellLabel corner{1, {1, 1}};
    REQUIRE(label_to_index(cfg, corner) == 4);
    REQUIRE(index_to_label(cfg, 1, 4) == corner);

    PartitionConfig cfg3{3, 2, 2, 1e-3};
    CellLabel corner3{1, {1, 1, 1}};
    REQUIRE(label_to_index(cfg3, corner3) == 8);

    for (std::int64_t k = 1; k <= cfg.cube_count(2); ++k) {
        const CellLabel label = index_to_label(cfg, 2, k);
        REQUIRE(label_to_index(cfg, label) == k);
    }

    REQUIRE_THROWS_AS(index_to_label(cfg, 1, 0), std::out_of_range);
    REQUIRE_THROWS_AS(index_to_label(cfg, 1, 5), std::out_of_range);
    REQUIRE_THROWS_AS(label_to_index(cfg, CellLabel{1, {2, 0}}), std::out_of_range);
    REQUIRE_THROWS_AS(label_to_index(cfg, CellLabel{4, {0, 0}}), std::out_of_range);
    REQUIRE_THROWS_AS(label_to_index(cfg, CellLabel{1, {0}}), std::invalid_argument);
}

TEST_CASE("cell boxes shrink each interval by the gap width") {
    PartitionConfig cfg{1, 2, 1, 0.01};
    const Box top = cell_box(cfg, CellLabel{1, {1}});
    REQUIRE(top.lo[0] == 0.5);
    REQUIRE(top.hi[0] == Approx(0.99));
    const Box root = cell_box(cfg, CellLabel{0, {0}});
    REQUIRE(root.lo[0] == 0.0);
    REQUIRE(root.hi[0] == Approx(0.99));
}

TEST_CASE("point location respects closed cells and open gaps") {
    PartitionConfig cfg{1, 2, 1, 0.01};
    auto at = [&cfg](double x) {
        const double pt[] = {x};
        return locate_cell(cfg, 1, pt);
    };
    REQUIRE(at(0.25).value().coords[0] == 0);
    REQUIRE(at(0.49).value().coords[0] == 0);  // right endpoint is included
    REQUIRE_FALSE(at(0.495).has_value());      // gap between cells
    REQUIRE(at(0.5).value().coords[0] == 1);
    REQUIRE_FALSE(at(0.995).has_value());      // trailing gap
    REQUIRE_FALSE(at(1.0).has_value());
    REQUIRE_FALSE(at(-0.1).has_value());
    REQUIRE_FALSE(at(1.1).has_value());
    REQUIRE(at(0.0).value().coords[0] == 0);

    PartitionConfig plane{2, 2, 2, 1e-3};
    const double pt[] = {0.30, 0.80};
    const auto label = locate_cell(plane, 2, pt);
    REQUIRE(label.has_value());
    REQUIRE(label->coords == std::vector<std::int64_t>{1, 3});
    REQUIRE(cell_box(plane, *label).contains(pt));

    REQUIRE_THROWS_AS(locate_cell(plane, 3, pt), std::out_of_range);
    const double short_pt[] = {0.5};
    REQUIRE_THROWS_AS(locate_cell(plane, 1, short_pt), std::invalid_argument);
}

TEST_CASE("transition mass follows the inclusion-exclusion formula") {
    PartitionConfig line{1, 2, 3, 0.01};
    REQUIRE(transition_mass(line, 1) == Approx(0.02).margin(1e-15));
    PartitionConfig plane{2, 2, 3, 0.01};
    REQUIRE(transition_mass(plane, 1) == Approx(0.0396).margin(1e-12));
    // Level zero still loses one gap slab per axis.
    REQUIRE(transition_mass(line, 0) == Approx(0.01).margin(1e-15));
}

TEST_CASE("gap-width search accepts the documented candidate for a ramp") {
    const RealFn ramp = [](std::span<const double> x) { return x[0]; };
    const CellAverageEngine engine;
    const DeltaSearchResult r = choose_delta(ramp, 1, 2, 3, 1.0, 0.01, engine);
    REQUIRE(r.ok);
    REQUIRE(r.trials == 5);  // 1/32 shrinks by 10 four times
    REQUIRE(r.delta == Approx(3.125e-6).epsilon(1e-12));
    // Worst level is the deepest: mass term delta*(4.5 - 4*delta) plus
    // 4 * 64 * 8 * delta for the correction, giving margin 0.01 - 2052.5*delta.
    REQUIRE(r.margin == Approx(0.0035859375390625).margin(1e-9));
}

TEST_CASE("gap-width search reports failure for an impossible budget") {
    const RealFn ramp = [](std::span<const double> x) { return x[0]; };
    const CellAverageEngine engine;
    const DeltaSearchResult r = choose_delta(ramp, 1, 2, 3, 1.0, 1e-30, engine);
    REQUIRE_FALSE(r.ok);
    REQUIRE(r.trials == 13);  // candidates run from 1/32 down to the 1e-14 floor
    REQUIRE(r.worst_excess > 0.0);
}

TEST_CASE("gap-width search validates its inputs") {
    const RealFn ramp = [](std::span<const double> x) { return x[0]; };
    const CellAverageEngine engine;
    REQUIRE_THROWS_AS(choose_delta(ramp, 1, 2, 1, 1.0, 0.0, engine), std::invalid_argument);
    REQUIRE_THROWS_AS(choose_delta(ramp, 1, 2, 1, 1.0, -1.0, engine), std::invalid_argument);
    REQUIRE_THROWS_AS(choose_delta(ramp, 1, 2, 1, 0.5, 0.1, engine), std::invalid_argument);
    REQUIRE_THROWS_AS(choose_delta(ramp, 1, 2, 1, INFINITY, 0.1, engine), std::invalid_argument);

    // Depth zero has no transition levels to control.
    const DeltaSearchResult r = choose_delta(ramp, 1, 2, 0, 1.0, 0.5, engine);
    REQUIRE(r.ok);
    REQUIRE(r.trials == 1);
    REQUIRE(r.delta == 0.25);
    REQUIRE(r.margin == 0.5);
}

TEST_CASE("exact decimal rendering of binary64 values") {
    REQUIRE(exact_decimal(0.0) == "0");
    REQUIRE(exact_decimal(3.0) == "3");
    REQUIRE(exact_decimal(-0.5) == "-0.5");
    REQUIRE(exact_decimal(0.25) == "0.25");
    REQUIRE(exact_decimal(0.015625) == "0.015625");
    REQUIRE(exact_decimal(1024.0) == "1024");
    REQUIRE(exact_decimal(std::ldexp(1.0, 60)) == "1152921504606846976");
    // The double nearest 0.1 in full.
    REQUIRE(exact_decimal(0.1) ==
            "0.1000000000000000055511151231257827021181583404541015625");
    REQUIRE_THROWS_AS(exact_decimal(INFINITY), std::invalid_argument);
    REQUIRE_THROWS_AS(exact_decimal(NAN), std::invalid_argument);
}
