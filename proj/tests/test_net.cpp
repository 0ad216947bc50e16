// Multigrade net construction, readouts, parameter accounting, and weight
// export. The dyadic ramp oracles below are exact: with d=1, N=2,
// delta = 2^-7 and midpoint averaging, every cell average of f(x) = x is a
// dyadic rational, so the residual tables are exactly {-1/4, 1/4} at level 1
// and alternating -1/8, 1/8 at level 2.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include "mgnet/net.hpp"

using namespace mgnet;
using Catch::Approx;

namespace {

constexpr double kDyadicDelta = 0.0078125;  // 2^-7

MultigradeNet dyadic_ramp_net(DecoderMode mode, double eps = 1e-3) {
    const PartitionConfig cfg{1, 2, 2, kDyadicDelta};
    const TargetFunction f = make_target("ramp", 1, 1.0);
    DecoderOptions opts;
    opts.mode = mode;
    opts.eps = eps;
    return build_net(f, cfg, CellAverageEngine::for_dimension(1), opts);
}

}  // namespace

TEST_CASE("ancestor indices collapse coordinates exactly") {
    const PartitionConfig cfg{2, 2, 3, 1e-4};
    const CellLabel leaf{2, {3, 1}};
    REQUIRE(ancestor_index(cfg, leaf, 0) == 1);
    REQUIRE(ancestor_index(cfg, leaf, 1) == 2);  // coords {1, 0}
    REQUIRE(ancestor_index(cfg, leaf, 2) == 8);  // 1 + 3 + 4*1
    REQUIRE_THROWS_AS(ancestor_index(cfg, leaf, 3), std::out_of_range);
    REQUIRE_THROWS_AS(ancestor_index(cfg, leaf, -1), std::out_of_range);
}

TEST_CASE("dyadic ramp build produces the exact residual tables") {
    const MultigradeNet net = dyadic_ramp_net(DecoderMode::table);
    REQUIRE(net.grades.size() == 3);
    REQUIRE(net.target_name == "ramp");
    for (const GradeTerm& term : net.grades) REQUIRE(term.mode == DecoderMode::table);

    // Level 0: one cell [0, 1 - delta], average (1 - delta)/2 exactly.
    REQUIRE(net.grades[0].table.values == std::vector<double>{0.49609375});
    // Level 1: residuals are +-1/4 exactly.
    REQUIRE(net.grades[1].table.values == std::vector<double>{-0.25, 0.25});
    // Level 2: residuals alternate +-1/8 exactly.
    REQUIRE(net.grades[2].table.values ==
            std::vector<double>{-0.125, 0.125, -0.125, 0.125});

    REQUIRE(net.grades[0].sup_bound == 0.49609375);
    REQUIRE(net.grades[1].sup_bound == 0.25);
    REQUIRE(net.grades[2].sup_bound == 0.125);
    REQUIRE(net.grades[2].achieved_eps == 0.0);
}

TEST_CASE("cell constants reproduce cell averages of the target exactly") {
    const MultigradeNet net = dyadic_ramp_net(DecoderMode::table);
    const TargetFunction f = make_target("ramp", 1, 1.0);
    const auto engine = CellAverageEngine::for_dimension(1);
    for (std::int64_t k = 1; k <= 4; ++k) {
        const CellLabel label = index_to_label(net.config, 2, k);
        const double avg = cell_average(f.eval, cell_box(net.config, label), engine);
        REQUIRE(cell_constant(net, 2, label) == avg);
    }
    // Readout at level 1 on a level-2 cell uses the level-1 ancestor.
    const CellLabel leaf{2, {2}};
    REQUIRE(cell_constant(net, 1, leaf) == 0.74609375);
    REQUIRE_THROWS_AS(cell_constant(net, 5, leaf), std::out_of_range);
    REQUIRE_THROWS_AS(cell_constant(net, 2, CellLabel{1, {0}}), std::invalid_argument);
}

TEST_CASE("readouts are prefix sums of grade terms and constant on cells") {
    const MultigradeNet net = dyadic_ramp_net(DecoderMode::table);
    const std::vector<double> x{0.3};  // level-2 cell [1/4, 1/2 - delta]
    const auto all = readout_all(net, x);
    REQUIRE(all.size() == 3);
    REQUIRE(all[0] == 0.49609375);
    REQUIRE(all[1] == 0.24609375);
    REQUIRE(all[2] == 0.37109375);
    REQUIRE(readout(net, 1, x) == all[1]);
    REQUIRE(grade_value(net, 2, x) == 0.125);
    REQUIRE_THROWS_AS(readout(net, 3, x), std::out_of_range);

    // Same constants anywhere in the same cell.
    const std::vector<double> x2{0.31};
    REQUIRE(readout_all(net, x2) == all);
    // cell_constant agrees with the pointwise readout on the interior.
    REQUIRE(cell_constant(net, 2, CellLabel{2, {1}}) == all[2]);

    // Anchor bookkeeping: x = 0.8 sits in level-2 cell index 4.
    const auto anchors = anchor_path(net.config, std::vector<double>{0.8});
    REQUIRE(anchors[2] == std::vector<double>{0.75});
    REQUIRE(fractional_index(net.config, 2, anchors[2]) == 4.0);
}

TEST_CASE("table readouts interpolate across transition gaps") {
    const MultigradeNet net = dyadic_ramp_net(DecoderMode::table);
    // x = 0.4965 climbs the level-1 ramp: fractional index between cells 1, 2.
    const std::vector<double> x{0.4965};
    const double g1 = grade_value(net, 1, x);
    REQUIRE(std::isfinite(g1));
    REQUIRE(g1 >= -0.25);
    REQUIRE(g1 <= 0.25);
    // Strictly between the two plateau values (the climb has begun).
    REQUIRE(g1 > -0.25);
}

TEST_CASE("nestedness: deeper builds extend shallower ones bitwise") {
    // Same explicit delta for both depths; the tables of shared levels must
    // match bit for bit because earlier grades are never revised.
    const double delta = 1e-3 * 0.015625;  // 1e-3 * 2^-6, valid for L up to 6
    const TargetFunction f = make_target("mean", 2, 2.0);
    const auto engine = CellAverageEngine::for_dimension(2);
    const PartitionConfig shallow{2, 2, 3, delta};
    const PartitionConfig deep{2, 2, 6, delta};
    const MultigradeNet a = build_net(f, shallow, engine);
    const MultigradeNet b = build_net(f, deep, engine);
    REQUIRE(a.grades.size() == 4);
    REQUIRE(b.grades.size() == 7);
    for (int level = 0; level <= 3; ++level) {
        REQUIRE(b.grades[level].table.values == a.grades[level].table.values);
    }
}

TEST_CASE("parameter count matches the frozen oracle and is affine in depth") {
    // Smallest architecture: d=1, N=2, L=0 has width 7 and 78 parameters.
    REQUIRE(stack_width(PartitionConfig{1, 2, 0, 0.1}) == 7);
    REQUIRE(count_parameters(PartitionConfig{1, 2, 0, 0.1}) == 78);

    const PartitionConfig c5{2, 3, 5, 1e-6};
    const PartitionConfig c6{2, 3, 6, 1e-6};
    REQUIRE(stack_width(c5) == 16);
    REQUIRE(count_parameters(c5) == 1782);
    REQUIRE(count_parameters(c6) - count_parameters(c5) == 17 * 17);
}

TEST_CASE("depth planner inverts the accuracy guarantee") {
    REQUIRE(depth_for_accuracy(1.0, 1.0, 1, 2, 0.375) == 3);  // log2(3/0.375) = 3
    REQUIRE(depth_for_accuracy(1.0, 1.0, 1, 2, 3.0) == 1);    // already met at m=0
    REQUIRE(depth_for_accuracy(1.0, 1.0, 1, 2, 100.0) == 1);
    REQUIRE(depth_for_accuracy(0.5, 2.0, 2, 3, 1e-3) == 17);  // ceil(log3(10000)/0.5)
    REQUIRE_THROWS_AS(depth_for_accuracy(0.0, 1.0, 1, 2, 0.1), std::invalid_argument);
    REQUIRE_THROWS_AS(depth_for_accuracy(1.0, -1.0, 1, 2, 0.1), std::invalid_argument);
    REQUIRE_THROWS_AS(depth_for_accuracy(1.0, 1.0, 1, 2, 0.0), std::invalid_argument);
    REQUIRE_THROWS_AS(depth_for_accuracy(1.0, 1.0, 0, 2, 0.1), std::invalid_argument);
}

TEST_CASE("compressed build exports to a stack that matches the readouts") {
    const MultigradeNet net = dyadic_ramp_net(DecoderMode::sine, 0.05);
    for (const GradeTerm& term : net.grades) {
        REQUIRE(term.mode == DecoderMode::sine);
        REQUIRE(term.achieved_eps < 0.05);
    }

    const ReluLayerStack stack = export_weights(net);
    REQUIRE(stack.input_dim == 1);
    REQUIRE(stack.width == 7);
    REQUIRE(stack.layers.size() == 4);  // input + L+1 square layers
    REQUIRE(stack.heads.size() == 3);
    REQUIRE(count_parameters(stack) == count_parameters(net.config));
    REQUIRE(count_parameters(net.config) == 206);

    // Head l emits grade term l; readouts are the prefix sums. The stack and
    // the direct evaluation must agree everywhere, gaps included.
    std::uint64_t state = 12345;
    for (int trial = 0; trial < 120; ++trial) {
        const std::vector<double> x{detail::uniform01(state)};
        const auto heads = stack.head_values(x);
        const auto direct = readout_all(net, x);
        double prefix = 0.0;
        for (std::size_t l = 0; l < heads.size(); ++l) {
            REQUIRE(heads[l].size() == 1);
            prefix += heads[l][0];
            REQUIRE(heads[l][0] ==
                    Approx(grade_value(net, static_cast<int>(l), x)).margin(1e-9));
            REQUIRE(prefix == Approx(direct[l]).margin(1e-9));
        }
    }

    // The readout approximates the target to the guaranteed scale away from
    // the gaps: |x - phi_2(x)| <= omega(1/4) + fit slack on cell interiors.
    const std::vector<double> probe{0.3};
    REQUIRE(std::fabs(readout(net, 2, probe) - 0.3) < 0.25 + 3 * 0.05);
}

TEST_CASE("export requires every grade in compressed form") {
    const MultigradeNet net = dyadic_ramp_net(DecoderMode::table);
    REQUIRE_THROWS_AS(export_weights(net), UnsupportedModeError);
}

TEST_CASE("strict builds surface fit failures with the partial net attached") {
    const PartitionConfig cfg{1, 3, 2, 1e-5};
    const TargetFunction f = make_target("oscillatory", 1, 2.0);
    DecoderOptions opts;
    opts.mode = DecoderMode::sine;
    opts.eps = 1e-12;  // unattainable at K = 3 with a tiny search budget
    opts.budget = FitBudget{4, 50, 0x6d676e6574ull};
    opts.fall_back_to_table = false;
    bool threw = false;
    try {
        build_net(f, cfg, CellAverageEngine::for_dimension(1), opts);
    } catch (const BuildFailure& failure) {
        threw = true;
        REQUIRE(failure.failed_level >= 1);
        REQUIRE(static_cast<int>(failure.partial.grades.size()) == failure.failed_level);
        REQUIRE_FALSE(failure.outcome.ok);
        REQUIRE(failure.outcome.best_eps >= 1e-12);
        REQUIRE(std::string(failure.what()).find("level") != std::string::npos);
    }
    REQUIRE(threw);

    // Same configuration with fallback enabled degrades to tables instead.
    opts.fall_back_to_table = true;
    const MultigradeNet net = build_net(f, cfg, CellAverageEngine::for_dimension(1), opts);
    REQUIRE(net.grades.size() == 3);
    bool any_table = false;
    for (const GradeTerm& term : net.grades) any_table |= term.mode == DecoderMode::table;
    REQUIRE(any_table);
}

TEST_CASE("net JSON round trip preserves every field") {
    for (const DecoderMode mode : {DecoderMode::table, DecoderMode::sine}) {
        const MultigradeNet net = dyadic_ramp_net(mode, 0.05);
        nlohmann::ordered_json j;
        to_json(j, net);
        REQUIRE(j.at("schema") == "multigrade-net/1");
        MultigradeNet back;
        from_json(j, back);
        REQUIRE(back.config.d == net.config.d);
        REQUIRE(back.config.N == net.config.N);
        REQUIRE(back.config.L == net.config.L);
        REQUIRE(back.config.delta == net.config.delta);
        REQUIRE(back.p == net.p);
        REQUIRE(back.target_name == net.target_name);
        REQUIRE(back.engine.seed == net.engine.seed);
        REQUIRE(back.grades.size() == net.grades.size());
        for (std::size_t i = 0; i < net.grades.size(); ++i) {
            REQUIRE(back.grades[i].mode == net.grades[i].mode);
            REQUIRE(back.grades[i].sup_bound == net.grades[i].sup_bound);
            if (mode == DecoderMode::sine) {
                REQUIRE(back.grades[i].sine.u == net.grades[i].sine.u);
                REQUIRE(back.grades[i].sine.v == net.grades[i].sine.v);
                REQUIRE(back.grades[i].sine.w == net.grades[i].sine.w);
            } else {
                REQUIRE(back.grades[i].table.values == net.grades[i].table.values);
            }
        }
        const std::vector<double> x{0.62};
        REQUIRE(readout_all(back, x) == readout_all(net, x));
    }
    nlohmann::ordered_json bad{{"schema", "something-else/9"}};
    MultigradeNet sink;
    REQUIRE_THROWS_AS(from_json(bad, sink), std::runtime_error);
}

TEST_CASE("build rejects mismatched inputs") {
    const PartitionConfig cfg{2, 2, 1, 1e-4};
    const TargetFunction wrong_d = make_target("ramp", 3, 2.0);
    REQUIRE_THROWS_AS(build_net(wrong_d, cfg, CellAverageEngine::for_dimension(2)),
                      std::invalid_argument);
    TargetFunction empty;
    empty.dimension = 2;
    REQUIRE_THROWS_AS(build_net(empty, cfg, CellAverageEngine::for_dimension(2)),
                      std::invalid_argument);
}
