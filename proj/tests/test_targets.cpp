// Target catalog: closed-form functions with known smoothness data, plus the
// grid-file loader. Numeric oracles below were computed by hand from the
// closed forms and frozen.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "mgnet/targets.hpp"

using namespace mgnet;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

namespace {

std::string write_temp(const std::string& name, const std::string& body) {
    const std::string path = "/tmp/" + name;
    std::ofstream out(path);
    out << body;
    out.close();
    return path;
}

}  // namespace

TEST_CASE("catalog lists six uniquely named targets") {
    const auto entries = target_catalog(2);
    REQUIRE(entries.size() == 6);
    std::set<std::string> names;
    for (const auto& entry : entries) {
        REQUIRE(entry.dimension == 2);
        REQUIRE_FALSE(entry.summary.empty());
        names.insert(entry.name);
    }
    REQUIRE(names.size() == 6);
    REQUIRE(names.count("ramp") == 1);
    REQUIRE(names.count("indicator") == 1);
}

TEST_CASE("ramp target evaluates first coordinate and knows its modulus") {
    // For f(x) = x_1 in L^p, the shift-s difference has |f(x+s e_1) - f(x)| = s
    // on an overlap of measure (1 - s), so omega(t)^p = max_s s^p (1 - s) with
    // the maximizer s* = min(t, p/(p+1)).
    const TargetFunction f = make_target("ramp", 3, 1.0);
    REQUIRE(f.dimension == 3);
    const std::vector<double> x{0.3, 0.9, 0.1};
    REQUIRE(f.eval(x) == 0.3);
    REQUIRE(f.regularity.known());
    REQUIRE(f.regularity.alpha == 1.0);
    REQUIRE(f.regularity.lambda == 1.0);
    REQUIRE(f.exact_modulus);
    // p = 1, t = 0.25 below the cap: omega = 0.25 * 0.75 = 0.1875.
    REQUIRE(f.exact_modulus(0.25) == Approx(0.1875).epsilon(1e-12));
    // p = 1, t = 0.8 above the cap s* = 1/2: omega = 0.5 * 0.5 = 0.25.
    REQUIRE(f.exact_modulus(0.8) == Approx(0.25).epsilon(1e-12));

    const TargetFunction g = make_target("ramp", 1, INFINITY);
    REQUIRE(g.exact_modulus(0.37) == Approx(0.37));
    REQUIRE(g.exact_modulus(2.5) == Approx(1.0));
}

TEST_CASE("mean target scales its Lipschitz constant with dimension") {
    const TargetFunction f = make_target("mean", 4, INFINITY);
    const std::vector<double> x{0.2, 0.4, 0.6, 0.8};
    REQUIRE(f.eval(x) == Approx(0.5));
    REQUIRE(f.regularity.alpha == 1.0);
    REQUIRE(f.regularity.lambda == Approx(0.5));  // 1/sqrt(4)
    REQUIRE(f.exact_modulus);
    REQUIRE(f.exact_modulus(0.1) == Approx(0.05));
}

TEST_CASE("indicator target has p-dependent smoothness data") {
    const TargetFunction f = make_target("indicator", 2, 2.0);
    REQUIRE(f.eval(std::vector<double>{0.6, 0.1}) == 1.0);
    REQUIRE(f.eval(std::vector<double>{0.5, 0.9}) == 0.0);
    REQUIRE(f.regularity.known());
    REQUIRE(f.regularity.alpha == Approx(0.5));  // 1/p
    REQUIRE(f.regularity.lambda == 1.0);
    // omega_p(t) = min(t, 1/2)^{1/p}: moved mass t over a unit jump.
    REQUIRE(f.exact_modulus(0.09) == Approx(0.3));

    const TargetFunction g = make_target("indicator", 2, INFINITY);
    REQUIRE_FALSE(g.regularity.known());
    REQUIRE(g.exact_modulus(0.01) == 1.0);
    REQUIRE(g.exact_modulus(0.0) == 0.0);
}

TEST_CASE("tent target peaks at the cube center") {
    const TargetFunction f = make_target("tent", 2, INFINITY);
    REQUIRE(f.eval(std::vector<double>{0.5, 0.5}) == 1.0);
    REQUIRE(f.eval(std::vector<double>{0.9, 0.5}) == Approx(0.0).margin(1e-12));
    REQUIRE(f.regularity.lambda == 10.0);
    REQUIRE(f.exact_modulus(0.02) == Approx(0.2));
}

TEST_CASE("oscillatory target has the sup-norm modulus of sin(4 pi x)") {
    const TargetFunction f = make_target("oscillatory", 1, INFINITY);
    REQUIRE(f.eval(std::vector<double>{0.125}) == Approx(1.0));
    REQUIRE(f.regularity.lambda == Approx(4.0 * std::acos(-1.0)));
    // At t = 1/8 the worst pair straddles a peak: 2 sin(2 pi / 8) = sqrt(2).
    REQUIRE(f.exact_modulus(0.125) == Approx(std::sqrt(2.0)).epsilon(1e-12));
    REQUIRE(f.exact_modulus(0.25) == Approx(2.0));
    REQUIRE(f.exact_modulus(0.9) == Approx(2.0));
}

TEST_CASE("holder target is a square-root cusp") {
    const TargetFunction f = make_target("holder", 1, INFINITY);
    REQUIRE(f.eval(std::vector<double>{0.75}) == Approx(0.5));
    REQUIRE(f.eval(std::vector<double>{0.5}) == 0.0);
    REQUIRE(f.regularity.alpha == Approx(0.5));
    REQUIRE(f.regularity.lambda == 1.0);
    REQUIRE(f.exact_modulus(0.04) == Approx(0.2));
    REQUIRE(f.exact_modulus(0.81) == Approx(std::sqrt(0.5)));
}

TEST_CASE("make_target rejects unknown names and bad exponents") {
    REQUIRE_THROWS_AS(make_target("nope", 2, 2.0), std::invalid_argument);
    REQUIRE_THROWS_WITH(make_target("nope", 2, 2.0), ContainsSubstring("ramp"));
    REQUIRE_THROWS_AS(make_target("ramp", 2, 0.5), std::invalid_argument);
    REQUIRE_THROWS_AS(make_target("ramp", 0, 2.0), std::invalid_argument);
}

TEST_CASE("grid loader round-trips a bilinear sample") {
    // f(x, y) = x + 2y sampled on the 2x2 corner grid; multilinear
    // interpolation reproduces it exactly everywhere.
    const std::string path = write_temp("mgnet_grid_ok.txt",
                                        "# toy corner grid\n"
                                        "2\n"
                                        "2 2\n"
                                        "0 2\n"
                                        "1 3\n");
    const TargetFunction f = load_target_grid(path, 2.0);
    REQUIRE(f.dimension == 2);
    REQUIRE(f.p == 2.0);
    REQUIRE(f.name == "grid:" + path);
    REQUIRE(f.eval(std::vector<double>{0.0, 0.0}) == Approx(0.0));
    REQUIRE(f.eval(std::vector<double>{1.0, 1.0}) == Approx(3.0));
    REQUIRE(f.eval(std::vector<double>{0.5, 0.5}) == Approx(1.5));
    REQUIRE(f.eval(std::vector<double>{0.25, 0.75}) == Approx(1.75));
    // Out-of-cube queries clamp to the boundary value.
    REQUIRE(f.eval(std::vector<double>{-0.5, 2.0}) == Approx(2.0));
    REQUIRE_FALSE(f.regularity.known());
}

TEST_CASE("grid loader reports malformed files with line numbers") {
    const std::string missing = write_temp("mgnet_grid_short.txt", "2\n2 2\n0 2\n1\n");
    REQUIRE_THROWS_WITH(load_target_grid(missing, 2.0), ContainsSubstring("line"));

    const std::string extra = write_temp("mgnet_grid_extra.txt", "1\n2\n0 1 7\n");
    REQUIRE_THROWS_WITH(load_target_grid(extra, 2.0), ContainsSubstring("extra"));

    const std::string bad_dim = write_temp("mgnet_grid_dim.txt", "0\n");
    REQUIRE_THROWS_AS(load_target_grid(bad_dim, 2.0), std::runtime_error);

    const std::string junk = write_temp("mgnet_grid_junk.txt", "2\n2 two\n0 2\n1 3\n");
    REQUIRE_THROWS_WITH(load_target_grid(junk, 2.0), ContainsSubstring("line 2"));

    REQUIRE_THROWS_WITH(load_target_grid("/tmp/definitely_missing_grid.txt", 2.0),
                        ContainsSubstring("cannot open"));

    const std::string empty = write_temp("mgnet_grid_empty.txt", "# nothing here\n");
    REQUIRE_THROWS_AS(load_target_grid(empty, 2.0), std::runtime_error);
}
