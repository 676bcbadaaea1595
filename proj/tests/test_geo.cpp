#include "doctest.h"

#include <cmath>
#include <random>

#include "lcs/error.hpp"
#include "lcs/geo.hpp"
#include "lcs/stats.hpp"

using namespace lcs;

namespace {

// Exact bootstrap SE of the median: enumerate all n^n equally likely resamples.
double exhaustive_median_se(const std::vector<double>& v)
{
    const std::size_t n = v.size();
    std::size_t total = 1;
    for (std::size_t k = 0; k < n; ++k)
        total *= n;
    std::vector<std::size_t> idx(n, 0);
    std::vector<double> sample(n);
    long double sum = 0.0L, sum_sq = 0.0L;
    for (std::size_t r = 0; r < total; ++r) {
        for (std::size_t k = 0; k < n; ++k)
            sample[k] = v[idx[k]];
        const double m = median(sample);
        sum += m;
        sum_sq += static_cast<long double>(m) * m;
        for (std::size_t k = 0; k < n && ++idx[k] == n; ++k)
            idx[k] = 0;
    }
    const long double mean = sum / static_cast<long double>(total);
    return static_cast<double>(std::sqrt(sum_sq / static_cast<long double>(total) - mean * mean));
}

} // namespace

TEST_CASE("equirectangular projection")
{
    const LatLon c{0.0, 0.0};
    CHECK(project({0.001, 0.0}, c).y == doctest::Approx(111.19).epsilon(1e-4));
    CHECK(project({0.0, 0.001}, c).x == doctest::Approx(111.19).epsilon(1e-4));
    const LatLon boston{42.36, -71.06};
    CHECK(project({42.36, -71.059}, boston).x == doctest::Approx(111.19 * std::cos(42.36 * M_PI / 180.0)).epsilon(1e-4));
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-0.05, 0.05);
    for (int k = 0; k < 1000; ++k) {
        const LatLon p{boston.lat + u(rng), boston.lon + u(rng)};
        const auto back = unproject(project(p, boston), boston);
        CHECK(std::abs(back.lat - p.lat) < 1e-9);
        CHECK(std::abs(back.lon - p.lon) < 1e-9);
    }
}

TEST_CASE("grid definition and snapping")
{
    const std::vector<LatLon> pts = {{42.0, -71.0}, {42.01, -70.99}, {42.005, -71.02}};
    const auto spec = make_grid_spec(pts, 50.0);
    CHECK(spec.origin.lat == 42.0);
    CHECK(spec.origin.lon == -71.02);
    CHECK(spec.centre.lat == doctest::Approx(42.005));
    CHECK(snap(spec.origin, spec) == CellIndex{0, 0});

    const auto o = project(spec.origin, spec);
    auto at = [&](double dx, double dy) { return snap(unproject({o.x + dx, o.y + dy}, spec), spec); };
    CHECK(at(49.0, 1.0) == CellIndex{0, 0});
    CHECK(at(51.0, 1.0) == CellIndex{1, 0});
    CHECK(at(1.0, 51.0) == CellIndex{0, 1});
    CHECK(at(50.0 + 1e-6, 100.0 + 1e-6) == CellIndex{1, 2});
    CHECK(at(50.0 - 1e-6, 100.0 - 1e-6) == CellIndex{0, 1});
    CHECK(at(-1.0, 0.5) == CellIndex{-1, 0});

    // every point lies inside the polygon of its cell
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 2000.0);
    for (int k = 0; k < 2000; ++k) {
        const XY q{o.x + u(rng), o.y + u(rng)};
        const auto cell = snap(unproject(q, spec), spec);
        const auto corners = cell_corners(cell, spec);
        const auto sw = project(corners[0], spec), ne = project(corners[2], spec);
        CHECK(q.x >= sw.x - 1e-6);
        CHECK(q.x < ne.x + 1e-6);
        CHECK(q.y >= sw.y - 1e-6);
        CHECK(q.y < ne.y + 1e-6);
        const auto centre = project(cell_centre(cell, spec), spec);
        CHECK(std::abs(centre.x - q.x) <= 25.0 + 1e-6);
        CHECK(std::abs(centre.y - q.y) <= 25.0 + 1e-6);
    }
    CHECK_THROWS_AS(make_grid_spec(std::vector<LatLon>{}), DataError);
    CHECK_THROWS_AS(make_grid_spec(pts, 0.0), UsageError);
}

TEST_CASE("bootstrap SE of the median against exhaustive enumeration")
{
    const std::vector<std::vector<double>> samples = {
        {1.0, 2.0}, {1.0, 5.0, 9.0}, {3.0, 3.0, 4.0, 10.0}, {2.0, 4.5, 5.0, 8.0, 20.0}, {1, 2, 3, 4, 5, 6, 7}};
    for (const auto& s : samples) {
        const double exact = exhaustive_median_se(s);
        const double boot = bootstrap_median_se(s, 10000, 99);
        CHECK(std::abs(boot - exact) <= 0.05 * exact);
    }
    CHECK(bootstrap_median_se(std::vector<double>{4.0, 4.0, 4.0}, 100, 1) == 0.0);
    CHECK(bootstrap_median_se(std::vector<double>{1.0, 2.0}, 50, 3) == bootstrap_median_se(std::vector<double>{1.0, 2.0}, 50, 3));
    CHECK_THROWS_AS(bootstrap_median_se(std::vector<double>{}, 10, 1), DataError);
}

TEST_CASE("cell summaries")
{
    const std::vector<CellIndex> cells = {{0, 0}, {0, 0}, {0, 0}, {1, 0}, {2, 0}, {2, 0}, {3, 0}, {3, 0}, {3, 0}};
    const std::vector<double> values = {5, 5, 5, 7, 1, 9, 0, 0, 0};
    const std::vector<std::string> runs = {"a", "b", "a", "a", "a", "a", "a", "b", "c"};
    const auto s = summarize_cells(cells, values, runs);
    REQUIRE(s.size() == 4);

    CHECK(s[0].n_measurements == 3);
    CHECK(s[0].n_runs == 2);
    CHECK(s[0].median == 5.0);
    CHECK(*s[0].bootstrap_se == 0.0);
    CHECK(*s[0].normalized_se == 0.0);
    CHECK_FALSE(s[0].unstable);

    CHECK(s[1].se_undefined);
    CHECK_FALSE(s[1].bootstrap_se);
    CHECK(s[1].single_run);
    CHECK(s[1].unstable);

    CHECK(s[2].single_run);
    CHECK(s[2].median == 5.0);
    CHECK(*s[2].bootstrap_se > 0.0);

    CHECK(s[3].median == 0.0);
    CHECK_FALSE(s[3].normalized_se);
    CHECK(s[3].unstable);

    const auto stable = filter_stable(s);
    REQUIRE(stable.size() == 1);
    CHECK(stable[0].cell == CellIndex{0, 0});

    std::size_t total = 0;
    for (const auto& g : s)
        total += g.n_measurements;
    CHECK(total == values.size());

    // order independence: shuffling rows leaves every summary unchanged
    std::vector<std::size_t> perm = {8, 3, 0, 5, 1, 7, 2, 6, 4};
    std::vector<CellIndex> c2;
    std::vector<double> v2;
    std::vector<std::string> r2;
    for (auto p : perm) {
        c2.push_back(cells[p]);
        v2.push_back(values[p]);
        r2.push_back(runs[p]);
    }
    const auto t = summarize_cells(c2, v2, r2);
    for (std::size_t k = 0; k < s.size(); ++k) {
        CHECK(t[k].median == s[k].median);
        CHECK(t[k].bootstrap_se == s[k].bootstrap_se);
    }
    CHECK_THROWS_AS(summarize_cells(cells, values, {"a"}), DataError);
}

TEST_CASE("stability filter boundaries")
{
    auto make = [](double nse, std::size_t runs) {
        GridSummary g;
        g.n_runs = runs;
        g.normalized_se = nse;
        return g;
    };
    const std::vector<GridSummary> s = {make(0.19, 2), make(0.20, 2), make(0.05, 1), make(0.199999, 5)};
    const auto out = filter_stable(s);
    REQUIRE(out.size() == 2);
    CHECK(*out[0].normalized_se == 0.19);
    CHECK(*out[1].normalized_se == 0.199999);
}
