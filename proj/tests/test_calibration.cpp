#include "doctest.h"

#include <cmath>
#include <random>

#include "lcs/calibration.hpp"
#include "lcs/error.hpp"
#include "lcs/ingest.hpp"
#include "lcs/metrics.hpp"
#include "lcs/ols.hpp"
#include "lcs/serialization.hpp"

using namespace lcs;

namespace {

Covariates random_rows(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> pm(1.0, 50.0), rh(20.0, 90.0), t(0.0, 30.0);
    Covariates c;
    const auto k = static_cast<Eigen::Index>(n);
    c.pm25.resize(k);
    c.rh.resize(k);
    c.temp.resize(k);
    c.dewpoint.resize(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        c.pm25(i) = pm(rng);
        c.rh(i) = rh(rng);
        c.temp(i) = t(rng);
        c.dewpoint(i) = derive_dewpoint(c.temp(i), c.rh(i));
    }
    return c;
}

// Long-double reference for Pearson r and RMSE.
std::pair<long double, long double> direct_metrics(const Eigen::VectorXd& a, const Eigen::VectorXd& b)
{
    const auto n = static_cast<long double>(a.size());
    long double ma = 0, mb = 0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        ma += a(i);
        mb += b(i);
    }
    ma /= n;
    mb /= n;
    long double sab = 0, saa = 0, sbb = 0, se = 0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const long double da = a(i) - ma, db = b(i) - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
        se += (static_cast<long double>(a(i)) - b(i)) * (static_cast<long double>(a(i)) - b(i));
    }
    return {sab / std::sqrt(saa * sbb), std::sqrt(se / n)};
}

} // namespace

TEST_CASE("model ids")
{
    CHECK(ModelId::parse("0") == ModelId::table(0));
    CHECK(ModelId::parse("17") == ModelId::table(17));
    CHECK(ModelId::parse("dt2") == ModelId::dusttrak(DustTrakMethod::dt2));
    CHECK_FALSE(ModelId::parse("18"));
    CHECK_FALSE(ModelId::parse("DT4"));
    CHECK_FALSE(ModelId::parse("-1"));
    CHECK(ModelId::dusttrak(DustTrakMethod::dt3).name() == "DT3");
    CHECK(ModelId::table(3) < ModelId::table(12));
    CHECK_THROWS(ModelId::table(18));
}

TEST_CASE("design matrix terms")
{
    const std::vector<std::size_t> counts = {0, 1, 2, 2, 2, 4, 4, 4, 8, 3, 3, 3, 3, 7, 7, 7, 15};
    for (int id = 0; id <= 16; ++id)
        CHECK(model_terms(id).size() == counts[static_cast<std::size_t>(id)]);
    const auto rows = random_rows(20, 1);
    const auto d6 = build_design_matrix(6, rows);
    CHECK(d6.terms == std::vector<std::string>{"pm25", "rh", "dewpoint", "rh*dewpoint"});
    CHECK((d6.X.col(3).array() - rows.rh.array() * rows.dewpoint.array()).abs().maxCoeff() == 0.0);
    CHECK(build_design_matrix(1, rows).terms == std::vector<std::string>{"pm25"});
    const auto d16 = build_design_matrix(16, rows);
    CHECK(d16.X.cols() == 15);
    CHECK(d16.terms.back() == "pm25*rh*temp*dewpoint");
    const auto d12 = build_design_matrix(12, rows);
    CHECK(d12.X(0, 1) == doctest::Approx(nonlinear_rh(rows.rh(0))));
    CHECK_THROWS_AS(build_design_matrix(0, rows), UsageError);
    CHECK_THROWS_AS(build_design_matrix(17, rows), UsageError);

    auto saturated = rows;
    saturated.rh(3) = 100.0;
    CHECK_THROWS_AS(build_design_matrix(12, saturated), NumericalError);
    auto no_dew = rows;
    no_dew.dewpoint.resize(0);
    CHECK_THROWS_AS(build_design_matrix(4, no_dew), DataError);
    CHECK_NOTHROW(build_design_matrix(5, no_dew));
}

TEST_CASE("nonlinear humidity term")
{
    CHECK(nonlinear_rh(50.0) == doctest::Approx(0.5));
    CHECK(nonlinear_rh(0.0) == 0.0);
    CHECK(nonlinear_rh(90.0) == doctest::Approx(0.81 / 0.1));
    CHECK_THROWS_AS(nonlinear_rh(100.0), NumericalError);
}

TEST_CASE("ols noiseless recovery and orthogonality")
{
    const auto rows = random_rows(400, 2);
    const Eigen::VectorXd y1 = 2.0 * rows.pm25.array() + 0.5;
    const auto m1 = fit_linear_model(1, rows, y1);
    CHECK(m1.slopes(0) == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(m1.intercept == doctest::Approx(0.5).epsilon(1e-10));

    // residuals orthogonal to every column
    std::mt19937_64 rng(9);
    std::normal_distribution<double> noise(0.0, 0.5);
    const auto d = build_design_matrix(13, rows);
    Eigen::VectorXd y = d.X * Eigen::VectorXd::LinSpaced(d.X.cols(), 0.1, 0.7);
    for (Eigen::Index i = 0; i < y.size(); ++i)
        y(i) += noise(rng);
    const auto fit = fit_ols(d.X, y);
    const Eigen::VectorXd resid = (y - d.X * fit.slopes).array() - fit.intercept;
    CHECK(std::abs(resid.sum()) <= 1e-8 * y.norm() * std::sqrt(static_cast<double>(y.size())));
    for (Eigen::Index j = 0; j < d.X.cols(); ++j)
        CHECK(std::abs(resid.dot(d.X.col(j))) <= 1e-8 * resid.norm() * d.X.col(j).norm());
    CHECK(fit.residual_df() == 400u - 8u);
}

TEST_CASE("ols errors")
{
    auto rows = random_rows(50, 3);
    rows.rh.setConstant(40.0);
    const Eigen::VectorXd y = rows.pm25;
    try {
        (void)fit_linear_model(2, rows, y);
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("rh") != std::string::npos);
    }
    // exactly collinear columns are named
    Eigen::MatrixXd X(30, 3);
    X.col(0) = Eigen::VectorXd::LinSpaced(30, 0, 1);
    X.col(1) = Eigen::VectorXd::LinSpaced(30, 5, -2).array().square();
    X.col(2) = 3.0 * X.col(0) - X.col(1);
    try {
        (void)fit_ols(X, Eigen::VectorXd::Ones(30), {"a", "b", "c"});
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        const std::string msg = e.what();
        CHECK(msg.find('c') != std::string::npos);
    }
    CHECK_THROWS_AS(fit_ols(Eigen::MatrixXd::Random(3, 2), Eigen::VectorXd::Ones(3)), DataError);
}

TEST_CASE("nested designs never increase in-sample RSS and beat raw")
{
    const auto rows = random_rows(600, 4);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> noise(0.0, 1.0);
    Eigen::VectorXd y(rows.size());
    for (Eigen::Index i = 0; i < y.size(); ++i)
        y(i) = 0.7 * rows.pm25(i) - 0.05 * rows.rh(i) + 0.002 * rows.rh(i) * rows.dewpoint(i) + noise(rng);
    auto rss = [&](int id) { return fit_ols(build_design_matrix(id, rows).X, y).rss; };
    CHECK(rss(8) <= rss(6) * (1 + 1e-12));
    CHECK(rss(6) <= rss(2) * (1 + 1e-12));
    CHECK(rss(2) <= rss(1) * (1 + 1e-12));
    const double raw_rmse = metrics(rows.pm25, y).rmse;
    for (int id = 1; id <= 16; ++id)
        CHECK(fit_linear_model(id, rows, y).training_metrics->rmse <= raw_rmse);
}

TEST_CASE("apply_model")
{
    const auto rows = random_rows(100, 5);
    const auto m0 = fit_linear_model(0, rows, rows.pm25);
    CHECK(apply_model(m0, rows).values == rows.pm25);
    CHECK(m0.coefficients().empty());

    CorrectionModel identity;
    identity.id = ModelId::table(1);
    identity.terms = {"pm25"};
    identity.slopes = Eigen::VectorXd::Ones(1);
    identity.intercept = 0.0;
    CHECK(apply_model(identity, rows).values == rows.pm25);

    // model 6 on its own training rows equals X*s + b recomputed independently
    std::mt19937_64 rng(6);
    std::normal_distribution<double> noise(0.0, 0.5);
    Eigen::VectorXd y(rows.size());
    for (Eigen::Index i = 0; i < y.size(); ++i)
        y(i) = 1.0 + 0.9 * rows.pm25(i) + noise(rng);
    const auto m6 = fit_linear_model(6, rows, y);
    const auto pred = apply_model(m6, rows).values;
    for (Eigen::Index i = 0; i < rows.size(); ++i) {
        const double expect = m6.intercept + m6.slopes(0) * rows.pm25(i) + m6.slopes(1) * rows.rh(i) +
                              m6.slopes(2) * rows.dewpoint(i) + m6.slopes(3) * rows.rh(i) * rows.dewpoint(i);
        CHECK(pred(i) == doctest::Approx(expect).epsilon(1e-12));
    }
    const auto coef = m6.coefficients();
    REQUIRE(coef.size() == 5);
    CHECK(coef.back().first == "intercept");

    // negative predictions are kept and flagged
    CorrectionModel shift = identity;
    shift.intercept = -100.0;
    const auto p = apply_model(shift, rows);
    CHECK(p.values.maxCoeff() < 0.0);
    CHECK(p.negative.size() == 100u);
}

TEST_CASE("metrics")
{
    const Eigen::Vector4d a(1, 2, 3, 4), b(1.5, 2.5, 3.5, 4.5);
    const auto m = metrics(a, b);
    CHECK(m.rmse == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(*m.r == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(m.n == 4);
    const auto same = metrics(a, a);
    CHECK(same.rmse == 0.0);
    CHECK(*same.r == 1.0);
    const Eigen::Vector4d z(-1.5, -0.5, 0.5, 1.5);
    CHECK(*metrics(z, (-z).eval()).r == -1.0);
    CHECK_FALSE(metrics(a, Eigen::Vector4d::Constant(2.0)).r);
    CHECK_THROWS_AS(metrics(Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1)), DataError);
    CHECK_THROWS_AS(metrics(Eigen::VectorXd::Ones(3), Eigen::VectorXd::Ones(4)), DataError);

    std::mt19937_64 rng(8);
    std::normal_distribution<double> g(10.0, 3.0);
    for (int t = 0; t < 50; ++t) {
        Eigen::VectorXd x(40), y(40);
        for (Eigen::Index i = 0; i < 40; ++i) {
            x(i) = g(rng);
            y(i) = 0.5 * x(i) + g(rng);
        }
        const auto [r, rmse] = direct_metrics(x, y);
        const auto mxy = metrics(x, y), myx = metrics(y, x);
        CHECK(*mxy.r == doctest::Approx(static_cast<double>(r)).epsilon(1e-12));
        CHECK(mxy.rmse == doctest::Approx(static_cast<double>(rmse)).epsilon(1e-12));
        CHECK(*mxy.r == doctest::Approx(*myx.r).epsilon(1e-15));
        CHECK(mxy.rmse == doctest::Approx(myx.rmse).epsilon(1e-15));
    }
}

TEST_CASE("dusttrak corrections")
{
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(10.0, 90.0), c(2.0, 40.0);
    const Eigen::Index n = 500;
    Eigen::VectorXd rh(n), ref(n), dt(n);
    std::vector<Timestamp> ts;
    for (Eigen::Index i = 0; i < n; ++i) {
        rh(i) = u(rng);
        ref(i) = c(rng);
        dt(i) = ref(i) * (1.0 + 0.25 * nonlinear_rh(rh(i)));
        ts.push_back(60 * i);
    }
    const auto dt2 = fit_dusttrak(DustTrakMethod::dt2, dt, ref, rh, ts);
    CHECK(dt2.id == ModelId::dusttrak(DustTrakMethod::dt2));
    CHECK(dt2.intercept == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(dt2.slopes(0) == doctest::Approx(0.25).epsilon(1e-10));
    CHECK(overestimation_ratio(dt2, 50.0) == doctest::Approx(1.125).epsilon(1e-10));
    CHECK(overestimation_ratio(dt2, 0.0) == doctest::Approx(dt2.intercept).epsilon(1e-15));
    Covariates rows{dt, rh, Eigen::VectorXd::Zero(n), Eigen::VectorXd()};
    CHECK((apply_model(dt2, rows).values - ref).cwiseAbs().maxCoeff() < 1e-8);

    const auto dt1 = fit_dusttrak(DustTrakMethod::dt1, ref, ref, rh);
    CHECK(std::abs(dt1.intercept) < 1e-10);
    CHECK(dt1.slopes(0) == doctest::Approx(1.0).epsilon(1e-12));

    Eigen::VectorXd or3 = 1.0 + 0.01 * rh.array();
    const auto dt3 = fit_dusttrak(DustTrakMethod::dt3, (ref.array() * or3.array()).matrix(), ref, rh);
    CHECK(dt3.slopes(0) == doctest::Approx(0.01).epsilon(1e-10));
    CHECK(overestimation_ratio(dt3, 40.0) == doctest::Approx(1.4).epsilon(1e-10));

    auto zero_ref = ref;
    zero_ref(7) = 0.0;
    try {
        (void)fit_dusttrak(DustTrakMethod::dt2, dt, zero_ref, rh, ts);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find(format_iso8601(ts[7])) != std::string::npos);
    }
    auto wet = rh;
    wet(2) = 100.0;
    CHECK_THROWS_AS(fit_dusttrak(DustTrakMethod::dt2, dt, ref, wet, ts), NumericalError);
}

TEST_CASE("model json round trip")
{
    const auto rows = random_rows(200, 13);
    Eigen::VectorXd y = 0.3 + 1.1 * rows.pm25.array() - 0.01 * rows.rh.array();
    y(0) += 0.1;
    const auto m = fit_linear_model(14, rows, y, {Window::hour1, "opc9"});
    const auto j = model_to_json(m);
    CHECK(j.at("model_id") == "14");
    CHECK(j.at("coefficients").size() == 8);
    const auto back = model_from_json(nlohmann::json::parse(j.dump()));
    CHECK(back.id == m.id);
    CHECK(back.terms == m.terms);
    CHECK(back.slopes == m.slopes);
    CHECK(back.intercept == m.intercept);
    CHECK(back.training_window == Window::hour1);
    CHECK(back.training_device == "opc9");
    CHECK(back.n == 200);
    CHECK(apply_model(back, rows).values == apply_model(m, rows).values);

    auto extra = j;
    extra["provenance"] = {{"seed", 1}};
    CHECK_NOTHROW(model_from_json(extra));
    auto broken = j;
    broken["coefficients"].erase(0);
    CHECK_THROWS_AS(model_from_json(broken), DataError);
}
