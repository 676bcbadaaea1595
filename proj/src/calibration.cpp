#include "lcs/calibration.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

#include "lcs/csv.hpp"
#include "lcs/error.hpp"

namespace lcs {

namespace {

using C = Covariate;

const std::vector<std::vector<Term>>& term_table()
{
    static const std::vector<std::vector<Term>> table = {
        {},                                                                   // 0 raw
        {{C::pm25}},                                                          // 1
        {{C::pm25}, {C::rh}},                                                 // 2
        {{C::pm25}, {C::temp}},                                               // 3
        {{C::pm25}, {C::dewpoint}},                                           // 4
        {{C::pm25}, {C::rh}, {C::temp}, {C::rh, C::temp}},                    // 5
        {{C::pm25}, {C::rh}, {C::dewpoint}, {C::rh, C::dewpoint}},            // 6
        {{C::pm25}, {C::dewpoint}, {C::temp}, {C::dewpoint, C::temp}},        // 7
        {{C::pm25},                                                           // 8
         {C::rh},
         {C::temp},
         {C::dewpoint},
         {C::rh, C::temp},
         {C::rh, C::dewpoint},
         {C::temp, C::dewpoint},
         {C::rh, C::temp, C::dewpoint}},
        {{C::pm25}, {C::rh}, {C::rh, C::pm25}},                               // 9
        {{C::pm25}, {C::dewpoint}, {C::dewpoint, C::pm25}},                   // 10
        {{C::pm25}, {C::temp}, {C::temp, C::pm25}},                           // 11
        {{C::pm25}, {C::nonlinear_rh}, {C::nonlinear_rh, C::pm25}},           // 12
        {{C::pm25},                                                           // 13
         {C::rh},
         {C::temp},
         {C::pm25, C::rh},
         {C::pm25, C::temp},
         {C::rh, C::temp},
         {C::pm25, C::rh, C::temp}},
        {{C::pm25},                                                           // 14
         {C::rh},
         {C::dewpoint},
         {C::pm25, C::rh},
         {C::pm25, C::dewpoint},
         {C::rh, C::dewpoint},
         {C::pm25, C::rh, C::dewpoint}},
        {{C::pm25},                                                           // 15
         {C::temp},
         {C::dewpoint},
         {C::pm25, C::temp},
         {C::pm25, C::dewpoint},
         {C::temp, C::dewpoint},
         {C::pm25, C::temp, C::dewpoint}},
        {{C::pm25},                                                           // 16
         {C::rh},
         {C::temp},
         {C::dewpoint},
         {C::pm25, C::rh},
         {C::pm25, C::temp},
         {C::temp, C::rh},
         {C::pm25, C::dewpoint},
         {C::dewpoint, C::rh},
         {C::dewpoint, C::temp},
         {C::pm25, C::rh, C::temp},
         {C::pm25, C::rh, C::dewpoint},
         {C::pm25, C::dewpoint, C::temp},
         {C::dewpoint, C::rh, C::temp},
         {C::pm25, C::rh, C::temp, C::dewpoint}},
    };
    return table;
}

const char* covariate_name(Covariate c)
{
    switch (c) {
    case C::pm25: return "pm25";
    case C::rh: return "rh";
    case C::temp: return "temp";
    case C::dewpoint: return "dewpoint";
    case C::nonlinear_rh: return "nonlinear_rh";
    }
    return "?";
}

void check_sizes(const Covariates& rows, bool need_dewpoint)
{
    const auto n = rows.pm25.size();
    if (rows.rh.size() != n || rows.temp.size() != n)
        throw DataError("covariate columns have different lengths");
    if (need_dewpoint && rows.dewpoint.size() != n)
        throw DataError("model requires dewpoint but it is missing for " + std::to_string(n - rows.dewpoint.size()) +
                        " row(s)");
    if (!rows.pm25.allFinite() || !rows.rh.allFinite() || !rows.temp.allFinite() ||
        (need_dewpoint && !rows.dewpoint.allFinite()))
        throw DataError("covariates must be finite");
}

Eigen::VectorXd covariate_column(const Covariates& rows, Covariate c)
{
    switch (c) {
    case C::pm25: return rows.pm25;
    case C::rh: return rows.rh;
    case C::temp: return rows.temp;
    case C::dewpoint: return rows.dewpoint;
    case C::nonlinear_rh: return rows.rh.unaryExpr([](double rh) { return nonlinear_rh(rh); });
    }
    return {};
}

void check_table_id(int id)
{
    if (id < 0 || id > random_forest_model)
        throw UsageError("model id " + std::to_string(id) + " outside 0-17");
}

} // namespace

ModelId ModelId::table(int id)
{
    check_table_id(id);
    return ModelId(id);
}

ModelId ModelId::dusttrak(DustTrakMethod method)
{
    return ModelId(dusttrak_base + static_cast<int>(method));
}

std::optional<ModelId> ModelId::parse(std::string_view text)
{
    std::string s(text);
    for (auto& c : s)
        c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (s == "DT1")
        return dusttrak(DustTrakMethod::dt1);
    if (s == "DT2")
        return dusttrak(DustTrakMethod::dt2);
    if (s == "DT3")
        return dusttrak(DustTrakMethod::dt3);
    if (s.empty() || s.size() > 2 || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; }))
        return std::nullopt;
    const int id = std::stoi(s);
    if (id < 0 || id > random_forest_model)
        return std::nullopt;
    return ModelId(id);
}

int ModelId::table_id() const
{
    if (is_dusttrak())
        throw std::logic_error("table_id() on a DustTrak model id");
    return code_;
}

DustTrakMethod ModelId::method() const
{
    if (!is_dusttrak())
        throw std::logic_error("method() on a table model id");
    return static_cast<DustTrakMethod>(code_ - dusttrak_base);
}

std::string ModelId::name() const
{
    if (is_dusttrak())
        return "DT" + std::to_string(code_ - dusttrak_base + 1);
    return std::to_string(code_);
}

const std::vector<Term>& model_terms(int model_id)
{
    if (model_id < 0 || model_id >= random_forest_model)
        throw UsageError("model " + std::to_string(model_id) + " has no linear design (expected 0-16)");
    return term_table()[static_cast<std::size_t>(model_id)];
}

std::string term_name(const Term& term)
{
    std::string out;
    for (auto c : term) {
        if (!out.empty())
            out += '*';
        out += covariate_name(c);
    }
    return out;
}

bool model_uses(int model_id, Covariate c)
{
    if (model_id == random_forest_model)
        return c == C::pm25 || c == C::rh || c == C::temp;
    for (const auto& term : model_terms(model_id))
        if (std::find(term.begin(), term.end(), c) != term.end())
            return true;
    return false;
}

double nonlinear_rh(double rh_percent)
{
    const double f = rh_percent / 100.0;
    if (!(f < 1.0))
        throw NumericalError("nonlinear humidity term is singular at rh = " + csv::format_double(rh_percent) + "%");
    return f * f / (1.0 - f);
}

DesignMatrix build_design_matrix(int model_id, const Covariates& rows)
{
    if (model_id < 1 || model_id > 16)
        throw UsageError("build_design_matrix: model id must be 1-16, got " + std::to_string(model_id));
    check_sizes(rows, model_uses(model_id, C::dewpoint));
    const auto& terms = model_terms(model_id);
    DesignMatrix d;
    d.X.resize(rows.size(), static_cast<Eigen::Index>(terms.size()));
    for (std::size_t j = 0; j < terms.size(); ++j) {
        Eigen::VectorXd col = Eigen::VectorXd::Ones(rows.size());
        for (auto c : terms[j])
            col.array() *= covariate_column(rows, c).array();
        d.X.col(static_cast<Eigen::Index>(j)) = col;
        d.terms.push_back(term_name(terms[j]));
    }
    return d;
}

std::vector<std::pair<std::string, double>> CorrectionModel::coefficients() const
{
    std::vector<std::pair<std::string, double>> out;
    if (forest || (!id.is_dusttrak() && id.table_id() == 0))
        return out;
    for (std::size_t j = 0; j < terms.size(); ++j)
        out.emplace_back(terms[j], slopes(static_cast<Eigen::Index>(j)));
    out.emplace_back("intercept", intercept);
    return out;
}

CorrectionModel fit_linear_model(int model_id, const Covariates& rows, const Eigen::VectorXd& reference,
                                 const FitMetadata& meta)
{
    CorrectionModel m;
    m.id = ModelId::table(model_id);
    m.training_window = meta.window;
    m.training_device = meta.device;
    m.n = static_cast<std::size_t>(reference.size());
    if (reference.size() != rows.size())
        throw DataError("fit: reference and covariates have different lengths");
    if (model_id == random_forest_model)
        throw UsageError("fit_linear_model: model 17 is fitted with fit_forest_model");
    if (model_id != 0) {
        const auto design = build_design_matrix(model_id, rows);
        const auto fit = fit_ols(design.X, reference, design.terms);
        m.terms = design.terms;
        m.slopes = fit.slopes;
        m.intercept = fit.intercept;
        m.slope_se = fit.slope_se;
        m.intercept_se = fit.intercept_se;
    } else {
        check_sizes(rows, false);
    }
    if (reference.size() >= 2)
        m.training_metrics = metrics(apply_model(m, rows).values, reference);
    return m;
}

Eigen::MatrixXd forest_predictors(const Covariates& rows)
{
    check_sizes(rows, false);
    Eigen::MatrixXd X(rows.size(), 3);
    X << rows.pm25, rows.temp, rows.rh;
    return X;
}

CorrectionModel fit_forest_model(const Covariates& rows, const Eigen::VectorXd& reference, const ForestConfig& config,
                                 const FitMetadata& meta)
{
    if (reference.size() != rows.size())
        throw DataError("fit: reference and covariates have different lengths");
    const auto X = forest_predictors(rows);
    CorrectionModel m;
    m.id = ModelId::table(random_forest_model);
    m.terms = {"pm25", "temp", "rh"};
    m.training_window = meta.window;
    m.training_device = meta.device;
    m.n = static_cast<std::size_t>(reference.size());
    m.forest = fit_forest(X, reference, config);
    const auto oob = oob_evaluate(*m.forest, X, reference);
    m.oob_pseudo_r2 = oob.pseudo_r2;
    std::vector<Eigen::Index> seen;
    for (Eigen::Index i = 0; i < oob.predictions.size(); ++i)
        if (!std::isnan(oob.predictions(i)))
            seen.push_back(i);
    if (seen.size() >= 2)
        m.training_metrics = metrics(oob.predictions(seen).eval(), reference(seen).eval());
    return m;
}

Prediction apply_model(const CorrectionModel& model, const Covariates& rows)
{
    Prediction p;
    if (model.id.is_dusttrak()) {
        if (rows.rh.size() != rows.pm25.size())
            throw DataError("apply: humidity and DustTrak series have different lengths");
        const auto method = model.id.method();
        if (method == DustTrakMethod::dt1) {
            p.values = (model.intercept + model.slopes(0) * rows.pm25.array()).matrix();
        } else {
            p.values.resize(rows.size());
            for (Eigen::Index i = 0; i < rows.size(); ++i) {
                const double ratio = overestimation_ratio(model, rows.rh(i));
                if (!(ratio > 0.0))
                    throw NumericalError("apply: non-positive overestimation ratio at rh = " +
                                         csv::format_double(rows.rh(i)) + "%");
                p.values(i) = rows.pm25(i) / ratio;
            }
        }
    } else {
        const int id = model.id.table_id();
        if (id == 0) {
            p.values = rows.pm25;
        } else if (id == random_forest_model) {
            if (!model.forest)
                throw DataError("apply: model 17 carries no forest");
            p.values = predict(*model.forest, forest_predictors(rows));
        } else {
            const auto design = build_design_matrix(id, rows);
            if (design.terms != model.terms || model.slopes.size() != design.X.cols())
                throw DataError("apply: model " + model.id.name() + " coefficients do not match its term list");
            p.values = ((design.X * model.slopes).array() + model.intercept).matrix();
        }
    }
    for (Eigen::Index i = 0; i < p.values.size(); ++i)
        if (p.values(i) < 0.0)
            p.negative.push_back(static_cast<std::size_t>(i));
    return p;
}

double overestimation_ratio(const CorrectionModel& model, double rh_percent)
{
    switch (model.id.method()) {
    case DustTrakMethod::dt2: return model.intercept + model.slopes(0) * nonlinear_rh(rh_percent);
    case DustTrakMethod::dt3: return model.intercept + model.slopes(0) * rh_percent;
    case DustTrakMethod::dt1: break;
    }
    throw std::logic_error("overestimation_ratio: DT1 is not a ratio model");
}

CorrectionModel fit_dusttrak(DustTrakMethod method, const Eigen::VectorXd& dusttrak, const Eigen::VectorXd& reference,
                             const Eigen::VectorXd& rh, const std::vector<Timestamp>& timestamps,
                             const FitMetadata& meta)
{
    const auto n = dusttrak.size();
    if (reference.size() != n || rh.size() != n)
        throw DataError("fit_dusttrak: series lengths differ");
    if (!timestamps.empty() && static_cast<Eigen::Index>(timestamps.size()) != n)
        throw DataError("fit_dusttrak: timestamp count does not match the series");

    CorrectionModel m;
    m.id = ModelId::dusttrak(method);
    m.training_window = meta.window;
    m.training_device = meta.device;
    m.n = static_cast<std::size_t>(n);

    Eigen::MatrixXd X(n, 1);
    Eigen::VectorXd target;
    if (method == DustTrakMethod::dt1) {
        X.col(0) = dusttrak;
        target = reference;
        m.terms = {"dusttrak"};
    } else {
        std::vector<std::string> bad;
        std::size_t bad_count = 0;
        for (Eigen::Index i = 0; i < n; ++i)
            if (!(reference(i) > 0.0)) {
                if (++bad_count <= 10)
                    bad.push_back(timestamps.empty() ? "index " + std::to_string(i)
                                                     : format_iso8601(timestamps[static_cast<std::size_t>(i)]));
            }
        if (bad_count > 0) {
            std::string msg = "fit_dusttrak: overestimation ratio undefined where reference <= 0 (" +
                              std::to_string(bad_count) + " record(s)):";
            for (const auto& b : bad)
                msg += " " + b;
            if (bad_count > bad.size())
                msg += " ...";
            throw DataError(msg);
        }
        target = dusttrak.array() / reference.array();
        if (method == DustTrakMethod::dt2) {
            X.col(0) = rh.unaryExpr([](double v) { return nonlinear_rh(v); });
            m.terms = {"nonlinear_rh"};
        } else {
            X.col(0) = rh;
            m.terms = {"rh"};
        }
    }
    const auto fit = fit_ols(X, target, m.terms);
    m.slopes = fit.slopes;
    m.intercept = fit.intercept;
    m.slope_se = fit.slope_se;
    m.intercept_se = fit.intercept_se;

    Covariates rows;
    rows.pm25 = dusttrak;
    rows.rh = rh;
    rows.temp = Eigen::VectorXd::Zero(n);
    if (n >= 2)
        m.training_metrics = metrics(apply_model(m, rows).values, reference);
    return m;
}

} // namespace lcs
