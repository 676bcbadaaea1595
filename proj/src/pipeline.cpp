#include "lcs/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <tuple>

#include "lcs/anova.hpp"
#include "lcs/csv.hpp"
#include "lcs/error.hpp"
#include "lcs/ingest.hpp"
#include "lcs/log.hpp"
#include "lcs/products.hpp"
#include "lcs/serialization.hpp"

namespace lcs {

namespace fs = std::filesystem;

namespace {

const std::set<std::string> known_factors = {"orientation", "rh", "temp", "speed", "svf", "day", "hour", "road_class"};

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v)
{
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(v);
    while (std::getline(in, item, ','))
        if (auto t = trim(item); !t.empty())
            out.push_back(t);
    return out;
}

std::string join(const std::vector<std::string>& items)
{
    std::string s;
    for (const auto& i : items)
        s += (s.empty() ? "" : ",") + i;
    return s;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& expected)
{
    throw UsageError("config: " + key + " = '" + value + "': expected " + expected);
}

std::size_t to_size(const std::string& key, const std::string& v)
{
    std::size_t pos = 0;
    try {
        if (!v.empty() && v[0] != '-') {
            const auto x = std::stoull(v, &pos);
            if (pos == v.size())
                return static_cast<std::size_t>(x);
        }
    } catch (const std::exception&) {
    }
    bad_value(key, v, "a non-negative integer");
}

double to_double(const std::string& key, const std::string& v)
{
    const auto x = csv::parse_double(v);
    if (!x || !std::isfinite(*x))
        bad_value(key, v, "a finite number");
    return *x;
}

bool to_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "yes" || v == "1")
        return true;
    if (v == "false" || v == "no" || v == "0")
        return false;
    bad_value(key, v, "true or false");
}

Window to_window(const std::string& key, const std::string& v)
{
    const auto w = parse_window(v);
    if (!w)
        bad_value(key, v, "one of 5s, 1min, 1h");
    return *w;
}

int to_model(const std::string& key, const std::string& v)
{
    const auto id = ModelId::parse(v);
    if (!id || id->is_dusttrak())
        bad_value(key, v, "a model id 0-17");
    return id->table_id();
}

std::string resolve(const std::string& value, const std::string& base_dir)
{
    if (value.empty())
        return value;
    fs::path p(value);
    if (p.is_relative() && !base_dir.empty())
        p = fs::path(base_dir) / p;
    return p.lexically_normal().string();
}

std::string out_path(const PipelineConfig& c, const std::string& name)
{
    return (fs::path(c.out_dir) / name).string();
}

void write_file(const std::string& path, const std::string& content)
{
    const fs::path p(path);
    if (p.has_parent_path())
        fs::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f)
        throw DataError("cannot write " + path);
    f << content;
    if (!f)
        throw DataError("write failed: " + path);
}

void require_file(const std::string& path, const std::string& what)
{
    if (path.empty())
        throw UsageError("config: " + what + " is not set");
    if (!fs::is_regular_file(path))
        throw DataError(what + ": file not found: " + path);
}

Provenance provenance(const PipelineConfig& c, const std::string& command)
{
    Provenance p;
    p.command = command;
    p.config_hash = c.hash();
    p.seed = c.seed;
    return p;
}

std::vector<Measurement> load_with_dewpoint(const std::string& path)
{
    auto rows = load_campaign(path);
    derive_dewpoints(rows);
    return rows;
}

std::map<std::string, std::vector<Measurement>> by_device(std::vector<Measurement> rows)
{
    std::map<std::string, std::vector<Measurement>> out;
    for (auto& m : rows)
        out[m.device_id].push_back(std::move(m));
    return out;
}

std::vector<Measurement> single_device(const std::string& path, const std::string& role)
{
    auto groups = by_device(load_with_dewpoint(path));
    if (groups.size() != 1)
        throw DataError(role + " file " + path + " must hold exactly one device, found " +
                        std::to_string(groups.size()));
    return std::move(groups.begin()->second);
}

double dewpoint_of(const AlignedRecord& r)
{
    if (r.dewpoint)
        return *r.dewpoint;
    if (r.rh > 0.0 && std::isfinite(r.temp))
        return derive_dewpoint(r.temp, r.rh);
    return std::numeric_limits<double>::quiet_NaN();
}

Covariates covariates_of(const std::vector<const AlignedRecord*>& rows)
{
    const auto n = static_cast<Eigen::Index>(rows.size());
    Covariates c{Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = *rows[static_cast<std::size_t>(i)];
        c.pm25(i) = r.pm25;
        c.rh(i) = r.rh;
        c.temp(i) = r.temp;
        c.dewpoint(i) = dewpoint_of(r);
    }
    return c;
}

Covariates subset(const Covariates& c, const std::vector<Eigen::Index>& idx)
{
    return {c.pm25(idx), c.rh(idx), c.temp(idx), c.dewpoint(idx)};
}

bool needs_dewpoint(const CorrectionModel& m)
{
    return !m.id.is_dusttrak() && model_uses(m.id.table_id(), Covariate::dewpoint);
}

std::vector<Eigen::Index> finite_dewpoint_rows(const Covariates& c)
{
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < c.size(); ++i)
        if (std::isfinite(c.dewpoint(i)))
            idx.push_back(i);
    return idx;
}

/// Applies a model; rows it cannot be evaluated on (missing dew point) come back NaN.
Eigen::VectorXd apply_rows(const CorrectionModel& model, const Covariates& rows)
{
    if (!needs_dewpoint(model))
        return apply_model(model, rows).values;
    const auto idx = finite_dewpoint_rows(rows);
    Eigen::VectorXd out = Eigen::VectorXd::Constant(rows.size(), std::numeric_limits<double>::quiet_NaN());
    if (static_cast<Eigen::Index>(idx.size()) < rows.size())
        warn("model " + model.id.name() + ": " + std::to_string(rows.size() - static_cast<Eigen::Index>(idx.size())) +
             " row(s) without dew point left uncorrected");
    if (!idx.empty())
        out(idx) = apply_model(model, subset(rows, idx)).values;
    return out;
}

std::string model_file_name(const CorrectionModel& m)
{
    const std::string id = m.id.is_dusttrak() ? m.id.name() : "m" + std::to_string(m.id.table_id());
    return m.training_device + "_" + to_string(m.training_window) + "_" + id + ".json";
}

std::string opt_num(const std::optional<double>& v)
{
    return v ? csv::format_double(*v) : std::string();
}

std::vector<CorrectionModel> load_models(const PipelineConfig& c)
{
    const fs::path dir = fs::path(c.out_dir) / "models";
    if (!fs::is_directory(dir))
        throw DataError("no fitted models in " + dir.string() + "; run 'fit' first");
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".json")
            files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    std::vector<CorrectionModel> out;
    for (const auto& f : files)
        out.push_back(load_model(f));
    std::stable_sort(out.begin(), out.end(), [](const CorrectionModel& a, const CorrectionModel& b) {
        return std::tie(a.training_device, a.training_window, a.id) <
               std::tie(b.training_device, b.training_window, b.id);
    });
    return out;
}

std::string format_orientation(Orientation o)
{
    return o == Orientation::none ? std::string() : to_string(o);
}

std::optional<double> field_double(const csv::Table& t, std::size_t row, std::optional<std::size_t> col,
                                   const std::string& name, bool required)
{
    const std::size_t line = t.line_numbers[row];
    if (!col) {
        if (required)
            throw DataError("missing column '" + name + "'");
        return std::nullopt;
    }
    const auto& f = t.rows[row].at(*col);
    if (f.empty()) {
        if (required)
            throw DataError("line " + std::to_string(line) + ": empty " + name);
        return std::nullopt;
    }
    const auto v = csv::parse_double(f);
    if (!v)
        throw DataError("line " + std::to_string(line) + ": bad " + name + " '" + f + "'");
    return v;
}

std::string field_string(const csv::Table& t, std::size_t row, std::optional<std::size_t> col,
                         const std::string& name)
{
    if (!col)
        throw DataError("missing column '" + name + "'");
    return t.rows[row].at(*col);
}

Timestamp field_time(const csv::Table& t, std::size_t row, std::optional<std::size_t> col)
{
    const auto s = field_string(t, row, col, "timestamp");
    const auto ts = parse_iso8601(s);
    if (!ts)
        throw DataError("line " + std::to_string(t.line_numbers[row]) + ": bad timestamp '" + s + "'");
    return *ts;
}

csv::Table read_table(const std::string& path)
{
    auto t = csv::read_file(path);
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        if (t.rows[r].size() != t.header.size())
            throw DataError(path + " line " + std::to_string(t.line_numbers[r]) + ": expected " +
                            std::to_string(t.header.size()) + " fields, found " + std::to_string(t.rows[r].size()));
    return t;
}

MetricPair metrics_on(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const std::vector<Eigen::Index>& idx)
{
    return metrics(a(idx).eval(), b(idx).eval());
}

std::vector<HotspotPoint> raw_hotspot_points(const PipelineConfig& c)
{
    require_file(c.mobile_lcs, "mobile.lcs");
    const auto rows = load_campaign(c.mobile_lcs);
    std::vector<HotspotPoint> pts;
    pts.reserve(rows.size());
    for (const auto& m : rows)
        pts.push_back({{m.lat, m.lon}, m.pm25, m.run_id});
    return pts;
}

} // namespace

// ---------------------------------------------------------------------------------------
// configuration

PipelineConfig::PipelineConfig() : anova_factors(default_factor_order(false)) {}

PipelineConfig PipelineConfig::load(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw UsageError("cannot open config file " + path);
    PipelineConfig c;
    const std::string base = fs::path(path).parent_path().string();
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        const auto t = trim(line);
        if (t.empty())
            continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw UsageError(path + ":" + std::to_string(line_no) + ": expected key = value");
        c.set(trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)), base);
    }
    return c;
}

void PipelineConfig::set(const std::string& key, const std::string& v, const std::string& base_dir)
{
    if (key == "collocation.lcs")
        collocation_lcs = resolve(v, base_dir);
    else if (key == "collocation.reference")
        collocation_reference = resolve(v, base_dir);
    else if (key == "collocation.research")
        collocation_research = resolve(v, base_dir);
    else if (key == "collocation.research_reference")
        collocation_research_reference = resolve(v, base_dir);
    else if (key == "mobile.lcs")
        mobile_lcs = resolve(v, base_dir);
    else if (key == "mobile.research")
        mobile_research = resolve(v, base_dir);
    else if (key == "out_dir")
        out_dir = resolve(v, base_dir);
    else if (key == "fit.models") {
        std::vector<int> ids;
        for (const auto& s : split_list(v))
            ids.push_back(to_model(key, s));
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        if (ids.empty())
            bad_value(key, v, "at least one model id");
        models = ids;
    } else if (key == "fit.windows") {
        std::vector<Window> ws;
        for (const auto& s : split_list(v))
            ws.push_back(to_window(key, s));
        std::sort(ws.begin(), ws.end());
        ws.erase(std::unique(ws.begin(), ws.end()), ws.end());
        if (ws.empty())
            bad_value(key, v, "at least one window");
        windows = ws;
    } else if (key == "fit.min_samples") {
        min_samples = to_size(key, v);
        if (min_samples == 0)
            bad_value(key, v, "a positive integer");
    } else if (key == "dusttrak.method") {
        const auto id = ModelId::parse(v);
        if (!id || !id->is_dusttrak())
            bad_value(key, v, "DT1, DT2 or DT3");
        dusttrak_method = id->method();
    } else if (key == "dusttrak.window")
        dusttrak_window = to_window(key, v);
    else if (key == "forest.n_tree") {
        forest_n_tree = to_size(key, v);
        if (forest_n_tree == 0)
            bad_value(key, v, "a positive integer");
    } else if (key == "forest.tune")
        forest_tune = to_bool(key, v);
    else if (key == "forest.tune_forests") {
        forest_tune_forests = to_size(key, v);
        if (forest_tune_forests == 0)
            bad_value(key, v, "a positive integer");
    } else if (key == "forest.cv_folds") {
        cv_folds = to_size(key, v);
        if (cv_folds == 1)
            bad_value(key, v, "0 (disabled) or at least 2");
    } else if (key == "transfer.model")
        transfer_model = to_model(key, v);
    else if (key == "transfer.window")
        transfer_window = to_window(key, v);
    else if (key == "transfer.clip_negative")
        clip_negative = to_bool(key, v);
    else if (key == "background.method") {
        const auto m = parse_background_method(v);
        if (!m)
            bad_value(key, v, "percentile10 or spline_of_minimums");
        background_method = *m;
    } else if (key == "grid.cell_size") {
        cell_size = to_double(key, v);
        if (!(cell_size > 0.0))
            bad_value(key, v, "a positive number of metres");
    } else if (key == "grid.max_normalized_se") {
        max_normalized_se = to_double(key, v);
        if (!(max_normalized_se > 0.0))
            bad_value(key, v, "a positive number");
    } else if (key == "bootstrap.B") {
        bootstrap_b = to_size(key, v);
        if (bootstrap_b < 2)
            bad_value(key, v, "an integer >= 2");
    } else if (key == "hotspots.percentile") {
        hotspots.percentile = to_double(key, v);
        if (!(hotspots.percentile >= 0.0 && hotspots.percentile <= 100.0))
            bad_value(key, v, "a percentile in [0, 100]");
    } else if (key == "hotspots.cutoff_m") {
        hotspots.cutoff_m = to_double(key, v);
        if (!(hotspots.cutoff_m > 0.0))
            bad_value(key, v, "a positive distance");
    } else if (key == "hotspots.min_n")
        hotspots.min_members = to_size(key, v);
    else if (key == "hotspots.min_runs")
        hotspots.min_runs = to_size(key, v);
    else if (key == "hotspots.linkage") {
        const auto l = parse_linkage(v);
        if (!l)
            bad_value(key, v, "single, complete or average");
        hotspots.linkage = *l;
    } else if (key == "hotspots.input") {
        if (v != "raw" && v != "corrected")
            bad_value(key, v, "raw or corrected");
        hotspots_corrected = v == "corrected";
    } else if (key == "anova.factors") {
        auto f = split_list(v);
        for (const auto& name : f)
            if (!known_factors.contains(name))
                bad_value(key, name, "one of orientation, rh, temp, speed, svf, day, hour, road_class");
        if (f.empty())
            bad_value(key, v, "at least one factor");
        anova_factors = f;
    } else if (key == "seed")
        seed = to_size(key, v);
    else
        throw UsageError("config: unknown key '" + key + "'");
}

std::map<std::string, std::string> PipelineConfig::to_map() const
{
    std::map<std::string, std::string> m;
    m["collocation.lcs"] = collocation_lcs;
    m["collocation.reference"] = collocation_reference;
    m["collocation.research"] = collocation_research;
    m["collocation.research_reference"] = collocation_research_reference;
    m["mobile.lcs"] = mobile_lcs;
    m["mobile.research"] = mobile_research;
    std::vector<std::string> ids, ws;
    for (int id : models)
        ids.push_back(std::to_string(id));
    for (auto w : windows)
        ws.push_back(to_string(w));
    m["fit.models"] = join(ids);
    m["fit.windows"] = join(ws);
    m["fit.min_samples"] = std::to_string(min_samples);
    m["dusttrak.method"] = ModelId::dusttrak(dusttrak_method).name();
    m["dusttrak.window"] = to_string(dusttrak_window);
    m["forest.n_tree"] = std::to_string(forest_n_tree);
    m["forest.tune"] = forest_tune ? "true" : "false";
    m["forest.tune_forests"] = std::to_string(forest_tune_forests);
    m["forest.cv_folds"] = std::to_string(cv_folds);
    m["transfer.model"] = std::to_string(transfer_model);
    m["transfer.window"] = to_string(transfer_window);
    m["transfer.clip_negative"] = clip_negative ? "true" : "false";
    m["background.method"] = to_string(background_method);
    m["grid.cell_size"] = csv::format_double(cell_size);
    m["grid.max_normalized_se"] = csv::format_double(max_normalized_se);
    m["bootstrap.B"] = std::to_string(bootstrap_b);
    m["hotspots.percentile"] = csv::format_double(hotspots.percentile);
    m["hotspots.cutoff_m"] = csv::format_double(hotspots.cutoff_m);
    m["hotspots.min_n"] = std::to_string(hotspots.min_members);
    m["hotspots.min_runs"] = std::to_string(hotspots.min_runs);
    m["hotspots.linkage"] = to_string(hotspots.linkage);
    m["hotspots.input"] = hotspots_corrected ? "corrected" : "raw";
    m["anova.factors"] = join(anova_factors);
    m["seed"] = std::to_string(seed);
    m["out_dir"] = out_dir;
    return m;
}

std::string PipelineConfig::hash() const
{
    std::string canonical;
    for (const auto& [k, v] : to_map())
        canonical += k + '=' + v + '\n';
    return "fnv1a64:" + fnv1a_hex(canonical);
}

// ---------------------------------------------------------------------------------------
// fit

FitOutput cmd_fit(const PipelineConfig& c)
{
    require_file(c.collocation_lcs, "collocation.lcs");
    require_file(c.collocation_reference, "collocation.reference");
    const auto reference = single_device(c.collocation_reference, "reference");
    const auto lcs_devices = by_device(load_with_dewpoint(c.collocation_lcs));

    Provenance prov = provenance(c, "fit");
    prov.add_input(c.collocation_lcs);
    prov.add_input(c.collocation_reference);

    FitOutput out;
    for (const auto& [device, rows] : lcs_devices) {
        for (auto window : c.windows) {
            const auto lcs_avg = average_window(rows, window, c.min_samples);
            const auto ref_avg = average_window(reference, window, c.min_samples);
            const auto pairs = merge_coincident(lcs_avg, ref_avg);
            if (pairs.size() < 3)
                throw DataError("fit: only " + std::to_string(pairs.size()) + " coincident " + to_string(window) +
                                " windows for device " + device);
            std::vector<const AlignedRecord*> recs;
            Eigen::VectorXd y(static_cast<Eigen::Index>(pairs.size()));
            for (std::size_t i = 0; i < pairs.size(); ++i) {
                recs.push_back(&pairs[i].a);
                y(static_cast<Eigen::Index>(i)) = pairs[i].b.pm25;
            }
            const Covariates all = covariates_of(recs);
            const auto dew_idx = finite_dewpoint_rows(all);
            const FitMetadata meta{window, device};

            for (int id : c.models) {
                FitReportRow row;
                row.device = device;
                row.window = window;
                row.model = ModelId::table(id);
                CorrectionModel m;
                if (id == random_forest_model) {
                    ForestConfig fc;
                    fc.n_tree = c.forest_n_tree;
                    fc.seed = c.seed;
                    const Eigen::MatrixXd X = forest_predictors(all);
                    if (c.forest_tune)
                        fc.m_try = tune_mtry(X, y, fc, c.forest_tune_forests).m_try;
                    m = fit_forest_model(all, y, fc, meta);
                    row.m_try = fc.m_try;
                    row.oob_pseudo_r2 = m.oob_pseudo_r2;
                    const std::size_t smallest_train = pairs.size() - (pairs.size() + c.cv_folds - 1) / c.cv_folds;
                    if (c.cv_folds >= 2 && pairs.size() >= c.cv_folds && smallest_train >= 2 * fc.min_node_size)
                        row.cv = kfold_cv(X, y, c.cv_folds, fc).pooled;
                    else if (c.cv_folds >= 2)
                        warn("fit: " + std::to_string(pairs.size()) + " " + to_string(window) +
                             " windows are too few for " + std::to_string(c.cv_folds) +
                             "-fold cross-validation of the forest; skipped");
                } else if (id != 0 && model_uses(id, Covariate::dewpoint) &&
                           static_cast<Eigen::Index>(dew_idx.size()) < all.size()) {
                    warn("fit: model " + std::to_string(id) + " skips " +
                         std::to_string(all.size() - static_cast<Eigen::Index>(dew_idx.size())) +
                         " window(s) without dew point");
                    m = fit_linear_model(id, subset(all, dew_idx), y(dew_idx).eval(), meta);
                } else {
                    m = fit_linear_model(id, all, y, meta);
                }
                row.n = m.n;
                row.training = m.training_metrics;
                out.report.push_back(row);
                out.models.push_back(std::move(m));
            }
        }
    }

    if (!c.collocation_research.empty()) {
        require_file(c.collocation_research, "collocation.research");
        const std::string ref_path =
            c.collocation_research_reference.empty() ? c.collocation_reference : c.collocation_research_reference;
        require_file(ref_path, "collocation.research_reference");
        const auto research = single_device(c.collocation_research, "research");
        const auto research_ref = ref_path == c.collocation_reference ? reference : single_device(ref_path, "reference");
        prov.add_input(c.collocation_research);
        if (ref_path != c.collocation_reference)
            prov.add_input(ref_path);
        const auto pairs = merge_coincident(average_window(research, c.dusttrak_window, c.min_samples),
                                            average_window(research_ref, c.dusttrak_window, c.min_samples));
        const auto n = static_cast<Eigen::Index>(pairs.size());
        Eigen::VectorXd dt(n), ref(n), rh(n);
        std::vector<Timestamp> ts;
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& p = pairs[static_cast<std::size_t>(i)];
            dt(i) = p.a.pm25;
            ref(i) = p.b.pm25;
            rh(i) = p.a.rh;
            ts.push_back(p.timestamp);
        }
        const auto device = research.front().device_id;
        auto m = fit_dusttrak(c.dusttrak_method, dt, ref, rh, ts, {c.dusttrak_window, device});
        FitReportRow row;
        row.device = device;
        row.window = c.dusttrak_window;
        row.model = m.id;
        row.n = m.n;
        row.training = m.training_metrics;
        out.report.push_back(row);
        out.research = m;
    }

    auto write_model = [&](const CorrectionModel& m) {
        auto j = model_to_json(m);
        j["provenance"] = prov.to_json();
        write_file(out_path(c, "models/" + model_file_name(m)), j.dump(1) + "\n");
    };
    for (const auto& m : out.models)
        write_model(m);
    if (out.research)
        write_model(*out.research);

    std::stable_sort(out.report.begin(), out.report.end(), [](const FitReportRow& a, const FitReportRow& b) {
        return std::tie(a.device, a.window, a.model) < std::tie(b.device, b.window, b.model);
    });
    std::ostringstream rep;
    prov.write_csv_header(rep);
    rep << "device,window,model,n,r,rmse,m_try,oob_pseudo_r2,cv_r,cv_rmse\n";
    for (const auto& r : out.report) {
        rep << csv::escape(r.device) << ',' << to_string(r.window) << ',' << r.model.name() << ',' << r.n << ','
            << (r.training ? opt_num(r.training->r) : "") << ','
            << (r.training ? csv::format_double(r.training->rmse) : "") << ','
            << (r.m_try ? std::to_string(*r.m_try) : "") << ',' << opt_num(r.oob_pseudo_r2) << ','
            << (r.cv ? opt_num(r.cv->r) : "") << ',' << (r.cv ? csv::format_double(r.cv->rmse) : "") << '\n';
    }
    write_file(out_path(c, "fit_report.csv"), rep.str());
    return out;
}

// ---------------------------------------------------------------------------------------
// transfer

std::vector<TransferRow> cmd_transfer_eval(const PipelineConfig& c)
{
    require_file(c.mobile_lcs, "mobile.lcs");
    const auto models = load_models(c);
    Provenance prov = provenance(c, "transfer-eval");
    prov.add_input(c.mobile_lcs);

    // research-grade series at 5 s, corrected
    std::map<Timestamp, std::pair<double, double>> research; // raw, corrected
    if (!c.mobile_research.empty()) {
        require_file(c.mobile_research, "mobile.research");
        prov.add_input(c.mobile_research);
        const auto rows = single_device(c.mobile_research, "mobile research");
        const auto it = std::find_if(models.begin(), models.end(), [&](const CorrectionModel& m) {
            return m.id == ModelId::dusttrak(c.dusttrak_method);
        });
        if (it == models.end())
            throw DataError("no fitted " + ModelId::dusttrak(c.dusttrak_method).name() +
                            " research-grade correction; run 'fit' with collocation.research set");
        const auto avg = average_window(rows, Window::sec5, c.min_samples);
        Covariates cov{Eigen::VectorXd(static_cast<Eigen::Index>(avg.size())),
                       Eigen::VectorXd(static_cast<Eigen::Index>(avg.size())),
                       Eigen::VectorXd(static_cast<Eigen::Index>(avg.size())), Eigen::VectorXd()};
        for (std::size_t i = 0; i < avg.size(); ++i) {
            const auto k = static_cast<Eigen::Index>(i);
            cov.pm25(k) = avg[i].pm25;
            cov.rh(k) = avg[i].rh;
            cov.temp(k) = avg[i].temp;
        }
        const auto corrected = apply_model(*it, cov).values;
        for (std::size_t i = 0; i < avg.size(); ++i)
            research[avg[i].timestamp] = {avg[i].pm25, corrected(static_cast<Eigen::Index>(i))};
    } else {
        warn("transfer-eval: mobile.research not set; only corrected_mobile.csv is written");
    }

    std::vector<TransferRow> report;
    std::vector<CorrectedRecord> corrected_rows;
    for (const auto& [device, rows] : by_device(load_with_dewpoint(c.mobile_lcs))) {
        const auto avg = average_window(rows, Window::sec5, c.min_samples);
        std::vector<const AlignedRecord*> recs;
        for (const auto& r : avg)
            recs.push_back(&r);
        const Covariates cov = covariates_of(recs);

        std::vector<Eigen::Index> joined;
        Eigen::VectorXd truth = Eigen::VectorXd::Constant(cov.size(), std::numeric_limits<double>::quiet_NaN());
        for (std::size_t i = 0; i < avg.size(); ++i)
            if (auto it = research.find(avg[i].timestamp); it != research.end()) {
                truth(static_cast<Eigen::Index>(i)) = it->second.second;
                joined.push_back(static_cast<Eigen::Index>(i));
            }

        const CorrectionModel* transfer = nullptr;
        Eigen::VectorXd transfer_values;
        for (const auto& m : models) {
            if (m.training_device != device || m.id.is_dusttrak())
                continue;
            const Eigen::VectorXd values = apply_rows(m, cov);
            if (m.id == ModelId::table(c.transfer_model) && m.training_window == c.transfer_window) {
                transfer = &m;
                transfer_values = values;
            }
            if (joined.empty())
                continue;
            std::map<std::string, std::vector<Eigen::Index>> scopes;
            for (auto i : joined)
                if (std::isfinite(values(i))) {
                    scopes["all"].push_back(i);
                    scopes["run:" + avg[static_cast<std::size_t>(i)].run_id].push_back(i);
                }
            auto emit = [&](const std::string& scope, const std::vector<Eigen::Index>& idx) {
                if (idx.size() < 2)
                    return;
                const auto mp = metrics_on(values, truth, idx);
                report.push_back({device, m.training_window, m.id, scope, mp.n, mp.r, mp.rmse});
            };
            emit("all", scopes["all"]);
            for (const auto& [scope, idx] : scopes)
                if (scope != "all")
                    emit(scope.substr(4), idx);
        }
        if (!transfer)
            throw DataError("no fitted model " + std::to_string(c.transfer_model) + " at " +
                            to_string(c.transfer_window) + " for device " + device + "; run 'fit' first");

        std::size_t negatives = 0;
        for (std::size_t i = 0; i < avg.size(); ++i) {
            const auto& a = avg[i];
            CorrectedRecord r;
            r.timestamp = a.timestamp;
            r.device_id = a.device_id;
            r.run_id = a.run_id;
            r.lat = a.lat;
            r.lon = a.lon;
            r.rh = a.rh;
            r.temp = a.temp;
            r.speed = a.speed;
            r.orientation = a.orientation;
            r.road_class = a.road_class;
            r.svf = a.svf;
            r.pm25_raw = a.pm25;
            double v = transfer_values(static_cast<Eigen::Index>(i));
            if (v < 0.0) {
                ++negatives;
                if (c.clip_negative)
                    v = 0.0;
            }
            r.pm25_corrected = v;
            if (auto it = research.find(a.timestamp); it != research.end()) {
                r.research_raw = it->second.first;
                r.research_corrected = it->second.second;
            }
            corrected_rows.push_back(std::move(r));
        }
        if (negatives > 0)
            warn("transfer-eval: " + std::to_string(negatives) + " negative corrected value(s) for device " + device +
                 (c.clip_negative ? " clipped to 0" : " kept"));
    }

    std::stable_sort(report.begin(), report.end(), [](const TransferRow& a, const TransferRow& b) {
        const bool a_all = a.scope == "all";
        const bool b_all = b.scope == "all";
        return std::tie(a.device, a.window, a.model, b_all, a.scope) <
               std::tie(b.device, b.window, b.model, a_all, b.scope);
    });
    if (!research.empty()) {
        std::ostringstream out;
        prov.write_csv_header(out);
        out << "device,window,model,scope,n,r,rmse\n";
        for (const auto& r : report)
            out << csv::escape(r.device) << ',' << to_string(r.window) << ',' << r.model.name() << ','
                << csv::escape(r.scope) << ',' << r.n << ',' << opt_num(r.r) << ',' << csv::format_double(r.rmse)
                << '\n';
        write_file(out_path(c, "transfer_eval.csv"), out.str());
    }
    std::ostringstream cm;
    prov.write_csv_header(cm);
    write_corrected_csv(cm, corrected_rows);
    write_file(out_path(c, "corrected_mobile.csv"), cm.str());
    return report;
}

// ---------------------------------------------------------------------------------------
// intermediates

void write_corrected_csv(std::ostream& out, const std::vector<CorrectedRecord>& rows)
{
    out << "timestamp,device_id,run_id,lat,lon,rh,temp,speed,orientation,road_class,svf,pm25_raw,pm25_corrected,"
           "research_raw,research_corrected\n";
    for (const auto& r : rows)
        out << format_iso8601(r.timestamp) << ',' << csv::escape(r.device_id) << ',' << csv::escape(r.run_id) << ','
            << csv::format_double(r.lat) << ',' << csv::format_double(r.lon) << ',' << csv::format_double(r.rh)
            << ',' << csv::format_double(r.temp) << ',' << opt_num(r.speed) << ',' << format_orientation(r.orientation)
            << ',' << (r.road_class ? std::to_string(*r.road_class) : "") << ',' << opt_num(r.svf) << ','
            << csv::format_double(r.pm25_raw) << ',' << csv::format_double(r.pm25_corrected) << ','
            << opt_num(r.research_raw) << ',' << opt_num(r.research_corrected) << '\n';
}

std::vector<CorrectedRecord> read_corrected_csv(const std::string& path)
{
    require_file(path, "corrected series");
    const auto t = read_table(path);
    const auto col = [&](const char* n) { return t.column(n); };
    std::vector<CorrectedRecord> out;
    out.reserve(t.rows.size());
    try {
        for (std::size_t i = 0; i < t.rows.size(); ++i) {
            CorrectedRecord r;
            r.timestamp = field_time(t, i, col("timestamp"));
            r.device_id = field_string(t, i, col("device_id"), "device_id");
            r.run_id = field_string(t, i, col("run_id"), "run_id");
            r.lat = *field_double(t, i, col("lat"), "lat", true);
            r.lon = *field_double(t, i, col("lon"), "lon", true);
            r.rh = *field_double(t, i, col("rh"), "rh", true);
            r.temp = *field_double(t, i, col("temp"), "temp", true);
            r.speed = field_double(t, i, col("speed"), "speed", false);
            if (const auto o = col("orientation")) {
                const auto& s = t.rows[i][*o];
                if (s == "parallel")
                    r.orientation = Orientation::parallel;
                else if (s == "perpendicular")
                    r.orientation = Orientation::perpendicular;
                else if (!s.empty())
                    throw DataError("line " + std::to_string(t.line_numbers[i]) + ": bad orientation '" + s + "'");
            }
            if (const auto rc = field_double(t, i, col("road_class"), "road_class", false))
                r.road_class = static_cast<int>(*rc);
            r.svf = field_double(t, i, col("svf"), "svf", false);
            r.pm25_raw = *field_double(t, i, col("pm25_raw"), "pm25_raw", true);
            r.pm25_corrected = *field_double(t, i, col("pm25_corrected"), "pm25_corrected", true);
            r.research_raw = field_double(t, i, col("research_raw"), "research_raw", false);
            r.research_corrected = field_double(t, i, col("research_corrected"), "research_corrected", false);
            out.push_back(std::move(r));
        }
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
    return out;
}

void write_background_corrected_csv(std::ostream& out, const std::vector<BackgroundCorrectedRecord>& rows)
{
    out << "timestamp,device_id,run_id,lat,lon,pm25_corrected,bkg,pm25_c,mode\n";
    for (const auto& r : rows)
        out << format_iso8601(r.timestamp) << ',' << csv::escape(r.device_id) << ',' << csv::escape(r.run_id) << ','
            << csv::format_double(r.lat) << ',' << csv::format_double(r.lon) << ','
            << csv::format_double(r.pm25_corrected) << ',' << csv::format_double(r.bkg) << ','
            << csv::format_double(r.pm25_c) << ','
            << (r.mode == CorrectionMode::additive ? "additive" : "multiplicative") << '\n';
}

std::vector<BackgroundCorrectedRecord> read_background_corrected_csv(const std::string& path)
{
    require_file(path, "background-corrected series");
    const auto t = read_table(path);
    const auto col = [&](const char* n) { return t.column(n); };
    std::vector<BackgroundCorrectedRecord> out;
    out.reserve(t.rows.size());
    try {
        for (std::size_t i = 0; i < t.rows.size(); ++i) {
            BackgroundCorrectedRecord r;
            r.timestamp = field_time(t, i, col("timestamp"));
            r.device_id = field_string(t, i, col("device_id"), "device_id");
            r.run_id = field_string(t, i, col("run_id"), "run_id");
            r.lat = *field_double(t, i, col("lat"), "lat", true);
            r.lon = *field_double(t, i, col("lon"), "lon", true);
            r.pm25_corrected = *field_double(t, i, col("pm25_corrected"), "pm25_corrected", true);
            r.bkg = *field_double(t, i, col("bkg"), "bkg", true);
            r.pm25_c = *field_double(t, i, col("pm25_c"), "pm25_c", true);
            const auto mode = field_string(t, i, col("mode"), "mode");
            r.mode = mode == "multiplicative" ? CorrectionMode::multiplicative : CorrectionMode::additive;
            out.push_back(std::move(r));
        }
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
    return out;
}

// ---------------------------------------------------------------------------------------
// background

std::vector<BackgroundCorrectedRecord> correct_background(const std::vector<CorrectedRecord>& rows,
                                                          BackgroundMethod method,
                                                          std::vector<BackgroundSeries>* series)
{
    std::map<std::pair<std::string, std::string>, std::vector<const CorrectedRecord*>> runs;
    std::size_t skipped = 0;
    for (const auto& r : rows) {
        if (!std::isfinite(r.pm25_corrected)) {
            ++skipped;
            continue;
        }
        runs[{r.device_id, r.run_id}].push_back(&r);
    }
    if (skipped > 0)
        warn("background: skipped " + std::to_string(skipped) + " row(s) without a corrected value");

    std::vector<BackgroundCorrectedRecord> out;
    for (auto& [key, recs] : runs) {
        std::stable_sort(recs.begin(), recs.end(),
                         [](const CorrectedRecord* a, const CorrectedRecord* b) { return a->timestamp < b->timestamp; });
        RunSeries run;
        run.run_id = key.second;
        run.pm25.resize(static_cast<Eigen::Index>(recs.size()));
        for (std::size_t i = 0; i < recs.size(); ++i) {
            run.timestamps.push_back(recs[i]->timestamp);
            run.pm25(static_cast<Eigen::Index>(i)) = recs[i]->pm25_corrected;
        }
        BackgroundSeries bkg;
        try {
            bkg = estimate_background(run, method);
        } catch (const DataError& e) {
            throw DataError("background: device " + key.first + ", run " + key.second + ": " + e.what());
        }
        const auto corrected = apply_background_correction(run.pm25, bkg);
        for (std::size_t i = 0; i < recs.size(); ++i) {
            const auto k = static_cast<Eigen::Index>(i);
            out.push_back({recs[i]->timestamp, key.first, key.second, recs[i]->lat, recs[i]->lon, run.pm25(k),
                           bkg.bkg(k), corrected.pm25_c(k), corrected.modes[i]});
        }
        if (series)
            series->push_back(std::move(bkg));
    }
    return out;
}

std::vector<BackgroundCorrectedRecord> cmd_background(const PipelineConfig& c)
{
    const auto input = out_path(c, "corrected_mobile.csv");
    const auto rows = read_corrected_csv(input);
    Provenance prov = provenance(c, "background");
    prov.add_input(input);

    std::vector<BackgroundSeries> series;
    const auto out = correct_background(rows, c.background_method, &series);

    // background.csv carries the device next to the run
    std::ostringstream bk;
    prov.write_csv_header(bk);
    bk << "timestamp,device_id,run_id,method,bkg,run_median_bkg\n";
    std::size_t k = 0;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.timestamps.size(); ++i, ++k)
            bk << format_iso8601(s.timestamps[i]) << ',' << csv::escape(out[k].device_id) << ','
               << csv::escape(s.run_id) << ',' << to_string(s.method) << ','
               << csv::format_double(s.bkg(static_cast<Eigen::Index>(i))) << ','
               << csv::format_double(s.run_median_bkg) << '\n';
    write_file(out_path(c, "background.csv"), bk.str());

    std::ostringstream bc;
    prov.write_csv_header(bc);
    write_background_corrected_csv(bc, out);
    write_file(out_path(c, "background_corrected.csv"), bc.str());
    return out;
}

// ---------------------------------------------------------------------------------------
// map

MapOutput cmd_map(const PipelineConfig& c)
{
    Provenance prov = provenance(c, "map");
    std::vector<BackgroundCorrectedRecord> rows;
    const auto saved = out_path(c, "background_corrected.csv");
    if (fs::is_regular_file(saved)) {
        rows = read_background_corrected_csv(saved);
        prov.add_input(saved);
    } else {
        const auto input = out_path(c, "corrected_mobile.csv");
        rows = correct_background(read_corrected_csv(input), c.background_method);
        prov.add_input(input);
    }
    if (rows.empty())
        throw DataError("map: no background-corrected measurements");

    std::vector<LatLon> pts;
    std::vector<double> values;
    std::vector<std::string> runs;
    for (const auto& r : rows) {
        pts.push_back({r.lat, r.lon});
        values.push_back(r.pm25_c);
        runs.push_back(r.run_id);
    }
    MapOutput out;
    out.spec = make_grid_spec(pts, c.cell_size);
    const auto cells = snap_to_grid(pts, out.spec);
    out.cells = summarize_cells(cells, values, runs, {c.bootstrap_b, c.seed, c.max_normalized_se});
    out.n_stable = filter_stable(out.cells, c.max_normalized_se).size();

    std::ostringstream gj, gc, rep;
    write_grid_geojson(gj, out.cells, out.spec, c.max_normalized_se, prov);
    write_grid_csv(gc, out.cells, out.spec, c.max_normalized_se, prov);
    std::size_t single = 0, unstable = 0, undefined = 0;
    for (const auto& s : out.cells) {
        single += s.single_run;
        unstable += s.unstable;
        undefined += s.se_undefined;
    }
    prov.write_csv_header(rep);
    rep << out.n_stable << " (out of " << out.cells.size()
        << ") grid cells were sampled over more than one run with normalized standard error below "
        << csv::format_double(100.0 * c.max_normalized_se) << "%\n"
        << "single-run cells: " << single << '\n'
        << "cells with normalized standard error at or above the threshold or undefined: " << unstable << '\n'
        << "cells with a single measurement: " << undefined << '\n'
        << "measurements: " << rows.size() << '\n';
    write_file(out_path(c, "grid.geojson"), gj.str());
    write_file(out_path(c, "grid.csv"), gc.str());
    write_file(out_path(c, "map_report.txt"), rep.str());
    return out;
}

// ---------------------------------------------------------------------------------------
// hotspots

HotspotResult cmd_hotspots(const PipelineConfig& c)
{
    Provenance prov = provenance(c, "hotspots");
    std::vector<HotspotPoint> pts;
    if (c.hotspots_corrected) {
        const auto input = out_path(c, "corrected_mobile.csv");
        for (const auto& r : read_corrected_csv(input))
            if (std::isfinite(r.pm25_corrected))
                pts.push_back({{r.lat, r.lon}, r.pm25_corrected, r.run_id});
        prov.add_input(input);
    } else {
        pts = raw_hotspot_points(c);
        prov.add_input(c.mobile_lcs);
    }
    if (pts.empty())
        throw DataError("hotspots: no measurements");
    const auto result = detect_hotspots(pts, c.hotspots);
    std::ostringstream gj, cs, ps;
    write_hotspots_geojson(gj, result, prov);
    write_hotspots_csv(cs, result, prov);
    write_hotspot_points_csv(ps, result, pts, prov);
    write_file(out_path(c, "hotspots.geojson"), gj.str());
    write_file(out_path(c, "hotspots.csv"), cs.str());
    write_file(out_path(c, "hotspot_points.csv"), ps.str());
    return result;
}

// ---------------------------------------------------------------------------------------
// anova

void cmd_anova(const PipelineConfig& c)
{
    const auto input = out_path(c, "corrected_mobile.csv");
    const auto rows = read_corrected_csv(input);
    Provenance prov = provenance(c, "anova");
    prov.add_input(input);

    const auto n = static_cast<Eigen::Index>(rows.size());
    Eigen::VectorXd a(n), b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        a(i) = r.pm25_corrected;
        b(i) = r.research_corrected.value_or(std::numeric_limits<double>::quiet_NaN());
    }
    if (!b.array().isFinite().any())
        throw DataError("anova: corrected_mobile.csv has no research-grade values to compare against");

    std::vector<Factor> factors;
    for (const auto& name : c.anova_factors) {
        std::vector<std::optional<double>> num;
        std::vector<std::optional<std::string>> lev;
        for (const auto& r : rows) {
            if (name == "rh")
                num.emplace_back(r.rh);
            else if (name == "temp")
                num.emplace_back(r.temp);
            else if (name == "speed")
                num.push_back(r.speed);
            else if (name == "svf")
                num.push_back(r.svf);
            else if (name == "orientation")
                lev.emplace_back(to_string(r.orientation));
            else if (name == "day")
                lev.emplace_back(format_date(r.timestamp));
            else if (name == "hour") {
                char buf[3];
                std::snprintf(buf, sizeof buf, "%02d", utc_hour(r.timestamp));
                lev.emplace_back(buf);
            } else if (name == "road_class")
                lev.push_back(r.road_class ? std::optional<std::string>(std::to_string(*r.road_class)) : std::nullopt);
            else
                throw UsageError("anova: unknown factor '" + name + "'");
        }
        factors.push_back(num.empty() ? Factor::categorical(name, std::move(lev))
                                      : Factor::continuous(name, std::move(num)));
    }

    for (const auto mode : {ResponseMode::difference, ResponseMode::absolute_difference}) {
        const auto table = anova_sequential(build_response(a, b, mode), factors);
        std::ostringstream out;
        prov.write_csv_header(out);
        out << "# response: "
            << (mode == ResponseMode::difference ? "corrected LCS - corrected research-grade"
                                                 : "|corrected LCS - corrected research-grade|")
            << '\n'
            << "# rows_used: " << table.n_used << '\n'
            << "# rows_dropped: " << table.n_dropped << '\n';
        write_anova_csv(out, table);
        write_file(out_path(c, mode == ResponseMode::difference ? "anova_difference.csv"
                                                                : "anova_absolute_difference.csv"),
                   out.str());
    }
}

void cmd_run(const PipelineConfig& c)
{
    cmd_fit(c);
    cmd_transfer_eval(c);
    cmd_background(c);
    cmd_map(c);
    cmd_hotspots(c);
    if (!c.mobile_research.empty())
        cmd_anova(c);
}

// ---------------------------------------------------------------------------------------
// apply

void cmd_apply(const std::string& model_path, const std::string& input_path, const std::string& output_path,
               std::optional<Window> window, const PipelineConfig& c)
{
    require_file(model_path, "model");
    require_file(input_path, "input");
    const auto model = load_model(model_path);
    Provenance prov = provenance(c, "apply");
    prov.add_input(model_path);
    prov.add_input(input_path);

    std::vector<AlignedRecord> recs;
    for (auto& [device, rows] : by_device(load_with_dewpoint(input_path))) {
        if (window) {
            auto avg = average_window(std::move(rows), *window, c.min_samples);
            recs.insert(recs.end(), avg.begin(), avg.end());
        } else {
            for (const auto& m : rows) {
                AlignedRecord r;
                r.timestamp = m.timestamp;
                r.device_id = m.device_id;
                r.run_id = m.run_id;
                r.pm25 = m.pm25;
                r.rh = m.rh;
                r.temp = m.temp;
                r.dewpoint = m.dewpoint;
                r.sample_count = 1;
                recs.push_back(std::move(r));
            }
        }
    }
    std::vector<const AlignedRecord*> ptrs;
    for (const auto& r : recs)
        ptrs.push_back(&r);
    const Covariates cov = covariates_of(ptrs);
    const Eigen::VectorXd values = apply_rows(model, cov);

    std::ostringstream out;
    prov.write_csv_header(out);
    out << "# model: " << model.id.name() << " (" << model.training_device << ", "
        << to_string(model.training_window) << ")\n";
    out << "timestamp,device_id,run_id,pm25_raw,pm25_corrected\n";
    for (std::size_t i = 0; i < recs.size(); ++i) {
        double v = values(static_cast<Eigen::Index>(i));
        if (c.clip_negative && v < 0.0)
            v = 0.0;
        out << format_iso8601(recs[i].timestamp) << ',' << csv::escape(recs[i].device_id) << ','
            << csv::escape(recs[i].run_id) << ',' << csv::format_double(recs[i].pm25) << ','
            << csv::format_double(v) << '\n';
    }
    write_file(output_path, out.str());
}

} // namespace lcs
