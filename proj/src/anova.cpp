#include "lcs/anova.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>

#include <boost/math/distributions/fisher_f.hpp>

#include "lcs/csv.hpp"
#include "lcs/error.hpp"
#include "lcs/log.hpp"

namespace lcs {

namespace {

// Orthonormal basis grown column by column in entry order. A column whose component
// orthogonal to the current basis is below `tolerance` of its norm is aliased and rejected.
class OrderedBasis {
public:
    OrderedBasis(Eigen::Index n, Eigen::Index max_cols) : q_(n, max_cols) {}

    /// Returns the squared effect y'q of the new direction, or nothing if aliased.
    std::optional<double> add(Eigen::VectorXd v, const Eigen::VectorXd& y, double tolerance = 1e-7)
    {
        const double norm0 = v.norm();
        if (!(norm0 > 0.0))
            return std::nullopt;
        for (int pass = 0; pass < 2; ++pass)
            for (Eigen::Index k = 0; k < rank_; ++k)
                v -= q_.col(k).dot(v) * q_.col(k);
        const double norm = v.norm();
        if (!(norm > tolerance * norm0))
            return std::nullopt;
        q_.col(rank_++) = v / norm;
        const double effect = q_.col(rank_ - 1).dot(y);
        return effect * effect;
    }

    Eigen::Index rank() const { return rank_; }

    Eigen::VectorXd residual(const Eigen::VectorXd& y) const
    {
        Eigen::VectorXd r = y;
        for (int pass = 0; pass < 2; ++pass)
            for (Eigen::Index k = 0; k < rank_; ++k)
                r -= q_.col(k).dot(r) * q_.col(k);
        return r;
    }

private:
    Eigen::MatrixXd q_;
    Eigen::Index rank_ = 0;
};

} // namespace

Eigen::VectorXd build_response(const Eigen::VectorXd& a, const Eigen::VectorXd& b, ResponseMode mode)
{
    if (a.size() != b.size())
        throw DataError("build_response: series lengths differ");
    Eigen::VectorXd d = a - b;
    if (mode == ResponseMode::absolute_difference)
        d = d.cwiseAbs();
    return d;
}

Factor Factor::continuous(std::string name, std::vector<std::optional<double>> values)
{
    Factor f;
    f.name = std::move(name);
    f.kind = Kind::continuous;
    f.numeric = std::move(values);
    return f;
}

Factor Factor::categorical(std::string name, std::vector<std::optional<std::string>> values)
{
    Factor f;
    f.name = std::move(name);
    f.kind = Kind::categorical;
    f.levels = std::move(values);
    return f;
}

bool Factor::missing(std::size_t row) const
{
    if (kind == Kind::continuous)
        return !numeric[row] || !std::isfinite(*numeric[row]);
    return !levels[row];
}

AnovaTable anova_sequential(const Eigen::VectorXd& response, const std::vector<Factor>& factors, double alpha)
{
    const auto n_all = static_cast<std::size_t>(response.size());
    for (const auto& f : factors)
        if (f.size() != n_all)
            throw DataError("anova: factor '" + f.name + "' has " + std::to_string(f.size()) + " values for " +
                            std::to_string(n_all) + " responses");

    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < n_all; ++i) {
        bool ok = std::isfinite(response(static_cast<Eigen::Index>(i)));
        for (const auto& f : factors)
            ok = ok && !f.missing(i);
        if (ok)
            keep.push_back(i);
    }
    AnovaTable table;
    table.n_used = keep.size();
    table.n_dropped = n_all - keep.size();
    if (table.n_dropped > 0)
        warn("anova: dropped " + std::to_string(table.n_dropped) + " of " + std::to_string(n_all) +
             " rows with missing factor values");
    if (keep.size() < 2)
        throw DataError("anova: fewer than 2 complete rows");
    const auto n = static_cast<Eigen::Index>(keep.size());

    Eigen::VectorXd y(n);
    for (Eigen::Index r = 0; r < n; ++r)
        y(r) = response(static_cast<Eigen::Index>(keep[static_cast<std::size_t>(r)]));

    std::vector<Eigen::MatrixXd> blocks;
    Eigen::Index total_cols = 1;
    for (const auto& f : factors) {
        Eigen::MatrixXd block;
        if (f.kind == Factor::Kind::continuous) {
            block.resize(n, 1);
            for (Eigen::Index r = 0; r < n; ++r)
                block(r, 0) = *f.numeric[keep[static_cast<std::size_t>(r)]];
        } else {
            std::map<std::string, Eigen::Index> level_index;
            for (auto i : keep)
                level_index.emplace(*f.levels[i], 0);
            Eigen::Index next = 0;
            for (auto& [level, idx] : level_index)
                idx = next++;
            block = Eigen::MatrixXd::Zero(n, std::max<Eigen::Index>(next - 1, 0));
            for (Eigen::Index r = 0; r < n; ++r) {
                const auto idx = level_index.at(*f.levels[keep[static_cast<std::size_t>(r)]]);
                if (idx > 0)
                    block(r, idx - 1) = 1.0;
            }
        }
        total_cols += block.cols();
        blocks.push_back(std::move(block));
    }

    OrderedBasis basis(n, total_cols);
    basis.add(Eigen::VectorXd::Ones(n), y);
    table.total_ss = basis.residual(y).squaredNorm();
    for (std::size_t k = 0; k < factors.size(); ++k) {
        AnovaRow row;
        row.factor = factors[k].name;
        for (Eigen::Index j = 0; j < blocks[k].cols(); ++j)
            if (const auto effect = basis.add(blocks[k].col(j), y)) {
                row.ss += *effect;
                ++row.df;
            }
        if (row.df == 0)
            warn("anova: factor '" + row.factor + "' adds no information after the preceding factors (collinear)");
        table.rows.push_back(row);
    }
    table.residual_ss = basis.residual(y).squaredNorm();
    table.residual_df = static_cast<std::size_t>(n - basis.rank());

    const double ms_res =
        table.residual_df > 0 ? table.residual_ss / static_cast<double>(table.residual_df) : 0.0;
    for (auto& row : table.rows) {
        row.percent = table.total_ss > 0.0 ? 100.0 * row.ss / table.total_ss : 0.0;
        if (row.df > 0 && table.residual_df > 0 && ms_res > 0.0) {
            const double f = std::max(row.ss, 0.0) / static_cast<double>(row.df) / ms_res;
            row.f = f;
            const boost::math::fisher_f_distribution<double> dist(static_cast<double>(row.df),
                                                                  static_cast<double>(table.residual_df));
            row.p = boost::math::cdf(boost::math::complement(dist, f));
            row.significant = *row.p < alpha;
        }
    }
    table.residual_percent = table.total_ss > 0.0 ? 100.0 * table.residual_ss / table.total_ss : 0.0;
    return table;
}

std::vector<std::string> default_factor_order(bool include_road_class)
{
    std::vector<std::string> order = {"orientation", "rh", "temp", "speed", "svf", "day", "hour"};
    if (include_road_class)
        order.push_back("road_class");
    return order;
}

void write_anova_csv(std::ostream& out, const AnovaTable& table)
{
    auto opt = [](const std::optional<double>& v) { return v ? csv::format_double(*v) : std::string(); };
    out << "factor,df,sum_sq,percent,f,p,sig\n";
    for (const auto& r : table.rows)
        out << csv::escape(r.factor) << ',' << r.df << ',' << csv::format_double(r.ss) << ','
            << csv::format_double(r.percent) << ',' << opt(r.f) << ',' << opt(r.p) << ','
            << (r.significant ? "*" : "") << '\n';
    out << "residuals," << table.residual_df << ',' << csv::format_double(table.residual_ss) << ','
        << csv::format_double(table.residual_percent) << ",,,\n";
    out << "total," << (table.n_used > 0 ? table.n_used - 1 : 0) << ',' << csv::format_double(table.total_ss)
        << ",100,,,\n";
}

} // namespace lcs
