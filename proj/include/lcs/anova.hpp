#ifndef LCS_ANOVA_HPP
#define LCS_ANOVA_HPP

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lcs {

enum class ResponseMode { difference, absolute_difference };

Eigen::VectorXd build_response(const Eigen::VectorXd& a, const Eigen::VectorXd& b, ResponseMode mode);

/// An explanatory factor. Continuous factors enter with one degree of freedom;
/// categorical factors as treatment-coded dummies (levels - 1 columns, first sorted
/// level as baseline). Missing values drop the row listwise.
struct Factor {
    enum class Kind { continuous, categorical };

    std::string name;
    Kind kind = Kind::continuous;
    std::vector<std::optional<double>> numeric;
    std::vector<std::optional<std::string>> levels;

    static Factor continuous(std::string name, std::vector<std::optional<double>> values);
    static Factor categorical(std::string name, std::vector<std::optional<std::string>> values);

    std::size_t size() const { return kind == Kind::continuous ? numeric.size() : levels.size(); }
    bool missing(std::size_t row) const;
};

struct AnovaRow {
    std::string factor;
    std::size_t df = 0;
    double ss = 0.0;
    double percent = 0.0;
    std::optional<double> f;
    std::optional<double> p;
    bool significant = false;
};

struct AnovaTable {
    std::vector<AnovaRow> rows; ///< in entry order
    std::size_t residual_df = 0;
    double residual_ss = 0.0;
    double residual_percent = 0.0;
    double total_ss = 0.0;
    std::size_t n_used = 0;
    std::size_t n_dropped = 0;
};

/// Sequential (type I) sums of squares: each factor's SS is the drop in residual SS when
/// it is added after all earlier factors. A factor that adds no rank gets SS = 0, df = 0
/// and a collinearity warning.
AnovaTable anova_sequential(const Eigen::VectorXd& response, const std::vector<Factor>& factors,
                            double alpha = 0.05);

/// Column order of the published factor table; road class last when requested.
std::vector<std::string> default_factor_order(bool include_road_class = false);

/// CSV with a trailing "sig" column holding "*" for p < alpha.
void write_anova_csv(std::ostream& out, const AnovaTable& table);

} // namespace lcs

#endif // LCS_ANOVA_HPP
