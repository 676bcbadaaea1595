#ifndef LCS_FOREST_HPP
#define LCS_FOREST_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "lcs/metrics.hpp"

namespace lcs {

struct ForestConfig {
    std::size_t n_tree = 500;
    std::size_t m_try = 1;
    /// Nodes with this many rows or fewer are never split.
    std::size_t min_node_size = 5;
    std::uint64_t seed = 1;
};

struct TreeNode {
    std::int32_t feature = -1; ///< -1 marks a leaf
    double threshold = 0.0;    ///< rows with x[feature] <= threshold go left
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0; ///< mean training target of the node
    std::uint32_t size = 0;

    bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
    std::vector<TreeNode> nodes; ///< nodes[0] is the root

    template <typename Row>
    double predict(const Row& x) const
    {
        std::size_t k = 0;
        while (!nodes[k].is_leaf())
            k = static_cast<std::size_t>(x(nodes[k].feature) <= nodes[k].threshold ? nodes[k].left : nodes[k].right);
        return nodes[k].value;
    }
};

struct Forest {
    ForestConfig config;
    std::size_t n_features = 0;
    double y_min = 0.0;
    double y_max = 0.0;
    std::vector<RegressionTree> trees;
    /// Bootstrap multiplicity of each training row, per tree. Empty for deserialised forests.
    std::vector<std::vector<std::uint16_t>> inbag_counts;
};

/// Counter-based seed derivation (SplitMix64 finaliser over the mixed inputs).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index);

/// Fits a regression forest on the rows of X. Deterministic for a given config.seed,
/// independent of thread scheduling.
Forest fit_forest(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ForestConfig& config);

/// Mean of per-tree leaf values, clamped to the training target range.
Eigen::VectorXd predict(const Forest& forest, const Eigen::MatrixXd& X);

struct OobResult {
    double pseudo_r2 = 0.0;
    /// NaN for rows that were in-bag for every tree.
    Eigen::VectorXd predictions;
    std::size_t n_excluded = 0;
};

/// Out-of-bag predictions on the training data and the resulting pseudo R².
OobResult oob_evaluate(const Forest& forest, const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

/// 1 - SSE/SST over the non-NaN predictions.
double pseudo_r2(const Eigen::VectorXd& y, const Eigen::VectorXd& predictions);

struct TuneResult {
    std::size_t m_try = 1;
    std::vector<double> mean_pseudo_r2; ///< indexed by m_try - 1
};

/// Trains `forests_per_candidate` forests for each m_try in 1..p and picks the largest
/// mean OOB pseudo R², preferring the smaller m_try on ties.
TuneResult tune_mtry(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ForestConfig& config,
                     std::size_t forests_per_candidate = 10);

/// Seeded near-equal partition of 0..n-1 into k folds. With `groups`, whole groups are
/// assigned to folds instead of single rows.
std::vector<std::vector<std::size_t>> make_folds(std::size_t n, std::size_t k, std::uint64_t seed,
                                                 const std::vector<std::int64_t>* groups = nullptr);

struct CvResult {
    std::vector<std::vector<std::size_t>> folds;
    std::vector<MetricPair> fold_metrics;
    Eigen::VectorXd predictions; ///< pooled out-of-fold predictions
    MetricPair pooled;
};

CvResult kfold_cv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::size_t k, const ForestConfig& config,
                  const std::vector<std::int64_t>* groups = nullptr);

} // namespace lcs

#endif // LCS_FOREST_HPP
