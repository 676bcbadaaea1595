#include "lcs/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include "lcs/error.hpp"
#include "lcs/log.hpp"

namespace lcs {

namespace {

std::uint64_t splitmix64(std::uint64_t z)
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class TreeBuilder {
public:
    TreeBuilder(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ForestConfig& config)
        : X_(X), y_(y), config_(config), features_(static_cast<std::size_t>(X.cols()))
    {
        std::iota(features_.begin(), features_.end(), 0);
    }

    RegressionTree build(std::uint64_t seed, std::vector<std::uint16_t>& inbag)
    {
        std::mt19937_64 rng(seed);
        const auto n = static_cast<std::size_t>(X_.rows());
        std::uniform_int_distribution<std::size_t> draw(0, n - 1);
        index_.resize(n);
        inbag.assign(n, 0);
        for (auto& i : index_) {
            i = static_cast<std::uint32_t>(draw(rng));
            ++inbag[i];
        }

        RegressionTree tree;
        struct Pending {
            std::size_t node, begin, end;
        };
        std::vector<Pending> stack;
        tree.nodes.emplace_back();
        stack.push_back({0, 0, n});
        while (!stack.empty()) {
            const auto [node, begin, end] = stack.back();
            stack.pop_back();
            const auto split = find_split(begin, end, rng, tree.nodes[node]);
            if (!split)
                continue;
            const auto mid_it = std::partition(index_.begin() + static_cast<std::ptrdiff_t>(begin),
                                               index_.begin() + static_cast<std::ptrdiff_t>(end),
                                               [&](std::uint32_t i) { return X_(i, split->feature) <= split->threshold; });
            const auto mid = static_cast<std::size_t>(mid_it - index_.begin());
            const auto left = tree.nodes.size();
            tree.nodes.emplace_back();
            tree.nodes.emplace_back();
            auto& parent = tree.nodes[node];
            parent.feature = static_cast<std::int32_t>(split->feature);
            parent.threshold = split->threshold;
            parent.left = static_cast<std::int32_t>(left);
            parent.right = static_cast<std::int32_t>(left + 1);
            stack.push_back({left + 1, mid, end});
            stack.push_back({left, begin, mid});
        }
        return tree;
    }

private:
    struct Split {
        Eigen::Index feature;
        double threshold;
    };

    // Fills the node summary and returns the best variance-reducing split, if any.
    std::optional<Split> find_split(std::size_t begin, std::size_t end, std::mt19937_64& rng, TreeNode& node)
    {
        const auto count = end - begin;
        double sum = 0.0;
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (std::size_t k = begin; k < end; ++k) {
            const double v = y_(index_[k]);
            sum += v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        node.value = sum / static_cast<double>(count);
        node.size = static_cast<std::uint32_t>(count);
        if (count <= config_.min_node_size || lo == hi)
            return std::nullopt;

        // partial Fisher-Yates: the first m_try entries are the candidates
        const auto m_try = std::min(config_.m_try, features_.size());
        for (std::size_t j = 0; j < m_try; ++j) {
            std::uniform_int_distribution<std::size_t> pick(j, features_.size() - 1);
            std::swap(features_[j], features_[pick(rng)]);
        }

        const double parent_score = sum * sum / static_cast<double>(count);
        double best_score = parent_score;
        std::optional<Split> best;
        for (std::size_t j = 0; j < m_try; ++j) {
            const auto f = static_cast<Eigen::Index>(features_[j]);
            pairs_.clear();
            for (std::size_t k = begin; k < end; ++k)
                pairs_.emplace_back(X_(index_[k], f), y_(index_[k]));
            std::sort(pairs_.begin(), pairs_.end());
            double left_sum = 0.0;
            for (std::size_t k = 0; k + 1 < count; ++k) {
                left_sum += pairs_[k].second;
                if (pairs_[k].first == pairs_[k + 1].first)
                    continue;
                const auto nl = static_cast<double>(k + 1);
                const auto nr = static_cast<double>(count - k - 1);
                const double right_sum = sum - left_sum;
                // maximising sum_l^2/n_l + sum_r^2/n_r minimises the weighted child variance
                const double score = left_sum * left_sum / nl + right_sum * right_sum / nr;
                if (score > best_score) {
                    best_score = score;
                    double threshold = 0.5 * (pairs_[k].first + pairs_[k + 1].first);
                    if (!(threshold < pairs_[k + 1].first))
                        threshold = pairs_[k].first;
                    best = Split{f, threshold};
                }
            }
        }
        if (best && !(best_score > parent_score * (1.0 + 1e-14)))
            return std::nullopt;
        return best;
    }

    const Eigen::MatrixXd& X_;
    const Eigen::VectorXd& y_;
    const ForestConfig& config_;
    std::vector<std::size_t> features_;
    std::vector<std::uint32_t> index_;
    std::vector<std::pair<double, double>> pairs_;
};

void validate(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ForestConfig& config)
{
    if (X.rows() != y.size())
        throw DataError("fit_forest: " + std::to_string(X.rows()) + " predictor rows but " +
                        std::to_string(y.size()) + " targets");
    if (X.cols() < 1)
        throw DataError("fit_forest: no predictors");
    if (config.n_tree < 1 || config.min_node_size < 1)
        throw UsageError("fit_forest: n_tree and min_node_size must be positive");
    if (config.m_try < 1 || config.m_try > static_cast<std::size_t>(X.cols()))
        throw UsageError("fit_forest: m_try must lie in [1, " + std::to_string(X.cols()) + "]");
    if (static_cast<std::size_t>(X.rows()) < 2 * config.min_node_size)
        throw DataError("fit_forest: need at least " + std::to_string(2 * config.min_node_size) + " rows, got " +
                        std::to_string(X.rows()));
    if (!X.allFinite() || !y.allFinite())
        throw DataError("fit_forest: predictors and targets must be finite");
}

} // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index)
{
    return splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index);
}

Forest fit_forest(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ForestConfig& config)
{
    validate(X, y, config);
    Forest forest;
    forest.config = config;
    forest.n_features = static_cast<std::size_t>(X.cols());
    forest.y_min = y.minCoeff();
    forest.y_max = y.maxCoeff();
    forest.trees.resize(config.n_tree);
    forest.inbag_counts.resize(config.n_tree);

    const auto workers = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                                          static_cast<unsigned>(config.n_tree)));
    auto work = [&](unsigned w) {
        TreeBuilder builder(X, y, config);
        for (std::size_t t = w; t < config.n_tree; t += workers)
            forest.trees[t] = builder.build(derive_seed(config.seed, 0x7265u, t), forest.inbag_counts[t]);
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back(work, w);
    }
    return forest;
}

Eigen::VectorXd predict(const Forest& forest, const Eigen::MatrixXd& X)
{
    if (static_cast<std::size_t>(X.cols()) != forest.n_features)
        throw DataError("predict: forest expects " + std::to_string(forest.n_features) + " predictors, got " +
                        std::to_string(X.cols()));
    Eigen::VectorXd out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const auto row = X.row(i);
        double s = 0.0;
        for (const auto& tree : forest.trees)
            s += tree.predict(row);
        out(i) = std::clamp(s / static_cast<double>(forest.trees.size()), forest.y_min, forest.y_max);
    }
    return out;
}

double pseudo_r2(const Eigen::VectorXd& y, const Eigen::VectorXd& predictions)
{
    double mean = 0.0;
    std::size_t n = 0;
    for (Eigen::Index i = 0; i < y.size(); ++i)
        if (!std::isnan(predictions(i))) {
            mean += y(i);
            ++n;
        }
    if (n == 0)
        throw NumericalError("pseudo_r2: no predictions available");
    mean /= static_cast<double>(n);
    double sse = 0.0, sst = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i)
        if (!std::isnan(predictions(i))) {
            sse += (y(i) - predictions(i)) * (y(i) - predictions(i));
            sst += (y(i) - mean) * (y(i) - mean);
        }
    if (sst == 0.0)
        return sse == 0.0 ? 1.0 : -std::numeric_limits<double>::infinity();
    return 1.0 - sse / sst;
}

OobResult oob_evaluate(const Forest& forest, const Eigen::MatrixXd& X, const Eigen::VectorXd& y)
{
    const auto n = static_cast<std::size_t>(X.rows());
    if (forest.inbag_counts.size() != forest.trees.size())
        throw DataError("oob_evaluate: forest carries no in-bag record");
    std::vector<double> sum(n, 0.0);
    std::vector<std::size_t> count(n, 0);
    for (std::size_t t = 0; t < forest.trees.size(); ++t) {
        const auto& inbag = forest.inbag_counts[t];
        if (inbag.size() != n)
            throw DataError("oob_evaluate: data size does not match the training set");
        for (std::size_t i = 0; i < n; ++i)
            if (inbag[i] == 0) {
                sum[i] += forest.trees[t].predict(X.row(static_cast<Eigen::Index>(i)));
                ++count[i];
            }
    }
    OobResult r;
    r.predictions.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        if (count[i] == 0) {
            r.predictions(static_cast<Eigen::Index>(i)) = std::numeric_limits<double>::quiet_NaN();
            ++r.n_excluded;
        } else {
            r.predictions(static_cast<Eigen::Index>(i)) = sum[i] / static_cast<double>(count[i]);
        }
    }
    if (r.n_excluded > 0)
        warn("oob_evaluate: " + std::to_string(r.n_excluded) + " row(s) were in-bag for every tree and are excluded");
    r.pseudo_r2 = pseudo_r2(y, r.predictions);
    return r;
}

TuneResult tune_mtry(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ForestConfig& config,
                     std::size_t forests_per_candidate)
{
    const auto p = static_cast<std::size_t>(X.cols());
    TuneResult result;
    result.mean_pseudo_r2.assign(p, 0.0);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t m = 1; m <= p; ++m) {
        double total = 0.0;
        for (std::size_t r = 0; r < forests_per_candidate; ++r) {
            ForestConfig c = config;
            c.m_try = m;
            c.seed = derive_seed(config.seed, 0x6d747279u + m, r);
            const auto forest = fit_forest(X, y, c);
            total += oob_evaluate(forest, X, y).pseudo_r2;
        }
        const double mean = total / static_cast<double>(std::max<std::size_t>(forests_per_candidate, 1));
        result.mean_pseudo_r2[m - 1] = mean;
        if (mean > best) {
            best = mean;
            result.m_try = m;
        }
    }
    return result;
}

std::vector<std::vector<std::size_t>> make_folds(std::size_t n, std::size_t k, std::uint64_t seed,
                                                 const std::vector<std::int64_t>* groups)
{
    if (k < 2)
        throw UsageError("make_folds: k must be at least 2");
    if (n < k)
        throw DataError("make_folds: " + std::to_string(n) + " records cannot fill " + std::to_string(k) + " folds");
    std::mt19937_64 rng(derive_seed(seed, 0x666f6c64u, k));
    std::vector<std::vector<std::size_t>> folds(k);
    if (groups) {
        if (groups->size() != n)
            throw DataError("make_folds: group labels do not match the record count");
        std::vector<std::int64_t> labels(*groups);
        std::sort(labels.begin(), labels.end());
        labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
        if (labels.size() < k)
            throw DataError("make_folds: " + std::to_string(labels.size()) + " groups cannot fill " +
                            std::to_string(k) + " folds");
        std::shuffle(labels.begin(), labels.end(), rng);
        std::vector<std::pair<std::int64_t, std::size_t>> fold_of;
        for (std::size_t pos = 0; pos < labels.size(); ++pos)
            fold_of.emplace_back(labels[pos], pos % k);
        std::sort(fold_of.begin(), fold_of.end());
        for (std::size_t i = 0; i < n; ++i) {
            const auto it = std::lower_bound(fold_of.begin(), fold_of.end(), std::make_pair((*groups)[i], std::size_t{0}));
            folds[it->second].push_back(i);
        }
        return folds;
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t pos = 0; pos < n; ++pos)
        folds[pos % k].push_back(order[pos]);
    for (auto& f : folds)
        std::sort(f.begin(), f.end());
    return folds;
}

CvResult kfold_cv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::size_t k, const ForestConfig& config,
                  const std::vector<std::int64_t>* groups)
{
    const auto n = static_cast<std::size_t>(X.rows());
    CvResult result;
    result.folds = make_folds(n, k, config.seed, groups);
    result.predictions = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n),
                                                   std::numeric_limits<double>::quiet_NaN());
    std::vector<char> in_test(n);
    for (std::size_t f = 0; f < result.folds.size(); ++f) {
        const auto& test = result.folds[f];
        std::fill(in_test.begin(), in_test.end(), 0);
        for (auto i : test)
            in_test[i] = 1;
        std::vector<Eigen::Index> train;
        for (std::size_t i = 0; i < n; ++i)
            if (!in_test[i])
                train.push_back(static_cast<Eigen::Index>(i));
        std::vector<Eigen::Index> test_rows(test.begin(), test.end());
        ForestConfig c = config;
        c.seed = derive_seed(config.seed, 0x6376u, f);
        const auto forest = fit_forest(X(train, Eigen::all), y(train), c);
        const Eigen::VectorXd pred = predict(forest, X(test_rows, Eigen::all));
        result.predictions(test_rows) = pred;
        if (test.size() >= 2) {
            result.fold_metrics.push_back(metrics(pred, y(test_rows).eval()));
        } else {
            MetricPair m;
            m.n = test.size();
            m.rmse = test.empty() ? 0.0 : std::abs(pred(0) - y(test_rows[0]));
            result.fold_metrics.push_back(m);
        }
    }
    result.pooled = metrics(result.predictions, y);
    return result;
}

} // namespace lcs
