#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "teb/ensemble.hpp"
#include "teb/feature.hpp"
#include "teb/linalg.hpp"
#include "teb/rng.hpp"
#include "teb/tree.hpp"

namespace teb {

/// Ridge regression state for one linear arm: A = lambda*I + sum x x^T and
/// b = sum r x, with theta = A^{-1} b. A is tracked through its Cholesky
/// factor, so scoring and sampling are triangular solves; the dense matrix
/// is also kept for dumps and positive-definiteness checks.
class LinearArmModel {
public:
    LinearArmModel() = default;

    LinearArmModel(int dim, double lambda)
        : dim_(dim), lambda_(lambda), chol_(dim, lambda),
          a_(dim * dim, 0.0), b_(dim, 0.0) {
        if (!(lambda > 0.0))
            throw std::invalid_argument("LinearArmModel: lambda must be > 0");
        for (int i = 0; i < dim; ++i) a_[i * dim + i] = lambda;
    }

    int dim() const { return dim_; }
    double lambda() const { return lambda_; }
    long long observations() const { return observations_; }
    const std::vector<double>& design_matrix() const { return a_; }
    const std::vector<double>& reward_vector() const { return b_; }
    const CholeskyFactor& factor() const { return chol_; }

    void update(std::span<const double> x, double reward) {
        check(x);
        if (!std::isfinite(reward))
            throw std::invalid_argument("LinearArmModel: non-finite reward");
        chol_.rank_one_update(x);
        for (int i = 0; i < dim_; ++i) {
            b_[i] += reward * x[i];
            for (int j = 0; j < dim_; ++j) a_[i * dim_ + j] += x[i] * x[j];
        }
        theta_.reset();
        ++observations_;
    }

    const std::vector<double>& theta() const {
        if (!theta_) theta_ = chol_.solve(b_);
        return *theta_;
    }

    double mean(std::span<const double> x) const {
        check(x);
        return dot(theta(), x);
    }

    double confidence_width(std::span<const double> x) const {
        check(x);
        return std::sqrt(chol_.quadform_inv(x));
    }

    /// theta_tilde ~ N(theta, v^2 A^{-1}); one draw of the full coefficient
    /// vector, so all arms scored against it in a round share the draw.
    std::vector<double> sample_theta(double v, RandomSource& rng) const {
        std::vector<double> z(dim_);
        for (auto& zi : z) zi = rng.normal();
        std::vector<double> perturb = chol_.solve_upper(z);
        std::vector<double> out = theta();
        for (int i = 0; i < dim_; ++i) out[i] += v * perturb[i];
        return out;
    }

private:
    void check(std::span<const double> x) const {
        if (static_cast<int>(x.size()) != dim_)
            throw std::invalid_argument("LinearArmModel: dimension mismatch");
    }

    int dim_ = 0;
    double lambda_ = 1.0;
    CholeskyFactor chol_;
    std::vector<double> a_;
    std::vector<double> b_;
    long long observations_ = 0;
    mutable std::optional<std::vector<double>> theta_;
};

/// theta^T x + alpha * sqrt(x^T A^{-1} x).
inline double linucb_score(const LinearArmModel& m, std::span<const double> x,
                           double alpha) {
    return m.mean(x) + alpha * m.confidence_width(x);
}

/// Draws theta_tilde ~ N(theta, v^2 A^{-1}) and returns theta_tilde^T x.
inline double lints_sample(const LinearArmModel& m, std::span<const double> x,
                           double v, RandomSource& rng) {
    if (v == 0.0) return m.mean(x);
    return dot(m.sample_theta(v, rng), x);
}

/// Sample-mean/variance confidence bound for a non-contextual arm:
/// mean + sqrt(16 * var * ln(t-1) / m). The arm must have been played twice.
inline double ucb1_normal_score(double sample_mean, double sample_var,
                                long long m, long long t) {
    if (m < 2) throw std::invalid_argument("ucb1_normal_score: arm must be played twice");
    if (t < 2) throw std::invalid_argument("ucb1_normal_score: t must be >= 2");
    if (sample_var <= 0.0) return sample_mean;
    return sample_mean + std::sqrt(16.0 * sample_var *
                                   std::log(static_cast<double>(t - 1)) /
                                   static_cast<double>(m));
}

/// Running reward statistics of one non-contextual arm.
struct RewardStats {
    long long plays = 0;
    double sum = 0.0;
    double sum_sq = 0.0;

    void add(double r) { ++plays; sum += r; sum_sq += r * r; }

    double mean() const { return plays > 0 ? sum / static_cast<double>(plays) : 0.0; }

    double variance() const {
        if (plays < 2) return 0.0;
        const double c = static_cast<double>(plays);
        const double v = (sum_sq - sum * sum / c) / (c - 1.0);
        return v > 0.0 ? v : 0.0;
    }
};

enum class TreeBackend { SingleTree, Forest, Boosted };

inline std::string tree_backend_name(TreeBackend b) {
    switch (b) {
        case TreeBackend::SingleTree: return "dt";
        case TreeBackend::Forest: return "rf";
        default: return "gbdt";
    }
}

/// One arm's model for the bootstrap-resampling tree baseline: the arm's own
/// history, refitted on a fresh bootstrap resample whenever asked. Histories
/// smaller than the tree fitter's minimum fall back to a constant predictor,
/// which for a single point reproduces that point's reward exactly.
class PerArmTreeModel {
public:
    PerArmTreeModel() = default;
    PerArmTreeModel(int arm, FeatureSchema schema, TreeBackend backend,
                    EnsembleConfig ensemble)
        : arm_(arm), schema_(std::move(schema)), backend_(backend),
          ensemble_(ensemble) {}

    int arm() const { return arm_; }
    bool played() const { return !history_.empty(); }
    std::size_t history_size() const { return history_.size(); }

    void add(const FeatureVector& x, double reward) {
        history_.push_back(Sample{x, reward});
    }

    void refit(RandomSource& rng) {
        if (history_.empty())
            throw std::logic_error("PerArmTreeModel: refit before any observation");
        std::vector<Sample> bag;
        bag.reserve(history_.size());
        for (std::size_t k = 0; k < history_.size(); ++k)
            bag.push_back(history_[rng.index(history_.size())]);
        if (bag.size() < 4) {
            double sum = 0.0;
            for (const Sample& s : bag) sum += s.target;
            constant_ = sum / static_cast<double>(bag.size());
            tree_.reset();
            model_.reset();
            return;
        }
        constant_.reset();
        if (backend_ == TreeBackend::SingleTree) {
            TreeConfig cfg;
            cfg.max_depth = kUnboundedDepth;
            tree_ = fit_tree(bag, schema_, cfg);
            model_.reset();
        } else {
            EnsembleConfig cfg = ensemble_;
            cfg.trainer = backend_ == TreeBackend::Forest ? Trainer::Bagging
                                                          : Trainer::Boosting;
            cfg.seed = rng.next_u64();
            model_ = fit_ensemble(bag, schema_, cfg);
            tree_.reset();
        }
    }

    bool has_fit() const { return constant_ || tree_ || model_; }

    double predict_reward(const FeatureVector& x) const {
        if (constant_) return *constant_;
        if (tree_) return tree_->leaf_stats(tree_->assign_leaf(x)).mean();
        if (model_) return predict(*model_, x);
        throw std::logic_error("PerArmTreeModel: predict before refit");
    }

private:
    static constexpr int kUnboundedDepth = 64;

    int arm_ = 0;
    FeatureSchema schema_;
    TreeBackend backend_ = TreeBackend::SingleTree;
    EnsembleConfig ensemble_;
    std::vector<Sample> history_;
    std::optional<double> constant_;
    std::optional<RegressionTree> tree_;
    std::optional<EnsembleModel> model_;
};

/// One decision round of the per-arm bootstrap baseline: any never-played arm
/// is selected outright (lowest index first); otherwise every arm refits on a
/// fresh bootstrap resample of its own history and the best predicted reward
/// wins, ties broken uniformly.
inline int treebootstrap_select(std::vector<PerArmTreeModel>& models,
                                std::span<const FeatureVector> contexts,
                                RandomSource& rng, bool refit = true) {
    if (models.empty() || models.size() != contexts.size())
        throw std::invalid_argument("treebootstrap_select: arm/context mismatch");
    for (std::size_t a = 0; a < models.size(); ++a)
        if (!models[a].played()) return static_cast<int>(a);

    std::vector<double> scores(models.size());
    for (std::size_t a = 0; a < models.size(); ++a) {
        if (refit || !models[a].has_fit()) models[a].refit(rng);
        scores[a] = models[a].predict_reward(contexts[a]);
    }
    double best = scores[0];
    for (double s : scores) best = std::max(best, s);
    std::vector<int> ties;
    for (std::size_t a = 0; a < scores.size(); ++a)
        if (scores[a] == best) ties.push_back(static_cast<int>(a));
    return ties.size() == 1 ? ties[0] : ties[rng.index(ties.size())];
}

}  // namespace teb
