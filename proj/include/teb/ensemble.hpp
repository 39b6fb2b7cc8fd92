#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "teb/feature.hpp"
#include "teb/rng.hpp"
#include "teb/tree.hpp"

namespace teb {

enum class Trainer { Bagging, Boosting };

inline std::string trainer_name(Trainer t) {
    return t == Trainer::Bagging ? "bagging" : "boosting";
}

struct EnsembleConfig {
    int n_trees = 100;
    int max_depth = 10;
    Trainer trainer = Trainer::Bagging;
    double learning_rate = 0.3;  // boosting
    /// Boosting base score; NaN means "use the training target mean".
    double base_score = std::numeric_limits<double>::quiet_NaN();
    double bag_fraction = 1.0;   // bagging resample size as a fraction of |data|
    bool bootstrap = true;       // false: without replacement (test hook)
    /// Fraction of features offered to each bagged tree; 0 means ceil(sqrt(d)).
    double feature_fraction = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_trees < 1) throw std::invalid_argument("EnsembleConfig: n_trees must be >= 1");
        if (max_depth < 0) throw std::invalid_argument("EnsembleConfig: max_depth must be >= 0");
        if (trainer == Trainer::Boosting &&
            !(learning_rate > 0.0 && learning_rate <= 1.0))
            throw std::invalid_argument("EnsembleConfig: learning_rate must be in (0, 1]");
        if (!(bag_fraction > 0.0 && bag_fraction <= 1.0))
            throw std::invalid_argument("EnsembleConfig: bag_fraction must be in (0, 1]");
        if (feature_fraction != 0.0 &&
            !(feature_fraction > 0.0 && feature_fraction <= 1.0))
            throw std::invalid_argument(
                "EnsembleConfig: feature_fraction must be 0 (auto) or in (0, 1]");
    }
};

/// Aggregated prediction for one context: mean, variance, and the total
/// number of training contributions behind it.
struct ArmPosterior {
    double mu = 0.0;
    double var = 0.0;
    long long count = 0;
};

/// A fitted forest or boosted ensemble. Tree structure is frozen after
/// fitting; leaf statistics admit incremental single-writer updates.
struct EnsembleModel {
    std::vector<RegressionTree> trees;
    EnsembleConfig config;
    double base_score = 0.0;  // resolved value; 0 for bagging
    FeatureSchema schema;
};

namespace detail {

// Routes every sample and collapses any leaf that ends up with fewer than
// two of them, so the variance is defined everywhere. Collapsing promotes
// the sibling subtree; a deficient root leaf is unrecoverable.
inline void repair_deficient_leaves(RegressionTree& tree,
                                    std::span<const Sample> data) {
    for (;;) {
        std::vector<long long> counts(tree.nodes().size(), 0);
        for (const Sample& s : data) ++counts[tree.assign_leaf(s.x)];
        int deficient = -1;
        for (int i = 0; i < static_cast<int>(tree.nodes().size()); ++i) {
            if (tree.nodes()[i].is_leaf && counts[i] < TreeConfig::kMinLeaf) {
                deficient = i;
                break;
            }
        }
        if (deficient < 0) return;
        if (tree.nodes().size() == 1)
            throw std::runtime_error(
                "set_leaf_values: root leaf received fewer than two samples");
        tree.collapse_leaf(deficient);
    }
}

inline std::vector<Sample> resample(std::span<const Sample> data, std::size_t size,
                                    bool with_replacement, RandomSource& rng) {
    std::vector<Sample> out;
    out.reserve(size);
    if (with_replacement) {
        for (std::size_t k = 0; k < size; ++k) out.push_back(data[rng.index(data.size())]);
    } else {
        for (std::size_t i : rng.sample_without_replacement(data.size(), size))
            out.push_back(data[i]);
    }
    return out;
}

inline std::vector<int> feature_subset(const FeatureSchema& schema,
                                       double fraction, RandomSource& rng) {
    const int d = schema.total_features();
    int k;
    if (fraction == 0.0)
        k = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(d))));
    else
        k = static_cast<int>(std::ceil(fraction * d));
    k = std::max(1, std::min(k, d));
    std::vector<std::size_t> chosen = rng.sample_without_replacement(d, k);
    std::vector<int> out(chosen.begin(), chosen.end());
    return out;
}

}  // namespace detail

/// Re-estimates every leaf's (mean, variance, count) from `data`: each sample
/// routed to a leaf contributes its target scaled by the tree weight 1/N.
inline void set_leaf_values_rf(EnsembleModel& model, std::span<const Sample> data) {
    if (model.config.trainer != Trainer::Bagging)
        throw std::logic_error("set_leaf_values_rf: model was not trained by bagging");
    for (auto& tree : model.trees) detail::repair_deficient_leaves(tree, data);
    const double weight = 1.0 / static_cast<double>(model.trees.size());
    for (auto& tree : model.trees) tree.reset_leaf_stats();
    for (const Sample& s : data) {
        const double contribution = s.target * weight;
        for (auto& tree : model.trees)
            tree.update_leaf(tree.assign_leaf(s.x), contribution);
    }
}

/// Re-estimates leaf statistics from `data` using staged predictions: the
/// contribution recorded at tree n's leaf is the learning-rate-scaled
/// residual against the prediction of trees 1..n-1. One forward sweep per
/// sample; the running prefix prediction is carried along instead of being
/// recomputed from scratch for each tree.
inline void set_leaf_values_gbdt(EnsembleModel& model, std::span<const Sample> data) {
    if (model.config.trainer != Trainer::Boosting)
        throw std::logic_error("set_leaf_values_gbdt: model was not trained by boosting");
    for (auto& tree : model.trees) detail::repair_deficient_leaves(tree, data);
    for (auto& tree : model.trees) tree.reset_leaf_stats();
    const double eta = model.config.learning_rate;
    for (const Sample& s : data) {
        double prefix = model.base_score;
        for (auto& tree : model.trees) {
            const int leaf = tree.assign_leaf(s.x);
            tree.update_leaf(leaf, eta * (s.target - prefix));
            prefix += tree.leaf_raw_value(leaf);
        }
    }
}

/// Bagged forest: each tree is fitted on a bootstrap resample over a random
/// feature subset, then leaf values are re-estimated on the full dataset.
inline EnsembleModel fit_random_forest(std::span<const Sample> data,
                                       const FeatureSchema& schema,
                                       const EnsembleConfig& config) {
    config.validate();
    if (config.trainer != Trainer::Bagging)
        throw std::logic_error("fit_random_forest: config.trainer must be bagging");
    if (data.size() < 4)
        throw std::invalid_argument("fit_random_forest: insufficient samples");

    EnsembleModel model;
    model.config = config;
    model.schema = schema;
    model.base_score = 0.0;
    model.trees.reserve(config.n_trees);

    RandomSource rng(config.seed);
    const std::size_t bag_size = std::max<std::size_t>(
        2 * TreeConfig::kMinLeaf,
        static_cast<std::size_t>(std::llround(config.bag_fraction *
                                              static_cast<double>(data.size()))));
    for (int n = 0; n < config.n_trees; ++n) {
        TreeConfig tree_config;
        tree_config.max_depth = config.max_depth;
        tree_config.allowed_features = detail::feature_subset(
            schema, config.feature_fraction, rng);
        std::vector<Sample> bag =
            detail::resample(data, bag_size, config.bootstrap, rng);
        model.trees.push_back(fit_tree(bag, schema, tree_config));
    }
    set_leaf_values_rf(model, data);
    return model;
}

/// Gradient-boosted ensemble under squared loss: tree n is fitted to the
/// residuals of the prefix prediction, its leaves store the learning-rate-
/// scaled mean residual, and leaf statistics are then populated by
/// set_leaf_values_gbdt on the same data.
inline EnsembleModel fit_gbdt(std::span<const Sample> data,
                              const FeatureSchema& schema,
                              const EnsembleConfig& config) {
    config.validate();
    if (config.trainer != Trainer::Boosting)
        throw std::logic_error("fit_gbdt: config.trainer must be boosting");
    if (data.size() < 4)
        throw std::invalid_argument("fit_gbdt: insufficient samples");

    EnsembleModel model;
    model.config = config;
    model.schema = schema;
    if (std::isnan(config.base_score)) {
        double sum = 0.0;
        for (const Sample& s : data) sum += s.target;
        model.base_score = sum / static_cast<double>(data.size());
    } else {
        model.base_score = config.base_score;
    }

    std::vector<Sample> residuals(data.begin(), data.end());
    for (Sample& s : residuals) s.target -= model.base_score;

    TreeConfig tree_config;
    tree_config.max_depth = config.max_depth;
    const double eta = config.learning_rate;
    model.trees.reserve(config.n_trees);
    for (int n = 0; n < config.n_trees; ++n) {
        RegressionTree tree = fit_tree(residuals, schema, tree_config);
        // Scale the fitted leaf means by the learning rate; these frozen
        // values are what staged predictions read.
        for (int leaf : tree.leaf_ids())
            tree.mutable_nodes()[leaf].raw_value =
                eta * tree.leaf_stats(leaf).mean();
        for (Sample& s : residuals)
            s.target -= tree.leaf_raw_value(tree.assign_leaf(s.x));
        model.trees.push_back(std::move(tree));
    }
    set_leaf_values_gbdt(model, data);
    return model;
}

inline EnsembleModel fit_ensemble(std::span<const Sample> data,
                                  const FeatureSchema& schema,
                                  const EnsembleConfig& config) {
    return config.trainer == Trainer::Bagging
               ? fit_random_forest(data, schema, config)
               : fit_gbdt(data, schema, config);
}

/// Sum of per-tree leaf outputs (forest leaves are pre-weighted by 1/N),
/// plus the base score for boosted models.
inline double predict(const EnsembleModel& model, const FeatureVector& x) {
    double total = model.config.trainer == Trainer::Boosting ? model.base_score : 0.0;
    for (const auto& tree : model.trees)
        total += tree.leaf_stats(tree.assign_leaf(x)).mean();
    return total;
}

/// Aggregated mean/variance/count across the leaves x is routed to, treating
/// tree outputs as independent averages: mu adds each leaf mean, var adds
/// each leaf's variance-of-the-mean s^2/c, count adds each leaf count.
inline ArmPosterior posterior(const EnsembleModel& model, const FeatureVector& x) {
    ArmPosterior p;
    p.mu = model.config.trainer == Trainer::Boosting ? model.base_score : 0.0;
    for (const auto& tree : model.trees) {
        const LeafStats& stats = tree.leaf_stats(tree.assign_leaf(x));
        if (stats.count < 2)
            throw std::runtime_error("posterior: undefined leaf variance (count < 2)");
        p.mu += stats.mean();
        p.var += stats.variance() / static_cast<double>(stats.count);
        p.count += stats.count;
    }
    return p;
}

/// Incremental path: routes one observation through every tree and folds it
/// into the assigned leaves without touching tree structure. Bagging adds
/// reward/N per leaf; boosting adds the staged residual computed against the
/// frozen fitted leaf values, the same arithmetic as the batch sweep.
inline void add_observation(EnsembleModel& model, const FeatureVector& x, double reward) {
    if (!std::isfinite(reward))
        throw std::invalid_argument("add_observation: non-finite reward");
    if (model.config.trainer == Trainer::Bagging) {
        const double contribution = reward / static_cast<double>(model.trees.size());
        for (auto& tree : model.trees)
            tree.update_leaf(tree.assign_leaf(x), contribution);
    } else {
        const double eta = model.config.learning_rate;
        double prefix = model.base_score;
        for (auto& tree : model.trees) {
            const int leaf = tree.assign_leaf(x);
            tree.update_leaf(leaf, eta * (reward - prefix));
            prefix += tree.leaf_raw_value(leaf);
        }
    }
}

}  // namespace teb
