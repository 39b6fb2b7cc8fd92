#pragma once

// Test-only reference implementations. Each one recomputes a quantity the
// library produces incrementally or with caching, using the most naive
// method available, so the two paths stay independent.

#include <cmath>
#include <map>
#include <vector>

#include "teb/ensemble.hpp"
#include "teb/tree.hpp"

namespace teb::oracles {

struct NaiveStats {
    double mean = 0.0;
    double variance = 0.0;  // unbiased; 0 when fewer than two values
    long long count = 0;
};

/// Two-pass mean/variance over an explicit value list.
inline NaiveStats naive_stats(const std::vector<double>& values) {
    NaiveStats out;
    out.count = static_cast<long long>(values.size());
    if (values.empty()) return out;
    double sum = 0.0;
    for (double v : values) sum += v;
    out.mean = sum / static_cast<double>(values.size());
    if (values.size() < 2) return out;
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.variance = ss / static_cast<double>(values.size() - 1);
    return out;
}

/// Routes every sample through the tree and recomputes each leaf's stats
/// from the explicit list of contributions `contribution(sample)`.
template <typename ContributionFn>
std::map<int, NaiveStats> brute_force_leaf_stats(const RegressionTree& tree,
                                                 const std::vector<Sample>& samples,
                                                 ContributionFn contribution) {
    std::map<int, std::vector<double>> per_leaf;
    for (const Sample& s : samples)
        per_leaf[tree.assign_leaf(s.x)].push_back(contribution(s));
    std::map<int, NaiveStats> out;
    for (const auto& [leaf, values] : per_leaf) out[leaf] = naive_stats(values);
    return out;
}

/// Prefix-ensemble prediction recomputed from scratch: base score plus the
/// frozen fitted leaf values of trees [0, n_trees).
inline double naive_prefix_prediction(const EnsembleModel& model,
                                      const FeatureVector& x, int n_trees) {
    double p = model.base_score;
    for (int n = 0; n < n_trees; ++n) {
        const auto& tree = model.trees[n];
        p += tree.leaf_raw_value(tree.assign_leaf(x));
    }
    return p;
}

/// Per-(tree, leaf) contribution lists for a boosted model, rebuilt by
/// re-evaluating every prefix ensemble per sample (quadratic on purpose).
inline std::vector<std::map<int, std::vector<double>>> naive_gbdt_contributions(
    const EnsembleModel& model, const std::vector<Sample>& data) {
    std::vector<std::map<int, std::vector<double>>> per_tree(model.trees.size());
    const double eta = model.config.learning_rate;
    for (const Sample& s : data) {
        for (std::size_t n = 0; n < model.trees.size(); ++n) {
            const double prefix =
                naive_prefix_prediction(model, s.x, static_cast<int>(n));
            const int leaf = model.trees[n].assign_leaf(s.x);
            per_tree[n][leaf].push_back(eta * (s.target - prefix));
        }
    }
    return per_tree;
}

/// Independent posterior: per-tree contribution lists (bagging: target/N,
/// boosting: staged residuals via naive prefix re-evaluation), two-pass
/// stats per visited leaf, then the independence-assumption aggregation.
inline ArmPosterior brute_force_posterior(const EnsembleModel& model,
                                          const std::vector<Sample>& data,
                                          const FeatureVector& x) {
    ArmPosterior p;
    p.mu = model.config.trainer == Trainer::Boosting ? model.base_score : 0.0;
    const double n_trees = static_cast<double>(model.trees.size());
    std::vector<std::map<int, std::vector<double>>> per_tree;
    if (model.config.trainer == Trainer::Boosting) {
        per_tree = naive_gbdt_contributions(model, data);
    } else {
        per_tree.resize(model.trees.size());
        for (const Sample& s : data)
            for (std::size_t n = 0; n < model.trees.size(); ++n)
                per_tree[n][model.trees[n].assign_leaf(s.x)].push_back(s.target /
                                                                        n_trees);
    }
    for (std::size_t n = 0; n < model.trees.size(); ++n) {
        const int leaf = model.trees[n].assign_leaf(x);
        const NaiveStats stats = naive_stats(per_tree[n].at(leaf));
        p.mu += stats.mean;
        p.var += stats.variance / static_cast<double>(stats.count);
        p.count += stats.count;
    }
    return p;
}

}  // namespace teb::oracles

#include "teb/envs/road_network.hpp"

namespace teb::oracles {

/// All simple origin->destination paths found by DFS; exponential, only for
/// tiny graphs.
inline void enumerate_paths_rec(const RoadNetwork& net, int at, int destination,
                                std::vector<char>& visited, std::vector<int>& stack,
                                std::vector<std::vector<int>>& out) {
    if (at == destination) {
        out.push_back(stack);
        return;
    }
    visited[at] = 1;
    for (int edge_id : net.adjacency()[at]) {
        const Edge& e = net.edge(edge_id);
        if (visited[e.to]) continue;
        stack.push_back(edge_id);
        enumerate_paths_rec(net, e.to, destination, visited, stack, out);
        stack.pop_back();
    }
    visited[at] = 0;
}

inline std::vector<std::vector<int>> enumerate_paths(const RoadNetwork& net,
                                                     int origin, int destination) {
    std::vector<char> visited(net.vertices().size(), 0);
    std::vector<int> stack;
    std::vector<std::vector<int>> out;
    enumerate_paths_rec(net, origin, destination, visited, stack, out);
    return out;
}

/// Minimum path cost by exhaustive enumeration.
inline double brute_force_min_cost(const RoadNetwork& net,
                                   std::span<const double> weights, int origin,
                                   int destination) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& path : enumerate_paths(net, origin, destination)) {
        double cost = 0.0;
        for (int e : path) cost += weights[e];
        best = std::min(best, cost);
    }
    return best;
}

}  // namespace teb::oracles
