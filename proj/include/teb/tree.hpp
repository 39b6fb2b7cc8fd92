#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "teb/feature.hpp"

namespace teb {

/// Routing test stored at an internal node. Numeric tests send
/// `value <= threshold` left; categorical tests send `value == code` left.
struct SplitRule {
    enum class Kind { Numeric, Categorical };
    Kind kind = Kind::Numeric;
    int feature = 0;         // index within the numeric or categorical block
    double threshold = 0.0;  // numeric kind
    int code = 0;            // categorical kind
};

/// Per-leaf aggregate of the individual contributions routed to it.
/// Keeps raw (count, sum, sum of squares) so incremental updates and batch
/// aggregation are the same arithmetic.
struct LeafStats {
    long long count = 0;
    double sum = 0.0;
    double sum_sq = 0.0;

    void add(double value) {
        if (!std::isfinite(value))
            throw std::invalid_argument("LeafStats: non-finite contribution");
        ++count;
        sum += value;
        sum_sq += value * value;
    }

    void reset() { count = 0; sum = 0.0; sum_sq = 0.0; }

    double mean() const { return count > 0 ? sum / static_cast<double>(count) : 0.0; }

    /// Unbiased sample variance, clamped at zero against cancellation noise.
    /// Anything below -1e-12 means the running sums are corrupt.
    double variance() const {
        if (count < 2)
            throw std::logic_error("LeafStats: variance undefined for count < 2");
        const double c = static_cast<double>(count);
        double v = (sum_sq - sum * sum / c) / (c - 1.0);
        if (v < 0.0) {
            if (v < -1e-12)
                throw std::logic_error("LeafStats: negative variance beyond tolerance");
            v = 0.0;
        }
        return v;
    }
};

struct TreeNode {
    bool is_leaf = true;
    SplitRule split;      // internal nodes
    int left = -1;
    int right = -1;
    LeafStats stats;      // leaves
    double raw_value = 0.0;  // the tree's own fitted prediction for this leaf
};

struct TreeConfig {
    int max_depth = 10;
    static constexpr int kMinLeaf = 2;  // variance needs two samples per leaf
    double variance_epsilon = 1e-12;
    /// Ordinals (numeric block first, then categorical) this tree may split
    /// on; empty means all features.
    std::vector<int> allowed_features;
};

/// CART-style regression tree. Structure is immutable after fitting; leaf
/// statistics accept single-writer incremental updates.
class RegressionTree {
public:
    RegressionTree() = default;
    RegressionTree(FeatureSchema schema, std::vector<TreeNode> nodes)
        : schema_(std::move(schema)), nodes_(std::move(nodes)) {
        schema_id_ = schema_.id();
    }

    const FeatureSchema& schema() const { return schema_; }
    std::uint64_t schema_id() const { return schema_id_; }
    const std::vector<TreeNode>& nodes() const { return nodes_; }
    std::vector<TreeNode>& mutable_nodes() { return nodes_; }
    bool empty() const { return nodes_.empty(); }

    /// Leaf ids are node indices.
    int assign_leaf(const FeatureVector& x) const {
        if (x.schema_id != schema_id_)
            throw std::invalid_argument("assign_leaf: schema mismatch");
        int node = 0;
        while (!nodes_[node].is_leaf) {
            const SplitRule& rule = nodes_[node].split;
            bool go_left;
            if (rule.kind == SplitRule::Kind::Numeric)
                go_left = x.numeric[rule.feature] <= rule.threshold;
            else
                go_left = x.categorical[rule.feature] == rule.code;
            node = go_left ? nodes_[node].left : nodes_[node].right;
        }
        return node;
    }

    const LeafStats& leaf_stats(int leaf_id) const {
        check_leaf(leaf_id);
        return nodes_[leaf_id].stats;
    }

    double leaf_raw_value(int leaf_id) const {
        check_leaf(leaf_id);
        return nodes_[leaf_id].raw_value;
    }

    void update_leaf(int leaf_id, double contribution) {
        check_leaf(leaf_id);
        nodes_[leaf_id].stats.add(contribution);
    }

    int depth() const {
        int best = 0;
        walk_depth(0, 0, best);
        return best;
    }

    std::vector<int> leaf_ids() const {
        std::vector<int> out;
        for (int i = 0; i < static_cast<int>(nodes_.size()); ++i)
            if (nodes_[i].is_leaf) out.push_back(i);
        return out;
    }

    void reset_leaf_stats() {
        for (auto& node : nodes_)
            if (node.is_leaf) node.stats.reset();
    }

    /// Replaces the parent of `leaf_id` with the sibling subtree and compacts
    /// node storage. Used when a leaf ends up with too few samples after the
    /// leaf values are re-estimated on a dataset the tree was not fitted on.
    void collapse_leaf(int leaf_id) {
        check_leaf(leaf_id);
        if (leaf_id == 0)
            throw std::runtime_error("collapse_leaf: cannot collapse the root leaf");
        int parent = -1, sibling = -1;
        for (int i = 0; i < static_cast<int>(nodes_.size()); ++i) {
            if (nodes_[i].is_leaf) continue;
            if (nodes_[i].left == leaf_id) { parent = i; sibling = nodes_[i].right; break; }
            if (nodes_[i].right == leaf_id) { parent = i; sibling = nodes_[i].left; break; }
        }
        if (parent < 0)
            throw std::logic_error("collapse_leaf: orphan leaf");
        std::vector<TreeNode> rebuilt;
        rebuilt.reserve(nodes_.size());
        copy_subtree(0, parent, sibling, rebuilt);
        nodes_ = std::move(rebuilt);
    }

private:
    void check_leaf(int leaf_id) const {
        if (leaf_id < 0 || leaf_id >= static_cast<int>(nodes_.size()) ||
            !nodes_[leaf_id].is_leaf)
            throw std::invalid_argument("invalid leaf id");
    }

    void walk_depth(int node, int depth, int& best) const {
        if (nodes_[node].is_leaf) {
            best = std::max(best, depth);
            return;
        }
        walk_depth(nodes_[node].left, depth + 1, best);
        walk_depth(nodes_[node].right, depth + 1, best);
    }

    // Deep-copies the tree, substituting `replacement` for `skip_parent`.
    int copy_subtree(int node, int skip_parent, int replacement,
                     std::vector<TreeNode>& out) const {
        if (node == skip_parent) return copy_subtree(replacement, -1, -1, out);
        const int slot = static_cast<int>(out.size());
        out.push_back(nodes_[node]);
        if (!nodes_[node].is_leaf) {
            const int l = copy_subtree(nodes_[node].left, skip_parent, replacement, out);
            const int r = copy_subtree(nodes_[node].right, skip_parent, replacement, out);
            out[slot].left = l;
            out[slot].right = r;
        }
        return slot;
    }

    FeatureSchema schema_;
    std::uint64_t schema_id_ = 0;
    std::vector<TreeNode> nodes_;
};

namespace detail {

struct TargetMoments {
    long long count = 0;
    double sum = 0.0;
    double sum_sq = 0.0;

    void add(double t) { ++count; sum += t; sum_sq += t * t; }

    double sse() const {
        if (count == 0) return 0.0;
        double v = sum_sq - sum * sum / static_cast<double>(count);
        return v > 0.0 ? v : 0.0;
    }

    double variance() const {
        return count > 1 ? sse() / static_cast<double>(count - 1) : 0.0;
    }
};

struct SplitCandidate {
    bool found = false;
    double gain = 0.0;
    SplitRule rule;
};

class TreeBuilder {
public:
    TreeBuilder(std::span<const Sample> samples, const TreeConfig& config)
        : samples_(samples), config_(config) {}

    RegressionTree build(const FeatureSchema& schema) {
        schema_ = schema;
        features_ = config_.allowed_features;
        if (features_.empty()) {
            features_.resize(schema.total_features());
            for (int i = 0; i < schema.total_features(); ++i) features_[i] = i;
        } else {
            std::sort(features_.begin(), features_.end());
        }
        std::vector<int> indices(samples_.size());
        for (std::size_t i = 0; i < samples_.size(); ++i) indices[i] = static_cast<int>(i);
        nodes_.clear();
        grow(indices, 0);
        return RegressionTree(schema_, std::move(nodes_));
    }

private:
    int grow(std::vector<int>& indices, int depth) {
        TargetMoments m;
        for (int i : indices) m.add(samples_[i].target);

        const bool stop = depth >= config_.max_depth ||
                          m.count < 2 * TreeConfig::kMinLeaf ||
                          m.variance() <= config_.variance_epsilon;
        SplitCandidate best;
        if (!stop) best = find_best_split(indices, m);
        if (stop || !best.found) return make_leaf(m);

        const int slot = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        nodes_[slot].is_leaf = false;
        nodes_[slot].split = best.rule;

        std::vector<int> left, right;
        left.reserve(indices.size());
        right.reserve(indices.size());
        for (int i : indices) {
            if (goes_left(best.rule, samples_[i].x)) left.push_back(i);
            else right.push_back(i);
        }
        indices.clear();
        indices.shrink_to_fit();

        const int l = grow(left, depth + 1);
        const int r = grow(right, depth + 1);
        nodes_[slot].left = l;
        nodes_[slot].right = r;
        return slot;
    }

    int make_leaf(const TargetMoments& m) {
        const int slot = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        TreeNode& leaf = nodes_[slot];
        leaf.is_leaf = true;
        leaf.stats.count = m.count;
        leaf.stats.sum = m.sum;
        leaf.stats.sum_sq = m.sum_sq;
        leaf.raw_value = m.count > 0 ? m.sum / static_cast<double>(m.count) : 0.0;
        return slot;
    }

    static bool goes_left(const SplitRule& rule, const FeatureVector& x) {
        if (rule.kind == SplitRule::Kind::Numeric)
            return x.numeric[rule.feature] <= rule.threshold;
        return x.categorical[rule.feature] == rule.code;
    }

    // Exhaustive search. Features are visited in ascending ordinal and
    // candidates in ascending threshold/code; only a strictly larger gain
    // replaces the incumbent, so equal-gain ties resolve to the lowest
    // feature index, then the lowest threshold/code.
    SplitCandidate find_best_split(const std::vector<int>& indices,
                                   const TargetMoments& parent) {
        SplitCandidate best;
        const double parent_sse = parent.sse();
        for (int ordinal : features_) {
            if (ordinal < schema_.numeric_count)
                scan_numeric(ordinal, indices, parent, parent_sse, best);
            else
                scan_categorical(ordinal - schema_.numeric_count, indices, parent,
                                 parent_sse, best);
        }
        return best;
    }

    void scan_numeric(int feature, const std::vector<int>& indices,
                      const TargetMoments& parent, double parent_sse,
                      SplitCandidate& best) {
        auto& vt = scratch_;
        vt.clear();
        vt.reserve(indices.size());
        for (int i : indices)
            vt.emplace_back(samples_[i].x.numeric[feature], samples_[i].target);
        std::sort(vt.begin(), vt.end());

        TargetMoments left;
        const long long n = static_cast<long long>(vt.size());
        for (long long i = 0; i + 1 < n; ++i) {
            left.add(vt[i].second);
            if (vt[i].first == vt[i + 1].first) continue;
            const long long right_count = n - left.count;
            if (left.count < TreeConfig::kMinLeaf || right_count < TreeConfig::kMinLeaf)
                continue;
            TargetMoments right;
            right.count = parent.count - left.count;
            right.sum = parent.sum - left.sum;
            right.sum_sq = parent.sum_sq - left.sum_sq;
            const double gain = parent_sse - left.sse() - right.sse();
            if (gain > best.gain + kGainEpsilon || (!best.found && gain > kGainEpsilon)) {
                best.found = true;
                best.gain = gain;
                best.rule.kind = SplitRule::Kind::Numeric;
                best.rule.feature = feature;
                best.rule.threshold = midpoint(vt[i].first, vt[i + 1].first);
            }
        }
    }

    void scan_categorical(int feature, const std::vector<int>& indices,
                          const TargetMoments& parent, double parent_sse,
                          SplitCandidate& best) {
        const int cardinality = schema_.categorical_cardinalities[feature];
        per_code_.assign(cardinality, TargetMoments{});
        for (int i : indices)
            per_code_[samples_[i].x.categorical[feature]].add(samples_[i].target);

        for (int code = 0; code < cardinality; ++code) {
            const TargetMoments& left = per_code_[code];
            if (left.count < TreeConfig::kMinLeaf) continue;
            TargetMoments right;
            right.count = parent.count - left.count;
            right.sum = parent.sum - left.sum;
            right.sum_sq = parent.sum_sq - left.sum_sq;
            if (right.count < TreeConfig::kMinLeaf) continue;
            const double gain = parent_sse - left.sse() - right.sse();
            if (gain > best.gain + kGainEpsilon || (!best.found && gain > kGainEpsilon)) {
                best.found = true;
                best.gain = gain;
                best.rule.kind = SplitRule::Kind::Categorical;
                best.rule.feature = feature;
                best.rule.code = code;
            }
        }
    }

    static double midpoint(double lo, double hi) {
        double mid = lo + (hi - lo) / 2.0;
        // Guard against rounding collapsing the midpoint onto hi, which
        // would route hi to the wrong side.
        if (mid >= hi) mid = lo;
        return mid;
    }

    static constexpr double kGainEpsilon = 1e-12;

    std::span<const Sample> samples_;
    const TreeConfig& config_;
    FeatureSchema schema_;
    std::vector<int> features_;
    std::vector<TreeNode> nodes_;
    std::vector<std::pair<double, double>> scratch_;
    std::vector<TargetMoments> per_code_;
};

}  // namespace detail

/// Fits a regression tree by greedy variance reduction. Recursion stops at
/// max_depth, when no candidate leaves two samples on each side, or when the
/// node's target variance is (numerically) zero.
inline RegressionTree fit_tree(std::span<const Sample> samples,
                               const FeatureSchema& schema,
                               const TreeConfig& config = {}) {
    if (samples.size() < 2 * TreeConfig::kMinLeaf)
        throw std::invalid_argument("fit_tree: insufficient samples");
    const std::uint64_t sid = schema.id();
    for (const Sample& s : samples) {
        if (s.x.schema_id != sid)
            throw std::invalid_argument("fit_tree: schema mismatch");
        if (!std::isfinite(s.target))
            throw std::invalid_argument("fit_tree: non-finite target");
    }
    detail::TreeBuilder builder(samples, config);
    return builder.build(schema);
}

}  // namespace teb
