#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "teb/feature.hpp"
#include "teb/rng.hpp"

namespace teb {

/// A classification table ready to serve as a bandit environment: one row per
/// instance, labels mapped to dense codes 0..K-1.
struct ClassificationDataset {
    FeatureSchema schema;
    std::vector<FeatureVector> rows;
    std::vector<int> labels;
    std::vector<std::string> label_names;  // index = dense code
    std::size_t dropped_rows = 0;          // rows removed for missing values

    int n_classes() const { return static_cast<int>(label_names.size()); }

    void validate() const {
        if (rows.size() != labels.size())
            throw std::invalid_argument("ClassificationDataset: row/label mismatch");
        if (n_classes() < 2)
            throw std::invalid_argument("ClassificationDataset: need at least 2 classes");
        for (int label : labels)
            if (label < 0 || label >= n_classes())
                throw std::invalid_argument("ClassificationDataset: label out of range");
    }
};

/// Bandit view of a classification task: each round presents one row's
/// features; arms are the classes; guessing the row's label pays 1, anything
/// else 0. The per-round optimal reward is always 1, so the instantaneous
/// regret is 1 - reward. Rows are visited in a seeded draw-without-
/// replacement order.
class ClassificationBanditEnv {
public:
    ClassificationBanditEnv(std::shared_ptr<const ClassificationDataset> data,
                            std::uint64_t seed)
        : data_(std::move(data)) {
        data_->validate();
        RandomSource rng(seed);
        order_ = rng.permutation(data_->rows.size());
    }

    int n_arms() const { return data_->n_classes(); }
    const FeatureSchema& schema() const { return data_->schema; }
    std::size_t remaining() const { return order_.size() - position_; }

    const FeatureVector& current_context() const {
        if (position_ >= order_.size())
            throw std::runtime_error("classification env: horizon exceeds dataset");
        return data_->rows[order_[position_]];
    }

    /// Plays arm k against the current row and advances to the next one.
    double step(int arm) {
        if (arm < 0 || arm >= n_arms())
            throw std::invalid_argument("classification env: invalid arm");
        if (position_ >= order_.size())
            throw std::runtime_error("classification env: horizon exceeds dataset");
        const double reward =
            arm == data_->labels[order_[position_]] ? 1.0 : 0.0;
        ++position_;
        return reward;
    }

    /// Label of the current row; the oracle agent and tests use this.
    int current_label() const {
        if (position_ >= order_.size())
            throw std::runtime_error("classification env: horizon exceeds dataset");
        return data_->labels[order_[position_]];
    }

private:
    std::shared_ptr<const ClassificationDataset> data_;
    std::vector<std::size_t> order_;
    std::size_t position_ = 0;
};

}  // namespace teb
