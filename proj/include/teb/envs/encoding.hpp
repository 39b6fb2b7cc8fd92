#pragma once

#include <stdexcept>
#include <vector>

#include "teb/feature.hpp"

namespace teb {

/// Numeric dimensionality of a schema once categoricals are one-hot expanded.
inline int one_hot_dim(const FeatureSchema& schema) {
    int d = schema.numeric_count;
    for (int card : schema.categorical_cardinalities) d += card;
    return d;
}

/// Numeric values followed by one indicator block per categorical feature.
inline std::vector<double> encode_one_hot(const FeatureSchema& schema,
                                          const FeatureVector& x) {
    validate_vector(schema, x);
    std::vector<double> out;
    out.reserve(one_hot_dim(schema));
    out.insert(out.end(), x.numeric.begin(), x.numeric.end());
    for (int f = 0; f < schema.categorical_count(); ++f) {
        const int card = schema.categorical_cardinalities[f];
        for (int code = 0; code < card; ++code)
            out.push_back(x.categorical[f] == code ? 1.0 : 0.0);
    }
    return out;
}

/// Schema of the disjoint per-arm encoding: K blocks of the one-hot expanded
/// feature dimension, all numeric.
inline FeatureSchema disjoint_schema(const FeatureSchema& base, int n_arms) {
    if (n_arms < 1) throw std::invalid_argument("disjoint_schema: n_arms must be >= 1");
    FeatureSchema out;
    out.numeric_count = n_arms * one_hot_dim(base);
    return out;
}

/// Positional encoding: the one-hot expanded context placed in arm k's block,
/// zeros elsewhere. Arms are indexed from 0.
inline FeatureVector encode_disjoint(const FeatureSchema& base, const FeatureVector& x,
                                     int arm, int n_arms) {
    if (arm < 0 || arm >= n_arms)
        throw std::invalid_argument("encode_disjoint: invalid arm index");
    const std::vector<double> flat = encode_one_hot(base, x);
    const FeatureSchema target = disjoint_schema(base, n_arms);
    std::vector<double> numeric(target.numeric_count, 0.0);
    std::copy(flat.begin(), flat.end(),
              numeric.begin() + static_cast<std::ptrdiff_t>(arm) *
                                    static_cast<std::ptrdiff_t>(flat.size()));
    return make_vector(target, std::move(numeric));
}

/// Schema of the hybrid encoding: the arm id prepended as one categorical
/// feature, raw features preserved.
inline FeatureSchema hybrid_schema(const FeatureSchema& base, int n_arms) {
    if (n_arms < 1) throw std::invalid_argument("hybrid_schema: n_arms must be >= 1");
    FeatureSchema out = base;
    out.categorical_cardinalities.insert(out.categorical_cardinalities.begin(),
                                         std::max(2, n_arms));
    return out;
}

/// Hybrid encoding: (arm id, x) with numeric and categorical features kept
/// as they are.
inline FeatureVector encode_hybrid(const FeatureSchema& base, const FeatureVector& x,
                                   int arm, int n_arms) {
    if (arm < 0 || arm >= std::max(2, n_arms))
        throw std::invalid_argument("encode_hybrid: invalid arm index");
    validate_vector(base, x);
    const FeatureSchema target = hybrid_schema(base, n_arms);
    std::vector<int> cats;
    cats.reserve(x.categorical.size() + 1);
    cats.push_back(arm);
    cats.insert(cats.end(), x.categorical.begin(), x.categorical.end());
    return make_vector(target, x.numeric, std::move(cats));
}

}  // namespace teb
