#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace teb {

/// Shape of a context: how many numeric columns, and the cardinality of each
/// categorical column. Vectors carry the schema's id so mixing contexts from
/// different schemas is caught early instead of producing garbage routing.
struct FeatureSchema {
    int numeric_count = 0;
    std::vector<int> categorical_cardinalities;

    int categorical_count() const {
        return static_cast<int>(categorical_cardinalities.size());
    }

    int total_features() const { return numeric_count + categorical_count(); }

    void validate() const {
        if (numeric_count < 0)
            throw std::invalid_argument("FeatureSchema: numeric_count must be >= 0");
        if (total_features() < 1)
            throw std::invalid_argument("FeatureSchema: at least one feature required");
        for (int card : categorical_cardinalities)
            if (card < 2)
                throw std::invalid_argument(
                    "FeatureSchema: categorical cardinality must be >= 2");
    }

    /// FNV-1a over the shape; used as the binding id carried by vectors.
    std::uint64_t id() const {
        std::uint64_t h = 1469598103934665603ull;
        auto mix = [&h](std::uint64_t v) {
            for (int i = 0; i < 8; ++i) {
                h ^= (v >> (8 * i)) & 0xff;
                h *= 1099511628211ull;
            }
        };
        mix(static_cast<std::uint64_t>(numeric_count));
        for (int card : categorical_cardinalities) mix(static_cast<std::uint64_t>(card));
        return h;
    }

    bool operator==(const FeatureSchema& other) const {
        return numeric_count == other.numeric_count &&
               categorical_cardinalities == other.categorical_cardinalities;
    }
};

/// Mixed numeric/categorical context of one arm.
struct FeatureVector {
    std::vector<double> numeric;
    std::vector<int> categorical;
    std::uint64_t schema_id = 0;
};

inline void validate_vector(const FeatureSchema& schema, const FeatureVector& x) {
    if (x.schema_id != schema.id())
        throw std::invalid_argument("FeatureVector: schema mismatch");
    if (static_cast<int>(x.numeric.size()) != schema.numeric_count ||
        static_cast<int>(x.categorical.size()) != schema.categorical_count())
        throw std::invalid_argument("FeatureVector: length does not match schema");
    for (double v : x.numeric)
        if (!std::isfinite(v))
            throw std::invalid_argument("FeatureVector: non-finite numeric value");
    for (int i = 0; i < schema.categorical_count(); ++i) {
        int code = x.categorical[i];
        if (code < 0 || code >= schema.categorical_cardinalities[i])
            throw std::invalid_argument("FeatureVector: categorical code out of range");
    }
}

/// Validating constructor; the only supported way to ingest raw values.
inline FeatureVector make_vector(const FeatureSchema& schema,
                                 std::vector<double> numeric,
                                 std::vector<int> categorical = {}) {
    FeatureVector x;
    x.numeric = std::move(numeric);
    x.categorical = std::move(categorical);
    x.schema_id = schema.id();
    validate_vector(schema, x);
    return x;
}

/// One training point: a context and the value it proposes (an observed
/// reward, or a residual while boosting).
struct Sample {
    FeatureVector x;
    double target = 0.0;
};

inline void validate_sample(const FeatureSchema& schema, const Sample& s) {
    validate_vector(schema, s.x);
    if (!std::isfinite(s.target))
        throw std::invalid_argument("Sample: non-finite target");
}

}  // namespace teb
