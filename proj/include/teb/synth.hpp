#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

#include "teb/envs/classification.hpp"
#include "teb/rng.hpp"

namespace teb {

/// Bundled synthetic classification generators. Each preset mirrors the
/// shape of a benchmark table (feature counts and kinds, class count,
/// difficulty regime) so experiments run end-to-end without external files:
/// "mushroom_like" is a noise-free rule over categorical features with an
/// interaction pocket linear models cannot represent; "adult_like" mixes
/// numeric and categorical features with label noise and a nonlinear band.
inline std::shared_ptr<ClassificationDataset> make_synthetic_classification(
    const std::string& preset, std::size_t rows, std::uint64_t seed);

namespace detail {

inline std::shared_ptr<ClassificationDataset> synth_mushroom(std::size_t rows,
                                                             std::uint64_t seed) {
    auto data = std::make_shared<ClassificationDataset>();
    FeatureSchema schema;
    schema.numeric_count = 0;
    // 22 categorical features; cardinalities loosely follow field-guide
    // style attributes (a few wide ones, many binary).
    schema.categorical_cardinalities = {9, 4, 10, 2, 6,  2, 2, 2, 12, 2, 5,
                                        4, 4, 9,  9, 2, 3, 5, 3,  5, 6, 7};
    data->schema = schema;
    data->label_names = {"edible", "poisonous"};
    RandomSource rng(seed);
    data->rows.reserve(rows);
    data->labels.reserve(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        std::vector<int> f(schema.categorical_count());
        for (int c = 0; c < schema.categorical_count(); ++c)
            f[c] = static_cast<int>(rng.index(schema.categorical_cardinalities[c]));

        // The label is a deterministic rule of a handful of features, like
        // the field-guide datasets: odor-style feature f0 decides most rows
        // directly, one branch hangs on a second attribute, and one branch
        // is an XOR of two binary attributes, which one-hot linear models
        // cannot represent.
        int label;
        if (f[0] == 1 || f[0] == 2 || f[0] == 4) label = 1;
        else if (f[0] == 0 || f[0] == 7 || f[0] == 8) label = 0;
        else if (f[0] == 3) label = f[4] >= 3 ? 1 : 0;
        else if (f[0] == 5) label = (f[15] == 1) != (f[3] == 1) ? 1 : 0;
        else label = 0;  // f[0] == 6

        // One weakly informative descriptive attribute; the rest is noise.
        if (rng.uniform01() < 0.5) f[10] = label == 1 ? 4 : 0;

        data->rows.push_back(make_vector(schema, {}, std::move(f)));
        data->labels.push_back(label);
    }
    return data;
}

inline std::shared_ptr<ClassificationDataset> synth_adult(std::size_t rows,
                                                          std::uint64_t seed) {
    auto data = std::make_shared<ClassificationDataset>();
    FeatureSchema schema;
    schema.numeric_count = 6;  // age, weight, edu_years, cap_gain, cap_loss, hours
    schema.categorical_cardinalities = {8, 16, 7, 14, 6, 5, 2, 12};
    data->schema = schema;
    data->label_names = {"<=50K", ">50K"};
    RandomSource rng(seed);
    data->rows.reserve(rows);
    data->labels.reserve(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        const double age = 17.0 + 73.0 * std::pow(rng.uniform01(), 1.4);
        const double weight = std::exp(rng.normal(11.0, 0.6));
        const double edu_years = 1.0 + rng.index(16);
        const double cap_gain = rng.uniform01() < 0.08 ? rng.exponential(8000.0) : 0.0;
        const double cap_loss = rng.uniform01() < 0.05 ? rng.exponential(1500.0) : 0.0;
        const double hours = std::clamp(rng.normal(40.0, 11.0), 1.0, 99.0);
        std::vector<int> cats(schema.categorical_count());
        for (int c = 0; c < schema.categorical_count(); ++c)
            cats[c] = static_cast<int>(rng.index(schema.categorical_cardinalities[c]));
        const bool married = cats[2] <= 1;  // two of seven marital codes

        double score = 0.045 * (age - 38.0) + 0.33 * (edu_years - 10.0) +
                       0.00022 * cap_gain - 0.0004 * cap_loss +
                       0.035 * (hours - 40.0) + (married ? 1.1 : -0.4);
        // Nonlinear structure: an occupation/education conjunction and a
        // mid-career long-hours band, both invisible to a linear model.
        if ((cats[3] == 3 || cats[3] == 4) && edu_years >= 13.0) score += 1.6;
        if (age >= 35.0 && age <= 50.0 && hours >= 45.0) score += 1.5;
        if (cats[6] == 0 && !married) score -= 0.8;

        const double p =
            std::clamp(1.0 / (1.0 + std::exp(-(score - 1.6))), 0.03, 0.97);
        const int label = rng.uniform01() < p ? 1 : 0;
        data->rows.push_back(make_vector(
            schema, {age, weight, edu_years, cap_gain, cap_loss, hours}, cats));
        data->labels.push_back(label);
    }
    return data;
}

}  // namespace detail

inline std::shared_ptr<ClassificationDataset> make_synthetic_classification(
    const std::string& preset, std::size_t rows, std::uint64_t seed) {
    if (rows < 8)
        throw std::invalid_argument("synthetic classification: need at least 8 rows");
    std::shared_ptr<ClassificationDataset> data;
    if (preset == "mushroom_like") data = detail::synth_mushroom(rows, seed);
    else if (preset == "adult_like") data = detail::synth_adult(rows, seed);
    else throw std::invalid_argument("synthetic classification: unknown preset '" +
                                     preset + "'");
    data->validate();
    return data;
}

}  // namespace teb
