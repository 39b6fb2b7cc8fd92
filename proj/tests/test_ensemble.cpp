#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "teb/ensemble.hpp"
#include "teb/rng.hpp"
#include "teb/serialize.hpp"

using namespace teb;

namespace {

FeatureSchema numeric_schema(int n) {
    FeatureSchema s;
    s.numeric_count = n;
    return s;
}

std::vector<Sample> constant_data(const FeatureSchema& schema, int n, double target) {
    std::vector<Sample> out;
    for (int i = 0; i < n; ++i)
        out.push_back({make_vector(schema, {static_cast<double>(i)}), target});
    return out;
}

std::vector<Sample> random_regression(const FeatureSchema& schema, int n,
                                      RandomSource& rng, double noise = 0.2) {
    std::vector<Sample> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        std::vector<double> nums(schema.numeric_count);
        for (auto& v : nums) v = rng.uniform(-2.0, 2.0);
        std::vector<int> cats(schema.categorical_count());
        for (int c = 0; c < schema.categorical_count(); ++c)
            cats[c] = static_cast<int>(rng.index(schema.categorical_cardinalities[c]));
        double y = nums.empty() ? 0.0 : std::sin(nums[0]) + 0.5 * nums[0];
        if (!cats.empty() && cats[0] == 0) y += 1.0;
        y += rng.normal(0.0, noise);
        out.push_back({make_vector(schema, nums, cats), y});
    }
    return out;
}

EnsembleConfig small_config(Trainer trainer, int n_trees, int depth = 4) {
    EnsembleConfig cfg;
    cfg.trainer = trainer;
    cfg.n_trees = n_trees;
    cfg.max_depth = depth;
    cfg.seed = 5;
    return cfg;
}

}  // namespace

TEST(RandomForest, SingleTreeConstantTargetsPredictsConstant) {
    const auto schema = numeric_schema(1);
    const auto data = constant_data(schema, 8, 3.0);
    EnsembleConfig cfg = small_config(Trainer::Bagging, 1);
    cfg.bootstrap = false;  // identity resample test hook
    const EnsembleModel model = fit_random_forest(data, schema, cfg);
    for (double x : {-10.0, 0.0, 3.0, 99.0})
        EXPECT_DOUBLE_EQ(predict(model, make_vector(schema, {x})), 3.0);
}

TEST(RandomForest, DegenerateDataTreeSumEqualsTargetMean) {
    const auto schema = numeric_schema(1);
    const auto data = constant_data(schema, 6, 4.2);
    EnsembleConfig cfg = small_config(Trainer::Bagging, 2);
    const EnsembleModel model = fit_random_forest(data, schema, cfg);
    EXPECT_NEAR(predict(model, make_vector(schema, {1.0})), 4.2, 1e-12);
}

TEST(RandomForest, SameSeedGivesIdenticalDump) {
    RandomSource rng(71);
    FeatureSchema schema;
    schema.numeric_count = 3;
    schema.categorical_cardinalities = {4};
    const auto data = random_regression(schema, 150, rng);
    const EnsembleConfig cfg = small_config(Trainer::Bagging, 10);
    const EnsembleModel a = fit_random_forest(data, schema, cfg);
    const EnsembleModel b = fit_random_forest(data, schema, cfg);
    EXPECT_EQ(dump_ensemble_string(a), dump_ensemble_string(b));
}

TEST(SetLeafValuesRf, SingleTreeLeafStatsAreTargetStats) {
    // One tree, one leaf receiving targets {1,2,3}: o=2, s^2=1, c=3.
    const auto schema = numeric_schema(1);
    std::vector<Sample> data = {{make_vector(schema, {0.0}), 1.0},
                                {make_vector(schema, {1.0}), 2.0},
                                {make_vector(schema, {2.0}), 3.0}};
    EnsembleConfig cfg = small_config(Trainer::Bagging, 1, 0);
    cfg.bootstrap = false;
    std::vector<Sample> padded = data;
    padded.push_back({make_vector(schema, {3.0}), 2.0});
    EnsembleModel model = fit_random_forest(padded, schema, cfg);
    ASSERT_EQ(model.trees.size(), 1u);
    ASSERT_EQ(model.trees[0].nodes().size(), 1u);

    set_leaf_values_rf(model, data);
    const LeafStats& leaf = model.trees[0].leaf_stats(0);
    EXPECT_EQ(leaf.count, 3);
    EXPECT_DOUBLE_EQ(leaf.mean(), 2.0);
    EXPECT_DOUBLE_EQ(leaf.variance(), 1.0);
}

TEST(SetLeafValuesRf, ContributionsAreWeightedByTreeCount) {
    // Four trees, a leaf receiving targets {8,8}: contributions are 2 each,
    // so o=2, s^2=0, c=2.
    const auto schema = numeric_schema(1);
    const auto fit_data = constant_data(schema, 6, 8.0);
    EnsembleConfig cfg = small_config(Trainer::Bagging, 4, 0);
    EnsembleModel model = fit_random_forest(fit_data, schema, cfg);

    std::vector<Sample> estimation = {{make_vector(schema, {0.0}), 8.0},
                                      {make_vector(schema, {1.0}), 8.0}};
    set_leaf_values_rf(model, estimation);
    for (const auto& tree : model.trees) {
        const LeafStats& leaf = tree.leaf_stats(0);
        EXPECT_EQ(leaf.count, 2);
        EXPECT_DOUBLE_EQ(leaf.mean(), 2.0);
        EXPECT_DOUBLE_EQ(leaf.variance(), 0.0);
    }
}

TEST(SetLeafValuesRf, IdenticalTargetsZeroVarianceEverywhere) {
    RandomSource rng(31);
    FeatureSchema schema;
    schema.numeric_count = 2;
    std::vector<Sample> data;
    for (int i = 0; i < 60; ++i)
        data.push_back({make_vector(schema, {rng.uniform01(), rng.uniform01()}), 7.0});
    const EnsembleModel model =
        fit_random_forest(data, schema, small_config(Trainer::Bagging, 5));
    for (const auto& tree : model.trees)
        for (int leaf : tree.leaf_ids())
            EXPECT_DOUBLE_EQ(tree.leaf_stats(leaf).variance(), 0.0);
}

TEST(SetLeafValuesRf, RepairsLeavesStarvedByEstimationData) {
    // Fit on wide-ranged data so the tree splits, then re-estimate with data
    // that routes everything to one side; starved leaves must collapse and
    // every surviving leaf must carry at least two samples.
    const auto schema = numeric_schema(1);
    std::vector<Sample> fit_data;
    for (int i = 0; i < 10; ++i)
        fit_data.push_back(
            {make_vector(schema, {static_cast<double>(i)}), i < 5 ? 0.0 : 1.0});
    EnsembleConfig cfg = small_config(Trainer::Bagging, 1, 3);
    cfg.bootstrap = false;
    EnsembleModel model = fit_random_forest(fit_data, schema, cfg);
    ASSERT_GT(model.trees[0].nodes().size(), 1u);

    std::vector<Sample> skewed;
    for (int i = 0; i < 6; ++i)
        skewed.push_back({make_vector(schema, {9.0}), 2.0});
    set_leaf_values_rf(model, skewed);
    for (int leaf : model.trees[0].leaf_ids())
        EXPECT_GE(model.trees[0].leaf_stats(leaf).count, 2);
    EXPECT_NEAR(predict(model, make_vector(schema, {9.0})), 2.0, 1e-12);
}

TEST(Gbdt, SingleTreeUnitRateZeroBaseEqualsCart) {
    RandomSource rng(41);
    const auto schema = numeric_schema(2);
    const auto data = random_regression(schema, 120, rng);
    EnsembleConfig cfg = small_config(Trainer::Boosting, 1);
    cfg.learning_rate = 1.0;
    cfg.base_score = 0.0;
    const EnsembleModel model = fit_gbdt(data, schema, cfg);

    TreeConfig tree_cfg;
    tree_cfg.max_depth = cfg.max_depth;
    const RegressionTree cart = fit_tree(data, schema, tree_cfg);
    for (int i = 0; i < 25; ++i) {
        const auto x = make_vector(schema, {rng.uniform(-2, 2), rng.uniform(-2, 2)});
        EXPECT_NEAR(predict(model, x), cart.leaf_stats(cart.assign_leaf(x)).mean(),
                    1e-9);
    }
}

TEST(Gbdt, HandComputedSingleLeafValues) {
    // b=0.5, eta=0.3, one single-leaf tree, all targets 1.0:
    // leaf output 0.3*(1-0.5)=0.15 and prediction 0.65.
    const auto schema = numeric_schema(1);
    const auto data = constant_data(schema, 5, 1.0);
    EnsembleConfig cfg = small_config(Trainer::Boosting, 1, 0);
    cfg.learning_rate = 0.3;
    cfg.base_score = 0.5;
    const EnsembleModel model = fit_gbdt(data, schema, cfg);
    ASSERT_EQ(model.trees[0].nodes().size(), 1u);
    EXPECT_NEAR(model.trees[0].leaf_stats(0).mean(), 0.15, 1e-12);
    EXPECT_NEAR(predict(model, make_vector(schema, {0.0})), 0.65, 1e-12);
}

TEST(Gbdt, TargetsEqualToBaseGiveZeroTrees) {
    const auto schema = numeric_schema(1);
    const auto data = constant_data(schema, 6, 0.5);
    EnsembleConfig cfg = small_config(Trainer::Boosting, 3);
    cfg.base_score = 0.5;
    const EnsembleModel model = fit_gbdt(data, schema, cfg);
    for (const auto& tree : model.trees)
        for (int leaf : tree.leaf_ids())
            EXPECT_DOUBLE_EQ(tree.leaf_stats(leaf).mean(), 0.0);
    EXPECT_DOUBLE_EQ(predict(model, make_vector(schema, {2.0})), 0.5);
}

TEST(SetLeafValuesGbdt, HandComputedContributions) {
    // One single-leaf tree, targets {1, 0}, b=0.5, eta=0.3: contributions
    // {0.15, -0.15}, so o=0, s^2=0.045, c=2.
    const auto schema = numeric_schema(1);
    std::vector<Sample> data = {{make_vector(schema, {0.0}), 1.0},
                                {make_vector(schema, {1.0}), 0.0},
                                {make_vector(schema, {2.0}), 1.0},
                                {make_vector(schema, {3.0}), 0.0}};
    EnsembleConfig cfg = small_config(Trainer::Boosting, 1, 0);
    cfg.learning_rate = 0.3;
    cfg.base_score = 0.5;
    EnsembleModel model = fit_gbdt(data, schema, cfg);

    std::vector<Sample> estimation = {{make_vector(schema, {0.0}), 1.0},
                                      {make_vector(schema, {1.0}), 0.0}};
    set_leaf_values_gbdt(model, estimation);
    const LeafStats& leaf = model.trees[0].leaf_stats(0);
    EXPECT_EQ(leaf.count, 2);
    EXPECT_NEAR(leaf.mean(), 0.0, 1e-15);
    EXPECT_NEAR(leaf.variance(), 0.045, 1e-12);
}

TEST(SetLeafValuesGbdt, ZeroLearningRateIsRejectedByValidation) {
    EnsembleConfig cfg = small_config(Trainer::Boosting, 2);
    cfg.learning_rate = 0.0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(SetLeafValuesGbdt, StagedConsistencyFullPrefixMatchesPredict) {
    RandomSource rng(51);
    const auto schema = numeric_schema(3);
    const auto data = random_regression(schema, 200, rng);
    const EnsembleModel model =
        fit_gbdt(data, schema, small_config(Trainer::Boosting, 8));
    for (int i = 0; i < 20; ++i) {
        const auto x = make_vector(
            schema, {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)});
        const double full_prefix = oracles::naive_prefix_prediction(
            model, x, static_cast<int>(model.trees.size()));
        EXPECT_NEAR(full_prefix, predict(model, x), 1e-9);
    }
}

TEST(Predict, SingleTreeRootLeaf) {
    const auto schema = numeric_schema(1);
    const auto data = constant_data(schema, 4, 2.0);
    EnsembleConfig cfg = small_config(Trainer::Bagging, 1, 0);
    const EnsembleModel model = fit_random_forest(data, schema, cfg);
    EXPECT_DOUBLE_EQ(predict(model, make_vector(schema, {0.0})), 2.0);
}

TEST(Predict, BoostingBaseScoreOnly) {
    const auto schema = numeric_schema(1);
    const auto data = constant_data(schema, 4, 0.5);
    EnsembleConfig cfg = small_config(Trainer::Boosting, 2, 0);
    cfg.base_score = 0.5;
    const EnsembleModel model = fit_gbdt(data, schema, cfg);
    EXPECT_DOUBLE_EQ(predict(model, make_vector(schema, {1.0})), 0.5);
}

TEST(Posterior, HandComputedTwoTreeAggregation) {
    // Visited leaves (o=1, s^2=4, c=4) and (o=2, s^2=9, c=9):
    // mu=3, var=4/4+9/9=2, count=13.
    const auto schema = numeric_schema(1);
    auto make_leaf_tree = [&](double mean, double var, long long count) {
        // Build a root-leaf tree with the wanted stats from raw sums.
        std::vector<TreeNode> nodes(1);
        nodes[0].is_leaf = true;
        nodes[0].stats.count = count;
        nodes[0].stats.sum = mean * static_cast<double>(count);
        nodes[0].stats.sum_sq = var * static_cast<double>(count - 1) +
                                nodes[0].stats.sum * mean;
        nodes[0].raw_value = mean;
        return RegressionTree(schema, std::move(nodes));
    };
    EnsembleModel model;
    model.config = small_config(Trainer::Bagging, 2);
    model.schema = schema;
    model.trees.push_back(make_leaf_tree(1.0, 4.0, 4));
    model.trees.push_back(make_leaf_tree(2.0, 9.0, 9));

    const ArmPosterior p = posterior(model, make_vector(schema, {0.0}));
    EXPECT_NEAR(p.mu, 3.0, 1e-12);
    EXPECT_NEAR(p.var, 2.0, 1e-12);
    EXPECT_EQ(p.count, 13);
}

TEST(Posterior, ZeroVarianceLeavesGiveZeroVariance) {
    const auto schema = numeric_schema(1);
    const auto data = constant_data(schema, 6, 1.5);
    const EnsembleModel model =
        fit_random_forest(data, schema, small_config(Trainer::Bagging, 3, 0));
    EXPECT_DOUBLE_EQ(posterior(model, make_vector(schema, {0.0})).var, 0.0);
}

TEST(Posterior, DuplicatingTreesDoublesMuAndVar) {
    RandomSource rng(61);
    const auto schema = numeric_schema(2);
    const auto data = random_regression(schema, 100, rng);
    EnsembleModel model =
        fit_random_forest(data, schema, small_config(Trainer::Bagging, 3));
    const auto x = make_vector(schema, {0.5, -0.5});
    const ArmPosterior single = posterior(model, x);

    EnsembleModel doubled = model;
    for (const auto& tree : model.trees) doubled.trees.push_back(tree);
    const ArmPosterior twice = posterior(doubled, x);
    EXPECT_NEAR(twice.mu, 2.0 * single.mu, 1e-12);
    EXPECT_NEAR(twice.var, 2.0 * single.var, 1e-12);
    EXPECT_EQ(twice.count, 2 * single.count);
}

TEST(Posterior, UndefinedLeafVarianceThrows) {
    const auto schema = numeric_schema(1);
    std::vector<TreeNode> nodes(1);
    nodes[0].is_leaf = true;
    nodes[0].stats.add(1.0);  // single contribution
    EnsembleModel model;
    model.config = small_config(Trainer::Bagging, 1);
    model.schema = schema;
    model.trees.emplace_back(schema, std::move(nodes));
    EXPECT_THROW(posterior(model, make_vector(schema, {0.0})), std::runtime_error);
}

TEST(EnsembleProperties, VarianceAggregationMatchesPerLeafSum) {
    RandomSource rng(81);
    FeatureSchema schema;
    schema.numeric_count = 2;
    schema.categorical_cardinalities = {3};
    const auto data = random_regression(schema, 250, rng);
    for (Trainer trainer : {Trainer::Bagging, Trainer::Boosting}) {
        const EnsembleModel model = fit_ensemble(data, schema, small_config(trainer, 12));
        for (int i = 0; i < 40; ++i) {
            const auto x = make_vector(schema, {rng.uniform(-2, 2), rng.uniform(-2, 2)},
                                       {static_cast<int>(rng.index(3))});
            double expected = 0.0;
            for (const auto& tree : model.trees) {
                const LeafStats& stats = tree.leaf_stats(tree.assign_leaf(x));
                expected += stats.variance() / static_cast<double>(stats.count);
            }
            EXPECT_NEAR(posterior(model, x).var, expected, 1e-12);
        }
    }
}

TEST(EnsembleProperties, PredictEqualsPosteriorMu) {
    RandomSource rng(91);
    FeatureSchema schema;
    schema.numeric_count = 3;
    const auto data = random_regression(schema, 300, rng);
    for (Trainer trainer : {Trainer::Bagging, Trainer::Boosting}) {
        const EnsembleModel model = fit_ensemble(data, schema, small_config(trainer, 10));
        for (int i = 0; i < 1000; ++i) {
            const auto x = make_vector(
                schema, {rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)});
            ASSERT_EQ(predict(model, x), posterior(model, x).mu);
        }
    }
}

TEST(EnsembleProperties, StagedSweepMatchesNaivePrefixReevaluation) {
    RandomSource rng(111);
    FeatureSchema schema;
    schema.numeric_count = 2;
    schema.categorical_cardinalities = {4};
    const auto data = random_regression(schema, 150, rng);
    const EnsembleModel model =
        fit_gbdt(data, schema, small_config(Trainer::Boosting, 10));

    const auto oracle = oracles::naive_gbdt_contributions(model, data);
    for (std::size_t n = 0; n < model.trees.size(); ++n) {
        for (const auto& [leaf, values] : oracle[n]) {
            const oracles::NaiveStats expected = oracles::naive_stats(values);
            const LeafStats& got = model.trees[n].leaf_stats(leaf);
            ASSERT_EQ(got.count, expected.count);
            ASSERT_NEAR(got.mean(), expected.mean, 1e-9);
            ASSERT_NEAR(got.variance(), expected.variance, 1e-9);
        }
    }
}

TEST(EnsembleProperties, BoostingTrainingLossMonotone) {
    RandomSource rng(121);
    const auto schema = numeric_schema(2);
    // Noise-free separable fixture.
    const auto data = random_regression(schema, 200, rng, 0.0);
    EnsembleConfig cfg = small_config(Trainer::Boosting, 15);
    cfg.learning_rate = 0.5;
    const EnsembleModel model = fit_gbdt(data, schema, cfg);

    double previous = std::numeric_limits<double>::infinity();
    for (int n = 0; n <= cfg.n_trees; ++n) {
        double mse = 0.0;
        for (const Sample& s : data) {
            const double p = oracles::naive_prefix_prediction(model, s.x, n);
            mse += (s.target - p) * (s.target - p);
        }
        mse /= static_cast<double>(data.size());
        EXPECT_LE(mse, previous + 1e-12);
        previous = mse;
    }
}

TEST(EnsembleProperties, IncrementalAddEqualsBatchRecompute) {
    RandomSource rng(131);
    FeatureSchema schema;
    schema.numeric_count = 2;
    schema.categorical_cardinalities = {3};
    const auto fit_set = random_regression(schema, 150, rng);
    const auto extra = random_regression(schema, 60, rng);
    std::vector<Sample> all = fit_set;
    all.insert(all.end(), extra.begin(), extra.end());

    for (Trainer trainer : {Trainer::Bagging, Trainer::Boosting}) {
        EnsembleModel incremental = fit_ensemble(fit_set, schema, small_config(trainer, 8));
        EnsembleModel batch = incremental;  // same frozen structure
        for (const Sample& s : extra) add_observation(incremental, s.x, s.target);
        if (trainer == Trainer::Bagging)
            set_leaf_values_rf(batch, all);
        else
            set_leaf_values_gbdt(batch, all);

        for (int i = 0; i < 50; ++i) {
            const auto x = make_vector(schema, {rng.uniform(-2, 2), rng.uniform(-2, 2)},
                                       {static_cast<int>(rng.index(3))});
            const ArmPosterior a = posterior(incremental, x);
            const ArmPosterior b = posterior(batch, x);
            ASSERT_NEAR(a.mu, b.mu, 1e-9);
            ASSERT_NEAR(a.var, b.var, 1e-9);
            ASSERT_EQ(a.count, b.count);
        }
    }
}

TEST(Serialization, EnsembleRoundTripIsLossless) {
    RandomSource rng(141);
    FeatureSchema schema;
    schema.numeric_count = 2;
    schema.categorical_cardinalities = {3, 5};
    const auto data = random_regression(schema, 120, rng);
    for (Trainer trainer : {Trainer::Bagging, Trainer::Boosting}) {
        const EnsembleModel model = fit_ensemble(data, schema, small_config(trainer, 6));
        const std::string dump = dump_ensemble_string(model);
        const EnsembleModel reloaded = load_ensemble_string(dump);
        EXPECT_EQ(dump, dump_ensemble_string(reloaded));
        for (int i = 0; i < 20; ++i) {
            const auto x = make_vector(schema, {rng.uniform(-2, 2), rng.uniform(-2, 2)},
                                       {static_cast<int>(rng.index(3)),
                                        static_cast<int>(rng.index(5))});
            ASSERT_EQ(predict(model, x), predict(reloaded, x));
        }
    }
}

TEST(AddObservation, NonFiniteRewardThrows) {
    const auto schema = numeric_schema(1);
    const auto data = constant_data(schema, 5, 1.0);
    EnsembleModel model =
        fit_random_forest(data, schema, small_config(Trainer::Bagging, 2, 0));
    EXPECT_THROW(add_observation(model, make_vector(schema, {0.0}), std::nan("")),
                 std::invalid_argument);
}
