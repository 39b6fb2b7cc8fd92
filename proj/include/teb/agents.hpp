#pragma once

#include <chrono>
#include <cmath>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "teb/baselines.hpp"
#include "teb/envs/encoding.hpp"
#include "teb/envs/road_network.hpp"
#include "teb/policy.hpp"

namespace teb {

/// Timing counters every agent reports; the harness folds them into the run
/// summary so model-fit cost is visible separately from scoring.
struct AgentTimers {
    double fit_seconds = 0.0;
    double score_seconds = 0.0;
    long long rebuilds = 0;
};

// ---------------------------------------------------------------------------
// Classification agents: one arm per class, one raw context per round.
// ---------------------------------------------------------------------------

class ClassificationAgent {
public:
    virtual ~ClassificationAgent() = default;
    /// Advances the agent's round counter and picks an arm for this context.
    virtual int select(const FeatureVector& raw_context) = 0;
    /// Delivers the reward for a played round. May arrive in batches.
    virtual void observe(const FeatureVector& raw_context, int arm, double reward) = 0;
    virtual const AgentTimers& timers() const { return timers_; }

protected:
    AgentTimers timers_;
};

namespace detail {

class StopwatchGuard {
public:
    StopwatchGuard(double& sink) : sink_(sink), start_(clock_now()) {}
    ~StopwatchGuard() { sink_ += clock_now() - start_; }

    static double clock_now() {
        return std::chrono::duration<double>(
                   std::chrono::steady_clock::now().time_since_epoch())
            .count();
    }

private:
    double& sink_;
    double start_;
};

}  // namespace detail

/// TEUCB / TETS on the hybrid encoding: one shared ensemble scores all
/// arm-coded variants of the round's context.
class TreeEnsembleClassificationAgent : public ClassificationAgent {
public:
    TreeEnsembleClassificationAgent(PolicyConfig policy, EnsembleConfig ensemble,
                                    const FeatureSchema& base, int n_arms,
                                    std::uint64_t seed)
        : base_(base), n_arms_(n_arms),
          policy_(policy, ensemble, hybrid_schema(base, n_arms), seed) {}

    int select(const FeatureVector& raw_context) override {
        detail::StopwatchGuard guard(timers_.score_seconds);
        contexts_.clear();
        for (int arm = 0; arm < n_arms_; ++arm)
            contexts_.push_back(encode_hybrid(base_, raw_context, arm, n_arms_));
        const double fit_before = policy_fit_seconds();
        const int arm = static_cast<int>(policy_.select(contexts_));
        timers_.fit_seconds += policy_fit_seconds() - fit_before;
        return arm;
    }

    void observe(const FeatureVector& raw_context, int arm, double reward) override {
        policy_.observe(encode_hybrid(base_, raw_context, arm, n_arms_), reward);
    }

    TreeEnsemblePolicy& policy() { return policy_; }

private:
    double policy_fit_seconds() const { return policy_.fit_seconds(); }

    FeatureSchema base_;
    int n_arms_;
    TreeEnsemblePolicy policy_;
    std::vector<FeatureVector> contexts_;
};

/// LinUCB / LinTS over the disjoint positional encoding: a single ridge
/// model of dimension K * one_hot_dim(base); arm blocks never interact, so
/// this is the standard disjoint per-arm construction.
class LinearClassificationAgent : public ClassificationAgent {
public:
    LinearClassificationAgent(BanditMethod method, double exploration, double lambda,
                              const FeatureSchema& base, int n_arms,
                              std::uint64_t seed)
        : base_(base), n_arms_(n_arms), method_(method), exploration_(exploration),
          model_(n_arms * one_hot_dim(base), lambda), rng_(seed) {}

    int select(const FeatureVector& raw_context) override {
        detail::StopwatchGuard guard(timers_.score_seconds);
        std::vector<double> scores(n_arms_);
        const std::vector<double> theta_draw =
            method_ == BanditMethod::TS && exploration_ != 0.0
                ? model_.sample_theta(exploration_, rng_)
                : std::vector<double>{};
        for (int arm = 0; arm < n_arms_; ++arm) {
            const FeatureVector enc = encode_disjoint(base_, raw_context, arm, n_arms_);
            scores[arm] = method_ == BanditMethod::UCB
                              ? linucb_score(model_, enc.numeric, exploration_)
                              : (exploration_ == 0.0 ? model_.mean(enc.numeric)
                                                     : dot(theta_draw, enc.numeric));
        }
        return static_cast<int>(select_arm(scores, rng_));
    }

    void observe(const FeatureVector& raw_context, int arm, double reward) override {
        detail::StopwatchGuard guard(timers_.fit_seconds);
        const FeatureVector enc = encode_disjoint(base_, raw_context, arm, n_arms_);
        model_.update(enc.numeric, reward);
    }

    const LinearArmModel& model() const { return model_; }

private:
    FeatureSchema base_;
    int n_arms_;
    BanditMethod method_;
    double exploration_;
    LinearArmModel model_;
    RandomSource rng_;
};

/// Per-arm bootstrap-resampled tree models on the raw features. refit_stride
/// restores runtime control: models are refitted on rounds where
/// (t - 1) % stride == 0 and reused in between.
class TreeBootstrapClassificationAgent : public ClassificationAgent {
public:
    TreeBootstrapClassificationAgent(TreeBackend backend, EnsembleConfig ensemble,
                                     const FeatureSchema& base, int n_arms,
                                     std::uint64_t seed, int refit_stride = 1)
        : rng_(seed), refit_stride_(std::max(1, refit_stride)) {
        for (int arm = 0; arm < n_arms; ++arm)
            models_.emplace_back(arm, base, backend, ensemble);
    }

    int select(const FeatureVector& raw_context) override {
        detail::StopwatchGuard guard(timers_.fit_seconds);
        ++round_;
        contexts_.assign(models_.size(), raw_context);
        const bool refit = (round_ - 1) % refit_stride_ == 0;
        if (refit) ++timers_.rebuilds;
        return treebootstrap_select(models_, contexts_, rng_, refit);
    }

    void observe(const FeatureVector& raw_context, int arm, double reward) override {
        models_[arm].add(raw_context, reward);
    }

private:
    std::vector<PerArmTreeModel> models_;
    std::vector<FeatureVector> contexts_;
    RandomSource rng_;
    int refit_stride_;
    long long round_ = 0;
};

/// Context-free reference: sample mean/variance confidence bounds per arm.
/// Arms are played twice each before the score applies.
class Ucb1NormalClassificationAgent : public ClassificationAgent {
public:
    Ucb1NormalClassificationAgent(int n_arms, std::uint64_t seed)
        : stats_(n_arms), rng_(seed) {}

    int select(const FeatureVector&) override {
        ++round_;
        for (std::size_t a = 0; a < stats_.size(); ++a)
            if (stats_[a].plays < 2) return static_cast<int>(a);
        std::vector<double> scores(stats_.size());
        for (std::size_t a = 0; a < stats_.size(); ++a)
            scores[a] = ucb1_normal_score(stats_[a].mean(), stats_[a].variance(),
                                          stats_[a].plays, round_);
        return static_cast<int>(select_arm(scores, rng_));
    }

    void observe(const FeatureVector&, int arm, double reward) override {
        stats_[arm].add(reward);
    }

private:
    std::vector<RewardStats> stats_;
    RandomSource rng_;
    long long round_ = 0;
};

// ---------------------------------------------------------------------------
// Navigation agents: base arms are edges, super arms are paths.
// ---------------------------------------------------------------------------

class NavigationAgent {
public:
    virtual ~NavigationAgent() = default;
    virtual std::vector<int> select_path(double time_of_day) = 0;
    virtual void observe(std::span<const int> path, std::span<const double> edge_times,
                         double time_of_day) = 0;
    virtual const AgentTimers& timers() const { return timers_; }

protected:
    AgentTimers timers_;
};

inline constexpr double kMinEdgeWeight = 1e-6;

/// Shortest-path oracle over optimistic edge scores. Agents model reward as
/// negative travel time, so maximizing the score sum is minimizing the sum
/// of max(epsilon, -score), which Dijkstra handles once clamped non-negative.
class DijkstraPathOracle : public CombinatorialOracle {
public:
    DijkstraPathOracle(const RoadNetwork& net, int origin, int destination)
        : net_(net), origin_(origin), destination_(destination) {}

    std::vector<int> best_super_arm(std::span<const double> scores) const override {
        std::vector<double> weights(scores.size());
        for (std::size_t e = 0; e < scores.size(); ++e)
            weights[e] = std::max(kMinEdgeWeight, -scores[e]);
        return shortest_path(net_, weights, origin_, destination_);
    }

private:
    const RoadNetwork& net_;
    int origin_;
    int destination_;
};

/// TEUCB / TETS in the semi-bandit setting: one shared ensemble scores every
/// edge's context, the path oracle picks the super arm, and each traversed
/// edge yields its own (context, -time) observation.
class TreeEnsembleNavigationAgent : public NavigationAgent {
public:
    TreeEnsembleNavigationAgent(PolicyConfig policy, EnsembleConfig ensemble,
                                const RoadNetwork& net, int origin, int destination,
                                std::uint64_t seed)
        : net_(net), oracle_(net, origin, destination),
          policy_(policy, ensemble, RoadNetwork::context_schema(), seed) {}

    std::vector<int> select_path(double time_of_day) override {
        detail::StopwatchGuard guard(timers_.score_seconds);
        const double fit_before = policy_.fit_seconds();
        const bool random_phase = policy_.begin_round();
        timers_.fit_seconds += policy_.fit_seconds() - fit_before;
        std::vector<double> scores(net_.edges().size());
        if (random_phase) {
            // Uniformly random super arm: a shortest path under iid weights.
            for (auto& s : scores) s = -policy_.rng().uniform01();
        } else {
            for (std::size_t e = 0; e < scores.size(); ++e)
                scores[e] = policy_.score(
                    net_.edge_context(static_cast<int>(e), time_of_day));
        }
        return select_super_arm(scores, oracle_);
    }

    void observe(std::span<const int> path, std::span<const double> edge_times,
                 double time_of_day) override {
        for (std::size_t i = 0; i < path.size(); ++i)
            policy_.observe(net_.edge_context(path[i], time_of_day),
                            -edge_times[i]);
    }

    TreeEnsemblePolicy& policy() { return policy_; }

private:
    const RoadNetwork& net_;
    DijkstraPathOracle oracle_;
    TreeEnsemblePolicy policy_;
};

/// LinUCB / LinTS with one ridge model per edge, the construction whose
/// exploration cost grows with the edge count.
class LinearNavigationAgent : public NavigationAgent {
public:
    LinearNavigationAgent(BanditMethod method, double exploration, double lambda,
                          const RoadNetwork& net, int origin, int destination,
                          std::uint64_t seed)
        : net_(net), oracle_(net, origin, destination), method_(method),
          exploration_(exploration), rng_(seed) {
        const int dim = one_hot_dim(RoadNetwork::context_schema());
        models_.reserve(net.edges().size());
        for (std::size_t e = 0; e < net.edges().size(); ++e)
            models_.emplace_back(dim, lambda);
    }

    std::vector<int> select_path(double time_of_day) override {
        detail::StopwatchGuard guard(timers_.score_seconds);
        std::vector<double> scores(models_.size());
        for (std::size_t e = 0; e < models_.size(); ++e) {
            const std::vector<double> x = encode_one_hot(
                RoadNetwork::context_schema(),
                net_.edge_context(static_cast<int>(e), time_of_day));
            scores[e] = method_ == BanditMethod::UCB
                            ? linucb_score(models_[e], x, exploration_)
                            : lints_sample(models_[e], x, exploration_, rng_);
        }
        return select_super_arm(scores, oracle_);
    }

    void observe(std::span<const int> path, std::span<const double> edge_times,
                 double time_of_day) override {
        detail::StopwatchGuard guard(timers_.fit_seconds);
        for (std::size_t i = 0; i < path.size(); ++i) {
            const std::vector<double> x = encode_one_hot(
                RoadNetwork::context_schema(),
                net_.edge_context(path[i], time_of_day));
            models_[path[i]].update(x, -edge_times[i]);
        }
    }

private:
    const RoadNetwork& net_;
    DijkstraPathOracle oracle_;
    BanditMethod method_;
    double exploration_;
    std::vector<LinearArmModel> models_;
    RandomSource rng_;
};

/// Per-edge bootstrap tree models; edges never traversed score as maximally
/// attractive so the oracle is forced through them.
class TreeBootstrapNavigationAgent : public NavigationAgent {
public:
    TreeBootstrapNavigationAgent(TreeBackend backend, EnsembleConfig ensemble,
                                 const RoadNetwork& net, int origin, int destination,
                                 std::uint64_t seed, int refit_stride = 1)
        : net_(net), oracle_(net, origin, destination), rng_(seed),
          refit_stride_(std::max(1, refit_stride)) {
        for (std::size_t e = 0; e < net.edges().size(); ++e)
            models_.emplace_back(static_cast<int>(e), RoadNetwork::context_schema(),
                                 backend, ensemble);
    }

    std::vector<int> select_path(double time_of_day) override {
        detail::StopwatchGuard guard(timers_.fit_seconds);
        ++round_;
        const bool refit = (round_ - 1) % refit_stride_ == 0;
        if (refit) ++timers_.rebuilds;
        std::vector<double> scores(models_.size());
        for (std::size_t e = 0; e < models_.size(); ++e) {
            if (!models_[e].played()) {
                scores[e] = 1.0;  // weight clamps to epsilon: forced exploration
                continue;
            }
            if (refit || !models_[e].has_fit()) models_[e].refit(rng_);
            scores[e] = models_[e].predict_reward(
                net_.edge_context(static_cast<int>(e), time_of_day));
        }
        return select_super_arm(scores, oracle_);
    }

    void observe(std::span<const int> path, std::span<const double> edge_times,
                 double time_of_day) override {
        for (std::size_t i = 0; i < path.size(); ++i)
            models_[path[i]].add(net_.edge_context(path[i], time_of_day),
                                 -edge_times[i]);
    }

private:
    const RoadNetwork& net_;
    DijkstraPathOracle oracle_;
    std::vector<PerArmTreeModel> models_;
    RandomSource rng_;
    int refit_stride_;
    long long round_ = 0;
};

/// Context-free per-edge confidence bounds on negative travel times.
class Ucb1NormalNavigationAgent : public NavigationAgent {
public:
    Ucb1NormalNavigationAgent(const RoadNetwork& net, int origin, int destination,
                              std::uint64_t seed)
        : oracle_(net, origin, destination), stats_(net.edges().size()), rng_(seed) {}

    std::vector<int> select_path(double) override {
        ++round_;
        std::vector<double> scores(stats_.size());
        for (std::size_t e = 0; e < stats_.size(); ++e) {
            if (stats_[e].plays < 2 || round_ < 2) {
                scores[e] = 1.0;  // forced exploration
                continue;
            }
            scores[e] = ucb1_normal_score(stats_[e].mean(), stats_[e].variance(),
                                          stats_[e].plays, round_);
        }
        return select_super_arm(scores, oracle_);
    }

    void observe(std::span<const int> path, std::span<const double> edge_times,
                 double) override {
        for (std::size_t i = 0; i < path.size(); ++i)
            stats_[path[i]].add(-edge_times[i]);
    }

private:
    DijkstraPathOracle oracle_;
    std::vector<RewardStats> stats_;
    RandomSource rng_;
    long long round_ = 0;
};

/// Plays the expected-time shortest path; by construction its regret is zero.
class OracleNavigationAgent : public NavigationAgent {
public:
    OracleNavigationAgent(const RoadNetwork& net, int origin, int destination)
        : net_(net), origin_(origin), destination_(destination) {}

    std::vector<int> select_path(double time_of_day) override {
        std::vector<double> expected(net_.edges().size());
        for (std::size_t e = 0; e < expected.size(); ++e)
            expected[e] = net_.expected_time(static_cast<int>(e), time_of_day);
        return shortest_path(net_, expected, origin_, destination_);
    }

    void observe(std::span<const int>, std::span<const double>, double) override {}

private:
    const RoadNetwork& net_;
    int origin_;
    int destination_;
};

}  // namespace teb
