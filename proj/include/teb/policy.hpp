#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "teb/ensemble.hpp"
#include "teb/feature.hpp"
#include "teb/rng.hpp"
#include "teb/serialize.hpp"

namespace teb {

enum class BanditMethod { UCB, TS };

inline std::string method_name(BanditMethod m) {
    return m == BanditMethod::UCB ? "ucb" : "ts";
}

struct PolicyConfig {
    BanditMethod method = BanditMethod::UCB;
    double exploration = 1.0;  // nu
    int t_init = 10;           // initial uniformly-random rounds
    double rebuild_coeff = 8.0;
    bool refit_every_round = false;

    void validate() const {
        if (t_init < 0) throw std::invalid_argument("PolicyConfig: t_init must be >= 0");
        if (!(exploration >= 0.0) || !std::isfinite(exploration))
            throw std::invalid_argument("PolicyConfig: exploration must be finite and >= 0");
        if (!(rebuild_coeff > 0.0))
            throw std::invalid_argument("PolicyConfig: rebuild_coeff must be > 0");
    }
};

/// Confidence bound mu + sqrt(nu^2 * var * ln(t-1) / count). Zero variance
/// collapses to the mean; t must be at least 2 for the log to be defined.
inline double ucb_score(const ArmPosterior& p, long long t, double nu) {
    if (t < 2) throw std::invalid_argument("ucb_score: t must be >= 2");
    if (p.count < 1) throw std::invalid_argument("ucb_score: empty posterior");
    if (p.var <= 0.0 || nu == 0.0) return p.mu;
    return p.mu + std::sqrt(nu * nu * p.var * std::log(static_cast<double>(t - 1)) /
                            static_cast<double>(p.count));
}

/// Draw from N(mu, nu^2 * var); degenerate cases return the mean exactly.
inline double ts_sample(const ArmPosterior& p, double nu, RandomSource& rng) {
    if (p.var < 0.0) throw std::invalid_argument("ts_sample: negative variance");
    const double sd = nu * std::sqrt(p.var);
    if (sd == 0.0) return p.mu;
    return rng.normal(p.mu, sd);
}

/// Argmax with uniform-random tie-breaking from the caller's random source.
inline std::size_t select_arm(std::span<const double> scores, RandomSource& rng) {
    if (scores.empty()) throw std::invalid_argument("select_arm: no scores");
    double best = scores[0];
    for (double s : scores) {
        if (!std::isfinite(s)) throw std::invalid_argument("select_arm: non-finite score");
        if (s > best) best = s;
    }
    std::vector<std::size_t> ties;
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (scores[i] == best) ties.push_back(i);
    return ties.size() == 1 ? ties[0] : ties[rng.index(ties.size())];
}

/// Feasible-set maximizer for the combinatorial setting: given one score per
/// base arm, returns the super arm with the largest score sum.
class CombinatorialOracle {
public:
    virtual ~CombinatorialOracle() = default;
    virtual std::vector<int> best_super_arm(std::span<const double> scores) const = 0;
};

inline std::vector<int> select_super_arm(std::span<const double> scores,
                                         const CombinatorialOracle& oracle) {
    std::vector<int> chosen = oracle.best_super_arm(scores);
    if (chosen.empty())
        throw std::runtime_error("select_super_arm: oracle returned no feasible super arm");
    return chosen;
}

inline long long rebuild_value(long long t, double coeff) {
    return static_cast<long long>(std::ceil(coeff * std::log(static_cast<double>(t))));
}

/// True when ceil(coeff * ln t) has increased past the value recorded at the
/// last rebuild; between increments only incremental leaf updates happen.
inline bool should_rebuild(long long t, long long last_rebuild_value,
                           double coeff = 8.0) {
    if (t < 1) throw std::invalid_argument("should_rebuild: t must be >= 1");
    return rebuild_value(t, coeff) > last_rebuild_value;
}

/// One (context, reward) pair as observed, in observation order.
struct History {
    std::vector<Sample> samples;

    void append(const FeatureVector& x, double reward) {
        if (!std::isfinite(reward))
            throw std::invalid_argument("History: non-finite reward");
        samples.push_back(Sample{x, reward});
    }

    std::size_t size() const { return samples.size(); }
};

/// The sequential decision state shared by the UCB and TS variants: a
/// history of context-reward pairs, one tree ensemble fitted to it on the
/// ceil-log rebuild schedule, and a pending queue of observations not yet
/// folded into the model. One instance drives one decision loop.
class TreeEnsemblePolicy {
public:
    TreeEnsemblePolicy(PolicyConfig policy, EnsembleConfig ensemble,
                       FeatureSchema schema, std::uint64_t seed)
        : policy_(policy),
          ensemble_config_(ensemble),
          schema_(std::move(schema)),
          rng_(seed) {
        policy_.validate();
        ensemble_config_.validate();
    }

    const PolicyConfig& policy_config() const { return policy_; }
    const EnsembleConfig& ensemble_config() const { return ensemble_config_; }
    const FeatureSchema& schema() const { return schema_; }
    long long round() const { return t_; }
    const History& history() const { return history_; }
    bool has_model() const { return model_.has_value(); }
    const EnsembleModel& model() const { return *model_; }
    RandomSource& rng() { return rng_; }
    double fit_seconds() const { return fit_seconds_; }
    long long rebuild_count() const { return rebuild_count_; }

    /// Advances the round counter and, past the initial random phase,
    /// brings the model up to date (rebuild or incremental catch-up).
    /// Returns true while the policy is still selecting uniformly at random.
    bool begin_round() {
        ++t_;
        if (t_ <= policy_.t_init) return true;
        refresh_model();
        return false;
    }

    /// Score one arm's context with the configured exploration rule.
    double score(const FeatureVector& x) {
        const ArmPosterior p = posterior(*model_, x);
        if (policy_.method == BanditMethod::UCB)
            return ucb_score(p, t_, policy_.exploration);
        return ts_sample(p, policy_.exploration, rng_);
    }

    /// Standard K-arm round: begin, score every context, pick the argmax
    /// (uniform at random during the initial phase).
    std::size_t select(std::span<const FeatureVector> contexts) {
        if (contexts.empty())
            throw std::invalid_argument("select: no contexts");
        if (begin_round()) return rng_.index(contexts.size());
        scores_.clear();
        for (const FeatureVector& x : contexts) scores_.push_back(score(x));
        return select_arm(scores_, rng_);
    }

    /// Record the reward for a played context. The model itself is refreshed
    /// lazily at the next begin_round, so rewards may arrive in batches.
    void observe(const FeatureVector& x, double reward) {
        history_.append(x, reward);
        pending_.push_back(history_.size() - 1);
    }

    /// Checkpoint: config, counters, rng stream, history, fitted model.
    void dump(std::ostream& out) const {
        out << "teb_policy v1\n";
        out << "method " << method_name(policy_.method) << '\n';
        out << "exploration " << fmt_double(policy_.exploration) << '\n';
        out << "t_init " << policy_.t_init << '\n';
        out << "rebuild_coeff " << fmt_double(policy_.rebuild_coeff) << '\n';
        out << "refit_every_round " << (policy_.refit_every_round ? 1 : 0) << '\n';
        dump_ensemble_config(ensemble_config_, out);
        out << "t " << t_ << '\n';
        out << "last_rebuild " << last_rebuild_value_ << '\n';
        out << "rng " << rng_.dump_state() << '\n';
        out << "pending " << pending_.size();
        for (std::size_t i : pending_) out << ' ' << i;
        out << '\n';
        dump_schema(schema_, out);
        out << "history " << history_.size() << '\n';
        for (const Sample& s : history_.samples) {
            out << fmt_double(s.target) << " " << s.x.numeric.size();
            for (double v : s.x.numeric) out << ' ' << fmt_double(v);
            out << ' ' << s.x.categorical.size();
            for (int c : s.x.categorical) out << ' ' << c;
            out << '\n';
        }
        out << "model " << (model_ ? 1 : 0) << '\n';
        if (model_) dump_ensemble(*model_, out);
        out << "end_policy\n";
    }

    static TreeEnsemblePolicy load(std::istream& in) {
        detail::expect(in, "teb_policy");
        detail::expect(in, "v1");
        PolicyConfig pc;
        detail::expect(in, "method");
        pc.method = detail::next_token(in, "method") == "ts" ? BanditMethod::TS
                                                             : BanditMethod::UCB;
        detail::expect(in, "exploration");
        pc.exploration = detail::read_double(in, "exploration");
        detail::expect(in, "t_init");
        pc.t_init = static_cast<int>(detail::read_int(in, "t_init"));
        detail::expect(in, "rebuild_coeff");
        pc.rebuild_coeff = detail::read_double(in, "rebuild_coeff");
        detail::expect(in, "refit_every_round");
        pc.refit_every_round = detail::read_int(in, "refit_every_round") != 0;
        const EnsembleConfig ec = load_ensemble_config(in);
        detail::expect(in, "t");
        const long long t = detail::read_int(in, "t");
        detail::expect(in, "last_rebuild");
        const long long last = detail::read_int(in, "last_rebuild");
        detail::expect(in, "rng");
        std::string rng_state;
        {
            std::uint64_t seed, s0, s1, s2, s3;
            if (!(in >> seed >> s0 >> s1 >> s2 >> s3))
                throw std::runtime_error("policy load: bad rng state");
            std::ostringstream os;
            os << seed << ' ' << s0 << ' ' << s1 << ' ' << s2 << ' ' << s3;
            rng_state = os.str();
        }
        detail::expect(in, "pending");
        const long long n_pending = detail::read_int(in, "pending count");
        std::vector<std::size_t> pending(n_pending);
        for (auto& i : pending) i = static_cast<std::size_t>(detail::read_int(in, "pending index"));
        FeatureSchema schema = load_schema(in);
        detail::expect(in, "history");
        const long long n_hist = detail::read_int(in, "history size");
        TreeEnsemblePolicy out(pc, ec, schema, 0);
        for (long long i = 0; i < n_hist; ++i) {
            Sample s;
            s.target = detail::read_double(in, "history target");
            const long long nn = detail::read_int(in, "numeric size");
            s.x.numeric.resize(nn);
            for (auto& v : s.x.numeric) v = detail::read_double(in, "numeric value");
            const long long nc = detail::read_int(in, "categorical size");
            s.x.categorical.resize(nc);
            for (auto& c : s.x.categorical)
                c = static_cast<int>(detail::read_int(in, "categorical code"));
            s.x.schema_id = schema.id();
            out.history_.samples.push_back(std::move(s));
        }
        detail::expect(in, "model");
        const bool has_model = detail::read_int(in, "model flag") != 0;
        if (has_model) out.model_ = load_ensemble(in);
        detail::expect(in, "end_policy");
        out.t_ = t;
        out.last_rebuild_value_ = last;
        out.pending_ = std::move(pending);
        out.rng_.load_state(rng_state);
        return out;
    }

private:
    void refresh_model() {
        const bool due = !model_.has_value() || policy_.refit_every_round ||
                         should_rebuild(t_, last_rebuild_value_, policy_.rebuild_coeff);
        if (due) {
            const auto start = std::chrono::steady_clock::now();
            model_ = fit_ensemble(history_.samples, schema_, ensemble_config_);
            fit_seconds_ +=
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                    .count();
            ++rebuild_count_;
            last_rebuild_value_ = rebuild_value(t_, policy_.rebuild_coeff);
            pending_.clear();
        } else {
            for (std::size_t i : pending_) {
                const Sample& s = history_.samples[i];
                add_observation(*model_, s.x, s.target);
            }
            pending_.clear();
        }
    }

    PolicyConfig policy_;
    EnsembleConfig ensemble_config_;
    FeatureSchema schema_;
    RandomSource rng_;
    History history_;
    std::optional<EnsembleModel> model_;
    std::vector<std::size_t> pending_;
    std::vector<double> scores_;
    long long t_ = 0;
    long long last_rebuild_value_ = 0;
    double fit_seconds_ = 0.0;
    long long rebuild_count_ = 0;
};

}  // namespace teb
