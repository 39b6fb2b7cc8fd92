#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "teb/agents.hpp"
#include "teb/dataset.hpp"
#include "teb/envs/classification.hpp"
#include "teb/envs/regret.hpp"
#include "teb/envs/road_network.hpp"
#include "teb/synth.hpp"

namespace teb {

using nlohmann::json;

/// FNV-1a over the normalized config text; the run's identity.
inline std::string config_hash(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

enum class ArmEncoding { Hybrid, Disjoint };

inline std::string encoding_name(ArmEncoding e) {
    return e == ArmEncoding::Hybrid ? "hybrid" : "disjoint";
}

struct AgentSpec {
    std::string name;
    std::string type;  // tree_ensemble | linear | tree_bootstrap | ucb1_normal | oracle
    BanditMethod method = BanditMethod::UCB;
    // tree_ensemble
    Trainer trainer = Trainer::Boosting;
    int n_trees = 100;
    int max_depth = 10;
    double learning_rate = 0.3;
    double bag_fraction = 1.0;
    double feature_fraction = 0.0;
    double nu = 1.0;
    long long t_init = -1;  // -1: 10 per arm (classification) or 10 rounds (navigation)
    double rebuild_coeff = 8.0;
    bool refit_every_round = false;
    ArmEncoding encoding = ArmEncoding::Hybrid;
    bool encoding_explicit = false;
    // linear
    double alpha = 1.0;
    double v = 1.0;
    double lambda = 1.0;
    // tree_bootstrap
    TreeBackend backend = TreeBackend::SingleTree;
    int refit_stride = 1;
};

struct EnvironmentSpec {
    std::string type;  // classification | synthetic_classification |
                       // road_network | synthetic_road_network
    std::string dataset_path;
    std::string schema_path;
    std::string preset;
    std::size_t rows = 0;
    std::uint64_t gen_seed = 1;
    std::string network_file;
    int origin = 0;
    int destination = -1;
    int grid_width = 8;
    int grid_height = 8;
    double spacing = 400.0;

    bool is_classification() const {
        return type == "classification" || type == "synthetic_classification";
    }
};

struct ExperimentConfig {
    std::string name;
    EnvironmentSpec environment;
    std::vector<AgentSpec> agents;
    long long horizon = 0;
    std::vector<std::uint64_t> seeds;
    long long feedback_batch_size = 1;
    std::string output_dir;
    int workers = 0;  // 0: hardware concurrency
    bool allow_encoding_mismatch = false;

    json normalized;  // every default materialized
    std::string hash;
};

namespace detail {

inline void check_field(std::vector<std::string>& errors, bool ok,
                        const std::string& path, const std::string& message) {
    if (!ok) errors.push_back(path + ": " + message);
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<T>();
}

}  // namespace detail

/// Parses and validates a config, producing either a fully-normalized
/// ExperimentConfig or the list of field-path errors.
inline std::vector<std::string> parse_config(const json& j, ExperimentConfig& out) {
    std::vector<std::string> errors;
    using detail::check_field;
    using detail::get_or;

    out = ExperimentConfig{};
    out.name = get_or<std::string>(j, "name", "experiment");
    out.horizon = get_or<long long>(j, "horizon", 0);
    check_field(errors, out.horizon >= 1, "horizon", "must be >= 1");
    out.feedback_batch_size = get_or<long long>(j, "feedback_batch_size", 1);
    check_field(errors, out.feedback_batch_size >= 1, "feedback_batch_size",
                "must be >= 1");
    out.workers = get_or<int>(j, "workers", 0);
    check_field(errors, out.workers >= 0, "workers", "must be >= 0");
    out.allow_encoding_mismatch = get_or<bool>(j, "allow_encoding_mismatch", false);
    out.output_dir = get_or<std::string>(j, "output_dir", out.name);

    if (j.contains("seeds") && j.at("seeds").is_array() && !j.at("seeds").empty()) {
        std::set<std::uint64_t> uniq;
        for (const auto& s : j.at("seeds")) {
            if (!s.is_number_unsigned() && !s.is_number_integer()) {
                errors.push_back("seeds: entries must be integers");
                continue;
            }
            const std::uint64_t seed = s.get<std::uint64_t>();
            if (!uniq.insert(seed).second)
                errors.push_back("seeds: duplicate seed " + std::to_string(seed));
        }
        out.seeds.assign(uniq.begin(), uniq.end());
        // Preserve the declared order rather than the set order.
        out.seeds.clear();
        std::set<std::uint64_t> seen;
        for (const auto& s : j.at("seeds")) {
            if (!s.is_number_unsigned() && !s.is_number_integer()) continue;
            const std::uint64_t seed = s.get<std::uint64_t>();
            if (seen.insert(seed).second) out.seeds.push_back(seed);
        }
    } else {
        errors.push_back("seeds: non-empty integer array required");
    }

    if (!j.contains("environment") || !j.at("environment").is_object()) {
        errors.push_back("environment: object required");
    } else {
        const json& e = j.at("environment");
        EnvironmentSpec& env = out.environment;
        env.type = get_or<std::string>(e, "type", "");
        if (env.type == "classification") {
            env.dataset_path = get_or<std::string>(e, "dataset", "");
            env.schema_path = get_or<std::string>(e, "schema", "");
            check_field(errors, !env.dataset_path.empty(), "environment.dataset",
                        "required for classification");
            check_field(errors, !env.schema_path.empty(), "environment.schema",
                        "required for classification");
        } else if (env.type == "synthetic_classification") {
            env.preset = get_or<std::string>(e, "preset", "");
            env.rows = get_or<std::size_t>(e, "rows", 0);
            env.gen_seed = get_or<std::uint64_t>(e, "seed", 1);
            check_field(errors,
                        env.preset == "mushroom_like" || env.preset == "adult_like",
                        "environment.preset",
                        "must be one of mushroom_like, adult_like");
            check_field(errors, env.rows >= 8, "environment.rows", "must be >= 8");
            check_field(errors,
                        out.horizon <= static_cast<long long>(env.rows) ||
                            out.horizon <= 0,
                        "horizon", "exceeds synthetic dataset rows");
        } else if (env.type == "road_network") {
            env.network_file = get_or<std::string>(e, "file", "");
            check_field(errors, !env.network_file.empty(), "environment.file",
                        "required for road_network");
            env.origin = get_or<int>(e, "origin", 0);
            env.destination = get_or<int>(e, "destination", -1);
            check_field(errors, env.destination >= 0, "environment.destination",
                        "required");
        } else if (env.type == "synthetic_road_network") {
            env.grid_width = get_or<int>(e, "grid_width", 8);
            env.grid_height = get_or<int>(e, "grid_height", 8);
            env.spacing = get_or<double>(e, "spacing", 400.0);
            env.gen_seed = get_or<std::uint64_t>(e, "seed", 1);
            env.origin = get_or<int>(e, "origin", 0);
            env.destination = get_or<int>(e, "destination",
                                          env.grid_width * env.grid_height - 1);
            check_field(errors, env.grid_width >= 2 && env.grid_height >= 2,
                        "environment.grid_width", "grid must be at least 2x2");
        } else {
            errors.push_back("environment.type: unknown type '" + env.type + "'");
        }
    }

    if (!j.contains("agents") || !j.at("agents").is_array() || j.at("agents").empty()) {
        errors.push_back("agents: non-empty array required");
    } else {
        std::set<std::string> names;
        int index = 0;
        for (const auto& a : j.at("agents")) {
            const std::string path = "agents[" + std::to_string(index) + "]";
            AgentSpec spec;
            spec.name = get_or<std::string>(a, "name", "");
            check_field(errors, !spec.name.empty(), path + ".name", "required");
            if (!spec.name.empty()) {
                check_field(errors, names.insert(spec.name).second, path + ".name",
                            "duplicate agent name");
                bool clean = spec.name.find("_seed") == std::string::npos;
                for (char ch : spec.name)
                    clean = clean && (std::isalnum(static_cast<unsigned char>(ch)) ||
                                      ch == '-' || ch == '.');
                check_field(errors, clean, path + ".name",
                            "use only letters, digits, '-', '.'");
            }
            spec.type = get_or<std::string>(a, "type", "");
            const std::string method = get_or<std::string>(a, "method", "ucb");
            check_field(errors, method == "ucb" || method == "ts", path + ".method",
                        "must be ucb or ts");
            spec.method = method == "ts" ? BanditMethod::TS : BanditMethod::UCB;

            if (spec.type == "tree_ensemble") {
                const std::string trainer = get_or<std::string>(a, "trainer", "boosting");
                check_field(errors, trainer == "bagging" || trainer == "boosting",
                            path + ".trainer", "must be bagging or boosting");
                spec.trainer = trainer == "bagging" ? Trainer::Bagging : Trainer::Boosting;
                spec.n_trees = get_or<int>(a, "n_trees", 100);
                spec.max_depth = get_or<int>(a, "max_depth", 10);
                spec.learning_rate = get_or<double>(a, "learning_rate", 0.3);
                spec.bag_fraction = get_or<double>(a, "bag_fraction", 1.0);
                spec.feature_fraction = get_or<double>(a, "feature_fraction", 0.0);
                spec.nu = get_or<double>(a, "nu", 1.0);
                spec.t_init = get_or<long long>(a, "t_init", -1);
                spec.rebuild_coeff = get_or<double>(a, "rebuild_coeff", 8.0);
                spec.refit_every_round = get_or<bool>(a, "refit_every_round", false);
                check_field(errors, spec.n_trees >= 1, path + ".n_trees", "must be >= 1");
                check_field(errors, spec.max_depth >= 0, path + ".max_depth",
                            "must be >= 0");
                check_field(errors,
                            spec.trainer == Trainer::Bagging ||
                                (spec.learning_rate > 0 && spec.learning_rate <= 1),
                            path + ".learning_rate", "must be in (0, 1]");
                check_field(errors, spec.nu >= 0 && std::isfinite(spec.nu),
                            path + ".nu", "must be finite and >= 0");
                check_field(errors, spec.rebuild_coeff > 0, path + ".rebuild_coeff",
                            "must be > 0");
                check_field(errors, spec.t_init == -1 || spec.t_init >= 4,
                            path + ".t_init", "must be >= 4 (or omitted for auto)");
            } else if (spec.type == "linear") {
                spec.alpha = get_or<double>(a, "alpha", 1.0);
                spec.v = get_or<double>(a, "v", 1.0);
                spec.lambda = get_or<double>(a, "lambda", 1.0);
                spec.encoding = ArmEncoding::Disjoint;
                check_field(errors, spec.lambda > 0, path + ".lambda", "must be > 0");
                check_field(errors, spec.alpha >= 0, path + ".alpha", "must be >= 0");
                check_field(errors, spec.v >= 0, path + ".v", "must be >= 0");
            } else if (spec.type == "tree_bootstrap") {
                const std::string backend = get_or<std::string>(a, "backend", "dt");
                check_field(errors,
                            backend == "dt" || backend == "rf" || backend == "gbdt",
                            path + ".backend", "must be dt, rf, or gbdt");
                spec.backend = backend == "dt" ? TreeBackend::SingleTree
                               : backend == "rf" ? TreeBackend::Forest
                                                 : TreeBackend::Boosted;
                spec.n_trees = get_or<int>(a, "n_trees", 100);
                spec.max_depth = get_or<int>(a, "max_depth", 10);
                spec.learning_rate = get_or<double>(a, "learning_rate", 0.3);
                spec.refit_stride = get_or<int>(a, "refit_stride", 1);
                check_field(errors, spec.refit_stride >= 1, path + ".refit_stride",
                            "must be >= 1");
            } else if (spec.type == "ucb1_normal" || spec.type == "oracle") {
                // no extra parameters
            } else {
                errors.push_back(path + ".type: unknown type '" + spec.type + "'");
            }

            if (a.contains("encoding")) {
                const std::string enc = a.at("encoding").get<std::string>();
                check_field(errors, enc == "hybrid" || enc == "disjoint",
                            path + ".encoding", "must be hybrid or disjoint");
                spec.encoding = enc == "hybrid" ? ArmEncoding::Hybrid
                                                : ArmEncoding::Disjoint;
                spec.encoding_explicit = true;
                // Tree agents pair with the hybrid encoding, linear agents
                // with the disjoint one; other pairings need the explicit
                // override flag.
                const bool mismatched =
                    (spec.type == "tree_ensemble" && spec.encoding != ArmEncoding::Hybrid) ||
                    (spec.type == "linear" && spec.encoding != ArmEncoding::Disjoint);
                if (mismatched && !out.allow_encoding_mismatch)
                    errors.push_back(path + ".encoding: " + enc + " with " + spec.type +
                                     " requires allow_encoding_mismatch");
            }
            out.agents.push_back(std::move(spec));
            ++index;
        }
    }

    if (!errors.empty()) return errors;

    // Normalized copy with every default materialized.
    json n;
    n["name"] = out.name;
    n["horizon"] = out.horizon;
    n["seeds"] = out.seeds;
    n["feedback_batch_size"] = out.feedback_batch_size;
    n["output_dir"] = out.output_dir;
    n["workers"] = out.workers;
    n["allow_encoding_mismatch"] = out.allow_encoding_mismatch;
    {
        json e;
        const EnvironmentSpec& env = out.environment;
        e["type"] = env.type;
        if (env.type == "classification") {
            e["dataset"] = env.dataset_path;
            e["schema"] = env.schema_path;
        } else if (env.type == "synthetic_classification") {
            e["preset"] = env.preset;
            e["rows"] = env.rows;
            e["seed"] = env.gen_seed;
        } else if (env.type == "road_network") {
            e["file"] = env.network_file;
            e["origin"] = env.origin;
            e["destination"] = env.destination;
        } else {
            e["grid_width"] = env.grid_width;
            e["grid_height"] = env.grid_height;
            e["spacing"] = env.spacing;
            e["seed"] = env.gen_seed;
            e["origin"] = env.origin;
            e["destination"] = env.destination;
        }
        n["environment"] = e;
    }
    n["agents"] = json::array();
    for (const AgentSpec& spec : out.agents) {
        json a;
        a["name"] = spec.name;
        a["type"] = spec.type;
        if (spec.type == "tree_ensemble") {
            a["method"] = method_name(spec.method);
            a["trainer"] = trainer_name(spec.trainer);
            a["n_trees"] = spec.n_trees;
            a["max_depth"] = spec.max_depth;
            a["learning_rate"] = spec.learning_rate;
            a["bag_fraction"] = spec.bag_fraction;
            a["feature_fraction"] = spec.feature_fraction;
            a["nu"] = spec.nu;
            a["t_init"] = spec.t_init;
            a["rebuild_coeff"] = spec.rebuild_coeff;
            a["refit_every_round"] = spec.refit_every_round;
            a["encoding"] = encoding_name(spec.encoding);
        } else if (spec.type == "linear") {
            a["method"] = method_name(spec.method);
            a["alpha"] = spec.alpha;
            a["v"] = spec.v;
            a["lambda"] = spec.lambda;
            a["encoding"] = encoding_name(spec.encoding);
        } else if (spec.type == "tree_bootstrap") {
            a["backend"] = tree_backend_name(spec.backend);
            a["n_trees"] = spec.n_trees;
            a["max_depth"] = spec.max_depth;
            a["learning_rate"] = spec.learning_rate;
            a["refit_stride"] = spec.refit_stride;
        }
        n["agents"].push_back(a);
    }
    out.normalized = n;
    out.hash = config_hash(n.dump());
    return {};
}

inline ExperimentConfig parse_config_or_throw(const json& j) {
    ExperimentConfig config;
    const auto errors = parse_config(j, config);
    if (!errors.empty()) {
        std::string all = "config validation failed:";
        for (const auto& e : errors) all += "\n  " + e;
        throw std::invalid_argument(all);
    }
    return config;
}

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

struct AgentRunStats {
    std::vector<std::pair<std::uint64_t, double>> per_seed;  // (seed, final regret)
    double mean = 0.0;
    double sd = 0.0;
    double fit_seconds = 0.0;
    double score_seconds = 0.0;
    double env_seconds = 0.0;
    double total_seconds = 0.0;
    long long resumed = 0;

    void finalize() {
        if (per_seed.empty()) return;
        double sum = 0.0;
        for (const auto& [seed, value] : per_seed) sum += value;
        mean = sum / static_cast<double>(per_seed.size());
        if (per_seed.size() > 1) {
            double ss = 0.0;
            for (const auto& [seed, value] : per_seed)
                ss += (value - mean) * (value - mean);
            sd = std::sqrt(ss / static_cast<double>(per_seed.size() - 1));
        }
    }
};

struct RunSummary {
    std::string name;
    std::string hash;
    long long horizon = 0;
    std::map<std::string, AgentRunStats> agents;
};

namespace detail {

struct LoadedEnvironment {
    std::shared_ptr<const ClassificationDataset> dataset;  // classification
    std::shared_ptr<const RoadNetwork> network;            // navigation
    int origin = 0;
    int destination = 0;
};

inline LoadedEnvironment load_environment(const ExperimentConfig& config) {
    LoadedEnvironment out;
    const EnvironmentSpec& env = config.environment;
    if (env.type == "classification") {
        out.dataset = ingest_dataset(env.dataset_path, env.schema_path);
    } else if (env.type == "synthetic_classification") {
        out.dataset = make_synthetic_classification(env.preset, env.rows, env.gen_seed);
    } else if (env.type == "road_network") {
        std::ifstream in(env.network_file);
        if (!in) throw std::runtime_error("cannot open network file " + env.network_file);
        auto net = std::make_shared<RoadNetwork>(RoadNetwork::load(in));
        net->validate();
        out.network = net;
        out.origin = env.origin;
        out.destination = env.destination;
    } else {
        SyntheticNetworkConfig cfg;
        cfg.grid_width = env.grid_width;
        cfg.grid_height = env.grid_height;
        cfg.spacing = env.spacing;
        cfg.seed = env.gen_seed;
        out.network = std::make_shared<RoadNetwork>(make_synthetic_network(cfg));
        out.origin = env.origin;
        out.destination = env.destination;
    }
    if (out.dataset) {
        if (config.horizon > static_cast<long long>(out.dataset->rows.size()))
            throw std::invalid_argument("horizon exceeds dataset size");
    } else {
        const int n = static_cast<int>(out.network->vertices().size());
        if (out.origin < 0 || out.origin >= n || out.destination < 0 ||
            out.destination >= n || out.origin == out.destination)
            throw std::invalid_argument("bad origin/destination pair");
    }
    return out;
}

inline std::uint64_t agent_seed(std::uint64_t run_seed, const std::string& name) {
    return run_seed ^ std::hash<std::string>{}(name);
}

inline std::unique_ptr<ClassificationAgent> make_classification_agent(
    const AgentSpec& spec, const FeatureSchema& schema, int n_arms,
    std::uint64_t seed) {
    if (spec.type == "tree_ensemble") {
        PolicyConfig pc;
        pc.method = spec.method;
        pc.exploration = spec.nu;
        pc.t_init = spec.t_init < 0 ? 10 * n_arms : static_cast<int>(spec.t_init);
        pc.rebuild_coeff = spec.rebuild_coeff;
        pc.refit_every_round = spec.refit_every_round;
        EnsembleConfig ec;
        ec.trainer = spec.trainer;
        ec.n_trees = spec.n_trees;
        ec.max_depth = spec.max_depth;
        ec.learning_rate = spec.learning_rate;
        ec.bag_fraction = spec.bag_fraction;
        ec.feature_fraction = spec.feature_fraction;
        ec.seed = seed;
        return std::make_unique<TreeEnsembleClassificationAgent>(pc, ec, schema,
                                                                 n_arms, seed);
    }
    if (spec.type == "linear") {
        const double exploration = spec.method == BanditMethod::UCB ? spec.alpha : spec.v;
        return std::make_unique<LinearClassificationAgent>(
            spec.method, exploration, spec.lambda, schema, n_arms, seed);
    }
    if (spec.type == "tree_bootstrap") {
        EnsembleConfig ec;
        ec.n_trees = spec.n_trees;
        ec.max_depth = spec.max_depth;
        ec.learning_rate = spec.learning_rate;
        return std::make_unique<TreeBootstrapClassificationAgent>(
            spec.backend, ec, schema, n_arms, seed, spec.refit_stride);
    }
    if (spec.type == "ucb1_normal")
        return std::make_unique<Ucb1NormalClassificationAgent>(n_arms, seed);
    return nullptr;  // oracle: handled by the loop
}

inline std::unique_ptr<NavigationAgent> make_navigation_agent(
    const AgentSpec& spec, const RoadNetwork& net, int origin, int destination,
    std::uint64_t seed) {
    if (spec.type == "tree_ensemble") {
        PolicyConfig pc;
        pc.method = spec.method;
        pc.exploration = spec.nu;
        pc.t_init = spec.t_init < 0 ? 10 : static_cast<int>(spec.t_init);
        pc.rebuild_coeff = spec.rebuild_coeff;
        pc.refit_every_round = spec.refit_every_round;
        EnsembleConfig ec;
        ec.trainer = spec.trainer;
        ec.n_trees = spec.n_trees;
        ec.max_depth = spec.max_depth;
        ec.learning_rate = spec.learning_rate;
        ec.bag_fraction = spec.bag_fraction;
        ec.feature_fraction = spec.feature_fraction;
        ec.seed = seed;
        return std::make_unique<TreeEnsembleNavigationAgent>(pc, ec, net, origin,
                                                             destination, seed);
    }
    if (spec.type == "linear") {
        const double exploration = spec.method == BanditMethod::UCB ? spec.alpha : spec.v;
        return std::make_unique<LinearNavigationAgent>(
            spec.method, exploration, spec.lambda, net, origin, destination, seed);
    }
    if (spec.type == "tree_bootstrap") {
        EnsembleConfig ec;
        ec.n_trees = spec.n_trees;
        ec.max_depth = spec.max_depth;
        ec.learning_rate = spec.learning_rate;
        return std::make_unique<TreeBootstrapNavigationAgent>(
            spec.backend, ec, net, origin, destination, seed, spec.refit_stride);
    }
    if (spec.type == "ucb1_normal")
        return std::make_unique<Ucb1NormalNavigationAgent>(net, origin, destination,
                                                           seed);
    if (spec.type == "oracle")
        return std::make_unique<OracleNavigationAgent>(net, origin, destination);
    throw std::invalid_argument("unknown navigation agent type " + spec.type);
}

struct PendingClassification {
    FeatureVector context;
    int arm;
    double reward;
};

inline RegretTrace run_classification_job(const ExperimentConfig& config,
                                          const AgentSpec& spec,
                                          const LoadedEnvironment& env,
                                          std::uint64_t seed, AgentTimers& timers) {
    ClassificationBanditEnv bandit(env.dataset, seed);
    auto agent = make_classification_agent(spec, env.dataset->schema,
                                           bandit.n_arms(), agent_seed(seed, spec.name));
    RegretTrace trace(seed, config.hash);
    std::vector<PendingClassification> pending;
    for (long long t = 1; t <= config.horizon; ++t) {
        const FeatureVector x = bandit.current_context();
        int arm;
        if (agent) {
            arm = agent->select(x);
            if (arm < 0 || arm >= bandit.n_arms())
                throw std::logic_error("agent returned invalid arm");
        } else {
            arm = bandit.current_label();  // oracle
        }
        const double reward = bandit.step(arm);
        trace.append(std::to_string(arm), reward, 1.0 - reward);
        if (agent) {
            pending.push_back({x, arm, reward});
            if (t % config.feedback_batch_size == 0 || t == config.horizon) {
                for (const auto& p : pending) agent->observe(p.context, p.arm, p.reward);
                pending.clear();
            }
        }
    }
    if (agent) timers = agent->timers();
    return trace;
}

struct PendingNavigation {
    std::vector<int> path;
    std::vector<double> times;
    double time_of_day;
};

inline RegretTrace run_navigation_job(const ExperimentConfig& config,
                                      const AgentSpec& spec,
                                      const LoadedEnvironment& env,
                                      std::uint64_t seed, AgentTimers& timers) {
    const RoadNetwork& net = *env.network;
    auto agent = make_navigation_agent(spec, net, env.origin, env.destination,
                                       agent_seed(seed, spec.name));
    RandomSource tod_rng(seed);
    RandomSource noise_rng(seed ^ 0x9e3779b97f4a7c15ull);
    RegretTrace trace(seed, config.hash);
    std::vector<PendingNavigation> pending;
    for (long long t = 1; t <= config.horizon; ++t) {
        const double tod = tod_rng.uniform(0.0, 24.0);
        const std::vector<int> path = agent->select_path(tod);
        const NavFeedback fb =
            nav_env_step(net, path, env.origin, env.destination, tod, noise_rng);
        std::string choice;
        for (std::size_t i = 0; i < path.size(); ++i) {
            if (i) choice += '|';
            choice += std::to_string(path[i]);
        }
        // Tiny negative regret can appear from float cancellation; clamp.
        trace.append(choice, -fb.total_time, std::max(0.0, fb.instantaneous_regret));
        pending.push_back({path, fb.edge_times, tod});
        if (t % config.feedback_batch_size == 0 || t == config.horizon) {
            for (const auto& p : pending) agent->observe(p.path, p.times, p.time_of_day);
            pending.clear();
        }
    }
    timers = agent->timers();
    return trace;
}

}  // namespace detail

inline std::string trace_filename(const std::string& agent, std::uint64_t seed) {
    return "trace_" + agent + "_seed" + std::to_string(seed) + ".csv";
}

/// Output root: explicit argument, else $TEB_OUTPUT_ROOT, else "out".
inline std::filesystem::path resolve_output_root(const std::string& explicit_root) {
    if (!explicit_root.empty()) return explicit_root;
    if (const char* env = std::getenv("TEB_OUTPUT_ROOT"); env && *env) return env;
    return "out";
}

/// Runs every (agent, seed) pair, in parallel workers, writing one trace CSV
/// per pair plus config.json, summary.json, and timings.json. Completed
/// traces from an earlier partial run are detected by config hash and reused.
inline RunSummary run_experiment(const ExperimentConfig& config,
                                 const std::string& output_root = "") {
    const detail::LoadedEnvironment env = detail::load_environment(config);
    const std::filesystem::path outdir =
        resolve_output_root(output_root) / std::filesystem::path(config.output_dir);
    std::filesystem::create_directories(outdir);
    {
        std::ofstream out(outdir / "config.json");
        out << config.normalized.dump(2) << '\n';
    }

    struct Job {
        const AgentSpec* spec;
        std::uint64_t seed;
        double final_regret = 0.0;
        AgentTimers timers;
        double total_seconds = 0.0;
        bool resumed = false;
        std::string error;
    };
    std::vector<Job> jobs;
    for (const AgentSpec& spec : config.agents)
        for (std::uint64_t seed : config.seeds) jobs.push_back({&spec, seed});

    std::atomic<std::size_t> next{0};
    auto run_job = [&](Job& job) {
        const std::filesystem::path trace_path =
            outdir / trace_filename(job.spec->name, job.seed);
        if (std::filesystem::exists(trace_path)) {
            try {
                std::ifstream in(trace_path);
                const RegretTrace existing = RegretTrace::read_csv(in);
                if (existing.config_hash() == config.hash &&
                    existing.size() == static_cast<std::size_t>(config.horizon)) {
                    job.final_regret = existing.final_cumulative();
                    job.resumed = true;
                    return;
                }
            } catch (const std::exception&) {
                // fall through and rerun
            }
        }
        const auto start = std::chrono::steady_clock::now();
        RegretTrace trace =
            env.dataset
                ? detail::run_classification_job(config, *job.spec, env, job.seed,
                                                 job.timers)
                : detail::run_navigation_job(config, *job.spec, env, job.seed,
                                             job.timers);
        job.total_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                .count();
        job.final_regret = trace.final_cumulative();
        const std::filesystem::path tmp = trace_path.string() + ".tmp";
        {
            std::ofstream out(tmp);
            trace.write_csv(out);
        }
        std::filesystem::rename(tmp, trace_path);
    };

    const int hardware = static_cast<int>(std::thread::hardware_concurrency());
    const int n_workers = std::max(
        1, std::min<int>(config.workers > 0 ? config.workers : std::max(1, hardware),
                         static_cast<int>(jobs.size())));
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= jobs.size()) return;
                try {
                    run_job(jobs[i]);
                } catch (const std::exception& e) {
                    jobs[i].error = e.what();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (const Job& job : jobs)
        if (!job.error.empty())
            throw std::runtime_error("run failed for agent " + job.spec->name +
                                     " seed " + std::to_string(job.seed) + ": " +
                                     job.error);

    RunSummary summary;
    summary.name = config.name;
    summary.hash = config.hash;
    summary.horizon = config.horizon;
    for (const AgentSpec& spec : config.agents)
        summary.agents[spec.name] = AgentRunStats{};
    for (const Job& job : jobs) {
        AgentRunStats& stats = summary.agents[job.spec->name];
        stats.per_seed.emplace_back(job.seed, job.final_regret);
        stats.fit_seconds += job.timers.fit_seconds;
        stats.score_seconds +=
            std::max(0.0, job.timers.score_seconds - job.timers.fit_seconds);
        stats.total_seconds += job.total_seconds;
        stats.resumed += job.resumed ? 1 : 0;
    }
    for (auto& [name, stats] : summary.agents) {
        std::sort(stats.per_seed.begin(), stats.per_seed.end());
        stats.env_seconds = std::max(
            0.0, stats.total_seconds - stats.fit_seconds - stats.score_seconds);
        stats.finalize();
    }

    json js;
    js["name"] = summary.name;
    js["config_hash"] = summary.hash;
    js["horizon"] = summary.horizon;
    js["agents"] = json::object();
    for (const auto& [name, stats] : summary.agents) {
        json a;
        a["per_seed"] = json::array();
        for (const auto& [seed, value] : stats.per_seed)
            a["per_seed"].push_back(json::array({seed, value}));
        a["mean_final_regret"] = stats.mean;
        a["sd_final_regret"] = stats.sd;
        js["agents"][name] = a;
    }
    {
        std::ofstream out(outdir / "summary.json");
        out << js.dump(2) << '\n';
    }
    {
        json timings;
        for (const auto& [name, stats] : summary.agents) {
            json a;
            a["fit_seconds"] = stats.fit_seconds;
            a["score_seconds"] = stats.score_seconds;
            a["env_seconds"] = stats.env_seconds;
            a["total_seconds"] = stats.total_seconds;
            a["resumed_traces"] = stats.resumed;
            timings[name] = a;
        }
        std::ofstream out(outdir / "timings.json");
        out << timings.dump(2) << '\n';
    }
    return summary;
}

// ---------------------------------------------------------------------------
// Trace post-processing
// ---------------------------------------------------------------------------

struct TraceSet {
    // agent -> traces, one per seed, sorted by seed.
    std::map<std::string, std::vector<RegretTrace>> by_agent;
};

/// Reads every trace_<agent>_seed<k>.csv in a directory.
inline TraceSet load_traces(const std::string& directory) {
    TraceSet out;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(directory)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("trace_", 0) == 0 && name.size() > 4 &&
            name.substr(name.size() - 4) == ".csv")
            files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
        const std::string stem = path.stem().string();  // trace_<agent>_seed<k>
        const auto seed_pos = stem.rfind("_seed");
        if (seed_pos == std::string::npos) continue;
        const std::string agent = stem.substr(6, seed_pos - 6);
        std::ifstream in(path);
        out.by_agent[agent].push_back(RegretTrace::read_csv(in));
    }
    if (out.by_agent.empty())
        throw std::runtime_error("no trace files found in " + directory);
    for (auto& [agent, traces] : out.by_agent)
        std::sort(traces.begin(), traces.end(),
                  [](const RegretTrace& a, const RegretTrace& b) {
                      return a.seed() < b.seed();
                  });
    return out;
}

/// Long-format per-step aggregate: step, agent, mean cumulative regret, and
/// the sample SD across seeds. All traces must share one horizon.
inline void emit_plot_data(const TraceSet& traces, std::ostream& out) {
    std::size_t horizon = 0;
    for (const auto& [agent, list] : traces.by_agent)
        for (const RegretTrace& trace : list) {
            if (horizon == 0) horizon = trace.size();
            if (trace.size() != horizon)
                throw std::runtime_error("emit_plot_data: mismatched horizons");
        }
    out << "step,agent,mean_cum_regret,sd_cum_regret\n";
    for (const auto& [agent, list] : traces.by_agent) {
        for (std::size_t step = 0; step < horizon; ++step) {
            double sum = 0.0;
            for (const RegretTrace& trace : list) sum += trace.steps()[step].cumulative;
            const double mean = sum / static_cast<double>(list.size());
            double sd = 0.0;
            if (list.size() > 1) {
                double ss = 0.0;
                for (const RegretTrace& trace : list) {
                    const double d = trace.steps()[step].cumulative - mean;
                    ss += d * d;
                }
                sd = std::sqrt(ss / static_cast<double>(list.size() - 1));
            }
            out << (step + 1) << ',' << agent << ',' << fmt_double(mean) << ','
                << fmt_double(sd) << '\n';
        }
    }
}

/// Rebuilds a summary from trace files, re-checking the accounting invariant
/// (cumulative == running sum of instantaneous).
inline json summarize_traces(const TraceSet& traces) {
    json js;
    js["agents"] = json::object();
    for (const auto& [agent, list] : traces.by_agent) {
        AgentRunStats stats;
        for (const RegretTrace& trace : list) {
            double acc = 0.0;
            for (const RegretStep& step : trace.steps()) acc += step.instantaneous;
            if (std::fabs(acc - trace.final_cumulative()) > 1e-9)
                throw std::runtime_error("summarize: accounting mismatch for " + agent);
            stats.per_seed.emplace_back(trace.seed(), trace.final_cumulative());
        }
        std::sort(stats.per_seed.begin(), stats.per_seed.end());
        stats.finalize();
        json a;
        a["per_seed"] = json::array();
        for (const auto& [seed, value] : stats.per_seed)
            a["per_seed"].push_back(json::array({seed, value}));
        a["mean_final_regret"] = stats.mean;
        a["sd_final_regret"] = stats.sd;
        a["n_seeds"] = stats.per_seed.size();
        js["agents"][agent] = a;
    }
    return js;
}

}  // namespace teb
