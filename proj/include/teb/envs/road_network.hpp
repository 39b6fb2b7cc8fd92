#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "teb/feature.hpp"
#include "teb/rng.hpp"
#include "teb/serialize.hpp"

namespace teb {

struct Vertex {
    int id = 0;
    double x = 0.0, y = 0.0, z = 0.0;
};

/// Travel-time generator parameters of one road segment. The deterministic
/// part is base_time scaled by a time-of-day congestion multiplier with
/// morning and evening peaks; multiplicative lognormal noise has mean one,
/// and flagged edges add an exponential stop penalty. The expected value is
/// therefore available in closed form for regret accounting.
struct EdgeTravelParams {
    double sigma = 0.0;             // lognormal shape
    double amp_am = 0.0;            // morning peak amplitude
    double amp_pm = 0.0;            // evening peak amplitude
    double stop_penalty_mean = 0.0; // seconds, exponential when stop flag set
};

struct Edge {
    int id = 0;
    int from = 0;
    int to = 0;
    double speed_limit = 13.9;  // m/s
    bool stop = false;
    double length = 0.0;        // m
    EdgeTravelParams params;

    double base_time() const { return length / speed_limit; }
};

inline constexpr double kAmPeakHour = 8.0;
inline constexpr double kPmPeakHour = 17.5;
inline constexpr double kPeakWidthHours = 2.0;

/// Directed road graph with per-edge travel-time models.
class RoadNetwork {
public:
    RoadNetwork() = default;
    RoadNetwork(std::vector<Vertex> vertices, std::vector<Edge> edges)
        : vertices_(std::move(vertices)), edges_(std::move(edges)) {
        rebuild_adjacency();
    }

    const std::vector<Vertex>& vertices() const { return vertices_; }
    const std::vector<Edge>& edges() const { return edges_; }
    const Edge& edge(int id) const {
        if (id < 0 || id >= static_cast<int>(edges_.size()))
            throw std::invalid_argument("RoadNetwork: bad edge id");
        return edges_[id];
    }
    const std::vector<std::vector<int>>& adjacency() const { return adjacency_; }

    double congestion_multiplier(int edge_id, double time_of_day) const {
        const EdgeTravelParams& p = edge(edge_id).params;
        auto bump = [time_of_day](double center) {
            const double d = (time_of_day - center) / kPeakWidthHours;
            return std::exp(-0.5 * d * d);
        };
        return 1.0 + p.amp_am * bump(kAmPeakHour) + p.amp_pm * bump(kPmPeakHour);
    }

    /// Closed-form expected traversal time in seconds.
    double expected_time(int edge_id, double time_of_day) const {
        const Edge& e = edge(edge_id);
        double mean = e.base_time() * congestion_multiplier(edge_id, time_of_day);
        if (e.stop) mean += e.params.stop_penalty_mean;
        return mean;
    }

    /// Stochastic traversal time draw; strictly positive, mean equal to
    /// expected_time.
    double sample_time(int edge_id, double time_of_day, RandomSource& rng) const {
        const Edge& e = edge(edge_id);
        const double deterministic =
            e.base_time() * congestion_multiplier(edge_id, time_of_day);
        double t = deterministic;
        if (e.params.sigma > 0.0) {
            const double s = e.params.sigma;
            t = deterministic * std::exp(rng.normal(-0.5 * s * s, s));
        }
        if (e.stop && e.params.stop_penalty_mean > 0.0)
            t += rng.exponential(e.params.stop_penalty_mean);
        return t;
    }

    /// Context schema for edge features: start/end coordinates, per-axis
    /// distances, speed limit and time of day as numerics; the stop flag as
    /// a binary categorical.
    static FeatureSchema context_schema() {
        FeatureSchema s;
        s.numeric_count = 11;
        s.categorical_cardinalities = {2};
        return s;
    }

    FeatureVector edge_context(int edge_id, double time_of_day) const {
        const Edge& e = edge(edge_id);
        const Vertex& a = vertices_[e.from];
        const Vertex& b = vertices_[e.to];
        return make_vector(context_schema(),
                           {a.x, a.y, a.z, b.x, b.y, b.z, std::fabs(a.x - b.x),
                            std::fabs(a.y - b.y), std::fabs(a.z - b.z),
                            e.speed_limit, time_of_day},
                           {e.stop ? 1 : 0});
    }

    void save(std::ostream& out) const {
        out << "teb_network v1\n";
        out << "vertices " << vertices_.size() << '\n';
        for (const Vertex& v : vertices_)
            out << v.id << ' ' << fmt_double(v.x) << ' ' << fmt_double(v.y) << ' '
                << fmt_double(v.z) << '\n';
        out << "edges " << edges_.size() << '\n';
        for (const Edge& e : edges_)
            out << e.id << ' ' << e.from << ' ' << e.to << ' '
                << fmt_double(e.speed_limit) << ' ' << (e.stop ? 1 : 0) << ' '
                << fmt_double(e.length) << ' ' << fmt_double(e.params.sigma) << ' '
                << fmt_double(e.params.amp_am) << ' ' << fmt_double(e.params.amp_pm)
                << ' ' << fmt_double(e.params.stop_penalty_mean) << '\n';
        out << "end\n";
    }

    static RoadNetwork load(std::istream& in) {
        detail::expect(in, "teb_network");
        detail::expect(in, "v1");
        detail::expect(in, "vertices");
        const long long n_vertices = detail::read_int(in, "vertex count");
        std::vector<Vertex> vertices(n_vertices);
        for (auto& v : vertices) {
            v.id = static_cast<int>(detail::read_int(in, "vertex id"));
            v.x = detail::read_double(in, "vertex x");
            v.y = detail::read_double(in, "vertex y");
            v.z = detail::read_double(in, "vertex z");
        }
        detail::expect(in, "edges");
        const long long n_edges = detail::read_int(in, "edge count");
        std::vector<Edge> edges(n_edges);
        for (auto& e : edges) {
            e.id = static_cast<int>(detail::read_int(in, "edge id"));
            e.from = static_cast<int>(detail::read_int(in, "edge from"));
            e.to = static_cast<int>(detail::read_int(in, "edge to"));
            e.speed_limit = detail::read_double(in, "speed limit");
            e.stop = detail::read_int(in, "stop flag") != 0;
            e.length = detail::read_double(in, "length");
            e.params.sigma = detail::read_double(in, "sigma");
            e.params.amp_am = detail::read_double(in, "amp_am");
            e.params.amp_pm = detail::read_double(in, "amp_pm");
            e.params.stop_penalty_mean = detail::read_double(in, "stop penalty");
        }
        detail::expect(in, "end");
        return RoadNetwork(std::move(vertices), std::move(edges));
    }

    void validate() const {
        for (std::size_t i = 0; i < vertices_.size(); ++i)
            if (vertices_[i].id != static_cast<int>(i))
                throw std::invalid_argument("RoadNetwork: vertex ids must be 0..n-1");
        for (std::size_t i = 0; i < edges_.size(); ++i) {
            const Edge& e = edges_[i];
            if (e.id != static_cast<int>(i))
                throw std::invalid_argument("RoadNetwork: edge ids must be 0..m-1");
            if (e.from < 0 || e.from >= static_cast<int>(vertices_.size()) ||
                e.to < 0 || e.to >= static_cast<int>(vertices_.size()))
                throw std::invalid_argument("RoadNetwork: edge endpoint out of range");
            if (!(e.length > 0.0) || !(e.speed_limit > 0.0))
                throw std::invalid_argument("RoadNetwork: nonpositive length or speed");
        }
    }

private:
    void rebuild_adjacency() {
        adjacency_.assign(vertices_.size(), {});
        for (const Edge& e : edges_) adjacency_[e.from].push_back(e.id);
        // Ascending edge ids per vertex keeps relaxation order, and with it
        // tie-breaking, deterministic.
        for (auto& out : adjacency_) std::sort(out.begin(), out.end());
    }

    std::vector<Vertex> vertices_;
    std::vector<Edge> edges_;
    std::vector<std::vector<int>> adjacency_;
};

/// Dijkstra over non-negative per-edge weights; returns the edge ids of a
/// minimum-weight origin->destination path. Equal-cost alternatives resolve
/// deterministically (strict improvement only, neighbors scanned in
/// ascending edge id). Throws on negative weights or unreachable goals.
inline std::vector<int> shortest_path(const RoadNetwork& net,
                                      std::span<const double> weights, int origin,
                                      int destination) {
    const std::size_t n = net.vertices().size();
    if (weights.size() != net.edges().size())
        throw std::invalid_argument("shortest_path: weight count mismatch");
    if (origin < 0 || origin >= static_cast<int>(n) || destination < 0 ||
        destination >= static_cast<int>(n))
        throw std::invalid_argument("shortest_path: bad endpoints");
    for (double w : weights)
        if (!(w >= 0.0))
            throw std::invalid_argument("shortest_path: negative weight");

    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(n, kInf);
    std::vector<int> parent_edge(n, -1);
    std::vector<char> done(n, 0);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    dist[origin] = 0.0;
    queue.emplace(0.0, origin);
    while (!queue.empty()) {
        const auto [d, u] = queue.top();
        queue.pop();
        if (done[u]) continue;
        done[u] = 1;
        if (u == destination) break;
        for (int edge_id : net.adjacency()[u]) {
            const Edge& e = net.edge(edge_id);
            const double nd = d + weights[edge_id];
            if (nd < dist[e.to]) {
                dist[e.to] = nd;
                parent_edge[e.to] = edge_id;
                queue.emplace(nd, e.to);
            }
        }
    }
    if (!done[destination] && dist[destination] == kInf)
        throw std::runtime_error("shortest_path: destination unreachable");

    std::vector<int> path;
    for (int v = destination; v != origin;) {
        const int edge_id = parent_edge[v];
        if (edge_id < 0) throw std::logic_error("shortest_path: broken parent chain");
        path.push_back(edge_id);
        v = net.edge(edge_id).from;
    }
    std::reverse(path.begin(), path.end());
    return path;
}

/// Checks that `path` is a chain of existing edges from origin to
/// destination.
inline void validate_path(const RoadNetwork& net, std::span<const int> path,
                          int origin, int destination) {
    if (path.empty()) throw std::invalid_argument("path: empty");
    int at = origin;
    for (int edge_id : path) {
        const Edge& e = net.edge(edge_id);
        if (e.from != at) throw std::invalid_argument("path: edges do not chain");
        at = e.to;
    }
    if (at != destination)
        throw std::invalid_argument("path: does not reach destination");
}

struct NavFeedback {
    std::vector<double> edge_times;  // one sample per traversed edge
    double total_time = 0.0;
    double instantaneous_regret = 0.0;
};

/// Plays one super arm: samples a traversal time for every edge on the path
/// (semi-bandit feedback) and accounts regret as the expected-time gap to
/// the oracle path at this time of day.
inline NavFeedback nav_env_step(const RoadNetwork& net, std::span<const int> path,
                                int origin, int destination, double time_of_day,
                                RandomSource& rng) {
    validate_path(net, path, origin, destination);
    NavFeedback fb;
    fb.edge_times.reserve(path.size());
    double chosen_expected = 0.0;
    for (int edge_id : path) {
        const double t = net.sample_time(edge_id, time_of_day, rng);
        fb.edge_times.push_back(t);
        fb.total_time += t;
        chosen_expected += net.expected_time(edge_id, time_of_day);
    }
    std::vector<double> expected_weights(net.edges().size());
    for (std::size_t e = 0; e < expected_weights.size(); ++e)
        expected_weights[e] = net.expected_time(static_cast<int>(e), time_of_day);
    const std::vector<int> oracle =
        shortest_path(net, expected_weights, origin, destination);
    double oracle_expected = 0.0;
    for (int edge_id : oracle) oracle_expected += expected_weights[edge_id];
    fb.instantaneous_regret = chosen_expected - oracle_expected;
    return fb;
}

struct SyntheticNetworkConfig {
    int grid_width = 8;
    int grid_height = 8;
    double spacing = 400.0;  // metres between grid neighbours
    std::uint64_t seed = 1;
};

/// Random planar-ish grid with three road classes. Every neighbouring pair
/// is connected in both directions, so any two vertices are mutually
/// reachable; an 8x8 grid yields 224 directed edges.
inline RoadNetwork make_synthetic_network(const SyntheticNetworkConfig& cfg) {
    if (cfg.grid_width < 2 || cfg.grid_height < 2)
        throw std::invalid_argument("synthetic network: grid must be at least 2x2");
    RandomSource rng(cfg.seed);
    std::vector<Vertex> vertices;
    vertices.reserve(cfg.grid_width * cfg.grid_height);
    auto vertex_id = [&](int i, int j) { return i * cfg.grid_width + j; };
    for (int i = 0; i < cfg.grid_height; ++i) {
        for (int j = 0; j < cfg.grid_width; ++j) {
            Vertex v;
            v.id = vertex_id(i, j);
            v.x = j * cfg.spacing + rng.uniform(-0.15, 0.15) * cfg.spacing;
            v.y = i * cfg.spacing + rng.uniform(-0.15, 0.15) * cfg.spacing;
            // Gentle hill over the whole map.
            v.z = 40.0 * std::sin(0.4 * i) * std::cos(0.3 * j) + rng.uniform(0, 5);
            vertices.push_back(v);
        }
    }

    std::vector<Edge> edges;
    auto add_pair = [&](int a, int b, int road_class) {
        const double dx = vertices[a].x - vertices[b].x;
        const double dy = vertices[a].y - vertices[b].y;
        const double length = std::hypot(dx, dy) * rng.uniform(1.02, 1.15);
        // highway / arterial / residential
        const double speeds[3] = {27.8, 19.4, 13.9};
        const double sigmas[3] = {0.12, 0.2, 0.3};
        const double am_amp[3] = {0.9, 0.6, 0.25};
        const double pm_amp[3] = {1.0, 0.7, 0.3};
        for (int dir = 0; dir < 2; ++dir) {
            Edge e;
            e.id = static_cast<int>(edges.size());
            e.from = dir == 0 ? a : b;
            e.to = dir == 0 ? b : a;
            e.speed_limit = speeds[road_class];
            e.length = length;
            e.stop = road_class == 2 && rng.uniform01() < 0.4;
            e.params.sigma = sigmas[road_class];
            e.params.amp_am = am_amp[road_class] * rng.uniform(0.7, 1.3);
            e.params.amp_pm = pm_amp[road_class] * rng.uniform(0.7, 1.3);
            e.params.stop_penalty_mean = e.stop ? rng.uniform(5.0, 20.0) : 0.0;
            edges.push_back(e);
        }
    };
    for (int i = 0; i < cfg.grid_height; ++i) {
        for (int j = 0; j < cfg.grid_width; ++j) {
            if (j + 1 < cfg.grid_width) {
                const int cls = (i == 0 || i == cfg.grid_height - 1) ? 0
                                : (i % 3 == 0 ? 1 : 2);
                add_pair(vertex_id(i, j), vertex_id(i, j + 1), cls);
            }
            if (i + 1 < cfg.grid_height) {
                const int cls = (j == 0 || j == cfg.grid_width - 1) ? 0
                                : (j % 3 == 0 ? 1 : 2);
                add_pair(vertex_id(i, j), vertex_id(i + 1, j), cls);
            }
        }
    }
    RoadNetwork net(std::move(vertices), std::move(edges));
    net.validate();
    return net;
}

}  // namespace teb
