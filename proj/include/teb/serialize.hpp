#pragma once

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "teb/ensemble.hpp"
#include "teb/tree.hpp"

namespace teb {

/// Shortest-exact decimal form; round-trips any finite double and nan/inf.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace detail {

inline std::string next_token(std::istream& in, const char* what) {
    std::string tok;
    if (!(in >> tok))
        throw std::runtime_error(std::string("model load: missing ") + what);
    return tok;
}

inline double read_double(std::istream& in, const char* what) {
    const std::string tok = next_token(in, what);
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str())
        throw std::runtime_error(std::string("model load: bad number for ") + what);
    return v;
}

inline long long read_int(std::istream& in, const char* what) {
    const std::string tok = next_token(in, what);
    try {
        return std::stoll(tok);
    } catch (const std::exception&) {
        throw std::runtime_error(std::string("model load: bad integer for ") + what);
    }
}

inline void expect(std::istream& in, const std::string& literal) {
    const std::string tok = next_token(in, literal.c_str());
    if (tok != literal)
        throw std::runtime_error("model load: expected '" + literal + "', got '" +
                                 tok + "'");
}

}  // namespace detail

inline void dump_tree(const RegressionTree& tree, std::ostream& out) {
    out << "nodes " << tree.nodes().size() << '\n';
    for (std::size_t i = 0; i < tree.nodes().size(); ++i) {
        const TreeNode& n = tree.nodes()[i];
        if (n.is_leaf) {
            out << "leaf " << n.stats.count << ' ' << fmt_double(n.stats.sum) << ' '
                << fmt_double(n.stats.sum_sq) << ' ' << fmt_double(n.raw_value) << '\n';
        } else if (n.split.kind == SplitRule::Kind::Numeric) {
            out << "split num " << n.split.feature << ' '
                << fmt_double(n.split.threshold) << ' ' << n.left << ' ' << n.right
                << '\n';
        } else {
            out << "split cat " << n.split.feature << ' ' << n.split.code << ' '
                << n.left << ' ' << n.right << '\n';
        }
    }
}

inline RegressionTree load_tree(const FeatureSchema& schema, std::istream& in) {
    detail::expect(in, "nodes");
    const long long count = detail::read_int(in, "node count");
    std::vector<TreeNode> nodes(count);
    for (long long i = 0; i < count; ++i) {
        const std::string kind = detail::next_token(in, "node kind");
        TreeNode& n = nodes[i];
        if (kind == "leaf") {
            n.is_leaf = true;
            n.stats.count = detail::read_int(in, "leaf count");
            n.stats.sum = detail::read_double(in, "leaf sum");
            n.stats.sum_sq = detail::read_double(in, "leaf sum_sq");
            n.raw_value = detail::read_double(in, "leaf raw value");
        } else if (kind == "split") {
            n.is_leaf = false;
            const std::string which = detail::next_token(in, "split kind");
            if (which == "num") {
                n.split.kind = SplitRule::Kind::Numeric;
                n.split.feature = static_cast<int>(detail::read_int(in, "feature"));
                n.split.threshold = detail::read_double(in, "threshold");
            } else if (which == "cat") {
                n.split.kind = SplitRule::Kind::Categorical;
                n.split.feature = static_cast<int>(detail::read_int(in, "feature"));
                n.split.code = static_cast<int>(detail::read_int(in, "code"));
            } else {
                throw std::runtime_error("model load: unknown split kind " + which);
            }
            n.left = static_cast<int>(detail::read_int(in, "left child"));
            n.right = static_cast<int>(detail::read_int(in, "right child"));
        } else {
            throw std::runtime_error("model load: unknown node kind " + kind);
        }
    }
    return RegressionTree(schema, std::move(nodes));
}

inline void dump_schema(const FeatureSchema& schema, std::ostream& out) {
    out << "schema " << schema.numeric_count << " :";
    for (int card : schema.categorical_cardinalities) out << ' ' << card;
    out << '\n';
}

inline FeatureSchema load_schema(std::istream& in) {
    detail::expect(in, "schema");
    FeatureSchema schema;
    schema.numeric_count = static_cast<int>(detail::read_int(in, "numeric count"));
    detail::expect(in, ":");
    std::string line;
    std::getline(in, line);
    std::istringstream rest(line);
    int card;
    while (rest >> card) schema.categorical_cardinalities.push_back(card);
    schema.validate();
    return schema;
}

inline void dump_ensemble_config(const EnsembleConfig& c, std::ostream& out) {
    out << "trainer " << trainer_name(c.trainer) << '\n';
    out << "n_trees " << c.n_trees << '\n';
    out << "max_depth " << c.max_depth << '\n';
    out << "learning_rate " << fmt_double(c.learning_rate) << '\n';
    out << "base_score_config " << fmt_double(c.base_score) << '\n';
    out << "bag_fraction " << fmt_double(c.bag_fraction) << '\n';
    out << "bootstrap " << (c.bootstrap ? 1 : 0) << '\n';
    out << "feature_fraction " << fmt_double(c.feature_fraction) << '\n';
    out << "seed " << c.seed << '\n';
}

inline EnsembleConfig load_ensemble_config(std::istream& in) {
    EnsembleConfig c;
    detail::expect(in, "trainer");
    const std::string trainer = detail::next_token(in, "trainer");
    if (trainer == "bagging") c.trainer = Trainer::Bagging;
    else if (trainer == "boosting") c.trainer = Trainer::Boosting;
    else throw std::runtime_error("model load: unknown trainer " + trainer);
    detail::expect(in, "n_trees");
    c.n_trees = static_cast<int>(detail::read_int(in, "n_trees"));
    detail::expect(in, "max_depth");
    c.max_depth = static_cast<int>(detail::read_int(in, "max_depth"));
    detail::expect(in, "learning_rate");
    c.learning_rate = detail::read_double(in, "learning_rate");
    detail::expect(in, "base_score_config");
    c.base_score = detail::read_double(in, "base_score_config");
    detail::expect(in, "bag_fraction");
    c.bag_fraction = detail::read_double(in, "bag_fraction");
    detail::expect(in, "bootstrap");
    c.bootstrap = detail::read_int(in, "bootstrap") != 0;
    detail::expect(in, "feature_fraction");
    c.feature_fraction = detail::read_double(in, "feature_fraction");
    detail::expect(in, "seed");
    c.seed = std::stoull(detail::next_token(in, "seed"));
    return c;
}

inline void dump_ensemble(const EnsembleModel& model, std::ostream& out) {
    out << "teb_ensemble v1\n";
    dump_ensemble_config(model.config, out);
    out << "base_score " << fmt_double(model.base_score) << '\n';
    dump_schema(model.schema, out);
    out << "trees " << model.trees.size() << '\n';
    for (std::size_t i = 0; i < model.trees.size(); ++i) {
        out << "tree " << i << '\n';
        dump_tree(model.trees[i], out);
    }
    out << "end\n";
}

inline EnsembleModel load_ensemble(std::istream& in) {
    detail::expect(in, "teb_ensemble");
    detail::expect(in, "v1");
    EnsembleModel model;
    model.config = load_ensemble_config(in);
    detail::expect(in, "base_score");
    model.base_score = detail::read_double(in, "base_score");
    model.schema = load_schema(in);
    detail::expect(in, "trees");
    const long long n_trees = detail::read_int(in, "tree count");
    model.trees.reserve(n_trees);
    for (long long i = 0; i < n_trees; ++i) {
        detail::expect(in, "tree");
        detail::read_int(in, "tree index");
        model.trees.push_back(load_tree(model.schema, in));
    }
    detail::expect(in, "end");
    return model;
}

inline std::string dump_ensemble_string(const EnsembleModel& model) {
    std::ostringstream os;
    dump_ensemble(model, os);
    return os.str();
}

inline EnsembleModel load_ensemble_string(const std::string& text) {
    std::istringstream is(text);
    return load_ensemble(is);
}

}  // namespace teb
