#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "teb/serialize.hpp"

namespace teb {

struct RegretStep {
    std::string choice;  // arm index, or path edge ids joined with '|'
    double reward = 0.0;
    double instantaneous = 0.0;
    double cumulative = 0.0;
};

/// Per-step regret record of one run, tagged with the seed and the config
/// hash so a trace is attributable to exactly one experiment.
class RegretTrace {
public:
    RegretTrace() = default;
    RegretTrace(std::uint64_t seed, std::string config_hash)
        : seed_(seed), config_hash_(std::move(config_hash)) {}

    std::uint64_t seed() const { return seed_; }
    const std::string& config_hash() const { return config_hash_; }
    const std::vector<RegretStep>& steps() const { return steps_; }
    std::size_t size() const { return steps_.size(); }

    void append(std::string choice, double reward, double instantaneous) {
        if (instantaneous < -1e-9)
            throw std::logic_error("RegretTrace: negative instantaneous regret");
        RegretStep step;
        step.choice = std::move(choice);
        step.reward = reward;
        step.instantaneous = instantaneous;
        step.cumulative = cumulative_ + instantaneous;
        cumulative_ = step.cumulative;
        steps_.push_back(std::move(step));
    }

    double final_cumulative() const { return cumulative_; }

    void write_csv(std::ostream& out) const {
        out << "# seed=" << seed_ << " config_hash=" << config_hash_ << '\n';
        out << "step,choice,reward,inst_regret,cum_regret\n";
        for (std::size_t i = 0; i < steps_.size(); ++i) {
            const RegretStep& s = steps_[i];
            out << (i + 1) << ',' << s.choice << ',' << fmt_double(s.reward) << ','
                << fmt_double(s.instantaneous) << ',' << fmt_double(s.cumulative)
                << '\n';
        }
    }

    static RegretTrace read_csv(std::istream& in) {
        RegretTrace trace;
        std::string line;
        if (!std::getline(in, line) || line.rfind("# seed=", 0) != 0)
            throw std::runtime_error("trace read: missing metadata line");
        {
            std::istringstream meta(line.substr(2));
            std::string field;
            while (meta >> field) {
                const auto eq = field.find('=');
                if (eq == std::string::npos) continue;
                const std::string key = field.substr(0, eq);
                const std::string value = field.substr(eq + 1);
                if (key == "seed") trace.seed_ = std::stoull(value);
                if (key == "config_hash") trace.config_hash_ = value;
            }
        }
        if (!std::getline(in, line) || line.rfind("step,", 0) != 0)
            throw std::runtime_error("trace read: missing header line");
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::vector<std::string> cells;
            std::istringstream row(line);
            std::string cell;
            while (std::getline(row, cell, ',')) cells.push_back(cell);
            if (cells.size() != 5)
                throw std::runtime_error("trace read: malformed row: " + line);
            RegretStep s;
            s.choice = cells[1];
            s.reward = std::stod(cells[2]);
            s.instantaneous = std::stod(cells[3]);
            s.cumulative = std::stod(cells[4]);
            trace.steps_.push_back(std::move(s));
        }
        if (!trace.steps_.empty())
            trace.cumulative_ = trace.steps_.back().cumulative;
        return trace;
    }

private:
    std::uint64_t seed_ = 0;
    std::string config_hash_;
    std::vector<RegretStep> steps_;
    double cumulative_ = 0.0;
};

}  // namespace teb
