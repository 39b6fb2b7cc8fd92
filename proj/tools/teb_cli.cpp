// Experiment runner CLI. Subcommands:
//   run        execute a config, writing traces and summaries
//   validate   check a config and list problems with field paths
//   summarize  aggregate final regrets from a trace directory
//   plotdata   emit long-format mean/SD regret curves from a trace directory
// Exit codes: 0 success, 2 config validation failure, 1 runtime error.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "teb/harness.hpp"

namespace {

nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    nlohmann::json j;
    in >> j;
    return j;
}

int cmd_validate(const std::string& config_path) {
    teb::ExperimentConfig config;
    const auto errors = teb::parse_config(load_json(config_path), config);
    if (errors.empty()) {
        std::cout << "ok " << config.hash << '\n';
        return 0;
    }
    for (const auto& e : errors) std::cerr << "error: " << e << '\n';
    return 2;
}

int cmd_run(const std::string& config_path, const std::string& output_root) {
    teb::ExperimentConfig config;
    const auto errors = teb::parse_config(load_json(config_path), config);
    if (!errors.empty()) {
        for (const auto& e : errors) std::cerr << "error: " << e << '\n';
        return 2;
    }
    const teb::RunSummary summary = teb::run_experiment(config, output_root);
    std::cout << "run " << summary.name << " (" << summary.hash << ")\n";
    for (const auto& [agent, stats] : summary.agents)
        std::cout << "  " << agent << ": mean final regret " << stats.mean
                  << " sd " << stats.sd << " over " << stats.per_seed.size()
                  << " seeds\n";
    const auto outdir = teb::resolve_output_root(output_root) /
                        std::filesystem::path(config.output_dir);
    std::cout << "outputs in " << outdir.string() << '\n';
    return 0;
}

int cmd_summarize(const std::string& trace_dir, const std::string& out_path) {
    const teb::TraceSet traces = teb::load_traces(trace_dir);
    const nlohmann::json summary = teb::summarize_traces(traces);
    if (out_path.empty()) {
        std::cout << summary.dump(2) << '\n';
    } else {
        std::ofstream out(out_path);
        out << summary.dump(2) << '\n';
    }
    return 0;
}

int cmd_plotdata(const std::string& trace_dir, const std::string& out_path) {
    const teb::TraceSet traces = teb::load_traces(trace_dir);
    if (out_path.empty()) {
        teb::emit_plot_data(traces, std::cout);
    } else {
        std::ofstream out(out_path);
        teb::emit_plot_data(traces, out);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tree-ensemble bandit experiment harness"};
    app.require_subcommand(1);

    std::string config_path, trace_dir, output_root, out_path;

    auto* run = app.add_subcommand("run", "run an experiment config");
    run->add_option("config", config_path, "experiment config JSON")->required();
    run->add_option("--output-root", output_root,
                    "output root directory (default $TEB_OUTPUT_ROOT or ./out)");

    auto* validate = app.add_subcommand("validate", "validate an experiment config");
    validate->add_option("config", config_path, "experiment config JSON")->required();

    auto* summarize = app.add_subcommand("summarize", "summarize a trace directory");
    summarize->add_option("dir", trace_dir, "directory with trace_*.csv")->required();
    summarize->add_option("-o,--out", out_path, "write JSON here instead of stdout");

    auto* plotdata = app.add_subcommand("plotdata", "emit per-step regret curves");
    plotdata->add_option("dir", trace_dir, "directory with trace_*.csv")->required();
    plotdata->add_option("-o,--out", out_path, "write CSV here instead of stdout");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, output_root);
        if (validate->parsed()) return cmd_validate(config_path);
        if (summarize->parsed()) return cmd_summarize(trace_dir, out_path);
        if (plotdata->parsed()) return cmd_plotdata(trace_dir, out_path);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
