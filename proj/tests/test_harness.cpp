#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "teb/harness.hpp"

using namespace teb;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "teb_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

json tiny_classification_config() {
    return json{
        {"name", "tiny"},
        {"horizon", 60},
        {"seeds", {1, 2}},
        {"environment",
         {{"type", "synthetic_classification"},
          {"preset", "mushroom_like"},
          {"rows", 200},
          {"seed", 5}}},
        {"agents",
         {{{"name", "teucb"},
           {"type", "tree_ensemble"},
           {"method", "ucb"},
           {"trainer", "boosting"},
           {"n_trees", 4},
           {"max_depth", 3}},
          {{"name", "oracle"}, {"type", "oracle"}},
          {{"name", "linucb"}, {"type", "linear"}, {"method", "ucb"}}}}};
}

json tiny_navigation_config() {
    return json{
        {"name", "tiny-nav"},
        {"horizon", 25},
        {"seeds", {3}},
        {"environment",
         {{"type", "synthetic_road_network"},
          {"grid_width", 4},
          {"grid_height", 4},
          {"seed", 2},
          {"origin", 0},
          {"destination", 15}}},
        {"agents",
         {{{"name", "tets"},
           {"type", "tree_ensemble"},
           {"method", "ts"},
           {"trainer", "bagging"},
           {"n_trees", 4},
           {"max_depth", 3},
           {"t_init", 5}},
          {{"name", "oracle"}, {"type", "oracle"}}}}};
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

}  // namespace

TEST(ConfigValidation, ReportsFieldPaths) {
    json j = tiny_classification_config();
    j["horizon"] = 0;
    j["seeds"] = {1, 1};
    j["agents"][0]["nu"] = -2.0;
    j["agents"][2]["type"] = "mystery";
    ExperimentConfig config;
    const auto errors = parse_config(j, config);
    auto has = [&](const std::string& needle) {
        for (const auto& e : errors)
            if (e.find(needle) != std::string::npos) return true;
        return false;
    };
    EXPECT_TRUE(has("horizon"));
    EXPECT_TRUE(has("seeds: duplicate"));
    EXPECT_TRUE(has("agents[0].nu"));
    EXPECT_TRUE(has("agents[2].type"));
}

TEST(ConfigValidation, RefusesMismatchedEncodingUnlessOverridden) {
    json j = tiny_classification_config();
    j["agents"][0]["encoding"] = "disjoint";
    ExperimentConfig config;
    auto errors = parse_config(j, config);
    ASSERT_FALSE(errors.empty());
    EXPECT_NE(errors[0].find("allow_encoding_mismatch"), std::string::npos);

    j["allow_encoding_mismatch"] = true;
    errors = parse_config(j, config);
    EXPECT_TRUE(errors.empty());
}

TEST(ConfigValidation, HorizonBeyondSyntheticRowsFails) {
    json j = tiny_classification_config();
    j["horizon"] = 100000;
    ExperimentConfig config;
    const auto errors = parse_config(j, config);
    ASSERT_FALSE(errors.empty());
}

TEST(ConfigNormalization, RoundTripIsIdempotent) {
    ExperimentConfig config;
    ASSERT_TRUE(parse_config(tiny_classification_config(), config).empty());
    const json normalized = config.normalized;

    ExperimentConfig config2;
    ASSERT_TRUE(parse_config(normalized, config2).empty());
    EXPECT_EQ(normalized.dump(), config2.normalized.dump());
    EXPECT_EQ(config.hash, config2.hash);
}

TEST(SyntheticPresets, ShapesMatchTheirTables) {
    const auto mushroom = make_synthetic_classification("mushroom_like", 500, 7);
    EXPECT_EQ(mushroom->schema.numeric_count, 0);
    EXPECT_EQ(mushroom->schema.categorical_count(), 22);
    EXPECT_EQ(mushroom->n_classes(), 2);
    EXPECT_EQ(mushroom->rows.size(), 500u);

    const auto adult = make_synthetic_classification("adult_like", 500, 7);
    EXPECT_EQ(adult->schema.numeric_count, 6);
    EXPECT_EQ(adult->schema.categorical_count(), 8);
    EXPECT_EQ(adult->n_classes(), 2);

    EXPECT_THROW(make_synthetic_classification("nope", 100, 1), std::invalid_argument);

    // Determinism of generation.
    const auto again = make_synthetic_classification("mushroom_like", 500, 7);
    EXPECT_EQ(mushroom->labels, again->labels);
}

TEST(IngestDataset, ParsesCsvWithSchemaSidecar) {
    const fs::path dir = fresh_dir("ingest");
    {
        std::ofstream csv(dir / "toy.csv");
        csv << "age,color,grade\n";
        csv << "25,red,pass\n";
        csv << "31,blue,fail\n";
        csv << "?,green,pass\n";   // dropped: missing numeric
        csv << "44,red,fail\n";
        csv << "19,blue,pass\n";
    }
    {
        std::ofstream schema(dir / "toy.schema.json");
        schema << R"({"has_header": true, "missing_token": "?", "drop_missing": true,
                      "columns": [{"name": "age", "kind": "numeric"},
                                  {"name": "color", "kind": "categorical"},
                                  {"name": "grade", "kind": "label"}]})";
    }
    const auto data =
        ingest_dataset((dir / "toy.csv").string(), (dir / "toy.schema.json").string());
    EXPECT_EQ(data->rows.size(), 4u);
    EXPECT_EQ(data->dropped_rows, 1u);
    EXPECT_EQ(data->schema.numeric_count, 1);
    EXPECT_EQ(data->schema.categorical_count(), 1);
    // Codes are lexicographic: blue=0, red=1 (green vanished with the drop).
    EXPECT_EQ(data->label_names, (std::vector<std::string>{"fail", "pass"}));
    EXPECT_EQ(data->rows[0].categorical[0], 1);  // red
    EXPECT_EQ(data->labels[0], 1);               // pass

    // Malformed row reports its line number.
    {
        std::ofstream csv(dir / "bad.csv");
        csv << "1,red,pass\n";
        csv << "2,blue\n";
    }
    DatasetSchema schema = DatasetSchema::load((dir / "toy.schema.json").string());
    schema.has_header = false;
    try {
        ingest_dataset((dir / "bad.csv").string(), schema);
        FAIL() << "expected malformed-row error";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }

    // Empty file errors.
    {
        std::ofstream csv(dir / "empty.csv");
    }
    EXPECT_THROW(ingest_dataset((dir / "empty.csv").string(), schema),
                 std::runtime_error);
}

TEST(IngestDataset, MissingTokenKeptAsCategoryWhenConfigured) {
    const fs::path dir = fresh_dir("ingest_keep");
    {
        std::ofstream csv(dir / "toy.csv");
        csv << "red,pass\n?,fail\nblue,pass\n?,pass\n";
    }
    DatasetSchema schema;
    schema.drop_missing = false;
    schema.columns = {{"color", DatasetSchema::Column::Kind::Categorical},
                      {"grade", DatasetSchema::Column::Kind::Label}};
    const auto data = ingest_dataset((dir / "toy.csv").string(), schema);
    EXPECT_EQ(data->rows.size(), 4u);
    EXPECT_EQ(data->dropped_rows, 0u);
    EXPECT_EQ(data->schema.categorical_cardinalities[0], 3);  // ?, blue, red
}

TEST(RunExperiment, WritesTracesAndSummary) {
    const fs::path root = fresh_dir("run_smoke");
    ExperimentConfig config;
    ASSERT_TRUE(parse_config(tiny_classification_config(), config).empty());
    const RunSummary summary = run_experiment(config, root.string());

    EXPECT_EQ(summary.agents.size(), 3u);
    EXPECT_DOUBLE_EQ(summary.agents.at("oracle").mean, 0.0);
    EXPECT_GT(summary.agents.at("linucb").mean, 0.0);

    const fs::path outdir = root / "tiny";
    EXPECT_TRUE(fs::exists(outdir / "config.json"));
    EXPECT_TRUE(fs::exists(outdir / "summary.json"));
    EXPECT_TRUE(fs::exists(outdir / "timings.json"));
    for (const char* agent : {"teucb", "oracle", "linucb"})
        for (int seed : {1, 2}) {
            const fs::path trace = outdir / trace_filename(agent, seed);
            ASSERT_TRUE(fs::exists(trace)) << trace;
            std::ifstream in(trace);
            const RegretTrace loaded = RegretTrace::read_csv(in);
            EXPECT_EQ(loaded.size(), 60u);
            EXPECT_EQ(loaded.config_hash(), config.hash);
        }
}

TEST(RunExperiment, ByteIdenticalAcrossRepeatedRuns) {
    const fs::path root_a = fresh_dir("det_a");
    const fs::path root_b = fresh_dir("det_b");
    ExperimentConfig config;
    ASSERT_TRUE(parse_config(tiny_classification_config(), config).empty());
    run_experiment(config, root_a.string());
    run_experiment(config, root_b.string());

    for (const char* file : {"config.json", "summary.json"})
        EXPECT_EQ(slurp(root_a / "tiny" / file), slurp(root_b / "tiny" / file)) << file;
    for (const char* agent : {"teucb", "oracle", "linucb"})
        for (int seed : {1, 2}) {
            const std::string name = trace_filename(agent, seed);
            EXPECT_EQ(slurp(root_a / "tiny" / name), slurp(root_b / "tiny" / name))
                << name;
        }
}

TEST(RunExperiment, ResumesCompletedTraces) {
    const fs::path root = fresh_dir("resume");
    ExperimentConfig config;
    ASSERT_TRUE(parse_config(tiny_classification_config(), config).empty());
    run_experiment(config, root.string());
    const RunSummary second = run_experiment(config, root.string());
    long long resumed = 0;
    for (const auto& [agent, stats] : second.agents) resumed += stats.resumed;
    EXPECT_EQ(resumed, 6);  // 3 agents x 2 seeds
}

TEST(RunExperiment, NavigationSmokeAndOracleZero) {
    const fs::path root = fresh_dir("nav_smoke");
    ExperimentConfig config;
    ASSERT_TRUE(parse_config(tiny_navigation_config(), config).empty());
    const RunSummary summary = run_experiment(config, root.string());
    EXPECT_NEAR(summary.agents.at("oracle").mean, 0.0, 1e-9);
    EXPECT_GE(summary.agents.at("tets").mean, 0.0);

    std::ifstream in(root / "tiny-nav" / trace_filename("tets", 3));
    const RegretTrace trace = RegretTrace::read_csv(in);
    EXPECT_EQ(trace.size(), 25u);
    // Path choices are edge chains like "3|17|42".
    EXPECT_NE(trace.steps()[0].choice.find('|'), std::string::npos);
}

TEST(RunExperiment, DelayedFeedbackBatchesRunToCompletion) {
    const fs::path root = fresh_dir("delayed");
    json j = tiny_classification_config();
    j["feedback_batch_size"] = 20;
    j["name"] = "tiny-delayed";
    ExperimentConfig config;
    ASSERT_TRUE(parse_config(j, config).empty());
    const RunSummary summary = run_experiment(config, root.string());
    EXPECT_EQ(summary.agents.at("teucb").per_seed.size(), 2u);
    // Different hash than the batch-1 config: delay is part of identity.
    ExperimentConfig base;
    parse_config(tiny_classification_config(), base);
    EXPECT_NE(config.hash, base.hash);
}

TEST(TracePostprocessing, SummarizeAndPlotDataAgree) {
    const fs::path root = fresh_dir("post");
    ExperimentConfig config;
    ASSERT_TRUE(parse_config(tiny_classification_config(), config).empty());
    const RunSummary summary = run_experiment(config, root.string());

    const TraceSet traces = load_traces((root / "tiny").string());
    const json recomputed = summarize_traces(traces);
    for (const auto& [agent, stats] : summary.agents)
        EXPECT_NEAR(recomputed["agents"][agent]["mean_final_regret"].get<double>(),
                    stats.mean, 1e-9)
            << agent;

    std::ostringstream plot;
    emit_plot_data(traces, plot);
    // Final-step mean in the plot data equals the summary mean.
    std::istringstream lines(plot.str());
    std::string line;
    std::getline(lines, line);
    EXPECT_EQ(line, "step,agent,mean_cum_regret,sd_cum_regret");
    double teucb_final_mean = -1.0;
    while (std::getline(lines, line)) {
        if (line.rfind("60,teucb,", 0) == 0) {
            const auto a = line.find(',', 3);  // after the agent name
            const auto b = line.find(',', a + 1);
            teucb_final_mean = std::stod(line.substr(a + 1, b - a - 1));
        }
    }
    EXPECT_NEAR(teucb_final_mean, summary.agents.at("teucb").mean, 1e-9);
}

TEST(TracePostprocessing, MismatchedHorizonsError) {
    TraceSet traces;
    RegretTrace a(1, "x"), b(2, "x");
    a.append("0", 1.0, 0.0);
    a.append("0", 1.0, 0.0);
    b.append("0", 1.0, 0.0);
    traces.by_agent["agent"] = {a, b};
    std::ostringstream out;
    EXPECT_THROW(emit_plot_data(traces, out), std::runtime_error);
}

TEST(Cli, EndToEndVerbs) {
    const fs::path root = fresh_dir("cli");
    const fs::path config_path = root / "config.json";
    {
        std::ofstream out(config_path);
        json j = tiny_classification_config();
        j["name"] = "cli-exp";
        out << j.dump(2);
    }
    const std::string cli = TEB_CLI_PATH;
    auto sh = [&](const std::string& cmd) { return std::system(cmd.c_str()) / 256; };

    EXPECT_EQ(sh(cli + " validate " + config_path.string() + " >/dev/null"), 0);
    EXPECT_EQ(sh(cli + " run " + config_path.string() + " --output-root " +
                 root.string() + " >/dev/null"),
              0);
    const fs::path outdir = root / "cli-exp";
    EXPECT_EQ(sh(cli + " summarize " + outdir.string() + " -o " +
                 (outdir / "resummary.json").string()),
              0);
    EXPECT_EQ(sh(cli + " plotdata " + outdir.string() + " -o " +
                 (outdir / "plotdata.csv").string()),
              0);
    EXPECT_TRUE(fs::exists(outdir / "resummary.json"));
    EXPECT_TRUE(fs::exists(outdir / "plotdata.csv"));

    // Validation failure exits 2.
    {
        std::ofstream out(config_path);
        json j = tiny_classification_config();
        j["horizon"] = -5;
        out << j.dump(2);
    }
    EXPECT_EQ(sh(cli + " validate " + config_path.string() + " 2>/dev/null"), 2);
    // Runtime failure (missing dataset file) exits 1.
    {
        std::ofstream out(config_path);
        json j = tiny_classification_config();
        j["environment"] =
            json{{"type", "classification"}, {"dataset", "no_such.csv"},
                 {"schema", "no_such.schema.json"}};
        out << j.dump(2);
    }
    EXPECT_EQ(sh(cli + " run " + config_path.string() + " 2>/dev/null"), 1);
}

TEST(OutputRoot, EnvironmentVariableOverride) {
    EXPECT_EQ(resolve_output_root("explicit"), fs::path("explicit"));
    ::setenv("TEB_OUTPUT_ROOT", "/tmp/teb_env_root", 1);
    EXPECT_EQ(resolve_output_root(""), fs::path("/tmp/teb_env_root"));
    ::unsetenv("TEB_OUTPUT_ROOT");
    EXPECT_EQ(resolve_output_root(""), fs::path("out"));
}
