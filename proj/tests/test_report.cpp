#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "evosr/problem.hpp"
#include "evosr/report.hpp"

using namespace evosr;

namespace {

RunRecord run_record(const std::string& label, TopologyKind kind, int slaves,
                     std::uint64_t seed) {
    RunRecord rec;
    rec.label = label;
    rec.config.problem = {ProblemFamily::p1, 12, seed, false};
    rec.config.params.pop_size = 8;
    rec.config.params.max_generations = 12;
    rec.config.params.epsilon = 1e-300;  // force a full 12-generation history
    rec.config.topology = {kind, slaves, {}};
    rec.config.seed = seed;
    const auto sys = generate(rec.config.problem);
    rec.result = run_solver(sys, rec.config.params, rec.config.topology, seed);
    return rec;
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST(ConfigJson, PartialDocumentOverridesOnlyGivenKeys) {
    RunConfig cfg;
    const auto doc = nlohmann::json::parse(
        R"({"params": {"pop_size": 16, "selection": "ts"}, "seed": 9})");
    run_config_merge_json(cfg, doc);
    EXPECT_EQ(cfg.params.pop_size, 16);
    EXPECT_EQ(cfg.params.selection, SelectionMethod::ts);
    EXPECT_EQ(cfg.seed, 9u);
    EXPECT_DOUBLE_EQ(cfg.params.epsilon, 1e-8);       // untouched default
    EXPECT_EQ(cfg.problem.family, ProblemFamily::p1);  // untouched default
}

TEST(ConfigJson, RoundTripPreservesEveryField) {
    RunConfig cfg;
    cfg.problem = {ProblemFamily::p4, 33, 5, true, "sys.json"};
    cfg.params.pop_size = 12;
    cfg.params.selection = SelectionMethod::ts;
    cfg.params.lambda = 31.5;
    cfg.topology = {TopologyKind::virtual_cluster, 3, {}};
    cfg.seed = 77;
    cfg.out_path = "x.csv";
    cfg.format = "csv";
    cfg.gather_timeout = 12.0;
    const auto back = run_config_from_json(run_config_to_json(cfg));
    EXPECT_EQ(run_config_to_json(back), run_config_to_json(cfg));
}

TEST(Report, ReEmissionIsByteIdentical) {
    const std::vector<RunRecord> records{run_record("single", TopologyKind::single, 1, 3),
                                         run_record("cluster", TopologyKind::virtual_cluster, 2,
                                                    3)};
    EXPECT_EQ(render_report_json(records), render_report_json(records));
    EXPECT_EQ(render_report_csv(records), render_report_csv(records));
}

TEST(Report, JsonCarriesSpeedupComparisonWhenBothTopologiesPresent) {
    const std::vector<RunRecord> records{run_record("single", TopologyKind::single, 1, 3),
                                         run_record("cluster", TopologyKind::virtual_cluster, 2,
                                                    3)};
    const auto doc = report_to_json(records);
    ASSERT_TRUE(doc.contains("comparison"));
    EXPECT_EQ(doc["comparison"]["single"], "single");
    ASSERT_EQ(doc["comparison"]["rows"].size(), 1u);
    const auto& row = doc["comparison"]["rows"][0];
    EXPECT_EQ(row["label"], "cluster");
    const double speedup = row["speedup"].get<double>();
    const double improvement = row["improvement"].get<double>();
    EXPECT_NEAR(improvement, speedup / 2.0, 1e-12);
    EXPECT_GT(row["t_single"].get<double>(), 0.0);
    EXPECT_GT(row["t_distributed"].get<double>(), 0.0);
}

TEST(Report, CsvHasHeaderPerGenerationRowsAndSpeedupColumn) {
    const std::vector<RunRecord> records{run_record("single", TopologyKind::single, 1, 3),
                                         run_record("cluster", TopologyKind::virtual_cluster, 2,
                                                    3)};
    const std::string csv = render_report_csv(records);
    std::istringstream in(csv);
    std::string line;
    int comment_lines = 0, data_lines = 0;
    bool saw_header = false;
    bool saw_cluster_speedup = false;
    while (std::getline(in, line)) {
        if (line.rfind("# config", 0) == 0) {
            ++comment_lines;
            continue;
        }
        if (!saw_header) {
            EXPECT_EQ(line.rfind("run,topology,selection,slaves,generation,", 0), 0u);
            saw_header = true;
            continue;
        }
        ++data_lines;
        if (line.rfind("cluster,", 0) == 0) {
            // a populated speedup column means the row does not end with ",,"
            if (line.size() >= 2 && line.compare(line.size() - 2, 2, ",,") != 0)
                saw_cluster_speedup = true;
            EXPECT_NE(line.find(",virtual,"), std::string::npos);
        }
    }
    EXPECT_EQ(comment_lines, 2);
    EXPECT_TRUE(saw_header);
    // 12 generations + 1 total row per run
    EXPECT_EQ(data_lines, 2 * 13);
    EXPECT_TRUE(saw_cluster_speedup);
}

TEST(Report, EmptyRecordSetFailsWithoutCreatingAFile) {
    const auto path = temp_file("evosr_empty_report.json");
    std::filesystem::remove(path);
    EXPECT_THROW(emit_report({}, path.string(), "json"), EmptyCollection);
    EXPECT_FALSE(std::filesystem::exists(path));
}

TEST(Report, JsonRoundTripsThroughLoadReport) {
    const std::vector<RunRecord> records{run_record("single", TopologyKind::single, 1, 5),
                                         run_record("cluster", TopologyKind::virtual_cluster, 2,
                                                    5)};
    const auto path = temp_file("evosr_report_roundtrip.json");
    emit_report(records, path.string(), "json");
    const auto loaded = load_report(path.string());
    ASSERT_EQ(loaded.size(), records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        EXPECT_EQ(loaded[i].label, records[i].label);
        EXPECT_EQ(loaded[i].result.converged, records[i].result.converged);
        EXPECT_EQ(loaded[i].result.generations, records[i].result.generations);
        EXPECT_EQ(loaded[i].result.champion_error, records[i].result.champion_error);
        EXPECT_EQ(loaded[i].result.champion_x, records[i].result.champion_x);
        ASSERT_EQ(loaded[i].result.per_generation.size(),
                  records[i].result.per_generation.size());
        for (std::size_t t = 0; t < records[i].result.per_generation.size(); ++t)
            EXPECT_EQ(loaded[i].result.per_generation[t].champion_error,
                      records[i].result.per_generation[t].champion_error);
        EXPECT_EQ(run_config_to_json(loaded[i].config), run_config_to_json(records[i].config));
    }
    // merged re-emission is reproducible too
    EXPECT_EQ(render_report_json(loaded), render_report_json(records));
    std::filesystem::remove(path);
}

TEST(Report, RejectsForeignJsonDocuments) {
    EXPECT_THROW(report_from_json(nlohmann::json::parse(R"({"hello": 1})")), ParseError);
}
