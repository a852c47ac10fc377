#include <gtest/gtest.h>

#include "support.hpp"

using namespace onea;

TEST(RunConfig, DefaultsValidate)
{
    EXPECT_NO_THROW(RunConfig{}.validate());
}

TEST(RunConfig, ParsesFlatDocument)
{
    const RunConfig cfg = parse_config(R"({"classes": 30, "tasks": 3, "gamma": 0.1, "order": "descending",
        "stream_seed": 5, "train_seed": 6, "lr": 0.02, "E0": 4, "kappa": 20, "info_proxy": "frobenius",
        "strategies": ["one-a", "average"], "out_dir": "x", "cosine_lr": true})");
    EXPECT_EQ(cfg.stream.total_classes, 30);
    EXPECT_EQ(cfg.stream.num_tasks, 3);
    EXPECT_EQ(cfg.stream.order, TaskOrder::Descending);
    EXPECT_EQ(cfg.stream.seed, 5u);
    EXPECT_EQ(cfg.train.seed, 6u);
    EXPECT_EQ(cfg.train.lr, 0.02);
    EXPECT_EQ(cfg.train.epochs_ref, 4);
    EXPECT_TRUE(cfg.train.cosine_lr);
    EXPECT_EQ(cfg.merge.sharpness_kappa, 20);
    EXPECT_EQ(cfg.merge.info_proxy, InfoProxy::FrobeniusNorm);
    EXPECT_EQ(cfg.strategies, (std::vector<Strategy>{Strategy::OneA, Strategy::Average}));
    EXPECT_EQ(cfg.out_dir, "x");
}

TEST(RunConfig, RejectsUnknownKeysAndWrongTypes)
{
    EXPECT_THROW(parse_config(R"({"clases": 30})"), spec_error);
    EXPECT_THROW(parse_config(R"({"classes": "30"})"), spec_error);
    EXPECT_THROW(parse_config(R"({"classes": 2.5})"), spec_error);
    EXPECT_THROW(parse_config(R"({"stream_seed": -1})"), spec_error);
    EXPECT_THROW(parse_config(R"({"order": "random"})"), spec_error);
    EXPECT_THROW(parse_config(R"({"strategies": ["one-a", "ema"]})"), spec_error);
    EXPECT_THROW(parse_config(R"([1, 2])"), spec_error);
    EXPECT_THROW(parse_config("{not json"), spec_error);
    try {
        parse_config(R"({"classes": 30, "bogus": 1})");
        FAIL();
    } catch (const spec_error& e) {
        EXPECT_NE(std::string(e.what()).find("bogus"), std::string::npos);
    }
}

TEST(RunConfig, OverridesAreTyped)
{
    RunConfig cfg;
    apply_override(cfg, "gamma=0.5");
    apply_override(cfg, "order=balanced");
    apply_override(cfg, "strategies=one-a,symmetric");
    apply_override(cfg, "cosine_lr=true");
    apply_override(cfg, "out_dir=some/where");
    EXPECT_EQ(cfg.stream.gamma, 0.5);
    EXPECT_EQ(cfg.stream.order, TaskOrder::Balanced);
    EXPECT_EQ(cfg.strategies, (std::vector<Strategy>{Strategy::OneA, Strategy::Symmetric}));
    EXPECT_TRUE(cfg.train.cosine_lr);
    EXPECT_EQ(cfg.out_dir, "some/where");
    EXPECT_THROW(apply_override(cfg, "gamma"), spec_error);
    EXPECT_THROW(apply_override(cfg, "nope=1"), spec_error);
    EXPECT_THROW(apply_override(cfg, "tasks=many"), spec_error);
}

TEST(RunConfig, ValidationCatchesDuplicatesAndRanges)
{
    RunConfig cfg;
    cfg.strategies = {Strategy::OneA, Strategy::OneA};
    EXPECT_THROW(cfg.validate(), spec_error);
    cfg = RunConfig{};
    cfg.strategies.clear();
    EXPECT_THROW(cfg.validate(), spec_error);
    cfg = RunConfig{};
    cfg.stream.num_tasks = 50;
    EXPECT_THROW(cfg.validate(), spec_error);
}

TEST(RunConfig, EchoRoundTrips)
{
    RunConfig cfg;
    apply_override(cfg, "classes=40");
    apply_override(cfg, "rank_eps=1e-8");
    apply_override(cfg, "strategies=per-task,single-finetune");
    const json echo = config_to_json(cfg);
    RunConfig back;
    apply_config(back, echo);
    EXPECT_EQ(config_to_json(back), echo);
    EXPECT_EQ(echo.size(), detail::config_fields().size());
}

TEST(ReportJson, RoundTrip)
{
    RunReport r;
    r.strategy = "one-a";
    r.stream_seed = 3;
    r.train_seed = 4;
    r.acc = empty_accuracy_table(2);
    r.acc[0][0] = 0.9;
    r.acc[0][1] = 0.8;
    r.acc[1][1] = 0.7;
    r.step_acc = {0.9, 0.75};
    r.class_counts = {3, 2};
    r.svd_calls = 2;
    r.eval_samples = 50;
    r.eval_adapter_forwards = 50;
    r.merge_ms = 1.5;
    r.wall_ms = 9.0;

    const json j = report_to_json(r, config_to_json(RunConfig{}));
    EXPECT_EQ(j["schema_version"], 1);
    EXPECT_TRUE(j["acc"][1][0].is_null());
    EXPECT_DOUBLE_EQ(j["metrics"]["F"].get<double>(), 0.1);
    EXPECT_EQ(j["timings"]["merge_ms"], 1.5);
    EXPECT_TRUE(j.contains("wA_bar_convention"));

    const RunReport back = report_from_json(j);
    EXPECT_EQ(back.step_acc, r.step_acc);
    EXPECT_EQ(back.class_counts, r.class_counts);
    EXPECT_EQ(back.acc[0], r.acc[0]);
    EXPECT_TRUE(std::isnan(back.acc[1][0]));
    EXPECT_EQ(back.svd_calls, 2u);
    EXPECT_EQ(back.merge_ms, 1.5);

    const json untimed = report_to_json(r, json::object(), false);
    EXPECT_FALSE(untimed.contains("timings"));
}

TEST(ReportJson, RejectsInconsistentDocuments)
{
    EXPECT_THROW(report_from_json(json::object()), spec_error);
    json j = {{"schema_version", 2}};
    EXPECT_THROW(report_from_json(j), spec_error);
    j = {{"schema_version", 1}, {"strategy", "x"},       {"stream_seed", 0},  {"train_seed", 0},
         {"class_counts", {1}}, {"acc", {{0.5, 0.5}}}, {"step_acc", {0.5}}};
    EXPECT_THROW(report_from_json(j), spec_error);
}

TEST(Manifest, ListsTasks)
{
    StreamSpec spec;
    spec.total_classes = 100;
    spec.num_tasks = 10;
    spec.seed = 7;
    const json m = manifest_to_json(spec);
    EXPECT_EQ(m["schema_version"], 1);
    EXPECT_EQ(m["spec"]["classes"], 100);
    ASSERT_EQ(m["tasks"].size(), 10u);
    int total = 0;
    for (const auto& t : m["tasks"]) {
        EXPECT_EQ(t["class_ids"].size(), t["class_count"].get<std::size_t>());
        EXPECT_EQ(t["sample_count"], 40 * t["class_count"].get<int>());
        total += t["class_count"].get<int>();
    }
    EXPECT_EQ(total, 100);
    EXPECT_EQ(m.dump(), manifest_to_json(spec).dump());
}
