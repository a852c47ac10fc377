#include <gtest/gtest.h>

#include <sstream>

#include "commands.hpp"
#include "support.hpp"

using namespace onea;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result invoke(const std::vector<std::string>& args)
{
    std::ostringstream out, err;
    const int code = cli::main(args, out, err);
    return {code, out.str(), err.str()};
}

std::vector<int> manifest_counts(const std::string& text)
{
    std::vector<int> counts;
    const json doc = json::parse(text);
    for (const auto& t : doc["tasks"])
        counts.push_back(t["class_count"].get<int>());
    return counts;
}

std::filesystem::path write_config(const std::filesystem::path& dir, const std::string& text)
{
    const auto p = dir / "config.json";
    write_text_file(p, text);
    return p;
}

const char* small_config = R"({"classes": 10, "tasks": 3, "samples_per_class": 20, "feature_dim": 32,
    "bottleneck": 4, "E0": 3, "E_max": 12, "stream_seed": 11, "train_seed": 12})";

} // namespace

TEST(CliGenStream, HeadTailManifest)
{
    const auto r = invoke({"gen-stream", "--classes", "100", "--tasks", "10", "--gamma", "0.01", "--seed", "7"});
    ASSERT_EQ(r.code, 0) << r.err;
    auto counts = manifest_counts(r.out);
    std::sort(counts.rbegin(), counts.rend());
    EXPECT_GT(counts.front(), 35);
    for (std::size_t t = 7; t < 10; ++t) {
        EXPECT_GE(counts[t], 1);
        EXPECT_LE(counts[t], 3);
    }
    EXPECT_EQ(std::accumulate(counts.begin(), counts.end(), 0), 100);
}

TEST(CliGenStream, BalancedAndDeterministic)
{
    const std::vector<std::string> args{"gen-stream", "--gamma", "1",  "--order",
                                        "balanced",   "--classes", "100", "--tasks", "10"};
    const auto a = invoke(args), b = invoke(args);
    ASSERT_EQ(a.code, 0);
    EXPECT_EQ(manifest_counts(a.out), std::vector<int>(10, 10));
    EXPECT_EQ(a.out, b.out);
}

TEST(CliGenStream, InvalidSpecNamesField)
{
    auto r = invoke({"gen-stream", "--classes", "5", "--tasks", "9"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("tasks"), std::string::npos);
    r = invoke({"gen-stream", "--gamma", "0"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("gamma"), std::string::npos);
    r = invoke({"gen-stream", "--order", "sideways"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("order"), std::string::npos);
    r = invoke({"gen-stream", "--classes", "many"});
    EXPECT_EQ(r.code, 2);
}

TEST(CliGenStream, WritesFile)
{
    const auto dir = test::scratch_dir("cli-gen");
    const auto r = invoke({"gen-stream", "--out", (dir / "m.json").string()});
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(read_json_file(dir / "m.json")["schema_version"], 1);
}

TEST(CliUsage, MissingOrUnknownSubcommand)
{
    EXPECT_EQ(invoke({}).code, 2);
    EXPECT_EQ(invoke({"train"}).code, 2);
    EXPECT_EQ(invoke({"--help"}).code, 0);
}

TEST(CliRun, ReportsAndAdapters)
{
    const auto dir = test::scratch_dir("cli-run");
    const auto cfg = write_config(dir, small_config);
    const auto r = invoke({"run", "--config", cfg.string(), "--out", (dir / "out").string(), "--strategies",
                        "one-a,average,symmetric"});
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* s : {"one-a", "average", "symmetric"}) {
        const json j = read_json_file(dir / "out" / (std::string("report-") + s + ".json"));
        EXPECT_EQ(j["schema_version"], 1);
        EXPECT_EQ(j["stream_seed"], 11);
        EXPECT_EQ(j["config"]["classes"], 10);
        const RunReport rep = report_from_json(j);
        ASSERT_EQ(rep.acc.size(), 3u);
        for (std::size_t jj = 0; jj < 3; ++jj)
            for (std::size_t k = jj; k < 3; ++k)
                EXPECT_FALSE(std::isnan(rep.acc[jj][k]));
        EXPECT_GE(last_accuracy(rep), 0.0);
        EXPECT_LE(last_accuracy(rep), 1.0);
        EXPECT_TRUE(j.contains("timings"));
        const AdapterModule a = container::read_file(dir / "out" / (std::string("adapter-") + s + ".onea"));
        EXPECT_EQ(a.meta.class_count(), 10u);
    }
    EXPECT_TRUE(std::filesystem::exists(dir / "out" / "manifest.json"));
}

TEST(CliRun, RerunIsByteIdenticalWithoutTimings)
{
    const auto dir = test::scratch_dir("cli-rerun");
    const auto cfg = write_config(dir, small_config);
    const std::vector<std::string> args{"run",          "--config",  cfg.string(),     "--out",
                                        (dir / "o").string(), "--omit-timings", "--strategies", "one-a,per-task"};
    ASSERT_EQ(invoke(args).code, 0);
    const std::string first = read_text_file(dir / "o" / "report-one-a.json");
    const std::string first_pt = read_text_file(dir / "o" / "report-per-task.json");
    ASSERT_EQ(invoke(args).code, 0);
    EXPECT_EQ(read_text_file(dir / "o" / "report-one-a.json"), first);
    EXPECT_EQ(read_text_file(dir / "o" / "report-per-task.json"), first_pt);
    EXPECT_TRUE(std::filesystem::exists(dir / "o" / "adapter-per-task-task3.onea"));
}

TEST(CliRun, ParallelismDoesNotChangeOutputs)
{
    const auto dir = test::scratch_dir("cli-threads");
    const auto cfg = write_config(dir, small_config);
    auto run_with = [&](const char* threads) {
        setenv("ONEA_THREADS", threads, 1);
        const auto r = invoke({"run", "--config", cfg.string(), "--out", (dir / "o").string(), "--omit-timings",
                            "--strategies", "one-a,average,symmetric,single-finetune"});
        unsetenv("ONEA_THREADS");
        EXPECT_EQ(r.code, 0) << r.err;
        std::string all;
        for (const char* s : {"one-a", "average", "symmetric", "single-finetune"})
            all += read_text_file(dir / "o" / (std::string("report-") + s + ".json"));
        return all;
    };
    EXPECT_EQ(run_with("1"), run_with("4"));
    setenv("ONEA_THREADS", "zero", 1);
    EXPECT_EQ(invoke({"run", "--config", cfg.string(), "--out", (dir / "o").string()}).code, 2);
    unsetenv("ONEA_THREADS");
}

TEST(CliRun, ConfigErrorsExitTwo)
{
    const auto dir = test::scratch_dir("cli-badcfg");
    EXPECT_EQ(invoke({"run", "--config", write_config(dir, R"({"clases": 3})").string()}).code, 2);
    EXPECT_EQ(invoke({"run", "--set", "gamma=2", "--out", (dir / "o").string()}).code, 2);
    EXPECT_EQ(invoke({"run", "--set", "unknown=1"}).code, 2);
}

TEST(CliRun, DivergenceExitsThree)
{
    const auto dir = test::scratch_dir("cli-diverge");
    const auto cfg = write_config(dir, small_config);
    const auto r = invoke({"run", "--config", cfg.string(), "--set", "lr=1e300", "--out", (dir / "o").string()});
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("lr 1e+300"), std::string::npos);
}

TEST(CliRun, IoErrorsExitFour)
{
    const auto dir = test::scratch_dir("cli-io");
    EXPECT_EQ(invoke({"run", "--config", (dir / "missing.json").string()}).code, 4);
    write_text_file(dir / "blocker", "x");
    EXPECT_EQ(invoke({"run", "--out", (dir / "blocker" / "sub").string()}).code, 4);
}

namespace {

struct Pair {
    std::filesystem::path a, b;
};

Pair write_pair(const std::filesystem::path& dir)
{
    Rng rng(31);
    AdapterModule a = test::random_module(6, 3, rng, 120, 0, 3);
    AdapterModule b = test::random_module(6, 3, rng, 40, 10, 1);
    for (auto* m : {&a, &b})
        for (auto& w : m->layers)
            for (auto& v : w.data())
                v = static_cast<float>(v);
    container::write_file(dir / "a.onea", a);
    container::write_file(dir / "b.onea", b);
    return {dir / "a.onea", dir / "b.onea"};
}

} // namespace

TEST(CliMerge, SelfMergeReproducesInput)
{
    const auto dir = test::scratch_dir("cli-merge-self");
    const auto p = write_pair(dir);
    const auto r = invoke({"merge", p.a.string(), p.a.string(), "--out", (dir / "m.onea").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("layer 0: rank 3 w_b 0.5 w_a 0.5"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("layer 1: rank 3"), std::string::npos);
    const AdapterModule a = container::read_file(p.a), m = container::read_file(dir / "m.onea");
    for (std::size_t l = 0; l < 2; ++l)
        EXPECT_LT(test::max_abs_diff(m.layers[l], a.layers[l]), 1e-6);  // float32 container
}

TEST(CliMerge, StrategiesDiffer)
{
    const auto dir = test::scratch_dir("cli-merge-diff");
    const auto p = write_pair(dir);
    const auto one_a = invoke({"merge", p.a.string(), p.b.string(), "-o", (dir / "x.onea").string()});
    ASSERT_EQ(one_a.code, 0);
    EXPECT_NE(one_a.out.find("base = accumulated"), std::string::npos);
    EXPECT_NE(one_a.out.find("w_b 0.75 w_a 0.25"), std::string::npos) << one_a.out;
    const auto avg =
        invoke({"merge", p.a.string(), p.b.string(), "-o", (dir / "y.onea").string(), "--strategy", "average"});
    ASSERT_EQ(avg.code, 0);
    const auto sym =
        invoke({"merge", p.a.string(), p.b.string(), "-o", (dir / "z.onea").string(), "--strategy", "symmetric"});
    ASSERT_EQ(sym.code, 0);
    const AdapterModule x = container::read_file(dir / "x.onea"), y = container::read_file(dir / "y.onea"),
                        z = container::read_file(dir / "z.onea");
    EXPECT_GT(frobenius_distance(x.layers[0], y.layers[0]), 1e-3);
    EXPECT_GT(frobenius_distance(x.layers[0], z.layers[0]), 1e-3);
}

TEST(CliMerge, Errors)
{
    const auto dir = test::scratch_dir("cli-merge-err");
    const auto p = write_pair(dir);
    const std::string corrupt = (dir / "corrupt.onea").string();
    const std::string bytes = read_text_file(p.a);
    write_text_file(corrupt, bytes.substr(0, bytes.size() - 5));
    auto r = invoke({"merge", corrupt, p.b.string(), "-o", (dir / "m.onea").string()});
    EXPECT_EQ(r.code, 4);
    EXPECT_NE(r.err.find("offset"), std::string::npos);

    Rng rng(32);
    container::write_file(dir / "c.onea", test::random_module(5, 3, rng));
    r = invoke({"merge", p.a.string(), (dir / "c.onea").string(), "-o", (dir / "m.onea").string()});
    EXPECT_EQ(r.code, 2);

    r = invoke({"merge", p.a.string(), (dir / "nope.onea").string(), "-o", (dir / "m.onea").string()});
    EXPECT_EQ(r.code, 4);
    r = invoke({"merge", p.a.string(), p.b.string(), "-o", (dir / "m.onea").string(), "--strategy", "per-task"});
    EXPECT_EQ(r.code, 2);
}

TEST(CliEvalCompare, EndToEnd)
{
    const auto dir = test::scratch_dir("cli-eval");
    const auto cfg = write_config(dir, small_config);
    ASSERT_EQ(invoke({"run", "--config", cfg.string(), "--out", (dir / "o").string(), "--strategies",
                   "one-a,average,symmetric"})
                  .code,
              0);
    const auto rep = (dir / "o" / "report-one-a.json").string();

    const auto e = invoke({"eval", rep});
    ASSERT_EQ(e.code, 0) << e.err;
    std::istringstream lines(e.out);
    std::string json_line, csv_line;
    std::getline(lines, json_line);
    std::getline(lines, csv_line);
    const json m = json::parse(json_line);
    const RunReport r = report_from_json(read_json_file(rep));
    EXPECT_EQ(m["A_T"].get<double>(), last_accuracy(r));
    EXPECT_EQ(m["A_bar"].get<double>(), average_accuracy(r));
    EXPECT_EQ(m["wA_bar"].get<double>(), weighted_average_accuracy(r));
    EXPECT_EQ(m["F"].get<double>(), *forgetting(r));
    EXPECT_EQ(std::count(csv_line.begin(), csv_line.end(), ','), 3);

    const auto same = invoke({"compare", rep, rep});
    ASSERT_EQ(same.code, 0);
    std::istringstream rows(same.out);
    std::string header, row1, row2;
    std::getline(rows, header);
    std::getline(rows, row1);
    std::getline(rows, row2);
    EXPECT_EQ(header, "strategy,A_T,A_bar,wA_bar,F,svd_calls,merge_ms");
    EXPECT_EQ(row1, row2);

    const auto csv = (dir / "t.csv").string(), js = (dir / "t.json").string();
    const auto three = invoke({"compare", rep, (dir / "o" / "report-average.json").string(),
                            (dir / "o" / "report-symmetric.json").string(), "--csv", csv, "--json", js});
    ASSERT_EQ(three.code, 0) << three.err;
    const std::string table = read_text_file(csv);
    EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 4);
    std::istringstream tl(table);
    std::string h;
    std::getline(tl, h);
    EXPECT_EQ(std::count(h.begin(), h.end(), ','), 6);
    const json tj = read_json_file(js);
    EXPECT_EQ(tj["rows"].size(), 3u);
    EXPECT_EQ(tj["columns"].size(), 6u);
}

TEST(CliEvalCompare, RefusesMismatchedStreams)
{
    const auto dir = test::scratch_dir("cli-mismatch");
    const auto cfg = write_config(dir, small_config);
    ASSERT_EQ(invoke({"run", "--config", cfg.string(), "--out", (dir / "a").string()}).code, 0);
    ASSERT_EQ(invoke({"run", "--config", cfg.string(), "--out", (dir / "b").string(), "--stream-seed", "99"}).code,
              0);
    const auto r = invoke({"compare", (dir / "a" / "report-one-a.json").string(),
                        (dir / "b" / "report-one-a.json").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("stream seed"), std::string::npos);
    EXPECT_EQ(invoke({"compare", (dir / "a" / "report-one-a.json").string()}).code, 2);
    EXPECT_EQ(invoke({"eval", (dir / "missing.json").string()}).code, 4);
}
