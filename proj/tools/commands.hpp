#ifndef ONEA_TOOLS_COMMANDS_HPP
#define ONEA_TOOLS_COMMANDS_HPP

// Subcommands of the `onea` binary. Each returns a process exit code:
// 0 success, 2 user/config error, 3 numeric failure, 4 I/O.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "onea/onea.hpp"

namespace onea::cli {

enum ExitCode : int {
    exit_ok = 0,
    exit_usage = 2,
    exit_numeric = 3,
    exit_io = 4,
};

/// Runs `body`, translating library exceptions into exit codes and a message on `err`.
template <typename Body>
int guarded(std::ostream& err, Body&& body)
{
    try {
        return body();
    } catch (const format_error& e) {
        err << "error: " << e.what() << '\n';
        return exit_io;
    } catch (const numeric_error& e) {
        err << "error: " << e.what() << '\n';
        return exit_numeric;
    } catch (const error& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const json::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return exit_io;
    } catch (const std::ios_base::failure& e) {
        err << "error: " << e.what() << '\n';
        return exit_io;
    }
}

inline std::string format_real(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

inline std::string format_real(const std::optional<double>& x) { return x ? format_real(*x) : std::string(); }

/// Worker cap from ONEA_THREADS, else the hardware concurrency.
inline unsigned thread_cap()
{
    if (const char* env = std::getenv("ONEA_THREADS"); env && *env) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (*end != '\0' || v < 1)
            throw spec_error("ONEA_THREADS: expected a positive integer, got '" + std::string(env) + "'");
        return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

// ---------------------------------------------------------------------------
// gen-stream

inline int gen_stream(const StreamSpec& spec, const std::string& out_path, std::ostream& out)
{
    spec.validate();
    const std::string text = manifest_to_json(spec).dump(2) + "\n";
    if (out_path.empty())
        out << text;
    else
        write_text_file(out_path, text);
    return exit_ok;
}

// ---------------------------------------------------------------------------
// run

inline std::filesystem::path report_path(const std::filesystem::path& dir, Strategy s)
{
    return dir / ("report-" + to_string(s) + ".json");
}

inline std::vector<std::filesystem::path> adapter_paths(const std::filesystem::path& dir, Strategy s,
                                                        std::size_t count)
{
    if (s != Strategy::PerTaskNoMerge)
        return {dir / ("adapter-" + to_string(s) + ".onea")};
    std::vector<std::filesystem::path> paths;
    for (std::size_t t = 0; t < count; ++t)
        paths.push_back(dir / ("adapter-" + to_string(s) + "-task" + std::to_string(t + 1) + ".onea"));
    return paths;
}

inline int run(const RunConfig& cfg, std::ostream& out)
{
    cfg.validate();
    const json echo = config_to_json(cfg);
    const std::filesystem::path dir(cfg.out_dir);
    std::filesystem::create_directories(dir);

    const TaskStream stream = build_stream(cfg.stream);
    TrainConfig train = cfg.train;

    const std::size_t n = cfg.strategies.size();
    std::vector<RunReport> reports(n);
    std::vector<RunArtifacts> artifacts(n);
    std::vector<std::exception_ptr> failures(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                reports[i] = run_sequence(stream, cfg.strategies[i], train, cfg.merge, &artifacts[i]);
            } catch (...) {
                failures[i] = std::current_exception();
            }
        }
    };
    const std::size_t workers = std::min<std::size_t>(n, thread_cap());
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back(worker);
    }
    for (const auto& f : failures)
        if (f)
            std::rethrow_exception(f);

    write_text_file(dir / "manifest.json", manifest_to_json(cfg.stream).dump(2) + "\n");
    for (std::size_t i = 0; i < n; ++i) {
        const Strategy s = cfg.strategies[i];
        const auto rp = report_path(dir, s);
        write_text_file(rp, report_to_json(reports[i], echo, !cfg.omit_timings).dump(2) + "\n");
        const auto aps = adapter_paths(dir, s, artifacts[i].adapters.size());
        for (std::size_t k = 0; k < aps.size(); ++k)
            container::write_file(aps[k], artifacts[i].adapters[k]);
        const MetricSummary m = summarize(reports[i]);
        out << to_string(s) << ": A_T=" << format_real(m.last) << " A_bar=" << format_real(m.average)
            << " F=" << format_real(m.forgetting) << " -> " << rp.string() << '\n';
    }
    return exit_ok;
}

// ---------------------------------------------------------------------------
// merge

struct MergeArgs {
    std::string accumulated;
    std::string incoming;
    std::string out;
    std::string strategy = "one-a";
    std::size_t n_prev = 1;
    MergeConfig cfg;
};

inline int merge(const MergeArgs& a, std::ostream& out)
{
    const AdapterModule acc = container::read_file(a.accumulated);
    const AdapterModule inc = container::read_file(a.incoming);
    a.cfg.validate();
    require_mergeable(inc, acc);

    AdapterModule merged;
    MergeTrace trace;
    const Strategy s = strategy_from_string(a.strategy);
    switch (s) {
    case Strategy::OneA:
        merged = merge_modules(inc, acc, a.cfg, &trace);
        break;
    case Strategy::Symmetric:
        merged = merge_symmetric_modules(inc, acc, a.cfg, &trace);
        break;
    case Strategy::Average: {
        merged = merge_average(inc, acc, a.n_prev);
        const double n = static_cast<double>(a.n_prev);
        trace.new_is_base = false;
        trace.weights.assign(inc.layers.size(), FusionWeights{n / (n + 1.0), 1.0 / (n + 1.0), false});
        break;
    }
    default:
        throw spec_error("strategy: merge supports one-a, symmetric and average");
    }
    container::write_file(a.out, merged);

    out << "strategy " << to_string(s) << "; base = " << (trace.new_is_base ? "incoming" : "accumulated") << '\n';
    for (std::size_t l = 0; l < trace.weights.size(); ++l) {
        out << "layer " << l << ": rank "
            << (l < trace.effective_ranks.size() ? std::to_string(trace.effective_ranks[l]) : std::string("-"))
            << " w_b " << format_real(trace.weights[l].base) << " w_a " << format_real(trace.weights[l].align)
            << '\n';
    }
    return exit_ok;
}

// ---------------------------------------------------------------------------
// eval

inline int eval(const std::string& path, std::ostream& out)
{
    const RunReport r = report_from_json(read_json_file(path));
    json j = json::object();
    j["schema_version"] = schema_version;
    j["strategy"] = r.strategy;
    const json metrics = metrics_to_json(r);
    for (const auto& [k, v] : metrics.items())
        j[k] = v;
    const MetricSummary m = summarize(r);
    out << j.dump() << '\n';
    out << format_real(m.last) << ',' << format_real(m.average) << ',' << format_real(m.weighted_average) << ','
        << format_real(m.forgetting) << '\n';
    return exit_ok;
}

// ---------------------------------------------------------------------------
// compare

inline constexpr const char* stream_keys[] = {"classes",     "tasks",          "gamma",      "order",
                                              "samples_per_class", "stream_seed", "input_dim", "mean_radius",
                                              "noise_sigma", "train_fraction"};

inline int compare(const std::vector<std::string>& paths, const std::string& csv_path,
                   const std::string& json_path, std::ostream& out)
{
    if (paths.size() < 2)
        throw spec_error("compare: at least two reports are required");
    std::vector<json> docs;
    std::vector<RunReport> reports;
    for (const auto& p : paths) {
        docs.push_back(read_json_file(p));
        reports.push_back(report_from_json(docs.back()));
    }
    for (std::size_t i = 1; i < reports.size(); ++i) {
        if (reports[i].stream_seed != reports[0].stream_seed)
            throw spec_error("compare: '" + paths[i] + "' has stream seed " + std::to_string(reports[i].stream_seed) +
                             ", '" + paths[0] + "' has " + std::to_string(reports[0].stream_seed));
        if (docs[i].contains("config") && docs[0].contains("config")) {
            for (const char* key : stream_keys) {
                const auto& a = docs[0]["config"];
                const auto& b = docs[i]["config"];
                if (a.contains(key) && b.contains(key) && a[key] != b[key])
                    throw spec_error("compare: stream setting '" + std::string(key) + "' differs between '" +
                                     paths[0] + "' and '" + paths[i] + "'");
            }
        }
    }

    std::string csv = "strategy,A_T,A_bar,wA_bar,F,svd_calls,merge_ms\n";
    json rows = json::array();
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const RunReport& r = reports[i];
        const MetricSummary m = summarize(r);
        const bool timed = docs[i].contains("timings");
        csv += r.strategy + ',' + format_real(m.last) + ',' + format_real(m.average) + ',' +
               format_real(m.weighted_average) + ',' + format_real(m.forgetting) + ',' +
               std::to_string(r.svd_calls) + ',' + (timed ? format_real(r.merge_ms) : std::string()) + '\n';
        json row = json::object();
        row["strategy"] = r.strategy;
        const json metrics = metrics_to_json(r);
        for (const auto& [k, v] : metrics.items())
            row[k] = v;
        row["svd_calls"] = r.svd_calls;
        row["merge_ms"] = timed ? json(r.merge_ms) : json(nullptr);
        rows.push_back(std::move(row));
    }
    json doc = json::object();
    doc["schema_version"] = schema_version;
    doc["stream_seed"] = reports[0].stream_seed;
    doc["columns"] = {"A_T", "A_bar", "wA_bar", "F", "svd_calls", "merge_ms"};
    doc["rows"] = std::move(rows);

    out << csv;
    if (!csv_path.empty())
        write_text_file(csv_path, csv);
    if (!json_path.empty())
        write_text_file(json_path, doc.dump(2) + "\n");
    return exit_ok;
}

// ---------------------------------------------------------------------------
// Entry point

inline int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"One-A asymmetric adapter fusion for step-imbalanced class-incremental learning", "onea"};
    app.require_subcommand(1);

    StreamSpec spec;
    std::string order = to_string(spec.order);
    std::string manifest_out;
    auto* gen = app.add_subcommand("gen-stream", "Write a stream manifest as JSON");
    gen->add_option("--classes", spec.total_classes, "Total number of classes")->capture_default_str();
    gen->add_option("--tasks", spec.num_tasks, "Number of tasks")->capture_default_str();
    gen->add_option("--gamma", spec.gamma, "Imbalance ratio in (0, 1]")->capture_default_str();
    gen->add_option("--order", order, "permuted, descending or balanced")->capture_default_str();
    gen->add_option("--samples-per-class", spec.samples_per_class)->capture_default_str();
    gen->add_option("--input-dim", spec.input_dim)->capture_default_str();
    gen->add_option("--seed", spec.seed, "Stream seed")->capture_default_str();
    gen->add_option("-o,--out", manifest_out, "Output file (default: stdout)");

    std::string config_path, run_out, strategies;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> stream_seed, train_seed;
    bool omit_timings = false;
    auto* run_cmd = app.add_subcommand("run", "Train and merge over a stream for each strategy");
    run_cmd->add_option("-c,--config", config_path, "Flat JSON config file");
    run_cmd->add_option("--set", overrides, "Override a config key (key=value), repeatable");
    run_cmd->add_option("-o,--out", run_out, "Output directory");
    run_cmd->add_option("--strategies", strategies, "Comma-separated strategy list");
    run_cmd->add_option("--stream-seed", stream_seed);
    run_cmd->add_option("--train-seed", train_seed);
    run_cmd->add_flag("--omit-timings", omit_timings, "Leave wall-clock timings out of reports");

    MergeArgs margs;
    std::string proxy = to_string(margs.cfg.info_proxy);
    auto* merge_cmd = app.add_subcommand("merge", "Merge an incoming adapter into an accumulated one");
    merge_cmd->add_option("accumulated", margs.accumulated, "Accumulated adapter (.onea)")->required();
    merge_cmd->add_option("incoming", margs.incoming, "Incoming adapter (.onea)")->required();
    merge_cmd->add_option("-o,--out", margs.out, "Merged adapter (.onea)")->required();
    merge_cmd->add_option("--strategy", margs.strategy, "one-a, symmetric or average")->capture_default_str();
    merge_cmd->add_option("--n-prev", margs.n_prev, "Tasks already in the accumulated adapter (average)")
        ->capture_default_str();
    merge_cmd->add_option("--q", margs.cfg.quantile_q)->capture_default_str();
    merge_cmd->add_option("--kappa", margs.cfg.sharpness_kappa)->capture_default_str();
    merge_cmd->add_option("--delta", margs.cfg.delta)->capture_default_str();
    merge_cmd->add_option("--rank-eps", margs.cfg.rank_eps)->capture_default_str();
    merge_cmd->add_option("--proxy", proxy, "class-count, frobenius or singular-energy")->capture_default_str();

    std::string eval_path;
    auto* eval_cmd = app.add_subcommand("eval", "Print metrics of a run report");
    eval_cmd->add_option("report", eval_path)->required();

    std::vector<std::string> compare_paths;
    std::string csv_path, json_path;
    auto* cmp = app.add_subcommand("compare", "Tabulate metrics of reports from the same stream");
    cmp->add_option("reports", compare_paths)->required();
    cmp->add_option("--csv", csv_path, "Also write the CSV table here");
    cmp->add_option("--json", json_path, "Also write the JSON table here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    }

    return guarded(err, [&] {
        if (*gen) {
            spec.order = task_order_from_string(order);
            return gen_stream(spec, manifest_out, out);
        }
        if (*run_cmd) {
            RunConfig cfg;
            if (!config_path.empty())
                cfg = parse_config(read_text_file(config_path));
            if (!run_out.empty())
                cfg.out_dir = run_out;
            if (!strategies.empty())
                apply_override(cfg, "strategies=" + strategies);
            if (stream_seed)
                cfg.stream.seed = *stream_seed;
            if (train_seed)
                cfg.train.seed = *train_seed;
            if (omit_timings)
                cfg.omit_timings = true;
            for (const auto& o : overrides)
                apply_override(cfg, o);
            return run(cfg, out);
        }
        if (*merge_cmd) {
            margs.cfg.info_proxy = info_proxy_from_string(proxy);
            return merge(margs, out);
        }
        if (*eval_cmd)
            return eval(eval_path, out);
        return compare(compare_paths, csv_path, json_path, out);
    });
}

/// Convenience overload for tests: `args` excludes the program name.
inline int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    std::vector<const char*> argv{"onea"};
    for (const auto& a : args)
        argv.push_back(a.c_str());
    return main(static_cast<int>(argv.size()), argv.data(), out, err);
}

} // namespace onea::cli

#endif // ONEA_TOOLS_COMMANDS_HPP
