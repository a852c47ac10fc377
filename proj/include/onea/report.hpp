#ifndef ONEA_REPORT_HPP
#define ONEA_REPORT_HPP

//
// JSON documents: run configuration, run reports and stream manifests.
//

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "onea/errors.hpp"
#include "onea/merge.hpp"
#include "onea/metrics.hpp"
#include "onea/sim.hpp"
#include "onea/stream.hpp"

namespace onea {

using json = nlohmann::ordered_json;

inline constexpr int schema_version = 1;

// ---------------------------------------------------------------------------
// Run configuration

struct RunConfig {
    StreamSpec stream;
    TrainConfig train;
    MergeConfig merge;
    std::vector<Strategy> strategies{Strategy::OneA};
    std::string out_dir = "onea-out";
    bool omit_timings = false;

    void validate() const
    {
        stream.validate();
        train.validate();
        merge.validate();
        if (strategies.empty())
            throw spec_error("strategies: at least one strategy is required");
        for (std::size_t i = 0; i < strategies.size(); ++i)
            for (std::size_t j = 0; j < i; ++j)
                if (strategies[i] == strategies[j])
                    throw spec_error("strategies: '" + to_string(strategies[i]) + "' listed twice");
        if (out_dir.empty())
            throw spec_error("out_dir: must not be empty");
    }
};

namespace detail {

struct ConfigField {
    const char* key;
    std::function<void(RunConfig&, const json&)> set;
    std::function<json(const RunConfig&)> get;
    /// Converts a command-line value to the JSON type expected by `set`.
    std::function<json(const std::string&)> from_text;
};

inline json parse_scalar_text(const std::string& key, const std::string& text)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error&) {
        throw spec_error(key + ": cannot parse value '" + text + "'");
    }
}

inline json text_as_string(const std::string& text)
{
    if (!text.empty() && text.front() == '"')
        return json::parse(text);
    return json(text);
}

template <typename Get>
ConfigField int_field(const char* key, Get get)
{
    return {key,
            [key, get](RunConfig& c, const json& v) {
                if (!v.is_number_integer())
                    throw spec_error(std::string(key) + ": expected an integer");
                const auto x = v.get<std::int64_t>();
                if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
                    throw spec_error(std::string(key) + ": out of range");
                get(c) = static_cast<int>(x);
            },
            [get](const RunConfig& c) { return json(get(c)); },
            [key](const std::string& t) { return parse_scalar_text(key, t); }};
}

template <typename Get>
ConfigField seed_field(const char* key, Get get)
{
    return {key,
            [key, get](RunConfig& c, const json& v) {
                if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
                    throw spec_error(std::string(key) + ": expected a non-negative integer");
                get(c) = v.get<std::uint64_t>();
            },
            [get](const RunConfig& c) { return json(get(c)); },
            [key](const std::string& t) { return parse_scalar_text(key, t); }};
}

template <typename Get>
ConfigField real_field(const char* key, Get get)
{
    return {key,
            [key, get](RunConfig& c, const json& v) {
                if (!v.is_number())
                    throw spec_error(std::string(key) + ": expected a number");
                const double x = v.get<double>();
                if (!std::isfinite(x))
                    throw spec_error(std::string(key) + ": must be finite");
                get(c) = x;
            },
            [get](const RunConfig& c) { return json(get(c)); },
            [key](const std::string& t) { return parse_scalar_text(key, t); }};
}

template <typename Get>
ConfigField bool_field(const char* key, Get get)
{
    return {key,
            [key, get](RunConfig& c, const json& v) {
                if (!v.is_boolean())
                    throw spec_error(std::string(key) + ": expected true or false");
                get(c) = v.get<bool>();
            },
            [get](const RunConfig& c) { return json(get(c)); },
            [key](const std::string& t) { return parse_scalar_text(key, t); }};
}

/// String-valued field; `parse` converts and validates, `print` renders.
template <typename Get, typename Parse, typename Print>
ConfigField named_field(const char* key, Get get, Parse parse, Print print)
{
    return {key,
            [key, get, parse](RunConfig& c, const json& v) {
                if (!v.is_string())
                    throw spec_error(std::string(key) + ": expected a string");
                try {
                    get(c) = parse(v.get<std::string>());
                } catch (const spec_error& e) {
                    throw spec_error(std::string(key) + ": " + e.what());
                }
            },
            [get, print](const RunConfig& c) { return json(print(get(c))); },
            [](const std::string& t) { return text_as_string(t); }};
}

inline ConfigField strategies_field()
{
    const char* key = "strategies";
    return {key,
            [key](RunConfig& c, const json& v) {
                if (!v.is_array())
                    throw spec_error(std::string(key) + ": expected an array of strategy names");
                std::vector<Strategy> out;
                for (const auto& s : v) {
                    if (!s.is_string())
                        throw spec_error(std::string(key) + ": expected strategy names");
                    try {
                        out.push_back(strategy_from_string(s.get<std::string>()));
                    } catch (const spec_error& e) {
                        throw spec_error(std::string(key) + ": " + e.what());
                    }
                }
                c.strategies = std::move(out);
            },
            [](const RunConfig& c) {
                json a = json::array();
                for (Strategy s : c.strategies)
                    a.push_back(to_string(s));
                return a;
            },
            [](const std::string& t) {
                if (!t.empty() && t.front() == '[')
                    return json::parse(t);
                json a = json::array();
                std::stringstream ss(t);
                for (std::string item; std::getline(ss, item, ',');)
                    if (!item.empty())
                        a.push_back(item);
                return a;
            }};
}

inline const std::vector<ConfigField>& config_fields()
{
    static const std::vector<ConfigField> fields = {
        int_field("classes", [](auto& c) -> auto& { return c.stream.total_classes; }),
        int_field("tasks", [](auto& c) -> auto& { return c.stream.num_tasks; }),
        real_field("gamma", [](auto& c) -> auto& { return c.stream.gamma; }),
        named_field(
            "order", [](auto& c) -> auto& { return c.stream.order; }, task_order_from_string,
            [](TaskOrder o) { return to_string(o); }),
        int_field("samples_per_class", [](auto& c) -> auto& { return c.stream.samples_per_class; }),
        seed_field("stream_seed", [](auto& c) -> auto& { return c.stream.seed; }),
        int_field("input_dim", [](auto& c) -> auto& { return c.stream.input_dim; }),
        real_field("mean_radius", [](auto& c) -> auto& { return c.stream.mean_radius; }),
        real_field("noise_sigma", [](auto& c) -> auto& { return c.stream.noise_sigma; }),
        real_field("train_fraction", [](auto& c) -> auto& { return c.stream.train_fraction; }),

        seed_field("train_seed", [](auto& c) -> auto& { return c.train.seed; }),
        real_field("lr", [](auto& c) -> auto& { return c.train.lr; }),
        bool_field("cosine_lr", [](auto& c) -> auto& { return c.train.cosine_lr; }),
        int_field("E0", [](auto& c) -> auto& { return c.train.epochs_ref; }),
        int_field("E_min", [](auto& c) -> auto& { return c.train.epochs_min; }),
        int_field("E_max", [](auto& c) -> auto& { return c.train.epochs_max; }),
        real_field("beta", [](auto& c) -> auto& { return c.train.beta; }),
        real_field("lambda_min", [](auto& c) -> auto& { return c.train.lambda_min; }),
        real_field("lambda_max", [](auto& c) -> auto& { return c.train.lambda_max; }),
        real_field("k_decay", [](auto& c) -> auto& { return c.train.k_decay; }),
        real_field("tau", [](auto& c) -> auto& { return c.train.tau_margin; }),
        int_field("batch_size", [](auto& c) -> auto& { return c.train.batch_size; }),
        int_field("bottleneck", [](auto& c) -> auto& { return c.train.bottleneck; }),
        int_field("feature_dim", [](auto& c) -> auto& { return c.train.feature_dim; }),

        real_field("quantile_q", [](auto& c) -> auto& { return c.merge.quantile_q; }),
        real_field("kappa", [](auto& c) -> auto& { return c.merge.sharpness_kappa; }),
        real_field("delta", [](auto& c) -> auto& { return c.merge.delta; }),
        real_field("rank_eps", [](auto& c) -> auto& { return c.merge.rank_eps; }),
        named_field(
            "info_proxy", [](auto& c) -> auto& { return c.merge.info_proxy; }, info_proxy_from_string,
            [](InfoProxy p) { return to_string(p); }),

        strategies_field(),
        named_field(
            "out_dir", [](auto& c) -> auto& { return c.out_dir; }, [](const std::string& s) { return s; },
            [](const std::string& s) { return s; }),
        bool_field("omit_timings", [](auto& c) -> auto& { return c.omit_timings; }),
    };
    return fields;
}

inline const ConfigField& config_field(const std::string& key)
{
    for (const auto& f : config_fields())
        if (key == f.key)
            return f;
    throw spec_error("unknown config key '" + key + "'");
}

} // namespace detail

/// Every key, in canonical order, with its effective value.
inline json config_to_json(const RunConfig& cfg)
{
    json j = json::object();
    for (const auto& f : detail::config_fields())
        j[f.key] = f.get(cfg);
    return j;
}

/// Applies the keys present in a flat JSON object on top of `cfg`. Unknown keys are rejected.
inline void apply_config(RunConfig& cfg, const json& doc)
{
    if (!doc.is_object())
        throw spec_error("config: expected a flat JSON object");
    for (const auto& [key, value] : doc.items())
        detail::config_field(key).set(cfg, value);
}

/// Applies one `key=value` override.
inline void apply_override(RunConfig& cfg, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw spec_error("override '" + assignment + "': expected key=value");
    const std::string key = assignment.substr(0, eq);
    const auto& field = detail::config_field(key);
    field.set(cfg, field.from_text(assignment.substr(eq + 1)));
}

inline RunConfig parse_config(const std::string& text)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw spec_error(std::string("config: malformed JSON: ") + e.what());
    }
    RunConfig cfg;
    apply_config(cfg, doc);
    return cfg;
}

// ---------------------------------------------------------------------------
// Run reports

namespace detail {

inline json nullable(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline json nullable(const std::optional<double>& x) { return x ? nullable(*x) : json(nullptr); }

inline double real_or_nan(const json& v)
{
    if (v.is_null())
        return std::numeric_limits<double>::quiet_NaN();
    if (!v.is_number())
        throw spec_error("report: expected a number or null");
    return v.get<double>();
}

inline const json& require_key(const json& j, const char* key)
{
    if (!j.is_object() || !j.contains(key))
        throw spec_error(std::string("report: missing field '") + key + "'");
    return j.at(key);
}

} // namespace detail

inline json metrics_to_json(const RunReport& r)
{
    const MetricSummary m = summarize(r);
    json j = json::object();
    j["A_T"] = m.last;
    j["A_bar"] = m.average;
    j["wA_bar"] = m.weighted_average;
    j["F"] = detail::nullable(m.forgetting);
    return j;
}

/// `config` is echoed verbatim. Timings are omitted when `with_timings` is false,
/// which makes the document a pure function of its inputs.
inline json report_to_json(const RunReport& r, const json& config, bool with_timings = true)
{
    json j = json::object();
    j["schema_version"] = schema_version;
    j["strategy"] = r.strategy;
    j["stream_seed"] = r.stream_seed;
    j["train_seed"] = r.train_seed;
    j["config"] = config;
    j["class_counts"] = r.class_counts;
    json acc = json::array();
    for (const auto& row : r.acc) {
        json jr = json::array();
        for (double a : row)
            jr.push_back(detail::nullable(a));
        acc.push_back(std::move(jr));
    }
    j["acc"] = std::move(acc);
    j["step_acc"] = r.step_acc;
    j["metrics"] = metrics_to_json(r);
    j["wA_bar_convention"] = weighted_accuracy_convention;
    j["svd_calls"] = r.svd_calls;
    j["eval_samples"] = r.eval_samples;
    j["eval_adapter_forwards"] = r.eval_adapter_forwards;
    if (with_timings)
        j["timings"] = json{{"wall_ms", r.wall_ms}, {"merge_ms", r.merge_ms}};
    return j;
}

inline RunReport report_from_json(const json& j)
{
    using detail::require_key;
    try {
        if (require_key(j, "schema_version").get<int>() != schema_version)
            throw spec_error("report: unsupported schema_version");
        RunReport r;
        r.strategy = require_key(j, "strategy").get<std::string>();
        r.stream_seed = require_key(j, "stream_seed").get<std::uint64_t>();
        r.train_seed = require_key(j, "train_seed").get<std::uint64_t>();
        r.class_counts = require_key(j, "class_counts").get<std::vector<std::size_t>>();
        for (const auto& row : require_key(j, "acc")) {
            std::vector<double> out;
            for (const auto& a : row)
                out.push_back(detail::real_or_nan(a));
            r.acc.push_back(std::move(out));
        }
        r.step_acc = require_key(j, "step_acc").get<std::vector<double>>();
        r.svd_calls = j.value("svd_calls", std::uint64_t{0});
        r.eval_samples = j.value("eval_samples", std::uint64_t{0});
        r.eval_adapter_forwards = j.value("eval_adapter_forwards", std::uint64_t{0});
        if (j.contains("timings")) {
            r.wall_ms = j["timings"].value("wall_ms", 0.0);
            r.merge_ms = j["timings"].value("merge_ms", 0.0);
        }
        if (r.step_acc.empty() || r.acc.size() != r.step_acc.size() || r.class_counts.size() != r.step_acc.size())
            throw spec_error("report: acc, step_acc and class_counts disagree on the number of tasks");
        for (const auto& row : r.acc)
            if (row.size() != r.acc.size())
                throw spec_error("report: acc is not square");
        return r;
    } catch (const json::exception& e) {
        throw spec_error(std::string("report: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Stream manifests

inline json stream_spec_to_json(const StreamSpec& s)
{
    json j = json::object();
    j["classes"] = s.total_classes;
    j["tasks"] = s.num_tasks;
    j["gamma"] = s.gamma;
    j["order"] = to_string(s.order);
    j["samples_per_class"] = s.samples_per_class;
    j["seed"] = s.seed;
    j["input_dim"] = s.input_dim;
    j["mean_radius"] = s.mean_radius;
    j["noise_sigma"] = s.noise_sigma;
    j["train_fraction"] = s.train_fraction;
    return j;
}

inline json manifest_to_json(const StreamSpec& spec, const std::vector<TaskMeta>& tasks)
{
    json j = json::object();
    j["schema_version"] = schema_version;
    j["spec"] = stream_spec_to_json(spec);
    json jt = json::array();
    for (const auto& m : tasks) {
        json t = json::object();
        t["task_id"] = m.task_id;
        t["class_ids"] = m.class_ids;
        t["class_count"] = m.class_count();
        t["sample_count"] = m.sample_count;
        jt.push_back(std::move(t));
    }
    j["tasks"] = std::move(jt);
    return j;
}

inline json manifest_to_json(const StreamSpec& spec) { return manifest_to_json(spec, plan_tasks(spec)); }

// ---------------------------------------------------------------------------
// Files

inline std::string read_text_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::ios_base::failure("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::ios_base::failure("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out)
        throw std::ios_base::failure("write to '" + path.string() + "' failed");
}

inline json read_json_file(const std::filesystem::path& path)
{
    const std::string text = read_text_file(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw spec_error("'" + path.string() + "': malformed JSON: " + e.what());
    }
}

} // namespace onea

#endif // ONEA_REPORT_HPP
