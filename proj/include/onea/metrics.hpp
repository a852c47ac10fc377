#ifndef ONEA_METRICS_HPP
#define ONEA_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "onea/errors.hpp"

namespace onea {

/// Accuracy record of one continual-learning run.
struct RunReport {
    std::string strategy;
    std::uint64_t stream_seed = 0;
    std::uint64_t train_seed = 0;

    /// acc[j][k]: accuracy on task j's test classes after training through task k.
    /// Entries with k < j are NaN.
    std::vector<std::vector<double>> acc;
    /// Accuracy over all classes seen after each step.
    std::vector<double> step_acc;
    /// Classes introduced by each task, in arrival order.
    std::vector<std::size_t> class_counts;

    std::uint64_t svd_calls = 0;
    std::uint64_t eval_samples = 0;
    std::uint64_t eval_adapter_forwards = 0;
    double merge_ms = 0.0;
    double wall_ms = 0.0;

    std::size_t num_tasks() const noexcept { return step_acc.size(); }
};

/// Empty T×T table with NaN everywhere.
inline std::vector<std::vector<double>> empty_accuracy_table(std::size_t tasks)
{
    return std::vector<std::vector<double>>(tasks,
                                            std::vector<double>(tasks, std::numeric_limits<double>::quiet_NaN()));
}

/// A_T
inline double last_accuracy(const RunReport& r)
{
    if (r.step_acc.empty())
        throw spec_error("last_accuracy: empty report");
    return r.step_acc.back();
}

/// Ā = (1/T) Σ_t A_t
inline double average_accuracy(const RunReport& r)
{
    if (r.step_acc.empty())
        throw spec_error("average_accuracy: empty report");
    double s = 0.0;
    for (double a : r.step_acc)
        s += a;
    return s / static_cast<double>(r.step_acc.size());
}

/// F = mean over j < T of max(0, max_{k∈[j,T−1)} A_{j,k} − A_{j,T}).
/// Not applicable (nullopt) for a single task.
inline std::optional<double> forgetting(const RunReport& r)
{
    const std::size_t T = r.acc.size();
    if (T < 2)
        return std::nullopt;
    double total = 0.0;
    for (std::size_t j = 0; j + 1 < T; ++j) {
        if (r.acc[j].size() != T)
            throw spec_error("forgetting: accuracy table is not T x T");
        double peak = -std::numeric_limits<double>::infinity();
        for (std::size_t k = j; k + 1 < T; ++k)
            peak = std::max(peak, r.acc[j][k]);
        total += std::max(0.0, peak - r.acc[j][T - 1]);
    }
    return total / static_cast<double>(T - 1);
}

inline constexpr const char* weighted_accuracy_convention =
    "step t weighted by |Y_1:t| / sum_s |Y_1:s| (cumulative seen-class count)";

/// Step accuracies weighted by the cumulative number of seen classes.
inline double weighted_average_accuracy(const std::vector<double>& step_acc,
                                        const std::vector<std::size_t>& class_counts)
{
    if (step_acc.empty())
        throw spec_error("weighted_average_accuracy: empty report");
    if (step_acc.size() != class_counts.size())
        throw spec_error("weighted_average_accuracy: " + std::to_string(step_acc.size()) + " steps but " +
                         std::to_string(class_counts.size()) + " class counts");
    double seen = 0.0, num = 0.0, den = 0.0;
    for (std::size_t t = 0; t < step_acc.size(); ++t) {
        seen += static_cast<double>(class_counts[t]);
        num += seen * step_acc[t];
        den += seen;
    }
    if (!(den > 0.0))
        throw spec_error("weighted_average_accuracy: no classes");
    return num / den;
}

inline double weighted_average_accuracy(const RunReport& r)
{
    return weighted_average_accuracy(r.step_acc, r.class_counts);
}

struct MetricSummary {
    double last = 0.0;
    double average = 0.0;
    double weighted_average = 0.0;
    std::optional<double> forgetting;
};

inline MetricSummary summarize(const RunReport& r)
{
    return {last_accuracy(r), average_accuracy(r), weighted_average_accuracy(r), forgetting(r)};
}

} // namespace onea

#endif // ONEA_METRICS_HPP
