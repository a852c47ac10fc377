#ifndef ONEA_STREAM_HPP
#define ONEA_STREAM_HPP

//
// Step-imbalanced class-incremental task streams.
//
// Class ratios r_k = γ^{k/(C−1)} are normalised into a cumulative mass curve
// over the C classes. The curve is cut into T buckets of equal mass; the
// (fractional) number of classes under each bucket, rounded by largest
// remainder, gives the task sizes from head to tail. Per-class sample counts
// stay fixed; only the number of classes per task varies.
//

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "onea/adapter.hpp"
#include "onea/errors.hpp"
#include "onea/matrix.hpp"
#include "onea/random.hpp"

namespace onea {

enum class TaskOrder {
    PermutedHeadTail,
    Descending,
    Balanced,
};

inline std::string to_string(TaskOrder o)
{
    switch (o) {
    case TaskOrder::PermutedHeadTail:
        return "permuted";
    case TaskOrder::Descending:
        return "descending";
    case TaskOrder::Balanced:
        return "balanced";
    }
    return "?";
}

inline TaskOrder task_order_from_string(const std::string& s)
{
    if (s == "permuted")
        return TaskOrder::PermutedHeadTail;
    if (s == "descending")
        return TaskOrder::Descending;
    if (s == "balanced")
        return TaskOrder::Balanced;
    throw spec_error("unknown order '" + s + "' (expected permuted, descending or balanced)");
}

struct StreamSpec {
    int total_classes = 20;
    int num_tasks = 5;
    double gamma = 0.01;
    TaskOrder order = TaskOrder::PermutedHeadTail;
    int samples_per_class = 50;
    std::uint64_t seed = 0;

    // Synthetic data geometry.
    int input_dim = 32;
    double mean_radius = 4.0;
    double noise_sigma = 1.0;
    double train_fraction = 0.8;

    void validate() const
    {
        if (total_classes < 2)
            throw spec_error("classes: need at least 2, got " + std::to_string(total_classes));
        if (num_tasks < 1 || num_tasks > total_classes)
            throw spec_error("tasks: must lie in [1, classes], got " + std::to_string(num_tasks));
        if (!(gamma > 0.0 && gamma <= 1.0))
            throw spec_error("gamma: must lie in (0, 1]");
        if (samples_per_class < 1)
            throw spec_error("samples_per_class: must be >= 1");
        if (input_dim < 1)
            throw spec_error("input_dim: must be >= 1");
        if (!(mean_radius > 0.0) || !(noise_sigma >= 0.0))
            throw spec_error("mean_radius must be > 0 and noise_sigma >= 0");
        if (!(train_fraction > 0.0 && train_fraction < 1.0))
            throw spec_error("train_fraction: must lie in (0, 1)");
        if (order == TaskOrder::Balanced && total_classes % num_tasks != 0)
            throw spec_error("tasks: balanced order needs tasks to divide classes");
    }
};

/// Rows of `x` are samples; labels are global class ids.
struct LabeledSet {
    Matrix x;
    std::vector<int> labels;

    std::size_t size() const noexcept { return labels.size(); }
};

struct Task {
    TaskMeta meta;
    LabeledSet train;
    LabeledSet test;
};

struct TaskStream {
    StreamSpec spec;
    std::vector<Task> tasks;
};

/// r_k = γ^{k/(C−1)}, k = 0..C−1.
inline std::vector<double> class_ratios(int classes, double gamma)
{
    if (classes < 2)
        throw spec_error("class_ratios: need at least 2 classes");
    if (!(gamma > 0.0 && gamma <= 1.0))
        throw spec_error("class_ratios: gamma must lie in (0, 1]");
    std::vector<double> r(static_cast<std::size_t>(classes));
    for (int k = 0; k < classes; ++k)
        r[static_cast<std::size_t>(k)] = std::pow(gamma, static_cast<double>(k) / (classes - 1));
    return r;
}

/// Fractional class counts of T equal-mass buckets over the cumulative ratio curve, in bucket order.
inline std::vector<double> bucket_class_mass(const std::vector<double>& ratios, int tasks)
{
    const double total = std::accumulate(ratios.begin(), ratios.end(), 0.0);
    std::vector<double> cum(ratios.size() + 1, 0.0);
    for (std::size_t k = 0; k < ratios.size(); ++k)
        cum[k + 1] = cum[k] + ratios[k] / total;
    cum.back() = 1.0;

    // Inverse of the piecewise-linear cumulative mass: class position holding mass m.
    auto position = [&](double m) {
        if (m <= 0.0)
            return 0.0;
        if (m >= 1.0)
            return static_cast<double>(ratios.size());
        const auto it = std::upper_bound(cum.begin(), cum.end(), m);
        const auto k = static_cast<std::size_t>(it - cum.begin()) - 1;
        return static_cast<double>(k) + (m - cum[k]) / (cum[k + 1] - cum[k]);
    };

    std::vector<double> out(static_cast<std::size_t>(tasks));
    for (int t = 0; t < tasks; ++t)
        out[static_cast<std::size_t>(t)] = position(double(t + 1) / tasks) - position(double(t) / tasks);
    return out;
}

/// Rounds non-negative reals summing to `total` into integers summing to
/// `total`: floors first, then one extra unit to the largest remainders
/// (lower index wins ties).
inline std::vector<int> largest_remainder(const std::vector<double>& x, int total)
{
    std::vector<int> n(x.size());
    std::vector<double> rem(x.size());
    int assigned = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        n[i] = static_cast<int>(std::floor(x[i]));
        rem[i] = x[i] - n[i];
        assigned += n[i];
    }
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
    for (std::size_t k = 0; assigned < total; k = (k + 1) % idx.size(), ++assigned)
        ++n[idx[k]];
    return n;
}

/// Head-to-tail class counts (non-increasing), summing to C, each ≥ 1.
inline std::vector<int> allocate_tasks(const StreamSpec& spec)
{
    spec.validate();
    const int C = spec.total_classes;
    const int T = spec.num_tasks;
    if (spec.order == TaskOrder::Balanced)
        return std::vector<int>(static_cast<std::size_t>(T), C / T);

    std::vector<double> mass = bucket_class_mass(class_ratios(C, spec.gamma), T);
    std::sort(mass.begin(), mass.end(), std::greater<>());
    std::vector<int> counts = largest_remainder(mass, C);

    for (auto& c : counts) {
        if (c >= 1)
            continue;
        auto donor = std::max_element(counts.begin(), counts.end());
        --*donor;
        ++c;
    }
    std::sort(counts.begin(), counts.end(), std::greater<>());
    return counts;
}

namespace detail {

enum : std::uint64_t {
    seed_purpose_task_order = 1,
    seed_purpose_class_order = 2,
    seed_purpose_class_mean = 3,
    seed_purpose_class_samples = 4,
};

inline std::vector<double> class_mean(const StreamSpec& spec, int class_id)
{
    Rng rng(derive_seed(spec.seed, seed_purpose_class_mean, static_cast<std::uint64_t>(class_id)));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> mu(static_cast<std::size_t>(spec.input_dim));
    double nrm = 0.0;
    do {
        for (auto& v : mu)
            v = normal(rng);
        nrm = norm2(mu);
    } while (nrm == 0.0);
    for (auto& v : mu)
        v *= spec.mean_radius / nrm;
    return mu;
}

} // namespace detail

/// Samples of one class, drawn from a seed that depends only on (stream seed, class id).
inline Matrix class_samples(const StreamSpec& spec, int class_id)
{
    const auto mu = detail::class_mean(spec, class_id);
    Rng rng(derive_seed(spec.seed, detail::seed_purpose_class_samples, static_cast<std::uint64_t>(class_id)));
    std::normal_distribution<double> normal(0.0, spec.noise_sigma);
    Matrix x(static_cast<std::size_t>(spec.samples_per_class), mu.size());
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j)
            x(i, j) = mu[j] + normal(rng);
    return x;
}

inline std::size_t train_samples_per_class(const StreamSpec& spec)
{
    const auto n = static_cast<std::size_t>(spec.samples_per_class);
    if (n == 1)
        return 1;
    const auto k = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n)));
    return std::clamp<std::size_t>(k, 1, n - 1);
}

/// Train/test sets for the given classes. Rows are grouped by class, in the order given.
inline std::pair<LabeledSet, LabeledSet> make_datasets(const StreamSpec& spec, const std::set<int>& class_ids)
{
    const std::size_t n_train = train_samples_per_class(spec);
    const std::size_t n_test = static_cast<std::size_t>(spec.samples_per_class) - n_train;
    const auto d = static_cast<std::size_t>(spec.input_dim);
    LabeledSet train{Matrix(class_ids.size() * n_train, d), {}};
    LabeledSet test{n_test ? Matrix(class_ids.size() * n_test, d) : Matrix(), {}};
    std::size_t tr = 0, te = 0;
    for (int c : class_ids) {
        const Matrix x = class_samples(spec, c);
        for (std::size_t i = 0; i < x.rows(); ++i) {
            auto& dst = i < n_train ? train : test;
            auto& row = i < n_train ? tr : te;
            std::copy(x.row(i).begin(), x.row(i).end(), dst.x.row(row).begin());
            dst.labels.push_back(c);
            ++row;
        }
    }
    return {std::move(train), std::move(test)};
}

/// Task layout (ids, classes, train sample counts) without materialising data.
inline std::vector<TaskMeta> plan_tasks(const StreamSpec& spec)
{
    std::vector<int> counts = allocate_tasks(spec);
    if (spec.order == TaskOrder::PermutedHeadTail) {
        Rng rng(derive_seed(spec.seed, detail::seed_purpose_task_order));
        shuffle(std::span<int>(counts), rng);
    }

    std::vector<int> classes(static_cast<std::size_t>(spec.total_classes));
    std::iota(classes.begin(), classes.end(), 0);
    Rng rng(derive_seed(spec.seed, detail::seed_purpose_class_order));
    shuffle(std::span<int>(classes), rng);

    std::vector<TaskMeta> metas;
    std::size_t next = 0;
    for (std::size_t t = 0; t < counts.size(); ++t) {
        TaskMeta meta;
        meta.task_id = static_cast<std::int64_t>(t + 1);
        for (int k = 0; k < counts[t]; ++k)
            meta.class_ids.insert(classes[next++]);
        meta.sample_count = meta.class_ids.size() * train_samples_per_class(spec);
        metas.push_back(std::move(meta));
    }
    return metas;
}

/// Deterministic in `spec` (including its seed).
inline TaskStream build_stream(const StreamSpec& spec)
{
    TaskStream stream{spec, {}};
    for (TaskMeta& meta : plan_tasks(spec)) {
        Task task;
        auto [train, test] = make_datasets(spec, meta.class_ids);
        task.meta = std::move(meta);
        task.train = std::move(train);
        task.test = std::move(test);
        stream.tasks.push_back(std::move(task));
    }
    return stream;
}

} // namespace onea

#endif // ONEA_STREAM_HPP
