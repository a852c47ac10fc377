#ifndef ONEA_ADAPTER_HPP
#define ONEA_ADAPTER_HPP

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "onea/counters.hpp"
#include "onea/errors.hpp"
#include "onea/matrix.hpp"

namespace onea {

/// What a module has absorbed: for a freshly trained module one task, for a
/// merged module the union of its constituents.
struct TaskMeta {
    std::int64_t task_id = 1;
    std::set<int> class_ids;
    std::uint64_t sample_count = 0;

    std::size_t class_count() const noexcept { return class_ids.size(); }

    friend bool operator==(const TaskMeta&, const TaskMeta&) = default;
};

/// Union of class ids, summed sample counts; task id of the later task.
inline TaskMeta merge_meta(const TaskMeta& a, const TaskMeta& b)
{
    TaskMeta m;
    m.task_id = std::max(a.task_id, b.task_id);
    m.class_ids = a.class_ids;
    m.class_ids.insert(b.class_ids.begin(), b.class_ids.end());
    m.sample_count = a.sample_count + b.sample_count;
    return m;
}

/// Ordered adapter parameter matrices. For bottleneck adapters the layers come
/// in (down, up) pairs: layer 2l is d×b, layer 2l+1 is b×d.
struct AdapterModule {
    std::vector<Matrix> layers;
    std::size_t bottleneck = 0;
    TaskMeta meta;

    std::size_t layer_count() const noexcept { return layers.size(); }
    std::size_t pair_count() const noexcept { return layers.size() / 2; }

    const Matrix& down(std::size_t pair) const { return layers.at(2 * pair); }
    const Matrix& up(std::size_t pair) const { return layers.at(2 * pair + 1); }

    friend bool operator==(const AdapterModule&, const AdapterModule&) = default;
};

/// Throws unless the layers form (d×b, b×d) pairs with b == bottleneck.
inline void validate_bottleneck_pairs(const AdapterModule& m)
{
    if (m.layers.empty() || m.layers.size() % 2 != 0)
        throw dimension_error("adapter needs a non-empty, even number of layers, got " +
                              std::to_string(m.layers.size()));
    for (std::size_t p = 0; p < m.pair_count(); ++p) {
        const auto& d = m.down(p);
        const auto& u = m.up(p);
        if (d.cols() != m.bottleneck || u.rows() != m.bottleneck || d.rows() != u.cols())
            throw dimension_error("adapter pair " + std::to_string(p) + " has shapes " + d.shape() + ", " +
                                  u.shape() + " for bottleneck " + std::to_string(m.bottleneck));
    }
}

/// Same layer count and identical per-layer shapes.
inline bool mergeable(const AdapterModule& a, const AdapterModule& b) noexcept
{
    if (a.layers.size() != b.layers.size())
        return false;
    for (std::size_t l = 0; l < a.layers.size(); ++l)
        if (!a.layers[l].same_shape(b.layers[l]))
            return false;
    return true;
}

inline void require_mergeable(const AdapterModule& a, const AdapterModule& b)
{
    if (!mergeable(a, b))
        throw dimension_error("adapter modules are not mergeable: layer counts or shapes differ");
}

/// z = h + ReLU(h·W_down)·W_up, one row per sample.
inline Matrix adapter_forward(const Matrix& h, const Matrix& w_down, const Matrix& w_up)
{
    if (h.cols() != w_down.rows() || w_down.cols() != w_up.rows() || w_up.cols() != h.cols())
        throw dimension_error("adapter_forward: h " + h.shape() + ", W_down " + w_down.shape() + ", W_up " +
                              w_up.shape());
    if (!h.all_finite() || !w_down.all_finite() || !w_up.all_finite())
        throw numeric_error("adapter_forward: non-finite input");
    Matrix z = h;
    z += matmul(relu(matmul(h, w_down)), w_up);
    return z;
}

/// Runs every (down, up) pair in order. Counts one adapter forward per row.
inline Matrix adapter_forward(const Matrix& h, const AdapterModule& m)
{
    counters().adapter_forward_rows += h.rows();
    Matrix z = h;
    for (std::size_t p = 0; p < m.pair_count(); ++p)
        z = adapter_forward(z, m.down(p), m.up(p));
    return z;
}

} // namespace onea

#endif // ONEA_ADAPTER_HPP
