#ifndef ONEA_COUNTERS_HPP
#define ONEA_COUNTERS_HPP

#include <cstdint>

namespace onea {

/// Per-thread operation counters. Strategies run on one thread each, so a
/// before/after snapshot on that thread attributes calls to a single run.
struct OpCounters {
    std::uint64_t svd_calls = 0;
    std::uint64_t adapter_forward_rows = 0;
};

inline OpCounters& counters() noexcept
{
    thread_local OpCounters c;
    return c;
}

inline void reset_counters() noexcept { counters() = {}; }

} // namespace onea

#endif // ONEA_COUNTERS_HPP
