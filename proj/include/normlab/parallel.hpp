#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <type_traits>
#include <vector>

namespace normlab {

/// Evaluates fn(i) for i in [0, count) on up to `workers` threads and returns
/// the results indexed by i. Results never depend on the worker count as
/// long as fn(i) is a pure function of i; callers reduce them in index order.
template <typename Fn>
auto parallel_map(std::size_t count, std::size_t workers, Fn&& fn) -> std::vector<std::invoke_result_t<Fn&, std::size_t>>
{
    using Result = std::invoke_result_t<Fn&, std::size_t>;
    std::vector<Result> results(count);
    workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(count, 1));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) {
            results[i] = fn(i);
        }
        return results;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
            try {
                results[i] = fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
                next.store(count);
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) {
        pool.emplace_back(work);
    }
    work();
    for (auto& t : pool) {
        t.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
    return results;
}

inline std::size_t default_workers()
{
    return std::max(1u, std::thread::hardware_concurrency());
}

} // namespace normlab
