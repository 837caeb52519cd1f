#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "towerlab/errors.hpp"

namespace towerlab {

/// Worker count: explicit request, else TOWERLAB_THREADS, else hardware concurrency.
inline unsigned resolve_threads(unsigned requested = 0)
{
    if (requested > 0)
        return requested;
    if (const char* env = std::getenv("TOWERLAB_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0)
            return static_cast<unsigned>(v);
        throw ParameterError(std::string("TOWERLAB_THREADS must be a positive integer, got '") +
                             env + "'");
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Run body(worker, begin, end) over contiguous chunks of [0, count). The
/// partition depends on the worker count, so bodies must write per-index
/// results or reduce order-insensitively. The first exception is rethrown.
template <class Body>
void parallel_chunks(std::uint64_t count, unsigned threads, Body&& body)
{
    threads = static_cast<unsigned>(std::min<std::uint64_t>(std::max(1u, threads),
                                                            std::max<std::uint64_t>(count, 1)));
    if (threads == 1) {
        body(0u, std::uint64_t{0}, count);
        return;
    }
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned w = 0; w < threads; ++w) {
        const std::uint64_t begin = count * w / threads;
        const std::uint64_t end = count * (w + 1) / threads;
        pool.emplace_back([&, w, begin, end] {
            try {
                body(w, begin, end);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool)
        t.join();
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

/// Per-index map: out[i] = fn(i).
template <class T, class Fn>
std::vector<T> parallel_map(std::uint64_t count, unsigned threads, Fn&& fn)
{
    std::vector<T> out(count);
    parallel_chunks(count, threads, [&](unsigned, std::uint64_t b, std::uint64_t e) {
        for (std::uint64_t i = b; i < e; ++i)
            out[i] = fn(i);
    });
    return out;
}

} // namespace towerlab
