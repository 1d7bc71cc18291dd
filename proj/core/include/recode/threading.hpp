#pragma once

#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace recode {

// Effective worker count: `requested` (0 = hardware), capped by the
// RECODE_THREADS environment variable when set.
inline int resolve_threads(int requested) {
    int n = requested > 0 ? requested
                          : static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
    if (const char* env = std::getenv("RECODE_THREADS")) {
        const int cap = std::atoi(env);
        if (cap >= 1 && cap < n) n = cap;
    }
    return n;
}

// Runs fn(0..n_chunks-1). Worker w takes chunks w, w+T, w+2T, ...; results
// keyed by chunk index are therefore identical for every thread count.
inline void parallel_chunks(std::size_t n_chunks, int threads,
                            const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || n_chunks <= 1) {
        for (std::size_t c = 0; c < n_chunks; ++c) fn(c);
        return;
    }
    const std::size_t nt = std::min<std::size_t>(static_cast<std::size_t>(threads), n_chunks);
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> workers;
    workers.reserve(nt);
    for (std::size_t w = 0; w < nt; ++w) {
        workers.emplace_back([&, w] {
            try {
                for (std::size_t c = w; c < n_chunks; c += nt) fn(c);
            } catch (...) {
                const std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (std::thread& t : workers) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace recode
