#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "pdmpsim/errors.hpp"

namespace pdmpsim {

// Runs fn(0..count-1) on a pool of std::threads. Results land in index order,
// so any later reduction is independent of the worker count. The first
// failing replicate (lowest index) is rethrown with its index prefixed.
template <class Result, class Fn>
std::vector<Result> run_replicates(std::size_t count, unsigned workers, Fn&& fn,
                                   const std::function<std::string(std::size_t)>& describe = nullptr) {
    std::vector<Result> out(count);
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    auto worker = [&]() {
        for (;;) {
            std::size_t r = next.fetch_add(1);
            if (r >= count || failed.load()) return;
            try {
                out[r] = fn(r);
            } catch (...) {
                errors[r] = std::current_exception();
                failed = true;
            }
        }
    };
    if (workers == 0) workers = 1;
    if (workers == 1 || count <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers && w < count; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (std::size_t r = 0; r < count; ++r) {
        if (!errors[r]) continue;
        std::string what = "unknown error";
        try {
            std::rethrow_exception(errors[r]);
        } catch (const std::exception& e) {
            what = e.what();
        } catch (...) {
        }
        throw Error("replicate " + std::to_string(r) + (describe ? " (" + describe(r) + ")" : std::string()) +
                    " failed: " + what);
    }
    return out;
}

}  // namespace pdmpsim
