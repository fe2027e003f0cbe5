#pragma once

// Shared plumbing: error taxonomy, deterministic RNG, bounded thread helper.

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace ideflow {

/// Input file or string could not be parsed (malformed JSON, bad rational, ...).
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// Input parsed but violates a documented invariant (names the offending element).
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// A "cannot happen" self-check failed; indicates a bug, never bad user input.
struct InternalError : std::logic_error {
    explicit InternalError(const std::string& what) : std::logic_error(what) {}
};

/// Caller-supplied parameter outside the supported range.
struct ParamError : std::invalid_argument {
    explicit ParamError(const std::string& what) : std::invalid_argument(what) {}
};

// ---------------------------------------------------------------------------
// Deterministic RNG. std::uniform_int_distribution is implementation-defined,
// so seeded sequences here go through our own rejection sampler to make
// "same seed => same instance" hold across standard libraries.
// ---------------------------------------------------------------------------
class DetRng {
  public:
    explicit DetRng(std::uint64_t seed) : state_(seed) {}

    /// splitmix64 step: solid 64-bit mixing, trivially portable.
    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform value in [0, n) via rejection (n > 0).
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw ParamError("DetRng::below: n must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = next();
        while (v >= limit) v = next();
        return v % n;
    }

    /// Uniform pick from a non-empty vector.
    template <typename T>
    const T& pick(const std::vector<T>& xs) {
        if (xs.empty()) throw ParamError("DetRng::pick: empty choice set");
        return xs[static_cast<std::size_t>(below(xs.size()))];
    }

  private:
    std::uint64_t state_;
};

// ---------------------------------------------------------------------------
// Worker cap: IDE_FLOW_THREADS bounds every parallel loop in the library.
// ---------------------------------------------------------------------------
inline unsigned worker_limit() {
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    if (hw > 8) hw = 8;
    if (const char* env = std::getenv("IDE_FLOW_THREADS")) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end != env && v >= 1) hw = static_cast<unsigned>(v > 64 ? 64 : v);
    }
    return hw;
}

/// Runs fn(i) for i in [0, n); splits across at most worker_limit() threads.
/// Results must be written into pre-sized slots so the order of completion
/// cannot influence output (byte-determinism requirement).
inline void parallel_for_index(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const unsigned workers = worker_limit();
    if (n == 0) return;
    if (workers <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> cursor{0};
    std::vector<std::thread> pool;
    const unsigned spawn = static_cast<unsigned>(std::min<std::size_t>(workers, n));
    std::vector<std::exception_ptr> errors(spawn);
    for (unsigned w = 0; w < spawn; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (;;) {
                    const std::size_t i = cursor.fetch_add(1);
                    if (i >= n) break;
                    fn(i);
                }
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace ideflow
