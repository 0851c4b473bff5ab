#include "sitsgraph/error.hpp"
#include "sitsgraph/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace sitsgraph {

std::string_view errc_name(Errc code) noexcept {
    switch (code) {
        case Errc::MissingFile: return "MissingFile";
        case Errc::ShapeMismatch: return "ShapeMismatch";
        case Errc::NonMonotonicTimestamps: return "NonMonotonicTimestamps";
        case Errc::UnknownBand: return "UnknownBand";
        case Errc::InvalidSpec: return "InvalidSpec";
        case Errc::EmptyImage: return "EmptyImage";
        case Errc::InvalidSegmentCount: return "InvalidSegmentCount";
        case Errc::DimMismatch: return "DimMismatch";
        case Errc::TooFewNodes: return "TooFewNodes";
        case Errc::InvalidLag: return "InvalidLag";
        case Errc::UnknownNode: return "UnknownNode";
        case Errc::AllIgnored: return "AllIgnored";
        case Errc::ConfigMismatch: return "ConfigMismatch";
        case Errc::NoLabels: return "NoLabels";
        case Errc::LengthMismatch: return "LengthMismatch";
        case Errc::MeshMismatch: return "MeshMismatch";
        case Errc::SiteLeakage: return "SiteLeakage";
        case Errc::NoData: return "NoData";
        case Errc::EmptyMatrix: return "EmptyMatrix";
        case Errc::InvalidArgument: return "InvalidArgument";
        case Errc::ParseError: return "ParseError";
    }
    return "Unknown";
}

namespace {
std::atomic<unsigned> g_thread_limit{0};

unsigned default_threads() {
    if (const char* env = std::getenv("SITSGRAPH_THREADS")) {
        try {
            int v = std::stoi(env);
            if (v > 0) return static_cast<unsigned>(v);
        } catch (...) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}
}  // namespace

void set_thread_limit(unsigned n) noexcept { g_thread_limit = n; }

unsigned thread_limit() noexcept {
    unsigned n = g_thread_limit.load();
    return n == 0 ? default_threads() : n;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min<std::size_t>(thread_limit(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace sitsgraph
