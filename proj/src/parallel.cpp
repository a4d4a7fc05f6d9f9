#include "partcom/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace partcom {
namespace {

std::size_t detect_workers() {
    if (const char* env = std::getenv("PARTCOM_THREADS")) {
        long v = std::atol(env);
        if (v >= 1) return static_cast<std::size_t>(v);
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

// Minimal persistent pool. Tasks are (begin, end) range chunks of one
// parallel_for call; the caller blocks until all chunks finish.
class Pool {
public:
    explicit Pool(std::size_t workers) {
        for (std::size_t i = 0; i + 1 < workers; ++i) {
            threads_.emplace_back([this] { worker_loop(); });
        }
    }

    ~Pool() {
        {
            std::lock_guard<std::mutex> lk(mu_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& t : threads_) t.join();
    }

    void run(std::size_t n, std::size_t grain,
             const std::function<void(std::size_t, std::size_t)>& fn) {
        std::size_t chunks = threads_.size() + 1;
        std::size_t chunk = (n + chunks - 1) / chunks;
        if (chunk < grain) chunk = grain;

        std::vector<std::pair<std::size_t, std::size_t>> ranges;
        for (std::size_t b = 0; b < n; b += chunk) {
            ranges.emplace_back(b, std::min(n, b + chunk));
        }
        if (ranges.size() == 1) {
            fn(0, n);
            return;
        }

        std::atomic<std::size_t> next{1};
        std::atomic<std::size_t> done{0};
        {
            std::lock_guard<std::mutex> lk(mu_);
            job_fn_ = &fn;
            job_ranges_ = &ranges;
            job_next_ = &next;
            job_done_ = &done;
            generation_++;
        }
        cv_.notify_all();

        fn(ranges[0].first, ranges[0].second);  // caller takes the first chunk
        done.fetch_add(1);
        while (done.load() < ranges.size()) std::this_thread::yield();
        {
            std::lock_guard<std::mutex> lk(mu_);
            job_fn_ = nullptr;
        }
    }

private:
    void worker_loop() {
        std::uint64_t seen = 0;
        while (true) {
            const std::function<void(std::size_t, std::size_t)>* fn = nullptr;
            std::vector<std::pair<std::size_t, std::size_t>>* ranges = nullptr;
            std::atomic<std::size_t>* next = nullptr;
            std::atomic<std::size_t>* done = nullptr;
            {
                std::unique_lock<std::mutex> lk(mu_);
                cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
                if (stop_) return;
                seen = generation_;
                fn = job_fn_;
                ranges = job_ranges_;
                next = job_next_;
                done = job_done_;
            }
            if (!fn) continue;
            while (true) {
                std::size_t idx = next->fetch_add(1);
                if (idx >= ranges->size()) break;
                (*fn)((*ranges)[idx].first, (*ranges)[idx].second);
                done->fetch_add(1);
            }
        }
    }

    std::mutex mu_;
    std::condition_variable cv_;
    bool stop_ = false;
    std::uint64_t generation_ = 0;
    const std::function<void(std::size_t, std::size_t)>* job_fn_ = nullptr;
    std::vector<std::pair<std::size_t, std::size_t>>* job_ranges_ = nullptr;
    std::atomic<std::size_t>* job_next_ = nullptr;
    std::atomic<std::size_t>* job_done_ = nullptr;
    std::vector<std::thread> threads_;
};

Pool& pool() {
    static Pool p(detect_workers());
    return p;
}

}  // namespace

std::size_t worker_count() {
    static std::size_t n = detect_workers();
    return n;
}

void parallel_for(std::size_t n, std::size_t grain,
                  const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    if (worker_count() == 1 || n <= grain) {
        fn(0, n);
        return;
    }
    pool().run(n, grain, fn);
}

}  // namespace partcom
