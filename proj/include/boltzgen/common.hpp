#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <thread>
#include <vector>

namespace boltzgen {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct ParticleShape {
    int n_particles = 0;
    int space_dim = 0;
    int dim() const { return n_particles * space_dim; }
};

inline std::atomic<int>& thread_cap() {
    static std::atomic<int> cap{0};  // 0 = hardware_concurrency
    return cap;
}

inline void set_thread_cap(int n) { thread_cap().store(n); }

inline int worker_count() {
    int cap = thread_cap().load();
    if (cap > 0) return cap;
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

// Runs fn(i) for i in [0, n). Work items must be independent; any shared
// output slot is written by exactly one index, so results do not depend on
// how indices are distributed over threads.
inline void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn) {
    if (n <= 0) return;
    int workers = worker_count();
    if (workers <= 1 || n == 1) {
        for (std::int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::int64_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    auto run = [&] {
        while (true) {
            std::int64_t i = next.fetch_add(1);
            if (i >= n || failed.load()) return;
            try {
                fn(i);
            } catch (...) {
                if (!failed.exchange(true)) error = std::current_exception();
                return;
            }
        }
    };
    int spawn = static_cast<int>(std::min<std::int64_t>(workers, n));
    pool.reserve(spawn - 1);
    for (int w = 1; w < spawn; ++w) pool.emplace_back(run);
    run();
    for (auto& th : pool) th.join();
    if (failed.load() && error) std::rethrow_exception(error);
}

// Rescales v in place so its Euclidean norm does not exceed max_norm.
inline void clip_to_norm(Eigen::Ref<Vec> v, double max_norm) {
    double n = v.norm();
    if (n > max_norm && n > 0.0) v *= max_norm / n;
}

inline void clip_columns_to_norm(Mat& m, double max_norm) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        double n = m.col(j).norm();
        if (n > max_norm && n > 0.0) m.col(j) *= max_norm / n;
    }
}

}  // namespace boltzgen
