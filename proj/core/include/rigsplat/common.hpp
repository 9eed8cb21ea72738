#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace rigsplat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

// Error taxonomy. Every failure the library reports derives from Error.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Input arrays whose sizes disagree with each other or with a model.
struct SizeError : Error {
    using Error::Error;
};

/// Triangles with (near) zero area and similar unusable geometry.
struct DegenerateGeometryError : Error {
    using Error::Error;
};

/// Bookkeeping that does not match the data it describes (stale aux, misaligned stats).
struct ConsistencyError : Error {
    using Error::Error;
};

/// Unreadable or malformed files.
struct LoadError : Error {
    using Error::Error;
};

struct NumericError : Error {
    using Error::Error;
};

inline void require_size(std::size_t actual, std::size_t expected, const char *what) {
    if (actual != expected) {
        throw SizeError(std::string(what) + ": expected size " + std::to_string(expected) +
                        ", got " + std::to_string(actual));
    }
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Work items are
/// claimed dynamically, so fn must only write to item-owned storage.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn &&fn) {
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(threads, 1)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    auto body = [&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
            fn(i);
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) {
        pool.emplace_back(body);
    }
    body();
}

} // namespace rigsplat
