#pragma once

// Shared vocabulary for the sso library: error types, DOF layout constants,
// thread control and a deterministic parallel_for.

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace sso {

using Vec3 = Eigen::Vector3d;
using VectorXd = Eigen::VectorXd;
using Index = std::ptrdiff_t;

/// Six generalized DOF per node, ordered (UX, UY, UZ, RX, RY, RZ).
inline constexpr int kDofPerNode = 6;

enum class Component : int { UX = 0, UY = 1, UZ = 2, RX = 3, RY = 4, RZ = 5 };

inline const char* component_name(int c) {
  static constexpr std::array<const char*, 6> names{"UX", "UY", "UZ", "RX", "RY", "RZ"};
  return (c >= 0 && c < 6) ? names[static_cast<std::size_t>(c)] : "?";
}

// ---------------------------------------------------------------------------
// Errors. Every failure the library reports derives from sso::Error so that
// the CLI can map categories onto exit codes.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid model construction or malformed input data.
class ModelError : public Error {
 public:
  using Error::Error;
};

/// Input-file problems; carries a JSON pointer to the offending field.
class InputError : public Error {
 public:
  InputError(std::string pointer, const std::string& what)
      : Error(pointer.empty() ? what : pointer + ": " + what), pointer_(std::move(pointer)) {}
  const std::string& pointer() const noexcept { return pointer_; }

 private:
  std::string pointer_;
};

/// Numerical failure (singular system, non-finite values, degenerate element).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Singular augmented matrix. `index` is the row/column of the failed pivot in
/// the augmented system; node/component are set when it falls in the first
/// dof rows and a DOF map was available.
class SingularMatrixError : public NumericalError {
 public:
  SingularMatrixError(const std::string& what, Index index, int node = -1, int component = -1)
      : NumericalError(what), index_(index), node_(node), component_(component) {}
  Index index() const noexcept { return index_; }
  int node() const noexcept { return node_; }
  int component() const noexcept { return component_; }

 private:
  Index index_;
  int node_;
  int component_;
};

/// Element-level failure (zero length, degenerate quad), tagged with the id.
class ElementError : public NumericalError {
 public:
  ElementError(int element_id, const std::string& what)
      : NumericalError("element " + std::to_string(element_id) + ": " + what), id_(element_id) {}
  int element_id() const noexcept { return id_; }

 private:
  int id_;
};

// ---------------------------------------------------------------------------
// Threading
// ---------------------------------------------------------------------------

namespace detail {
inline std::atomic<int>& thread_setting() {
  static std::atomic<int> n{0};
  return n;
}
}  // namespace detail

/// Sets the worker count used by parallel kernels. 0 means "use SSO_THREADS,
/// otherwise hardware concurrency".
inline void set_threads(int n) { detail::thread_setting() = std::max(0, n); }

inline int threads() {
  int n = detail::thread_setting();
  if (n > 0) return n;
  if (const char* env = std::getenv("SSO_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, n). Work is split into contiguous static chunks so
/// that any per-index output slot is written by exactly one worker; callers
/// that write into pre-sized slots get results independent of thread count.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads()), n);
  if (workers <= 1 || n < 16) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace sso
