#pragma once

#include <exception>
#include <mutex>

namespace wcmdp {

/// Selects between the OpenMP kernel and its serial reference. Both paths
/// perform identical floating-point operations in identical order, so their
/// outputs are bitwise equal; only wall-clock time differs.
enum class Exec { Serial, Parallel };

inline bool is_parallel(Exec exec) { return exec == Exec::Parallel; }

/// Caps the OpenMP worker count (0 leaves the runtime default).
void set_thread_count(int threads);

/// Exceptions must not leave an OpenMP region; loop bodies run through
/// capture() and the first exception is rethrown after the loop.
class ExceptionSink {
 public:
  template <class F>
  void capture(F&& body) {
    try {
      body();
    } catch (...) {
      std::lock_guard<std::mutex> lock(mutex_);
      if (!first_) first_ = std::current_exception();
    }
  }
  void rethrow() {
    if (first_) std::rethrow_exception(first_);
  }

 private:
  std::mutex mutex_;
  std::exception_ptr first_;
};

}  // namespace wcmdp
