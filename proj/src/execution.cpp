#include "wcmdp/execution.hpp"

#include <omp.h>

namespace wcmdp {

void set_thread_count(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

}  // namespace wcmdp
