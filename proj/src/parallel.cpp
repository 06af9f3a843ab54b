// SPDX-License-Identifier: Apache-2.0
#include "xici/parallel.hpp"

#include <omp.h>

namespace xici {

void set_thread_count(int n) {
    if (n >= 1) omp_set_num_threads(n);
}

int thread_count() { return omp_get_max_threads(); }

} // namespace xici
