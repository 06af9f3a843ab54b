// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace xici {

/// Sets the OpenMP worker count for subsequent kernels; n < 1 keeps the runtime default.
void set_thread_count(int n);
int thread_count();

} // namespace xici
