#pragma once

namespace pcmmap {

// Process-wide worker-count default. Initialized from the PCMMAP_THREADS
// environment variable, falling back to the number of logical cores.
int default_threads();
void set_default_threads(int n);

// 0 means "use the default"; anything else is clamped to >= 1.
int resolve_threads(int requested);

}  // namespace pcmmap
