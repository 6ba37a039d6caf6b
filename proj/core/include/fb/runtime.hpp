#pragma once

namespace fb {

/// Keeps large temporaries on the heap instead of fresh mmap pages. Training
/// allocates and frees multi-megabyte activations every step; with glibc's
/// defaults each one page-faults anew. Safe to call more than once; no-op off glibc.
void tune_allocator();

}  // namespace fb
