#pragma once

namespace toolmeta {

/// Keeps freed activation buffers in the heap instead of returning them to
/// the OS. Batch-128 activations sit just above glibc's default mmap
/// threshold, which otherwise costs a page-fault storm per forward pass.
/// No-op outside glibc. Call once at program start.
void tune_allocator();

}  // namespace toolmeta
