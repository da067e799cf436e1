#pragma once

#include <atomic>
#include <cassert>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <new>
#include <stdexcept>

namespace hyperfill {

/// Append-only chunked storage with stable element addresses.
///
/// Indices are handed out by an atomic counter and chunks are created lazily,
/// so concurrent `allocate` calls never relocate existing elements. Element
/// visibility across threads is the caller's business: publish an index
/// through some release store after writing the element.
template <class T>
class ConcurrentArena {
 public:
  explicit ConcurrentArena(std::size_t chunk_shift = 16, std::size_t max_chunks = 1u << 14)
      : chunk_shift_(chunk_shift),
        chunk_size_(std::size_t{1} << chunk_shift),
        max_chunks_(max_chunks),
        chunks_(new std::atomic<T*>[max_chunks]) {
    for (std::size_t i = 0; i < max_chunks_; ++i) chunks_[i].store(nullptr, std::memory_order_relaxed);
  }

  ConcurrentArena(const ConcurrentArena&) = delete;
  ConcurrentArena& operator=(const ConcurrentArena&) = delete;

  ~ConcurrentArena() {
    for (std::size_t i = 0; i < max_chunks_; ++i) delete[] chunks_[i].load(std::memory_order_relaxed);
  }

  /// Reserves `n` contiguous elements that never straddle a chunk boundary.
  std::size_t allocate(std::size_t n = 1) {
    if (n == 0 || n > chunk_size_) throw std::invalid_argument("arena block larger than a chunk");
    std::size_t cur = next_.load(std::memory_order_relaxed);
    std::size_t start = 0;
    do {
      start = cur;
      const std::size_t offset = start & (chunk_size_ - 1);
      if (offset + n > chunk_size_) start += chunk_size_ - offset;
    } while (!next_.compare_exchange_weak(cur, start + n, std::memory_order_relaxed));
    if (((start + n - 1) >> chunk_shift_) >= max_chunks_) throw std::length_error("arena capacity exhausted");
    ensure_chunk(start >> chunk_shift_);
    return start;
  }

  /// Returns the element at `i`, creating its chunk if needed.
  T& slot(std::size_t i) {
    const std::size_t c = i >> chunk_shift_;
    if (c >= max_chunks_) throw std::length_error("arena index out of range");
    return ensure_chunk(c)[i & (chunk_size_ - 1)];
  }

  T& operator[](std::size_t i) noexcept {
    T* chunk = chunks_[i >> chunk_shift_].load(std::memory_order_acquire);
    assert(chunk != nullptr);
    return chunk[i & (chunk_size_ - 1)];
  }
  const T& operator[](std::size_t i) const noexcept {
    const T* chunk = chunks_[i >> chunk_shift_].load(std::memory_order_acquire);
    assert(chunk != nullptr);
    return chunk[i & (chunk_size_ - 1)];
  }

  /// High-water mark of handed-out indices (including padding skipped at chunk ends).
  std::size_t extent() const noexcept { return next_.load(std::memory_order_acquire); }

 private:
  T* ensure_chunk(std::size_t c) {
    T* chunk = chunks_[c].load(std::memory_order_acquire);
    if (chunk != nullptr) return chunk;
    T* fresh = new T[chunk_size_]();
    if (chunks_[c].compare_exchange_strong(chunk, fresh, std::memory_order_acq_rel, std::memory_order_acquire)) {
      return fresh;
    }
    delete[] fresh;
    return chunk;
  }

  std::size_t chunk_shift_;
  std::size_t chunk_size_;
  std::size_t max_chunks_;
  std::unique_ptr<std::atomic<T*>[]> chunks_;
  std::atomic<std::size_t> next_{0};
};

}  // namespace hyperfill
