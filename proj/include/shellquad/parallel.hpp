#pragma once

// Deterministic partitioned sampling. The budget is cut into fixed-size
// partitions, independent of the worker count; partition p draws from the
// stream (seed, tag, p) and its partial sums are merged in partition order.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <thread>
#include <vector>

#include "shellquad/config.hpp"
#include "shellquad/rng.hpp"

namespace shellquad {

// Running first and second moments of K complex channels.
template <std::size_t K>
struct Moments {
  std::size_t count = 0;
  std::array<std::complex<double>, K> sum{};
  std::array<double, K> sumsq_re{};
  std::array<double, K> sumsq_im{};

  void add(const std::array<std::complex<double>, K>& x) {
    ++count;
    for (std::size_t c = 0; c < K; ++c) {
      sum[c] += x[c];
      sumsq_re[c] += x[c].real() * x[c].real();
      sumsq_im[c] += x[c].imag() * x[c].imag();
    }
  }

  void merge(const Moments& other) {
    count += other.count;
    for (std::size_t c = 0; c < K; ++c) {
      sum[c] += other.sum[c];
      sumsq_re[c] += other.sumsq_re[c];
      sumsq_im[c] += other.sumsq_im[c];
    }
  }

  std::complex<double> mean(std::size_t c) const {
    return count == 0 ? std::complex<double>{} : sum[c] / static_cast<double>(count);
  }

  // Standard error of the mean, |.| of the complex error.
  double stderr_of_mean(std::size_t c) const {
    if (count < 2) return 0.0;
    const double n = static_cast<double>(count);
    const auto m = mean(c);
    const double var_re = std::max(0.0, (sumsq_re[c] / n - m.real() * m.real()) * n / (n - 1.0));
    const double var_im = std::max(0.0, (sumsq_im[c] / n - m.imag() * m.imag()) * n / (n - 1.0));
    return std::sqrt((var_re + var_im) / n);
  }
};

inline int resolve_threads(int requested, std::size_t partitions) {
  int threads = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(threads, 1);
  return static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(threads), std::max<std::size_t>(partitions, 1)));
}

// Runs body(partition_index, stream, samples_in_partition) -> Result for each
// partition and folds the results with merge(acc, partial) in index order.
template <class Result, class Body, class Merge>
Result run_partitions(std::size_t budget, std::uint64_t seed, std::uint32_t tag, int threads, Body body,
                      Merge merge, Result init = Result{}) {
  const std::size_t size = defaults::kPartitionSize;
  const std::size_t partitions = (budget + size - 1) / size;
  std::vector<Result> partial(partitions);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t p = next.fetch_add(1); p < partitions; p = next.fetch_add(1)) {
      RandomStream stream(seed, tag, static_cast<std::uint32_t>(p));
      const std::size_t count = std::min(size, budget - p * size);
      partial[p] = body(p, stream, count);
    }
  };

  const int workers = resolve_threads(threads, partitions);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  Result acc = std::move(init);
  for (auto& r : partial) merge(acc, r);
  return acc;
}

// Monte Carlo mean of sample(stream) -> array<complex, K> over the budget.
template <std::size_t K, class Sample>
Moments<K> sample_moments(std::size_t budget, std::uint64_t seed, std::uint32_t tag, int threads, Sample sample) {
  return run_partitions<Moments<K>>(
      budget, seed, tag, threads,
      [&](std::size_t, RandomStream& stream, std::size_t count) {
        Moments<K> m;
        for (std::size_t i = 0; i < count; ++i) m.add(sample(stream));
        return m;
      },
      [](Moments<K>& acc, const Moments<K>& part) { acc.merge(part); });
}

}  // namespace shellquad
