#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <mutex>
#include <random>
#include <string>
#include <string_view>

namespace arr {

// 64-bit FNV-1a. Used for content-addressed ids, template pinning and seed
// derivation; stable across platforms, unlike std::hash.
constexpr uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string to_hex(uint64_t v);

uint64_t splitmix64(uint64_t x);

// Collapses (seed, id, purpose, ...) tuples into one engine seed.
uint64_t mix_seed(std::initializer_list<uint64_t> parts);

// Deterministic random source. mt19937_64 output is pinned by the standard
// and all derived draws below avoid implementation-defined distributions,
// so identical seeds give identical streams everywhere.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // [0, 1), 53-bit resolution
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // standard normal via Box-Muller with a cached spare
  double normal();

  // uniform index in [0, n)
  std::size_t below(std::size_t n);

  bool bernoulli(double p) { return uniform01() < p; }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Fixed-decimal formatting for the plain-text report tables.
std::string format_fixed(double value, int decimals);

// Runs body(0..n-1) on up to `concurrency` threads. Callers store results by
// index, so scheduling order never changes outcomes. The first exception is
// rethrown after all workers drain.
void parallel_for(std::size_t n, int concurrency, const std::function<void(std::size_t)>& body);

// Counting admission gate bounding concurrent in-flight backend requests.
class AdmissionGate {
 public:
  explicit AdmissionGate(int limit);

  class Ticket {
   public:
    explicit Ticket(AdmissionGate* gate) : gate_(gate) {}
    ~Ticket();
    Ticket(Ticket&& other) noexcept : gate_(other.gate_) { other.gate_ = nullptr; }
    Ticket(const Ticket&) = delete;
    Ticket& operator=(const Ticket&) = delete;
    Ticket& operator=(Ticket&&) = delete;

   private:
    AdmissionGate* gate_;
  };

  Ticket acquire();
  int in_flight() const;

 private:
  void release();

  mutable std::mutex mutex_;
  std::condition_variable cv_;
  int limit_;
  int active_ = 0;
};

}  // namespace arr
