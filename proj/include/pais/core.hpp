#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <system_error>
#include <thread>
#include <vector>

namespace pais {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Error hierarchy. Everything thrown by the library derives from Error.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParameterError : Error {
  using Error::Error;
};
struct IntegrationError : Error {
  using Error::Error;
};
struct ProposalError : Error {
  using Error::Error;
};
struct DiagnosticError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct IterationError : Error {
  IterationError(std::size_t iteration, const std::string& what)
      : Error("iteration " + std::to_string(iteration) + ": " + what), iteration(iteration) {}
  std::size_t iteration;
};

using Point = std::vector<double>;

/// Row-major set of `size()` points in R^dim.
class PointSet {
 public:
  PointSet() = default;
  PointSet(std::size_t count, std::size_t dim) : dim_(dim), data_(count * dim, 0.0) {}

  static PointSet from_rows(const std::vector<Point>& rows) {
    if (rows.empty()) return {};
    PointSet out(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != out.dim_) throw ParameterError("PointSet: ragged rows");
      std::copy(rows[i].begin(), rows[i].end(), out[i].begin());
    }
    return out;
  }

  std::size_t size() const noexcept { return dim_ == 0 ? 0 : data_.size() / dim_; }
  std::size_t dim() const noexcept { return dim_; }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> operator[](std::size_t i) noexcept { return {data_.data() + i * dim_, dim_}; }
  std::span<const double> operator[](std::size_t i) const noexcept {
    return {data_.data() + i * dim_, dim_};
  }

  Point row(std::size_t i) const { return Point((*this)[i].begin(), (*this)[i].end()); }

  void push_back(std::span<const double> p) {
    if (dim_ == 0) dim_ = p.size();
    if (p.size() != dim_) throw ParameterError("PointSet: dimension mismatch");
    data_.insert(data_.end(), p.begin(), p.end());
  }

  /// Rows [begin, end) as a new set.
  PointSet slice(std::size_t begin, std::size_t end) const {
    PointSet out;
    out.dim_ = dim_;
    out.data_.assign(data_.begin() + static_cast<std::ptrdiff_t>(begin * dim_),
                     data_.begin() + static_cast<std::ptrdiff_t>(end * dim_));
    return out;
  }

  void reserve(std::size_t count) { data_.reserve(count * dim_); }

  std::span<const double> flat() const noexcept { return data_; }
  std::span<double> flat() noexcept { return data_; }

  friend bool operator==(const PointSet&, const PointSet&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

/// log(sum(exp(v))) with a max shift; -inf when every entry is -inf.
inline double log_sum_exp(std::span<const double> v) noexcept {
  double m = kNegInf;
  for (double x : v) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  if (m == kInf) return kInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

/// Self-normalize log weights. Throws DiagnosticError when no weight is finite.
inline std::vector<double> normalize_log_weights(std::span<const double> log_w) {
  double m = kNegInf;
  for (double x : log_w) {
    if (std::isnan(x) || x == kInf) throw DiagnosticError("log weight is NaN or +inf");
    m = std::max(m, x);
  }
  if (m == kNegInf) throw DiagnosticError("all weights are zero");
  std::vector<double> w(log_w.size());
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::exp(log_w[i] - m);
    s += w[i];
  }
  for (double& x : w) x /= s;
  return w;
}

// ---------------------------------------------------------------------------
// Counter-addressed random streams.
//
// A stream is keyed by (seed, purpose, a, b), typically (seed, tag, iteration,
// member), so that the draws of one ensemble member in one iteration do not
// depend on scheduling. The generator is xoshiro256** seeded through splitmix64.

namespace stream_tag {
inline constexpr std::uint64_t init = 1;
inline constexpr std::uint64_t propose = 2;
inline constexpr std::uint64_t resample = 3;
inline constexpr std::uint64_t accept = 4;
inline constexpr std::uint64_t data = 5;
inline constexpr std::uint64_t bench = 6;
}  // namespace stream_tag

inline std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t seed, std::uint64_t purpose = 0, std::uint64_t a = 0,
                        std::uint64_t b = 0) noexcept {
    std::uint64_t key = seed;
    std::uint64_t h = splitmix64(key);
    for (std::uint64_t part : {purpose, a, b}) {
      key = h ^ (part + 0x632BE59BD9B4E019ULL);
      h = splitmix64(key);
    }
    std::uint64_t sm = h;
    for (auto& s : state_) s = splitmix64(sm);
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t state_[4]{};
};

// ---------------------------------------------------------------------------

/// Runs f(i) for i in [0, n) on up to `threads` workers. Each index is handled
/// by exactly one worker; callers write results into per-index slots.
template <class F>
void parallel_for(std::size_t n, std::size_t threads, F&& f) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  const std::size_t workers = std::min(threads, n);
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += workers) f(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Shortest decimal representation that round-trips.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc{}) throw Error("format_double failed");
  return std::string(buf, ptr);
}

/// n points evenly spaced on a log scale in [lo, hi] (inclusive).
inline std::vector<double> log_space(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0) || !(hi >= lo) || n == 0) throw ParameterError("log_space: need 0 < lo <= hi, n >= 1");
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

}  // namespace pais
