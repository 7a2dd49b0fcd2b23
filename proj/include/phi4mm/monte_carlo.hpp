#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "phi4mm/error.hpp"
#include "phi4mm/provenance.hpp"
#include "phi4mm/spectra.hpp"
#include "phi4mm/summation.hpp"

namespace phi4mm {

struct McConfig {
  std::uint64_t seed = 20240611;
  std::size_t samples = 100000;
  std::size_t batches = 8;
  bool crn = true;

  void validate() const {
    if (samples < 1) throw ConfigInvalid("mc.samples must be >= 1");
    if (batches < 1) throw ConfigInvalid("mc.batches must be >= 1");
    if (batches > samples) throw ConfigInvalid("mc.batches must not exceed mc.samples");
  }

  std::size_t batch_size(std::size_t b) const { return samples / batches + (b < samples % batches ? 1 : 0); }

  McConfig with_seed(std::uint64_t s) const {
    auto c = *this;
    c.seed = s;
    return c;
  }
  McConfig with_samples(std::size_t n) const {
    auto c = *this;
    c.samples = n;
    return c;
  }
};

inline void to_json(nlohmann::json& j, const McConfig& c) {
  j = nlohmann::json{{"seed", c.seed}, {"samples", c.samples}, {"batches", c.batches}, {"crn", c.crn}};
}

inline McConfig mc_config_from_json(const nlohmann::json& j, McConfig base = {}) {
  if (!j.is_object()) throw ConfigInvalid("mc: expected an object");
  auto read = [&j](const char* key, auto& target) {
    if (!j.contains(key)) return;
    try {
      target = j.at(key).get<std::decay_t<decltype(target)>>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigInvalid(std::string("mc.") + key + ": " + e.what());
    }
  };
  read("seed", base.seed);
  read("samples", base.samples);
  read("batches", base.batches);
  read("crn", base.crn);
  base.validate();
  return base;
}

enum class ErrorKind { StandardError, Bound };

/// A numerical estimate together with its uncertainty and provenance.
struct Estimate {
  double value = 0.0;
  double error = 0.0;  // standard error for Monte Carlo, error bound for quadrature
  ErrorKind kind = ErrorKind::Bound;
  std::string method;
  std::size_t cost = 0;
  std::uint64_t config_hash = 0;

  bool stochastic() const { return kind == ErrorKind::StandardError; }
  double relative_error() const { return value == 0.0 ? error : error / std::abs(value); }
};

inline void to_json(nlohmann::json& j, const Estimate& e) {
  j = nlohmann::json{{"value", e.value},
                     {e.stochastic() ? "stderr" : "error_bound", e.error},
                     {"method", e.method},
                     {"cost", e.cost},
                     {"config_hash", e.config_hash}};
}

/// Compensated first and second moments of one batch.
struct BatchStats {
  std::size_t index = 0;
  std::size_t count = 0;
  CompensatedSum sum;
  CompensatedSum sum_sq;

  void add(double x) {
    ++count;
    sum += x;
    sum_sq += x * x;
  }
};

/// Folds batch statistics in batch-index order, so the result does not
/// depend on the order in which batches finished.
inline BatchStats merge_batches(std::vector<BatchStats> batches) {
  std::sort(batches.begin(), batches.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
  BatchStats out;
  for (const auto& b : batches) {
    out.count += b.count;
    out.sum.merge(b.sum);
    out.sum_sq.merge(b.sum_sq);
  }
  return out;
}

/// Mean and standard error of the mean.
inline std::pair<double, double> mean_and_stderr(const BatchStats& s) {
  if (s.count == 0) return {0.0, 0.0};
  const double n = static_cast<double>(s.count);
  const double mean = s.sum.value() / n;
  if (s.count == 1) return {mean, 0.0};
  const double var = std::max(0.0, (s.sum_sq.value() - n * mean * mean) / (n - 1.0));
  return {mean, std::sqrt(var / n)};
}

/// Standard normal deviates for one batch; the engine is seeded from
/// (seed, batch index) so streams are independent of scheduling.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::size_t batch) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(batch), static_cast<std::uint32_t>(batch >> 32)};
    engine_.seed(seq);
  }

  double next() { return normal_(engine_); }

  void fill(std::span<double> out) {
    for (double& x : out) x = next();
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

/// Runs `draw(stream)` once per sample, batch by batch. Each batch works on
/// its own copy of `draw`, so mutable scratch state inside it is safe.
/// Batches are spread over `workers` threads; the merged result is
/// identical for any worker count.
template <class Draw>
BatchStats mc_accumulate(const McConfig& config, const Draw& prototype, unsigned workers = 1) {
  config.validate();
  std::vector<BatchStats> stats(config.batches);
  auto run_batch = [&](std::size_t b) {
    NormalStream stream(config.seed, b);
    Draw draw = prototype;
    BatchStats s;
    s.index = b;
    const std::size_t m = config.batch_size(b);
    for (std::size_t k = 0; k < m; ++k) s.add(draw(stream));
    stats[b] = std::move(s);
  };
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(config.batches)));
  if (workers == 1) {
    for (std::size_t b = 0; b < config.batches; ++b) run_batch(b);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t b = w; b < config.batches; b += workers) run_batch(b);
      });
    for (auto& t : pool) t.join();
  }
  return merge_batches(std::move(stats));
}

template <class Draw>
Estimate mc_estimate(const McConfig& config, const Draw& draw, std::string method, unsigned workers = 1) {
  const auto merged = mc_accumulate(config, draw, workers);
  const auto [mean, se] = mean_and_stderr(merged);
  Estimate e;
  e.value = mean;
  e.error = se;
  e.kind = ErrorKind::StandardError;
  e.method = std::move(method);
  e.cost = merged.count;
  e.config_hash = config_hash(nlohmann::json(config));
  return e;
}

/// Product Gaussian proposal over the N^2 real coordinates of a Hermitian
/// matrix: diagonal first, then (Re, Im) of each upper entry in row-major order.
class HermitianGaussianProposal {
 public:
  /// Every coordinate with the same width.
  HermitianGaussianProposal(std::size_t n, double sigma)
      : n_(n), diag_sigma_(n, sigma), off_sigma_(HermitianPoint::offdiag_count(n), sigma) {
    if (n < 1) throw DomainError("proposal: n must be >= 1");
    if (!(sigma > 0.0)) throw DomainError("proposal: sigma must be > 0");
  }

  /// Widths of the free action N Tr(E Phi^2) at this spectrum.
  static HermitianGaussianProposal for_spectrum(const Spectrum& s) {
    const std::size_t n = s.n();
    const double nn = static_cast<double>(n);
    HermitianGaussianProposal p(n, 1.0);
    std::size_t q = 0;
    for (std::size_t k = 0; k < n; ++k) {
      p.diag_sigma_[k] = 1.0 / std::sqrt(2.0 * nn * s.energy(k));
      for (std::size_t l = k + 1; l < n; ++l) p.off_sigma_[q++] = 1.0 / std::sqrt(2.0 * nn * (s.energy(k) + s.energy(l)));
    }
    return p;
  }

  std::size_t n() const { return n_; }
  std::size_t dimension() const { return n_ * n_; }

  HermitianPoint map(std::span<const double> z) const {
    HermitianPoint pt;
    pt.diag.resize(n_);
    pt.offdiag_re.resize(off_sigma_.size());
    pt.offdiag_im.resize(off_sigma_.size());
    for (std::size_t k = 0; k < n_; ++k) pt.diag[k] = diag_sigma_[k] * z[k];
    for (std::size_t q = 0; q < off_sigma_.size(); ++q) {
      pt.offdiag_re[q] = off_sigma_[q] * z[n_ + 2 * q];
      pt.offdiag_im[q] = off_sigma_[q] * z[n_ + 2 * q + 1];
    }
    return pt;
  }

  /// log of the proposal density at map(z).
  double log_density(std::span<const double> z) const {
    double q = 0.0;
    for (double x : z) q += x * x;
    return -0.5 * q - log_normalizer();
  }

  /// log of prod(sigma) (2 pi)^{N^2/2}.
  double log_normalizer() const {
    double s = 0.5 * static_cast<double>(dimension()) * std::log(2.0 * M_PI);
    for (double x : diag_sigma_) s += std::log(x);
    for (double x : off_sigma_) s += 2.0 * std::log(x);
    return s;
  }

 private:
  std::size_t n_;
  std::vector<double> diag_sigma_;
  std::vector<double> off_sigma_;
};

struct WeightedPoint {
  HermitianPoint point;
  double log_density = 0.0;
};

/// Materialized proposal stream, mainly for inspection and tests; estimators
/// draw the same deviates through mc_accumulate without storing them.
inline std::vector<WeightedPoint> sample_hermitian_gaussian(const HermitianGaussianProposal& proposal,
                                                            const McConfig& config) {
  config.validate();
  std::vector<WeightedPoint> out;
  out.reserve(config.samples);
  std::vector<double> z(proposal.dimension());
  for (std::size_t b = 0; b < config.batches; ++b) {
    NormalStream stream(config.seed, b);
    for (std::size_t k = 0; k < config.batch_size(b); ++k) {
      stream.fill(z);
      out.push_back({proposal.map(z), proposal.log_density(z)});
    }
  }
  return out;
}

inline std::vector<WeightedPoint> sample_hermitian_gaussian(std::size_t n, const McConfig& config) {
  return sample_hermitian_gaussian(HermitianGaussianProposal(n, 1.0), config);
}

/// One Haar-distributed unitary: QR of a complex Ginibre matrix with the
/// diagonal of R rotated onto the positive reals.
inline Eigen::MatrixXcd haar_unitary(NormalStream& stream, std::size_t n) {
  const auto dim = static_cast<Eigen::Index>(n);
  Eigen::MatrixXcd g(dim, dim);
  for (Eigen::Index c = 0; c < dim; ++c)
    for (Eigen::Index r = 0; r < dim; ++r) {
      const double re = stream.next();
      const double im = stream.next();
      g(r, c) = std::complex<double>(re, im) * M_SQRT1_2;
    }
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(g);
  Eigen::MatrixXcd q = qr.householderQ() * Eigen::MatrixXcd::Identity(dim, dim);
  const Eigen::MatrixXcd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index k = 0; k < dim; ++k) {
    const std::complex<double> d = r(k, k);
    const double a = std::abs(d);
    if (a > 0.0) q.col(k) *= d / a;
  }
  return q;
}

inline std::vector<Eigen::MatrixXcd> sample_haar_unitary(std::size_t n, const McConfig& config) {
  if (n < 1) throw DomainError("sample_haar_unitary: n must be >= 1");
  config.validate();
  std::vector<Eigen::MatrixXcd> out;
  out.reserve(config.samples);
  for (std::size_t b = 0; b < config.batches; ++b) {
    NormalStream stream(config.seed, b);
    for (std::size_t k = 0; k < config.batch_size(b); ++k) out.push_back(haar_unitary(stream, n));
  }
  return out;
}

}  // namespace phi4mm
