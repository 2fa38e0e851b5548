#pragma once

#include <span>
#include <string_view>
#include <vector>

namespace isoconquer {

enum class KernelKind { biweight, epanechnikov };

/// Symmetric kernel supported on [-1, 1].
struct Kernel {
  KernelKind kind = KernelKind::biweight;

  double operator()(double u) const noexcept;
  /// R(K) = integral of K^2, in closed form.
  double roughness() const noexcept;
  std::string_view name() const noexcept;
};

Kernel kernel_from_name(std::string_view name);

/// (1 / (n h)) * sum_i K((t0 - X_i) / h).
double kde_at_point(std::span<const double> sample, double t0, double h, const Kernel& kernel = {});

enum class BandwidthPolicy {
  fixed_subsample,  // h = n^(-1/3) with n the block size
  undersmoothed,    // h = N^(-1/3) with N the total size
};

double policy_bandwidth(BandwidthPolicy policy, std::size_t block_size, std::size_t blocks);

/// Average of the per-block estimates at t0 using the policy's bandwidth.
/// All blocks must share one size.
double pooled_kde(std::span<const std::vector<double>> blocks, double t0, BandwidthPolicy policy,
                  const Kernel& kernel = {});

}  // namespace isoconquer
