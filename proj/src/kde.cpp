#include "isoconquer/kde.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "isoconquer/stats.hpp"

namespace isoconquer {

double Kernel::operator()(double u) const noexcept {
  if (!(std::abs(u) <= 1.0)) return 0.0;
  const double s = 1.0 - u * u;
  switch (kind) {
    case KernelKind::biweight:
      return 15.0 / 16.0 * s * s;
    case KernelKind::epanechnikov:
      return 0.75 * s;
  }
  return 0.0;
}

double Kernel::roughness() const noexcept {
  switch (kind) {
    case KernelKind::biweight:
      return 5.0 / 7.0;
    case KernelKind::epanechnikov:
      return 3.0 / 5.0;
  }
  return 0.0;
}

std::string_view Kernel::name() const noexcept {
  return kind == KernelKind::biweight ? "biweight" : "epanechnikov";
}

Kernel kernel_from_name(std::string_view name) {
  if (name == "biweight") return {KernelKind::biweight};
  if (name == "epanechnikov") return {KernelKind::epanechnikov};
  throw std::invalid_argument("unknown kernel '" + std::string(name) + "' (biweight | epanechnikov)");
}

double kde_at_point(std::span<const double> sample, double t0, double h, const Kernel& kernel) {
  if (!(h > 0.0)) throw std::invalid_argument("kde_at_point: bandwidth must be positive");
  if (sample.empty()) throw std::invalid_argument("kde_at_point: empty sample");
  KahanSum sum;
  for (double x : sample) sum.add(kernel((t0 - x) / h));
  return sum.value() / (static_cast<double>(sample.size()) * h);
}

double policy_bandwidth(BandwidthPolicy policy, std::size_t block_size, std::size_t blocks) {
  const std::size_t size = policy == BandwidthPolicy::fixed_subsample ? block_size : block_size * blocks;
  if (size == 0) throw std::invalid_argument("policy_bandwidth: empty sample");
  return 1.0 / std::cbrt(static_cast<double>(size));
}

double pooled_kde(std::span<const std::vector<double>> blocks, double t0, BandwidthPolicy policy,
                  const Kernel& kernel) {
  if (blocks.empty()) throw std::invalid_argument("pooled_kde: no blocks");
  const std::size_t n = blocks.front().size();
  for (const auto& b : blocks) {
    if (b.empty()) throw std::invalid_argument("pooled_kde: empty block");
    if (b.size() != n) throw std::invalid_argument("pooled_kde: blocks must share one size");
  }
  const double h = policy_bandwidth(policy, n, blocks.size());
  KahanSum sum;
  for (const auto& b : blocks) sum.add(kde_at_point(b, t0, h, kernel));
  return sum.value() / static_cast<double>(blocks.size());
}

}  // namespace isoconquer
