#include "isoconquer/limit_dist.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <stdexcept>
#include <string>

#include "isoconquer/parallel.hpp"
#include "isoconquer/stats.hpp"

namespace isoconquer {

namespace {

struct PathArgmin {
  double location = 0.0;
  bool boundary = false;
};

// values[k] holds W(s) + s^2 at s = (k - K) * step for k = 0..2K, sampled
// every `stride` entries
PathArgmin argmin_on_grid(const std::vector<double>& values, std::size_t stride, double step) {
  const std::size_t last = values.size() - 1;
  const std::size_t centre = last / 2;
  std::size_t best = 0;
  for (std::size_t k = stride; k <= last; k += stride) {
    if (values[k] < values[best]) best = k;
  }
  const double grid_step = step * static_cast<double>(stride);
  double location = (static_cast<double>(best) - static_cast<double>(centre)) * step;
  if (best == 0 || best == last) return {location, true};
  const double left = values[best - stride];
  const double mid = values[best];
  const double right = values[best + stride];
  const double curvature = left - 2.0 * mid + right;
  if (curvature > 0.0) location += 0.5 * grid_step * (left - right) / curvature;
  return {location, false};
}

// Fills W(s) + s^2 on a grid of `half` points per wing with spacing `step`.
void simulate_path(Stream& stream, std::size_t half, double step, std::vector<double>& values) {
  values.assign(2 * half + 1, 0.0);
  const double sd = std::sqrt(step);
  double w = 0.0;
  for (std::size_t k = 1; k <= half; ++k) {
    w += sd * stream.normal();
    const double s = static_cast<double>(k) * step;
    values[half + k] = w + s * s;
  }
  w = 0.0;
  for (std::size_t k = 1; k <= half; ++k) {
    w += sd * stream.normal();
    const double s = static_cast<double>(k) * step;
    values[half - k] = w + s * s;
  }
}

std::size_t half_width(double horizon, double step) {
  return static_cast<std::size_t>(std::llround(horizon / step));
}

std::uint32_t chernoff_domain() { return domain_tag("chernoff-path"); }

void write_u64_le(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes, 8);
}

std::uint64_t read_u64_le(std::istream& in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  if (!in) throw std::runtime_error("chernoff cache: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

}  // namespace

void ChernoffSampler::validate() const {
  if (!(horizon > 0.0) || !(step > 0.0) || !std::isfinite(horizon)) {
    throw std::invalid_argument("ChernoffSampler: horizon and step must be positive");
  }
  if (step >= horizon) throw std::invalid_argument("ChernoffSampler: step must be below the horizon");
  if (horizon / step > 5e7) throw std::invalid_argument("ChernoffSampler: grid exceeds memory budget");
}

ChernoffDraws sample_chernoff(const ChernoffSampler& sampler, std::size_t count, unsigned workers) {
  sampler.validate();
  if (count == 0) throw std::invalid_argument("sample_chernoff: count must be >= 1");
  ChernoffDraws out;
  out.values.resize(count);
  std::vector<std::uint32_t> hits(count, 0);
  parallel_for(count, workers, [&](std::size_t i) {
    thread_local std::vector<double> values;
    double horizon = sampler.horizon;
    for (std::uint32_t attempt = 0;; ++attempt) {
      Stream stream({sampler.seed, chernoff_domain(), static_cast<std::uint32_t>(i), attempt});
      simulate_path(stream, half_width(horizon, sampler.step), sampler.step, values);
      const PathArgmin am = argmin_on_grid(values, 1, sampler.step);
      if (!am.boundary) {
        out.values[i] = am.location;
        return;
      }
      ++hits[i];
      horizon *= 2.0;
    }
  });
  for (auto h : hits) out.boundary_hits += h;
  return out;
}

RefinedChernoffDraws sample_chernoff_refined(const ChernoffSampler& sampler, std::size_t count,
                                             unsigned workers) {
  sampler.validate();
  if (count == 0) throw std::invalid_argument("sample_chernoff_refined: count must be >= 1");
  RefinedChernoffDraws out;
  out.coarse.values.resize(count);
  out.fine.values.resize(count);
  std::vector<std::uint32_t> coarse_hits(count, 0), fine_hits(count, 0);
  const double fine_step = 0.5 * sampler.step;
  parallel_for(count, workers, [&](std::size_t i) {
    thread_local std::vector<double> values;
    double horizon = sampler.horizon;
    for (std::uint32_t attempt = 0;; ++attempt) {
      Stream stream({sampler.seed, domain_tag("chernoff-refined"), static_cast<std::uint32_t>(i), attempt});
      simulate_path(stream, 2 * half_width(horizon, sampler.step), fine_step, values);
      const PathArgmin coarse = argmin_on_grid(values, 2, fine_step);
      const PathArgmin fine = argmin_on_grid(values, 1, fine_step);
      coarse_hits[i] += coarse.boundary;
      fine_hits[i] += fine.boundary;
      if (!coarse.boundary && !fine.boundary) {
        out.coarse.values[i] = coarse.location;
        out.fine.values[i] = fine.location;
        return;
      }
      horizon *= 2.0;
    }
  });
  for (std::size_t i = 0; i < count; ++i) {
    out.coarse.boundary_hits += coarse_hits[i];
    out.fine.boundary_hits += fine_hits[i];
  }
  return out;
}

double kappa_forward(double v2, double mu_prime_t0, double f_t0) {
  if (mu_prime_t0 == 0.0 || !(f_t0 > 0.0)) {
    throw std::domain_error("kappa_forward: need mu'(t0) != 0 and f(t0) > 0");
  }
  return std::cbrt(std::abs(4.0 * v2 * mu_prime_t0 / f_t0));
}

double kappa_tilde_inverse(double v2, double mu_prime_t0, double f_t0) {
  if (mu_prime_t0 == 0.0 || !(f_t0 > 0.0)) {
    throw std::domain_error("kappa_tilde_inverse: need mu'(t0) != 0 and f(t0) > 0");
  }
  return std::cbrt(std::abs(4.0 * v2 / (mu_prime_t0 * mu_prime_t0 * f_t0)));
}

double sigma2_current_status(double cdf_t, double failure_density_t, double exam_density_t,
                             double var_z) {
  if (!(cdf_t > 0.0 && cdf_t < 1.0)) throw std::domain_error("sigma2_current_status: F(t) must lie in (0, 1)");
  if (!(failure_density_t > 0.0) || !(exam_density_t > 0.0)) {
    throw std::domain_error("sigma2_current_status: densities must be positive");
  }
  const double bracket = 4.0 * cdf_t * (1.0 - cdf_t) * failure_density_t / exam_density_t;
  return std::pow(bracket, 2.0 / 3.0) * var_z;
}

double sigma2_current_status_quantile(double a, double failure_density_ta, double exam_density_ta,
                                      double var_z) {
  if (!(a > 0.0 && a < 1.0)) throw std::domain_error("sigma2_current_status_quantile: a must lie in (0, 1)");
  if (!(failure_density_ta > 0.0) || !(exam_density_ta > 0.0)) {
    throw std::domain_error("sigma2_current_status_quantile: densities must be positive");
  }
  const double bracket =
      4.0 * a * (1.0 - a) / (failure_density_ta * failure_density_ta * exam_density_ta);
  return std::pow(bracket, 2.0 / 3.0) * var_z;
}

std::vector<double> mfold_distribution(std::span<const double> draws, std::size_t m, StreamKey stream_key,
                                       std::size_t resamples) {
  if (draws.size() < kMinChernoffDraws) {
    throw std::invalid_argument("mfold: need at least 10^4 Chernoff draws, got " +
                                std::to_string(draws.size()));
  }
  if (m == 0) throw std::invalid_argument("mfold: m must be >= 1");
  const Moments mo = moments(draws);
  const double sd = std::sqrt(mo.variance);
  if (!(sd > 0.0)) throw std::invalid_argument("mfold: draws have zero variance");
  // Z has mean zero; centering removes the sampling error of the mean, which
  // the sum would otherwise inflate by sqrt(m).
  std::vector<double> centred(draws.begin(), draws.end());
  for (double& x : centred) x -= mo.mean;
  std::vector<double> out;
  if (m == 1) {
    out = std::move(centred);
    for (double& x : out) x /= sd;
  } else {
    if (resamples == 0) resamples = draws.size();
    out.resize(resamples);
    Stream stream(stream_key);
    const double scale = 1.0 / (sd * std::sqrt(static_cast<double>(m)));
    for (double& x : out) {
      double sum = 0.0;
      for (std::size_t j = 0; j < m; ++j) sum += centred[stream.below(centred.size())];
      x = sum * scale;
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

double mfold_quantile(std::span<const double> draws, std::size_t m, double alpha, StreamKey stream,
                      std::size_t resamples) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::domain_error("mfold_quantile: alpha must lie in [0, 1]");
  const auto dist = mfold_distribution(draws, m, stream, resamples);
  return sorted_quantile(dist, alpha);
}

void save_chernoff_cache(const std::filesystem::path& path, std::span<const double> draws) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("chernoff cache: cannot write " + path.string());
  write_u64_le(out, draws.size());
  for (double x : draws) write_u64_le(out, std::bit_cast<std::uint64_t>(x));
  if (!out) throw std::runtime_error("chernoff cache: write failed for " + path.string());
}

std::vector<double> load_chernoff_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("chernoff cache: cannot open " + path.string());
  const std::uint64_t count = read_u64_le(in);
  const auto size = std::filesystem::file_size(path);
  if (size != 8 + 8 * count) throw std::runtime_error("chernoff cache: size does not match header");
  std::vector<double> draws(count);
  for (double& x : draws) x = std::bit_cast<double>(read_u64_le(in));
  return draws;
}

std::vector<double> cached_chernoff_draws(const ChernoffSampler& sampler, std::size_t count,
                                          unsigned workers) {
  const char* dir = std::getenv("ISOCONQUER_CACHE");
  std::filesystem::path path;
  if (dir != nullptr && *dir != '\0') {
    char name[160];
    std::snprintf(name, sizeof name, "chernoff_T%.17g_h%.17g_seed%llu_n%zu.bin", sampler.horizon,
                  sampler.step, static_cast<unsigned long long>(sampler.seed), count);
    path = std::filesystem::path(dir) / name;
    if (std::filesystem::exists(path)) return load_chernoff_cache(path);
  }
  auto draws = sample_chernoff(sampler, count, workers).values;
  if (!path.empty()) {
    std::filesystem::create_directories(path.parent_path());
    save_chernoff_cache(path, draws);
  }
  return draws;
}

}  // namespace isoconquer
