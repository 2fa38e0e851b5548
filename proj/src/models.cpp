#include "isoconquer/models.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace isoconquer {

namespace {

constexpr std::size_t kCdfGrid = 4096;

double interpolate(const std::vector<double>& xs, const std::vector<double>& ys, double t) {
  if (t <= xs.front()) return ys.front();
  if (t >= xs.back()) return ys.back();
  const auto it = std::upper_bound(xs.begin(), xs.end(), t);
  const std::size_t hi = static_cast<std::size_t>(it - xs.begin());
  const std::size_t lo = hi - 1;
  const double w = (t - xs[lo]) / (xs[hi] - xs[lo]);
  return ys[lo] + w * (ys[hi] - ys[lo]);
}

void check_table(const std::vector<double>& xs, const std::vector<double>& ys, const char* what) {
  if (xs.size() < 2 || xs.size() != ys.size()) {
    throw std::invalid_argument(std::string(what) + ": need at least two (x, value) pairs");
  }
  if (xs.front() != 0.0 || xs.back() != 1.0) {
    throw std::invalid_argument(std::string(what) + ": table must span [0, 1]");
  }
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (!(xs[i] > xs[i - 1])) {
      throw std::invalid_argument(std::string(what) + ": abscissae must be strictly ascending");
    }
  }
}

}  // namespace

double PerturbationBump::shape(double u) noexcept {
  const double a = std::abs(u);
  if (a > 2.0) return 0.0;
  const double w = a - 1.0;
  const double s = 1.0 - w * w;
  return 0.5 * s * s;
}

double perturbed_mu(const PerturbationBump& bump, double x) noexcept {
  const double scale = std::cbrt(static_cast<double>(bump.scale_n));
  return x + PerturbationBump::shape(scale * (x - bump.x0)) / scale;
}

RegressionModel::RegressionModel(MeanFunction mean, double noise_sd, Direction direction)
    : mean_(std::move(mean)), noise_sd_(noise_sd), direction_(direction) {
  if (!(noise_sd_ >= 0.0) || !std::isfinite(noise_sd_)) {
    throw std::invalid_argument("RegressionModel: noise_sd must be finite and >= 0");
  }
  if (const auto* table = std::get_if<TabulatedMean>(&mean_)) {
    check_table(table->xs, table->values, "TabulatedMean");
  }
  if (const auto* p = std::get_if<PerturbedMean>(&mean_)) {
    if (!(p->bump.x0 > 0.0 && p->bump.x0 < 1.0)) {
      throw std::invalid_argument("RegressionModel: bump centre must lie in (0, 1)");
    }
    if (p->bump.scale_n == 0) throw std::invalid_argument("RegressionModel: bump scale n must be >= 1");
  }
  // linear and perturbed means are nondecreasing; tables are checked on a grid
  const bool increasing_family = !std::holds_alternative<TabulatedMean>(mean_);
  if (increasing_family && direction_ != Direction::nondecreasing) {
    throw std::invalid_argument("RegressionModel: mean is nondecreasing but direction says otherwise");
  }
  if (!increasing_family) {
    double previous = this->mean(0.0);
    for (int k = 1; k <= 10000; ++k) {
      const double current = this->mean(k / 10000.0);
      const bool ok = direction_ == Direction::nondecreasing ? current >= previous : current <= previous;
      if (!ok) throw std::invalid_argument("RegressionModel: mean is not monotone in the declared direction");
      previous = current;
    }
  }
}

double RegressionModel::mean(double x) const {
  return std::visit(
      [x](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LinearMean>) {
          return x;
        } else if constexpr (std::is_same_v<T, PerturbedMean>) {
          return perturbed_mu(m.bump, x);
        } else {
          return interpolate(m.xs, m.values, x);
        }
      },
      mean_);
}

SortedSample draw_regression(const RegressionModel& model, std::size_t n, Stream& stream) {
  if (n == 0) throw std::invalid_argument("draw_regression: n must be >= 1");
  std::vector<std::pair<double, double>> points(n);
  const double sd = model.noise_sd();
  for (auto& [x, y] : points) {
    x = stream.uniform();
    y = model.mean(x) + sd * stream.normal();
  }
  std::sort(points.begin(), points.end(),
            [](const auto& l, const auto& r) { return l.first < r.first; });
  std::vector<double> xs(n), ys(n);
  bool tied = false;
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = points[i].first;
    ys[i] = points[i].second;
    if (i > 0 && xs[i] == xs[i - 1]) tied = true;
  }
  if (tied) return SortedSample::from_unsorted(xs, ys);
  return SortedSample(std::move(xs), std::move(ys));
}

SortedSample draw_regression(const RegressionModel& model, std::size_t n, StreamKey key) {
  Stream stream(key);
  return draw_regression(model, n, stream);
}

TabulatedCdf::TabulatedCdf(std::vector<double> xs, std::vector<double> values)
    : xs_(std::move(xs)), values_(std::move(values)) {
  check_table(xs_, values_, "TabulatedCdf");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!(values_[i] >= 0.0 && values_[i] <= 1.0)) {
      throw std::invalid_argument("TabulatedCdf: values must lie in [0, 1]");
    }
    if (i > 0 && values_[i] < values_[i - 1]) {
      throw std::invalid_argument("TabulatedCdf: values must be nondecreasing");
    }
  }
  grid_.resize(kCdfGrid + 1);
  for (std::size_t k = 0; k <= kCdfGrid; ++k) {
    grid_[k] = interpolate(xs_, values_, static_cast<double>(k) / kCdfGrid);
  }
}

TabulatedCdf TabulatedCdf::uniform() { return TabulatedCdf({0.0, 1.0}, {0.0, 1.0}); }

TabulatedCdf TabulatedCdf::point_mass_at_zero() { return TabulatedCdf({0.0, 1.0}, {1.0, 1.0}); }

double TabulatedCdf::operator()(double t) const { return interpolate(xs_, values_, t); }

double TabulatedCdf::sample(Stream& stream) const {
  const double u = stream.uniform();
  if (u <= grid_.front()) return 0.0;
  const auto it = std::lower_bound(grid_.begin(), grid_.end(), u);
  if (it == grid_.end()) return 2.0;
  const std::size_t k = static_cast<std::size_t>(it - grid_.begin());
  const double lo = grid_[k - 1];
  const double frac = (u - lo) / (grid_[k] - lo);
  return (static_cast<double>(k - 1) + frac) / kCdfGrid;
}

CurrentStatusData draw_current_status(const CurrentStatusModel& model, std::size_t n, Stream& stream) {
  if (n == 0) throw std::invalid_argument("draw_current_status: n must be >= 1");
  CurrentStatusData data;
  data.times.resize(n);
  data.indicators.resize(n);
  data.failure_times.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    data.times[i] = std::min(model.exam.sample(stream), 1.0);
    data.failure_times[i] = model.failure.sample(stream);
    data.indicators[i] = data.failure_times[i] <= data.times[i] ? 1 : 0;
  }
  return data;
}

CurrentStatusData draw_current_status(const CurrentStatusModel& model, std::size_t n, StreamKey key) {
  Stream stream(key);
  return draw_current_status(model, n, stream);
}

SortedSample current_status_sample(const CurrentStatusData& data) {
  std::vector<double> ys(data.indicators.begin(), data.indicators.end());
  return SortedSample::from_unsorted(data.times, ys);
}

double KdeBump::operator()(double u) const noexcept {
  auto lobe = [](double v) {
    const double s = 1.0 / 16.0 - v * v;
    return s * s;
  };
  if (u < -1.0 || u > 1.0) return 0.0;
  if (u <= -0.5) return -amplitude * lobe(u + 0.75);
  if (u <= 0.0) return amplitude * lobe(u + 0.25);
  if (u <= 0.5) return amplitude * lobe(u - 0.25);
  return -amplitude * lobe(u - 0.75);
}

TabulatedDensity::TabulatedDensity(std::vector<double> xs, std::vector<double> values)
    : xs_(std::move(xs)), values_(std::move(values)), cdf_(TabulatedCdf::uniform()) {
  check_table(xs_, values_, "TabulatedDensity");
  double mass = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!(values_[i] >= 0.0)) throw std::invalid_argument("TabulatedDensity: negative density");
    if (i > 0) mass += 0.5 * (values_[i] + values_[i - 1]) * (xs_[i] - xs_[i - 1]);
  }
  if (std::abs(mass - 1.0) > 1e-8) throw std::invalid_argument("TabulatedDensity: must integrate to 1");
  // exact distribution function (piecewise quadratic) sampled on the inverse-CDF grid
  std::vector<double> grid_x(kCdfGrid + 1), grid_f(kCdfGrid + 1);
  std::vector<double> knot_mass(xs_.size(), 0.0);
  for (std::size_t i = 1; i < xs_.size(); ++i) {
    knot_mass[i] = knot_mass[i - 1] + 0.5 * (values_[i] + values_[i - 1]) * (xs_[i] - xs_[i - 1]);
  }
  for (std::size_t k = 0; k <= kCdfGrid; ++k) {
    const double t = static_cast<double>(k) / kCdfGrid;
    const auto it = std::upper_bound(xs_.begin(), xs_.end(), t);
    const std::size_t lo = std::min(static_cast<std::size_t>(it - xs_.begin()), xs_.size() - 1) - 1;
    const double d = t - xs_[lo];
    const double slope = (values_[lo + 1] - values_[lo]) / (xs_[lo + 1] - xs_[lo]);
    grid_x[k] = t;
    grid_f[k] = std::clamp(knot_mass[lo] + values_[lo] * d + 0.5 * slope * d * d, 0.0, 1.0);
  }
  for (std::size_t k = 1; k <= kCdfGrid; ++k) grid_f[k] = std::max(grid_f[k], grid_f[k - 1]);
  grid_f.back() = 1.0;
  cdf_ = TabulatedCdf(std::move(grid_x), std::move(grid_f));
}

TabulatedDensity TabulatedDensity::uniform() { return TabulatedDensity({0.0, 1.0}, {1.0, 1.0}); }

double TabulatedDensity::operator()(double t) const {
  if (t < 0.0 || t > 1.0) return 0.0;
  return interpolate(xs_, values_, t);
}

double TabulatedDensity::min_value() const noexcept {
  return *std::min_element(values_.begin(), values_.end());
}

double TabulatedDensity::sample(Stream& stream) const { return cdf_.sample(stream); }

double perturbed_density(const TabulatedDensity& f0, const KdeBump& bump, double t0, std::uint64_t n,
                         double t) {
  if (n == 0) throw std::invalid_argument("perturbed_density: n must be >= 1");
  const double scale = std::cbrt(static_cast<double>(n));
  const double value = f0(t) + bump(scale * (t - t0)) / scale;
  if (value < 0.0) throw std::domain_error("perturbed_density: negative density, bump amplitude too large");
  return value;
}

PerturbedDensitySampler::PerturbedDensitySampler(TabulatedDensity f0, KdeBump bump, double t0,
                                                 std::uint64_t n)
    : f0_(std::move(f0)), bump_(bump), t0_(t0), n_(n) {
  if (n_ == 0) throw std::invalid_argument("PerturbedDensitySampler: n must be >= 1");
  const double floor = f0_.min_value();
  const double lift = bump_.max_abs() / std::cbrt(static_cast<double>(n_));
  if (!(floor > 0.0)) throw std::invalid_argument("PerturbedDensitySampler: f0 must be positive");
  if (floor - lift < 0.0) {
    throw std::domain_error("PerturbedDensitySampler: negative density, bump amplitude too large");
  }
  envelope_ = 1.0 + lift / floor;
}

double PerturbedDensitySampler::density(double t) const {
  return perturbed_density(f0_, bump_, t0_, n_, t);
}

double PerturbedDensitySampler::draw(Stream& stream) const {
  for (;;) {
    const double x = f0_.sample(stream);
    const double u = stream.uniform();
    if (u * envelope_ * f0_(x) <= density(x)) return x;
  }
}

std::vector<double> PerturbedDensitySampler::draw(std::size_t count, Stream& stream) const {
  std::vector<double> out(count);
  for (double& x : out) x = draw(stream);
  return out;
}

}  // namespace isoconquer
