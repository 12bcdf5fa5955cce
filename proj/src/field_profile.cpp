#include "hestar/field_profile.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hestar::slower {

FieldProfile::FieldProfile(std::vector<double> x, std::vector<double> b, Interpolation interp)
    : x_(std::move(x)), b_(std::move(b)), interp_(interp) {
    check();
    if (interp_ == Interpolation::cubic && x_.size() >= 2) {
        // Nodal slopes from centered differences (Hermite interpolation).
        const std::size_t n = x_.size();
        slope_.resize(n);
        slope_.front() = (b_[1] - b_[0]) / (x_[1] - x_[0]);
        slope_.back() = (b_[n - 1] - b_[n - 2]) / (x_[n - 1] - x_[n - 2]);
        for (std::size_t i = 1; i + 1 < n; ++i)
            slope_[i] = (b_[i + 1] - b_[i - 1]) / (x_[i + 1] - x_[i - 1]);
    }
}

FieldProfile FieldProfile::from_closures(std::function<double(double)> value,
                                         std::function<double(double)> derivative,
                                         std::vector<double> sample_grid) {
    std::vector<double> b(sample_grid.size());
    for (std::size_t i = 0; i < sample_grid.size(); ++i) b[i] = value(sample_grid[i]);
    FieldProfile p(std::move(sample_grid), std::move(b));
    p.value_fn_ = std::move(value);
    p.deriv_fn_ = std::move(derivative);
    return p;
}

void FieldProfile::check() const {
    if (x_.size() < 2 || x_.size() != b_.size())
        throw std::invalid_argument("FieldProfile: need >= 2 matching samples");
    for (std::size_t i = 1; i < x_.size(); ++i)
        if (!(x_[i] > x_[i - 1]))
            throw std::invalid_argument("FieldProfile: grid must be strictly increasing");
    for (double v : b_)
        if (!std::isfinite(v)) throw std::invalid_argument("FieldProfile: field must be finite");
}

std::size_t FieldProfile::segment(double x) const {
    const auto it = std::upper_bound(x_.begin(), x_.end(), x);
    const std::size_t i = std::size_t(it - x_.begin());
    if (i == 0) return 0;
    if (i >= x_.size()) return x_.size() - 2;
    return i - 1;
}

double FieldProfile::value(double x) const {
    if (value_fn_) return value_fn_(x);
    if (x <= x_.front()) return b_.front();
    if (x >= x_.back()) return b_.back();
    const std::size_t i = segment(x);
    const double h = x_[i + 1] - x_[i];
    const double t = (x - x_[i]) / h;
    if (interp_ == Interpolation::linear) return b_[i] + t * (b_[i + 1] - b_[i]);
    // Cubic Hermite.
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * b_[i] + (t3 - 2 * t2 + t) * h * slope_[i] +
           (-2 * t3 + 3 * t2) * b_[i + 1] + (t3 - t2) * h * slope_[i + 1];
}

double FieldProfile::derivative(double x) const {
    if (deriv_fn_) return deriv_fn_(x);
    if (x < x_.front() || x > x_.back()) return 0.0;
    const std::size_t i = segment(x);
    const double h = x_[i + 1] - x_[i];
    const double t = (x - x_[i]) / h;
    if (interp_ == Interpolation::linear) return (b_[i + 1] - b_[i]) / h;
    const double t2 = t * t;
    return ((6 * t2 - 6 * t) * b_[i] + (3 * t2 - 4 * t + 1) * h * slope_[i] +
            (-6 * t2 + 6 * t) * b_[i + 1] + (3 * t2 - 2 * t) * h * slope_[i + 1]) /
           h;
}

FieldProfile FieldProfile::resampled(std::size_t n) const {
    if (n < 2) throw std::invalid_argument("FieldProfile::resampled: n must be >= 2");
    std::vector<double> xs(n), bs(n);
    const double x0 = x_min(), x1 = x_max();
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = x0 + (x1 - x0) * double(i) / double(n - 1);
        bs[i] = value(xs[i]);
    }
    FieldProfile p(std::move(xs), std::move(bs));
    p.decel_span_start = decel_span_start;
    p.decel_span_end = decel_span_end;
    return p;
}

}  // namespace hestar::slower
