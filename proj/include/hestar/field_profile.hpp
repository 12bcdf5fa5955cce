#pragma once

#include <functional>
#include <vector>

namespace hestar::slower {

enum class Interpolation { linear, cubic };

// On-axis magnetic field B(x) with derivative access.  x increases along the
// atom's travel direction, x = 0 at the slower entrance.  Outside the sampled
// range the field clamps to the edge value (derivative 0).
//
// Profiles built from a closed form (designed target fields, synthesized coil
// fields) carry exact value/derivative closures; queries use those when
// present and fall back to the sampled interpolant otherwise.
class FieldProfile {
  public:
    FieldProfile() = default;
    FieldProfile(std::vector<double> x, std::vector<double> b,
                 Interpolation interp = Interpolation::linear);

    static FieldProfile from_closures(std::function<double(double)> value,
                                      std::function<double(double)> derivative,
                                      std::vector<double> sample_grid);

    double value(double x) const;
    double derivative(double x) const;

    const std::vector<double>& x_samples() const { return x_; }
    const std::vector<double>& b_samples() const { return b_; }
    double x_min() const { return x_.front(); }
    double x_max() const { return x_.back(); }
    bool analytic() const { return static_cast<bool>(value_fn_); }

    // Dense resample dropping the closures; used by hot loops.
    FieldProfile resampled(std::size_t n) const;

    // Span [start, end] over which the profile is meant to decelerate
    // resonant atoms; set by the design routines, 0/0 when unknown.
    double decel_span_start = 0.0;
    double decel_span_end = 0.0;

  private:
    std::size_t segment(double x) const;
    void check() const;

    std::vector<double> x_;
    std::vector<double> b_;
    std::vector<double> slope_;  // cubic: nodal slopes (finite differences)
    Interpolation interp_ = Interpolation::linear;
    std::function<double(double)> value_fn_;
    std::function<double(double)> deriv_fn_;
};

}  // namespace hestar::slower
