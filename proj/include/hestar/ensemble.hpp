#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace hestar {

using Vec3 = std::array<double, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) {
    return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}
inline Vec3 operator-(const Vec3& a, const Vec3& b) {
    return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}
inline Vec3 operator*(double s, const Vec3& v) { return {s * v[0], s * v[1], s * v[2]}; }
inline double dot(const Vec3& a, const Vec3& b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
double norm(const Vec3& v);

// Phase-space sample set carried through every cooling stage.  The samples
// are representatives; atom_count is the macroscopic number they stand for.
struct Ensemble {
    std::vector<Vec3> positions;   // m
    std::vector<Vec3> velocities;  // m/s
    double atom_count = 0.0;       // macroscopic N

    std::size_t size() const { return velocities.size(); }

    // One row per atom: x,y,z,vx,vy,vz in SI.
    void write_csv(const std::string& path) const;
};

}  // namespace hestar
