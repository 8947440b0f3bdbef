#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <string_view>

#include "qrsim/errors.hpp"

namespace qrsim {

enum class Side { LV, RV };

inline std::string_view to_string(Side s) { return s == Side::LV ? "LV" : "RV"; }

inline Side parse_side(std::string_view s) {
    if (s == "LV") return Side::LV;
    if (s == "RV") return Side::RV;
    throw ParseError("unknown chamber label '" + std::string(s) + "'");
}

// Consistent biventricular coordinates.
//   tm: 0 at the epicardium, 1 at the endocardium
//   ab: 0 at the apex, 1 at the base
//   rt: circular in [0,1), 0 at the posterior LV/RV junction, increasing
//       counterclockwise viewed from the base
struct CobivecoCoord {
    double tm = 0.0;
    double ab = 0.0;
    double rt = 0.0;
    Side side = Side::LV;

    friend bool operator==(const CobivecoCoord&, const CobivecoCoord&) = default;
};

/// Shortest distance on the unit circle.
inline double rt_distance(double a, double b) {
    double d = std::fabs(a - b);
    d = std::fmod(d, 1.0);
    return std::min(d, 1.0 - d);
}

/// Signed wrapped difference a - b in [-0.5, 0.5).
inline double rt_difference(double a, double b) {
    double d = std::fmod(a - b, 1.0);
    if (d >= 0.5) d -= 1.0;
    if (d < -0.5) d += 1.0;
    return d;
}

inline double wrap_rt(double rt) {
    double w = std::fmod(rt, 1.0);
    if (w < 0.0) w += 1.0;
    if (w >= 1.0) w = 0.0; // fmod of values just below 0 can round to 1
    return w;
}

inline bool is_valid(const CobivecoCoord& c) {
    return c.tm >= 0.0 && c.tm <= 1.0 && c.ab >= 0.0 && c.ab <= 1.0 && c.rt >= 0.0 && c.rt < 1.0;
}

inline void validate(const CobivecoCoord& c, const std::string& where) {
    if (!(c.tm >= 0.0 && c.tm <= 1.0))
        throw ValidationError(where + ": tm=" + std::to_string(c.tm) + " outside [0,1]");
    if (!(c.ab >= 0.0 && c.ab <= 1.0))
        throw ValidationError(where + ": ab=" + std::to_string(c.ab) + " outside [0,1]");
    if (!(c.rt >= 0.0 && c.rt < 1.0))
        throw ValidationError(where + ": rt=" + std::to_string(c.rt) + " outside [0,1)");
}

/// Circular mean of rt values; falls back to the first value when the
/// resultant vanishes.
inline double circular_mean_rt(std::span<const double> rts) {
    double cs = 0.0, sn = 0.0;
    for (double r : rts) {
        cs += std::cos(2.0 * std::numbers::pi * r);
        sn += std::sin(2.0 * std::numbers::pi * r);
    }
    if (std::hypot(cs, sn) < 1e-12) return rts.empty() ? 0.0 : rts.front();
    return wrap_rt(std::atan2(sn, cs) / (2.0 * std::numbers::pi));
}

} // namespace qrsim
