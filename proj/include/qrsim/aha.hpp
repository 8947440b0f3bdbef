#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "qrsim/coords.hpp"
#include "qrsim/errors.hpp"

namespace qrsim {

struct AhaSegmentId {
    int id = 17;
    friend bool operator==(const AhaSegmentId&, const AhaSegmentId&) = default;
};

// AHA 17-segment lookup on the LV chart.
//
// Rings along ab (a boundary value goes to the ring with lower ids):
//   ab < 0.1          apex cap (17)
//   0.1 <= ab < 0.4   apical ring (13-16)
//   0.4 <= ab < 0.7   mid ring (7-12)
//   0.7 <= ab         basal ring (1-6)
// Sectors along rt, listed as [start, end) in rt order. A point exactly on a
// sector boundary goes to the lower id of the two adjacent sectors.
namespace aha {

inline constexpr double apex_cap = 0.1;
inline constexpr double apical_mid = 0.4;
inline constexpr double mid_basal = 0.7;

// Basal/mid: 6 sectors of width 1/6 starting at the posterior junction.
inline constexpr std::array<int, 6> basal_sectors{4, 5, 6, 1, 2, 3};
// Apical: 4 sectors of width 1/4, starting at 1/6 + 1/24 so the septal
// sector (14) is centred on the septal midline rt = 5/6.
inline constexpr double apical_start = 5.0 / 24.0;
inline constexpr std::array<int, 4> apical_sectors{16, 13, 14, 15};

inline constexpr double boundary_tolerance = 1e-12;

inline int ring_lookup(double rt, double start, double width, const int* ids, int count) {
    for (int k = 0; k < count; ++k)
        if (rt_distance(rt, start + k * width) <= boundary_tolerance)
            return std::min(ids[k], ids[(k + count - 1) % count]);
    int k = static_cast<int>(std::floor(wrap_rt(rt - start) / width));
    return ids[std::clamp(k, 0, count - 1)];
}

} // namespace aha

inline AhaSegmentId aha_segment(const CobivecoCoord& c) {
    if (c.side != Side::LV) throw UnsupportedChamberError("AHA segments are defined on the LV only");
    validate(c, "aha_segment");
    if (c.ab < aha::apex_cap) return {17};
    if (c.ab < aha::apical_mid)
        return {aha::ring_lookup(c.rt, aha::apical_start, 0.25, aha::apical_sectors.data(), 4)};
    const int basal = aha::ring_lookup(c.rt, 0.0, 1.0 / 6.0, aha::basal_sectors.data(), 6);
    return {c.ab < aha::mid_basal ? basal + 6 : basal};
}

} // namespace qrsim
