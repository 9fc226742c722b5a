#pragma once

#include <array>
#include <string_view>

namespace fibersense {

// Event classes in model order.
inline constexpr std::string_view kAcoustic = "acoustic";
inline constexpr std::string_view kWind = "wind";
inline constexpr std::string_view kVehicle = "vehicle";

inline constexpr std::array<std::string_view, 3> kEventClasses{kAcoustic, kWind, kVehicle};

}  // namespace fibersense
