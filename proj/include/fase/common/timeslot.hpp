#pragma once

#include <chrono>
#include <cstdio>
#include <string>
#include <string_view>

#include "fase/common/error.hpp"

namespace fase {

inline constexpr int kSlotsPerDay = 48;
inline constexpr double kSlotHours = 0.5;
inline constexpr double kSlotSeconds = 1800.0;

/// Maps slot indices on the 30-minute grid to ISO-8601 timestamps.
class SlotClock {
public:
  explicit SlotClock(int year = 2023) : epoch_{std::chrono::year{year} / 1 / 1} {}

  std::string timestamp(long slot) const {
    using namespace std::chrono;
    const long day = slot >= 0 ? slot / kSlotsPerDay : (slot - kSlotsPerDay + 1) / kSlotsPerDay;
    const long in_day = slot - day * kSlotsPerDay;
    const year_month_day ymd{epoch_ + days{day}};
    char buf[48];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(in_day / 2), static_cast<int>(in_day % 2) * 30);
    return buf;
  }

  long slot(std::string_view ts) const {
    int y = 0, hh = 0, mm = 0;
    unsigned mo = 0, d = 0;
    const std::string s{ts};
    if (std::sscanf(s.c_str(), "%d-%u-%uT%d:%d", &y, &mo, &d, &hh, &mm) != 5 || mm % 30 != 0)
      throw SchemaError("malformed timestamp '" + s + "' (expected YYYY-MM-DDTHH:MM on the 30-minute grid)");
    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{mo}, day{d}};
    if (!ymd.ok())
      throw SchemaError("invalid calendar date in timestamp '" + s + "'");
    const long days_since = (sys_days{ymd} - epoch_).count();
    return days_since * kSlotsPerDay + hh * 2 + mm / 30;
  }

  /// 0 = Monday.
  int day_of_week(long slot) const {
    using namespace std::chrono;
    const long day = slot / kSlotsPerDay;
    const weekday wd{epoch_ + days{day}};
    return static_cast<int>((wd.c_encoding() + 6) % 7);
  }

private:
  std::chrono::sys_days epoch_;
};

inline int slot_of_day(long slot) { return static_cast<int>(slot % kSlotsPerDay); }

} // namespace fase
