// Calendar dates as day serials plus a trading-calendar view.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ser {

// Days since 1970-01-01 (civil calendar). Comparable, hashable, cheap to copy.
struct Date {
  int32_t serial = 0;

  auto operator<=>(const Date&) const = default;

  static Date from_ymd(int year, int month, int day);
  static Date parse(const std::string& iso);  // "YYYY-MM-DD"
  std::string to_string() const;

  int year() const;
  int month() const;
  int day() const;
  int weekday() const;  // 0 = Sunday .. 6 = Saturday

  Date plus_days(int n) const { return Date{serial + n}; }
  bool is_weekday() const {
    int w = weekday();
    return w >= 1 && w <= 5;
  }
  // Monday of the ISO week containing this date.
  Date week_start() const;
  // 1..5 for Monday..Friday; 0 for weekend days.
  int weekday_slot() const;
};

// Sorted unique trading days with index lookups and day-shift arithmetic.
class TradingCalendar {
 public:
  TradingCalendar() = default;
  explicit TradingCalendar(std::vector<Date> days);

  const std::vector<Date>& days() const { return days_; }
  std::size_t size() const { return days_.size(); }
  bool contains(Date d) const;
  // Index of d, or -1 when absent.
  int index_of(Date d) const;
  // First trading day strictly after d plus (shift-1) further trading days.
  // Returns nullopt when the calendar runs out.
  std::optional<Date> shift_after(Date d, int shift) const;

 private:
  std::vector<Date> days_;
};

// Consecutive weekdays starting at `start` (weekends skipped).
std::vector<Date> make_weekday_calendar(Date start, int count);

}  // namespace ser
