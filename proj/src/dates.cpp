#include "ser/dates.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

namespace ser {

namespace {

// Howard Hinnant's civil-days algorithms.
int32_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const int era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                       static_cast<unsigned>(d) - 1u;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<int32_t>(doe) - 719468;
}

void civil_from_days(int32_t z, int& y, int& m, int& d) {
  z += 719468;
  const int era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const int yr = static_cast<int>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  y = yr + (m <= 2);
}

}  // namespace

Date Date::from_ymd(int year, int month, int day) { return Date{days_from_civil(year, month, day)}; }

Date Date::parse(const std::string& iso) {
  int y = 0, m = 0, d = 0;
  if (std::sscanf(iso.c_str(), "%d-%d-%d", &y, &m, &d) != 3 || m < 1 || m > 12 || d < 1 || d > 31)
    throw std::invalid_argument("bad date: " + iso);
  return from_ymd(y, m, d);
}

std::string Date::to_string() const {
  int y, m, d;
  civil_from_days(serial, y, m, d);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, d);
  return buf;
}

int Date::year() const {
  int y, m, d;
  civil_from_days(serial, y, m, d);
  return y;
}

int Date::month() const {
  int y, m, d;
  civil_from_days(serial, y, m, d);
  return m;
}

int Date::day() const {
  int y, m, d;
  civil_from_days(serial, y, m, d);
  return d;
}

int Date::weekday() const {
  // 1970-01-01 was a Thursday.
  int w = static_cast<int>((serial % 7 + 7 + 4) % 7);
  return w;
}

Date Date::week_start() const {
  int w = weekday();
  int back = (w == 0) ? 6 : w - 1;
  return plus_days(-back);
}

int Date::weekday_slot() const {
  int w = weekday();
  return (w >= 1 && w <= 5) ? w : 0;
}

TradingCalendar::TradingCalendar(std::vector<Date> days) : days_(std::move(days)) {
  std::sort(days_.begin(), days_.end());
  days_.erase(std::unique(days_.begin(), days_.end()), days_.end());
}

bool TradingCalendar::contains(Date d) const { return index_of(d) >= 0; }

int TradingCalendar::index_of(Date d) const {
  auto it = std::lower_bound(days_.begin(), days_.end(), d);
  if (it == days_.end() || *it != d) return -1;
  return static_cast<int>(it - days_.begin());
}

std::optional<Date> TradingCalendar::shift_after(Date d, int shift) const {
  auto it = std::upper_bound(days_.begin(), days_.end(), d);
  std::size_t idx = static_cast<std::size_t>(it - days_.begin()) + static_cast<std::size_t>(shift - 1);
  if (shift < 1 || idx >= days_.size()) return std::nullopt;
  return days_[idx];
}

std::vector<Date> make_weekday_calendar(Date start, int count) {
  std::vector<Date> out;
  out.reserve(static_cast<std::size_t>(count));
  Date d = start;
  while (static_cast<int>(out.size()) < count) {
    if (d.is_weekday()) out.push_back(d);
    d = d.plus_days(1);
  }
  return out;
}

}  // namespace ser
