#include "doctest.h"
#include "ser/dates.hpp"
#include "ser/rng.hpp"
#include "ser/util.hpp"

#include <cmath>
#include <string>
#include <vector>

using namespace ser;

TEST_CASE("percent decoding") {
  CHECK(percent_decode("Donald_Trump") == "Donald_Trump");
  CHECK(percent_decode("Macy%27s") == "Macy's");
  CHECK(percent_decode("a%2Fb") == "a/b");
  CHECK(percent_decode("bad%zz") == "bad%zz");  // invalid escape kept verbatim
}

TEST_CASE("url validation and final segment") {
  CHECK(is_valid_url("http://dbpedia.org/resource/Donald_Trump"));
  CHECK(is_valid_url("https://example.com/a/b"));
  CHECK_FALSE(is_valid_url("ftp://example.com/x"));
  CHECK_FALSE(is_valid_url("http://"));
  CHECK_FALSE(is_valid_url("not a url"));

  CHECK(url_final_segment("http://dbpedia.org/resource/Donald_Trump") == "Donald_Trump");
  CHECK(url_final_segment("http://dbpedia.org/resource/Macy%27s") == "Macy's");
  CHECK(url_final_segment("http://dbpedia.org/resource/A/B") == "B");
  CHECK(url_final_segment("http://dbpedia.org/resource/X?lang=en") == "X");
  CHECK_FALSE(url_final_segment("http://dbpedia.org").has_value());
  CHECK_FALSE(url_final_segment("http://dbpedia.org/resource/").has_value());
  CHECK_FALSE(url_final_segment("nonsense").has_value());
}

TEST_CASE("sha256 known vectors") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("The quick brown fox jumps over the lazy dog") ==
        "d7a8fbb307d7809469ca9abcb0082e4f8d5651e46d3cdb762d02d0bf37c9e592");
}

TEST_CASE("string helpers") {
  CHECK(trim("  a b  ") == "a b");
  CHECK(to_lower("AbC") == "abc");
  CHECK(collapse_whitespace("  President   Trump \t x ") == "President Trump x");
  CHECK(strip_punctuation("a,b.c!") == "abc");
  CHECK(tokenize("The Fed, raised rates.") ==
        std::vector<std::string>{"the", "fed", "raised", "rates"});
  CHECK(tokenize_alpha("Vaccine 19 ok approved", 3) ==
        std::vector<std::string>{"vaccine", "approved"});
}

TEST_CASE("format_double round-trips") {
  for (double v : {0.0, 1.0, -0.25, 0.1, 3.141592653589793, 1e-17, -1234.5678e9}) {
    std::string s = format_double(v);
    CHECK(std::stod(s) == v);
  }
}

TEST_CASE("date arithmetic") {
  Date d = Date::parse("2017-04-20");
  CHECK(d.to_string() == "2017-04-20");
  CHECK(d.year() == 2017);
  CHECK(d.weekday() == 4);  // Thursday
  CHECK(Date::from_ymd(1970, 1, 1).serial == 0);
  CHECK(Date::from_ymd(1970, 1, 1).weekday() == 4);

  // Friday news -> Monday shock via trading calendar
  std::vector<Date> days = make_weekday_calendar(Date::from_ymd(2020, 1, 6), 10);
  TradingCalendar cal(days);
  Date friday = Date::from_ymd(2020, 1, 10);
  REQUIRE(cal.contains(friday));
  auto monday = cal.shift_after(friday, 1);
  REQUIRE(monday.has_value());
  CHECK(monday->to_string() == "2020-01-13");

  CHECK(Date::from_ymd(2020, 1, 8).week_start() == Date::from_ymd(2020, 1, 6));
  CHECK(Date::from_ymd(2020, 1, 12).week_start() == Date::from_ymd(2020, 1, 6));  // Sunday
  CHECK(Date::from_ymd(2020, 1, 8).weekday_slot() == 3);
}

TEST_CASE("rng determinism and seed streams") {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  CHECK(derive_seed(1, "x") != derive_seed(1, "y"));
  CHECK(derive_seed(1, "x") != derive_seed(2, "x"));
  CHECK(derive_seed(1, "x") == derive_seed(1, "x"));

  Rng c(7);
  double mean = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) mean += c.normal();
  mean /= n;
  CHECK(std::abs(mean) < 0.03);

  Rng d(9);
  for (int i = 0; i < 1000; ++i) CHECK(d.uniform_index(7) < 7);
}
