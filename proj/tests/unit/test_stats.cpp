#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "psyosr/csv.hpp"
#include "psyosr/error.hpp"
#include "psyosr/stats.hpp"
#include "support/oracles.hpp"

using namespace psyosr;

TEST(Quantile, TypeSevenReferenceValues) {
  const std::vector<double> v{7, 1, 3, 5};
  // Sorted {1,3,5,7}: h = (n-1)p.
  EXPECT_DOUBLE_EQ(stats::quantile(v, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(stats::quantile(v, 1.0), 7.0);
  EXPECT_DOUBLE_EQ(stats::quantile(v, 0.5), 4.0);
  EXPECT_DOUBLE_EQ(stats::quantile(v, 0.25), 2.5);
  EXPECT_DOUBLE_EQ(stats::quantile(std::vector<double>{4.0}, 0.3), 4.0);
  EXPECT_THROW(stats::quantile(std::vector<double>{}, 0.5), Error);
  const std::vector<double> ps{0.25, 0.5};
  EXPECT_EQ(stats::quantiles(v, ps), (std::vector<double>{2.5, 4.0}));
}

TEST(Median, MatchesSortOracle) {
  std::mt19937 rng(6);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int n = 1; n < 40; ++n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = u(rng);
    EXPECT_EQ(stats::median(v), oracle::sorted_median(v));
  }
}

TEST(Moments, MeanStddevStandardError) {
  const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
  EXPECT_DOUBLE_EQ(stats::mean(v), 5.0);
  EXPECT_NEAR(stats::sample_stddev(v), std::sqrt(32.0 / 7.0), 1e-12);
  EXPECT_NEAR(stats::standard_error(v), std::sqrt(32.0 / 7.0) / std::sqrt(8.0), 1e-12);
  EXPECT_EQ(stats::sample_stddev(std::vector<double>{3.0}), 0.0);
}

TEST(Csv, QuotingAndBom) {
  std::istringstream in("\xEF\xBB\xBF" "a,b\n\"x, y\",\"he said \"\"hi\"\"\"\r\n3,\n");
  const auto t = csv::read(in);
  EXPECT_EQ(t.header, (csv::Row{"a", "b"}));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0], (csv::Row{"x, y", "he said \"hi\""}));
  EXPECT_EQ(t.rows[1], (csv::Row{"3", ""}));
  EXPECT_EQ(t.column("b"), 1u);
  EXPECT_THROW(t.column("c"), Error);

  std::ostringstream out;
  csv::write_row(out, {"plain", "with,comma", "q\"uote"});
  EXPECT_EQ(out.str(), "plain,\"with,comma\",\"q\"\"uote\"\n");
}

TEST(Csv, NumberFormatting) {
  EXPECT_EQ(csv::format_double(0.1), "0.1");
  EXPECT_EQ(csv::format_double(2.0), "2");
  const double third = 1.0 / 3.0;
  EXPECT_EQ(csv::parse_double(csv::format_double(third), "x"), third);
  EXPECT_THROW(csv::parse_double("1.5x", "x"), Error);
  EXPECT_THROW(csv::parse_int("", "x"), Error);
  EXPECT_TRUE(csv::parse_bool("true", "x"));
  EXPECT_FALSE(csv::parse_bool("0", "x"));
  EXPECT_THROW(csv::parse_bool("yes", "x"), Error);
}

TEST(ErrorKinds, SnakeCaseNames) {
  EXPECT_EQ(to_string(ErrorKind::kDegenerateBinning), "degenerate_binning");
  EXPECT_EQ(to_string(ErrorKind::kNotFound), "not_found");
  const Error e(ErrorKind::kSequencing, "boom");
  EXPECT_EQ(e.kind(), ErrorKind::kSequencing);
  EXPECT_STREQ(e.what(), "boom");
}
